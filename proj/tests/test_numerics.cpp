#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cslt/errors.hpp"
#include "cslt/gradcheck.hpp"
#include "cslt/ops.hpp"
#include "cslt/optim.hpp"
#include "cslt/rng.hpp"
#include "cslt/tensor.hpp"

using namespace cslt;

namespace {

constexpr int kPad = -1;  // sentinel outside the vocabulary: no padding

// independent scalar triple-loop oracle
std::vector<double> matmul_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                  int m, int k, int n) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int kk = 0; kk < k; ++kk)
        c[i * n + j] += a[i * k + kk] * b[kk * n + j];
  return c;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("linear_forward identity input") {
  Tensor x = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor w = Tensor::from_data({2, 2}, {2, 3, 4, 5});
  Tensor b = Tensor::from_data({2}, {0, 0});
  Tensor y = ops::linear_forward(x, w, b);
  CHECK(y.data() == std::vector<double>{2, 3, 4, 5});
}

TEST_CASE("linear_forward identity weight plus bias") {
  Tensor x = Tensor::from_data({1, 2}, {1, 2});
  Tensor w = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from_data({2}, {10, 20});
  Tensor y = ops::linear_forward(x, w, b);
  CHECK(y.data() == std::vector<double>{11, 22});
}

TEST_CASE("linear_forward matches triple-loop oracle exactly") {
  Rng rng = make_rng(42);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({4, 2}, rng);
  Tensor b = Tensor::zeros({2});
  Tensor y = ops::linear_forward(x, w, b);
  auto expect = matmul_oracle(x.data(), w.data(), 3, 4, 2);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y.data()[i] == expect[i]);
}

TEST_CASE("linear_forward shape mismatch names both shapes") {
  Tensor x = Tensor::zeros({2, 3});
  Tensor w = Tensor::zeros({4, 2});
  Tensor b = Tensor::zeros({2});
  CHECK_THROWS_WITH_AS(ops::linear_forward(x, w, b),
                       doctest::Contains("[2,3]"), ShapeError);
  try {
    ops::linear_forward(x, w, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[4,2]") != std::string::npos);
  }
}

TEST_CASE("matmul matches oracle") {
  Rng rng = make_rng(7);
  Tensor a = random_tensor({5, 3}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor c = ops::matmul(a, b);
  auto expect = matmul_oracle(a.data(), b.data(), 5, 3, 4);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(c.data()[i] == expect[i]);
}

TEST_CASE("layer_norm constant row maps to zeros") {
  Tensor x = Tensor::from_data({1, 4}, {0, 0, 0, 0});
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias = Tensor::zeros({4});
  Tensor y = ops::layer_norm(x, gain, bias);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("layer_norm symmetric two-point row") {
  Tensor x = Tensor::from_data({1, 2}, {1, -1});
  Tensor gain = Tensor::full({2}, 1.0);
  Tensor bias = Tensor::zeros({2});
  Tensor y = ops::layer_norm(x, gain, bias, 1e-5);
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y.at(0, 0) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(y.at(0, 1) == doctest::Approx(-expect).epsilon(1e-14));
}

TEST_CASE("layer_norm matches direct mean/variance oracle") {
  const double eps = 1e-5;
  std::vector<double> row = {1, 2, 3, 4};
  Tensor x = Tensor::from_data({1, 4}, row);
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias = Tensor::zeros({4});
  Tensor y = ops::layer_norm(x, gain, bias, eps);

  double mean = 0;
  for (double v : row) mean += v;
  mean /= 4;
  double var = 0;
  for (double v : row) var += (v - mean) * (v - mean);
  var /= 4;
  for (int j = 0; j < 4; ++j) {
    const double expect = (row[j] - mean) / std::sqrt(var + eps);
    CHECK(std::abs(y.at(0, j) - expect) <= 1e-12);
  }
}

TEST_CASE("layer_norm statistics property") {
  Rng rng = make_rng(3);
  Tensor x = random_tensor({6, 16}, rng);
  Tensor gain = Tensor::full({16}, 1.0);
  Tensor bias = Tensor::zeros({16});
  Tensor y = ops::layer_norm(x, gain, bias);
  for (int i = 0; i < 6; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 16; ++j) mean += y.at(i, j);
    mean /= 16;
    for (int j = 0; j < 16; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 16;
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(var - 1.0) <= 1e-4);  // off by var/(var+eps)
  }
}

TEST_CASE("empty normalized dimension is rejected") {
  CHECK_THROWS_AS(Tensor::zeros({1, 0}), ShapeError);
}

TEST_CASE("softmax uniform") {
  Tensor x = Tensor::from_data({1, 3}, {0, 0, 0});
  Tensor y = ops::softmax_rows(x);
  for (int j = 0; j < 3; ++j) CHECK(y.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("softmax large magnitude stability") {
  Tensor x = Tensor::from_data({1, 2}, {1000, 0});
  Tensor y = ops::softmax_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.at(0, 1) >= 0.0);
  CHECK(y.at(0, 1) <= 1e-300);
}

TEST_CASE("softmax against direct exp/sum oracle") {
  Tensor x = Tensor::from_data({1, 3}, {1, 2, 3});
  Tensor y = ops::softmax_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(0.09003057).epsilon(1e-7));
  CHECK(y.at(0, 1) == doctest::Approx(0.24472847).epsilon(1e-7));
  CHECK(y.at(0, 2) == doctest::Approx(0.66524096).epsilon(1e-7));
}

TEST_CASE("softmax rows sum to one within 1e-12, including magnitude 1e3") {
  Rng rng = make_rng(11);
  Tensor x = random_tensor({8, 12}, rng);
  for (auto& v : x.data()) v *= 1e3;
  Tensor y = ops::softmax_rows(x);
  for (int i = 0; i < 8; ++i) {
    double sum = 0;
    for (int j = 0; j < 12; ++j) {
      sum += y.at(i, j);
      CHECK(y.at(i, j) >= 0.0);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("masked softmax excludes masked entries; degenerate row throws") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  BoolMat mask(2, 3, true);
  mask.set(0, 2, false);
  Tensor y = ops::softmax_rows_masked(x, mask);
  CHECK(y.at(0, 2) == 0.0);
  CHECK(y.at(0, 0) + y.at(0, 1) == doctest::Approx(1.0).epsilon(1e-14));

  BoolMat dead(1, 2, false);
  Tensor z = Tensor::from_data({1, 2}, {1, 2});
  CHECK_THROWS_AS(ops::softmax_rows_masked(z, dead), ValueError);
}

TEST_CASE("cross entropy: uniform prediction gives ln V") {
  Tensor logits = Tensor::zeros({1, 4});
  Tensor loss = ops::cross_entropy_label_smoothed(logits, {2}, 0.0, kPad);
  CHECK(loss.value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy: confident correct prediction approaches zero") {
  Tensor logits = Tensor::from_data({1, 3}, {60, 0, 0});
  Tensor loss = ops::cross_entropy_label_smoothed(logits, {0}, 0.0, kPad);
  CHECK(loss.value() >= 0.0);
  CHECK(loss.value() <= 1e-12);
}

TEST_CASE("cross entropy: smoothing invariant at the uniform prediction") {
  Tensor logits = Tensor::zeros({1, 3});
  Tensor loss = ops::cross_entropy_label_smoothed(logits, {0}, 0.1, kPad);
  CHECK(loss.value() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy: pad positions excluded; all-pad is an error") {
  const int pad = 0;
  Tensor logits = Tensor::from_data({2, 3}, {0, 60, 0, 7, 7, 7});
  Tensor loss = ops::cross_entropy_label_smoothed(logits, {1, pad}, 0.0, pad);
  CHECK(loss.value() <= 1e-12);  // only the confident row counts
  CHECK_THROWS_AS(ops::cross_entropy_label_smoothed(logits, {pad, pad}, 0.0, pad), ValueError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParameterStore store;
  Tensor x = store.create("p", {3});
  x.data() = {1.0, -2.0, 0.5};
  Tensor loss = ops::dot_const(x, {0, 0, 0});
  loss.backward();
  adam_step(store, 1e-3);
  CHECK(x.data() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam: first-step magnitude is about lr for unit gradient") {
  ParameterStore store;
  Tensor x = store.create("p", {1});
  x.data() = {0.0};
  const double lr = 1e-3;
  Tensor loss = ops::dot_const(x, {1.0});  // d loss / dx = 1
  loss.backward();
  adam_step(store, lr);
  const double delta = std::abs(x.data()[0]);
  CHECK(delta > 0.99 * lr);
  CHECK(delta <= lr);
}

TEST_CASE("adam: two steps with constant gradient match a scalar oracle") {
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.7;

  // independent scalar reference
  double theta = 0.3, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }

  ParameterStore store;
  Tensor x = store.create("p", {1});
  x.data() = {0.3};
  for (int t = 0; t < 2; ++t) {
    Tensor loss = ops::dot_const(x, {g});
    loss.backward();
    adam_step(store, lr);
  }
  CHECK(std::abs(x.data()[0] - theta) <= 1e-12);
}

TEST_CASE("adam: lr = 0 is an identity on parameters") {
  ParameterStore store;
  Tensor x = store.create("p", {2});
  x.data() = {1.5, -0.25};
  Tensor loss = ops::dot_const(x, {2.0, -1.0});
  loss.backward();
  adam_step(store, 0.0);
  CHECK(x.data() == std::vector<double>{1.5, -0.25});
}

TEST_CASE("adam: missing gradient names the parameter") {
  ParameterStore store;
  store.create("encoder.video.w", {2});
  CHECK_THROWS_WITH_AS(adam_step(store, 1e-3), doctest::Contains("encoder.video.w"),
                       ValueError);
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  ParameterStore store;
  Tensor x = store.create("p", {3});
  x.data() = {0.3, -1.2, 2.0};

  auto f = [&] { return ops::sum_all(ops::mul(x, x)); };
  auto g = [&] { return ops::dot_const(x, {1, 2, 3}); };

  Tensor combined = ops::add(f(), g());
  combined.backward();
  std::vector<double> grad_combined = x.grad();
  store.zero_grad();

  f().backward();
  g().backward();  // accumulates
  for (int i = 0; i < 3; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(grad_combined[i]).epsilon(1e-15));
  }
}

TEST_CASE("gradient_check: quadratic") {
  ParameterStore store;
  Tensor x = store.create("x", {3});
  x.data() = {1.0, -2.0, 3.0};
  auto result = gradient_check([&] { return ops::sum_all(ops::mul(x, x)); }, store);
  CHECK(result.max_rel_error <= 1e-8);
}

TEST_CASE("gradient_check: cross entropy over 2x3 logits") {
  ParameterStore store;
  Tensor logits = store.create("logits", {2, 3});
  logits.data() = {0.5, -1.0, 2.0, 0.1, 0.2, -0.3};
  auto result = gradient_check(
      [&] {
        return ops::cross_entropy_label_smoothed(logits, {2, 0}, 0.1, kPad);
      },
      store);
  CHECK(result.max_rel_error <= 1e-6);
}

TEST_CASE("gradient_check: composite ops at small dimensions") {
  Rng rng = make_rng(5);
  ParameterStore store;
  Tensor x = store.create("x", {4, 6});
  Tensor w = store.create("w", {6, 6});
  Tensor b = store.create("b", {6});
  Tensor gain = store.create("gain", {6});
  Tensor bias = store.create("bias", {6});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto* t : {&x, &w}) {
    for (auto& v : t->data()) v = dist(rng);
  }
  std::fill(gain.data().begin(), gain.data().end(), 1.0);
  std::vector<double> weights(24);
  for (auto& v : weights) v = dist(rng);

  auto f = [&] {
    Tensor h = ops::layer_norm(ops::linear_forward(x, w, b), gain, bias);
    Tensor s = ops::softmax_rows(h);
    return ops::dot_const(ops::relu(s), weights);
  };
  auto result = gradient_check(f, store);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("non-finite forward values are detected") {
  Tensor a = Tensor::from_data({2}, {1.0, 1e308});
  Tensor b = Tensor::from_data({2}, {1.0, 1e308});
  CHECK_THROWS_AS(ops::add(a, b), ValueError);
}
