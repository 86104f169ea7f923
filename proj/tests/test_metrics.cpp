#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "cslt/errors.hpp"
#include "cslt/metrics.hpp"
#include "cslt/rng.hpp"

using namespace cslt;

namespace {

std::vector<EvalPair> identical_corpus(int n) {
  std::vector<EvalPair> pairs;
  for (int i = 0; i < n; ++i) {
    pairs.push_back({"the quick brown fox jumps", "the quick brown fox jumps"});
  }
  return pairs;
}

// brute-force chrF oracle: direct n-gram maps per pair, pooled
double chrf_oracle(const std::vector<EvalPair>& pairs, int max_n, double beta) {
  auto strip = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c != ' ' && c != '\t' && c != '\n') out += c;
    }
    return out;
  };
  double prec_sum = 0, rec_sum = 0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    long match = 0, hyp_count = 0, ref_count = 0;
    for (const auto& p : pairs) {
      const std::string h = strip(p.hypothesis), r = strip(p.reference);
      std::map<std::string, long> hg, rg;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hg[h.substr(i, n)];
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++rg[r.substr(i, n)];
      for (const auto& [g, c] : hg) {
        hyp_count += c;
        auto it = rg.find(g);
        if (it != rg.end()) match += std::min(c, it->second);
      }
      for (const auto& [g, c] : rg) ref_count += c;
    }
    if (hyp_count == 0 && ref_count == 0) continue;
    ++orders;
    prec_sum += hyp_count > 0 ? static_cast<double>(match) / hyp_count : 0.0;
    rec_sum += ref_count > 0 ? static_cast<double>(match) / ref_count : 0.0;
  }
  if (orders == 0) return 0;
  const double p = prec_sum / orders, r = rec_sum / orders, b2 = beta * beta;
  if (p == 0 && r == 0) return 0;
  return 100.0 * (1 + b2) * p * r / (b2 * p + r);
}

}  // namespace

TEST_CASE("13a tokenization: lowercase, punctuation split, numbers kept whole") {
  CHECK(tokenize_13a("Hello, world!") ==
        std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(tokenize_13a("pi is 3.14") == std::vector<std::string>{"pi", "is", "3.14"});
  CHECK(tokenize_13a("end.") == std::vector<std::string>{"end", "."});
  CHECK(tokenize_13a("don't stop") == std::vector<std::string>{"don't", "stop"});
}

TEST_CASE("BLEU: identical pairs score exactly 100") {
  CHECK(bleu(identical_corpus(3), 4) == 100.0);
  CHECK(bleu(identical_corpus(1), 1) == 100.0);
}

TEST_CASE("BLEU: empty hypotheses score 0") {
  std::vector<EvalPair> pairs = {{"", "a reference"}, {"", "another one"}};
  CHECK(bleu(pairs, 4) == 0.0);
  CHECK(bleu(pairs, 1) == 0.0);
}

TEST_CASE("BLEU-1 hand computation: clipping and brevity penalty") {
  // p1 = clipped 1/4; ref shorter than hyp so BP = 1; BLEU-1 = 25
  std::vector<EvalPair> pairs = {{"the the the the", "the cat"}};
  CHECK(bleu(pairs, 1) == doctest::Approx(25.0).epsilon(1e-9));
}

TEST_CASE("BLEU: brevity penalty fires for short hypotheses") {
  // hyp 2 tokens, ref 4: BP = exp(1 - 4/2) = exp(-1); p1 = 1
  std::vector<EvalPair> pairs = {{"the cat", "the cat sat down"}};
  CHECK(bleu(pairs, 1) == doctest::Approx(100.0 * std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("BLEU-4 exponential smoothing of zero n-gram precisions") {
  // one shared unigram, no higher-order matches:
  // p1 = 1/2, p2 = 1/(2*1), p3 hyp has 0 trigrams -> den 0 -> score 0?
  // use a longer pair so all orders have denominators
  std::vector<EvalPair> pairs = {{"a x y z", "a b c d"}};
  // p1 = 1/4; p2: 0 matches of 3 -> 1/(2*3); p3: 0 of 2 -> 1/(4*2); p4: 0 of 1 -> 1/(8*1)
  const double expected =
      100.0 * std::exp((std::log(0.25) + std::log(1.0 / 6) + std::log(1.0 / 8) +
                        std::log(1.0 / 8)) /
                       4.0);
  CHECK(bleu(pairs, 4) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("BLEU: appending a correct pair keeps a perfect corpus at 100") {
  auto pairs = identical_corpus(4);
  pairs.push_back({"short one", "short one"});
  CHECK(bleu(pairs, 4) == 100.0);
}

TEST_CASE("BLEU-1 of a single correct token is 100 regardless of smoothing") {
  std::vector<EvalPair> pairs = {{"yes", "yes"}};
  CHECK(bleu(pairs, 1) == 100.0);
}

TEST_CASE("ROUGE-L: identical pair scores 100, disjoint scores 0") {
  CHECK(rouge_l_f1(identical_corpus(2)) == 100.0);
  std::vector<EvalPair> disjoint = {{"aa bb cc", "dd ee ff"}};
  CHECK(rouge_l_f1(disjoint) == 0.0);
}

TEST_CASE("ROUGE-L hand LCS computation") {
  // hyp "a b c d", ref "a c d": LCS 3, P = 3/4, R = 1, F1 = 6/7
  std::vector<EvalPair> pairs = {{"a b c d", "a c d"}};
  CHECK(rouge_l_f1(pairs) == doctest::Approx(600.0 / 7).epsilon(1e-9));
}

TEST_CASE("ROUGE-L averages over pairs") {
  std::vector<EvalPair> pairs = {{"a b c d", "a c d"}, {"same here", "same here"}};
  CHECK(rouge_l_f1(pairs) == doctest::Approx((600.0 / 7 + 100.0) / 2).epsilon(1e-9));
}

TEST_CASE("chrF: identical strings score 100, even short ones") {
  CHECK(chrf(identical_corpus(2)) == doctest::Approx(100.0).epsilon(1e-12));
  std::vector<EvalPair> shorty = {{"ab", "ab"}};
  CHECK(chrf(shorty) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("chrF: disjoint characters score 0") {
  std::vector<EvalPair> pairs = {{"aaa", "bbb"}};
  CHECK(chrf(pairs) == 0.0);
}

TEST_CASE("chrF matches the brute-force n-gram oracle") {
  std::vector<EvalPair> abc = {{"abc", "abd"}};
  CHECK(std::abs(chrf(abc) - chrf_oracle(abc, 6, 2.0)) <= 1e-9);

  std::vector<EvalPair> mixed = {{"the quick fox", "the quick brown fox"},
                                 {"hello there", "hello world"},
                                 {"abc", "abd"}};
  CHECK(std::abs(chrf(mixed) - chrf_oracle(mixed, 6, 2.0)) <= 1e-9);
}

TEST_CASE("all metrics stay inside [0, 100] and ignore pair order") {
  Rng rng = make_rng(71);
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<int> word(0, 9);
  std::vector<EvalPair> pairs;
  for (int i = 0; i < 20; ++i) {
    auto sentence = [&] {
      std::string s;
      for (int j = 0, n = len(rng); j < n; ++j) {
        if (j) s += ' ';
        s += static_cast<char>('a' + word(rng));
      }
      return s;
    };
    pairs.push_back({sentence(), sentence()});
  }
  for (double score : {bleu(pairs, 1), bleu(pairs, 4), rouge_l_f1(pairs), chrf(pairs)}) {
    CHECK(score >= 0.0);
    CHECK(score <= 100.0);
  }

  auto shuffled = pairs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(bleu(shuffled, 4) == doctest::Approx(bleu(pairs, 4)).epsilon(1e-12));
  CHECK(chrf(shuffled) == doctest::Approx(chrf(pairs)).epsilon(1e-12));
  CHECK(rouge_l_f1(shuffled) == doctest::Approx(rouge_l_f1(pairs)).epsilon(1e-12));
}

TEST_CASE("empty pair list is an argument error") {
  CHECK_THROWS_AS(bleu({}, 4), ValueError);
  CHECK_THROWS_AS(rouge_l_f1({}), ValueError);
  CHECK_THROWS_AS(chrf({}), ValueError);
}

TEST_CASE("metric report serialization carries the signature fields") {
  auto report = evaluate_pairs(identical_corpus(2));
  CHECK(report.bleu4 == 100.0);
  auto j = metric_report_to_json(report);
  CHECK(j.at("bleu4") == 100.0);
  CHECK(j.at("n_pairs") == 2);
  auto sig = metric_signature();
  CHECK(sig.contains("bleu"));
  CHECK(sig.contains("chrf"));
}
