#include "cslt/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cslt/errors.hpp"
#include "cslt/text.hpp"

namespace cslt {

void MeanPoolReducer::reduce(const double* frames, int window, int feature_dim,
                             double* out) const {
  for (int j = 0; j < feature_dim; ++j) out[j] = 0.0;
  for (int t = 0; t < window; ++t) {
    const double* row = frames + static_cast<std::size_t>(t) * feature_dim;
    for (int j = 0; j < feature_dim; ++j) out[j] += row[j];
  }
  for (int j = 0; j < feature_dim; ++j) out[j] /= window;
}

ClassProbReducer::ClassProbReducer(std::vector<double> weight, std::vector<double> bias,
                                   int feature_dim, int classes)
    : weight_(std::move(weight)), bias_(std::move(bias)), feature_dim_(feature_dim),
      classes_(classes) {
  if (weight_.size() != static_cast<std::size_t>(feature_dim) * classes) {
    throw ShapeError(concat("class head weight size ", weight_.size(), " vs ", feature_dim, "x",
                            classes));
  }
  if (bias_.size() != static_cast<std::size_t>(classes)) {
    throw ShapeError(concat("class head bias size ", bias_.size(), " vs ", classes));
  }
}

int ClassProbReducer::output_dim(int feature_dim) const {
  if (feature_dim != feature_dim_) {
    throw ShapeError(concat("class head expects feature dim ", feature_dim_, ", got ",
                            feature_dim));
  }
  return classes_;
}

void ClassProbReducer::reduce(const double* frames, int window, int feature_dim,
                              double* out) const {
  std::vector<double> pooled(feature_dim);
  MeanPoolReducer().reduce(frames, window, feature_dim, pooled.data());
  for (int c = 0; c < classes_; ++c) out[c] = bias_[c];
  for (int j = 0; j < feature_dim; ++j) {
    const double x = pooled[j];
    if (x == 0.0) continue;
    const double* wrow = weight_.data() + static_cast<std::size_t>(j) * classes_;
    for (int c = 0; c < classes_; ++c) out[c] += x * wrow[c];
  }
  double mx = out[0];
  for (int c = 1; c < classes_; ++c) mx = std::max(mx, out[c]);
  double denom = 0.0;
  for (int c = 0; c < classes_; ++c) {
    out[c] = std::exp(out[c] - mx);
    denom += out[c];
  }
  for (int c = 0; c < classes_; ++c) out[c] /= denom;
}

WindowedFeatures sign_embed(const FeatureSequence& seq, const WindowReducer& reducer, int window,
                            int stride) {
  if (window < 1 || stride < 1) {
    throw ConfigError(concat("sign_embed: window ", window, " / stride ", stride));
  }
  const int t = seq.num_frames();
  const int f = seq.feature_dim();
  if (t < window) {
    throw ValueError(concat("sequence too short: ", t, " frames < window ", window, " (video ",
                            seq.video_id, ")"));
  }
  const int w = window_count(t, window, stride);
  const int d = reducer.output_dim(f);
  Tensor out = Tensor::zeros({w, d});
  const double* frames = seq.frames.data().data();
  for (int i = 0; i < w; ++i) {
    reducer.reduce(frames + static_cast<std::size_t>(i) * stride * f, window, f,
                   out.data().data() + static_cast<std::size_t>(i) * d);
  }
  return {out, window, stride};
}

FeatureSequence read_fmat(const std::string& path, const std::string& video_id) {
  std::ifstream in(path);
  if (!in) throw IoError(concat("missing feature file: ", path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(concat(path, ": empty file"), 1);
  auto head = split_ws(line);
  if (head.size() != 2) throw ParseError(concat(path, ": header must be 'T F'"), 1);
  const long t = parse_long(head[0]);
  const long f = parse_long(head[1]);
  if (t < 1 || f < 1) throw ParseError(concat(path, ": non-positive dimensions"), 1);
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(t) * f);
  for (long i = 0; i < t; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError(concat(path, ": expected ", t, " frame rows, got ", i),
                       static_cast<int>(i + 1));
    }
    auto toks = split_ws(line);
    if (static_cast<long>(toks.size()) != f) {
      throw ParseError(concat(path, ": row has ", toks.size(), " values, want ", f),
                       static_cast<int>(i + 2));
    }
    for (auto& tok : toks) data.push_back(parse_double(tok));
  }
  FeatureSequence seq;
  seq.video_id = video_id;
  seq.frames = Tensor::from_data({static_cast<int>(t), static_cast<int>(f)}, std::move(data));
  seq.frames.check_finite("feature file");
  return seq;
}

void write_fmat(const std::string& path, const Tensor& frames) {
  if (frames.rank() != 2) {
    throw ShapeError(concat("write_fmat: frames must be rank-2, got ",
                            shape_str(frames.shape())));
  }
  std::ostringstream os;
  const int t = frames.dim(0), f = frames.dim(1);
  os << t << ' ' << f << '\n';
  const auto& d = frames.data();
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < f; ++j) {
      if (j) os << ' ';
      os << format_double(d[static_cast<std::size_t>(i) * f + j]);
    }
    os << '\n';
  }
  write_file(path, os.str());
}

}  // namespace cslt
