#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cslt/tensor.hpp"

namespace cslt {

// Per-frame feature sequence standing in for a sign video clip; produced
// offline by a video backbone and shipped as an fmat file.
struct FeatureSequence {
  std::string video_id;
  Tensor frames;  // [T, F], no gradient
  std::optional<double> fps;

  int num_frames() const { return frames.dim(0); }
  int feature_dim() const { return frames.dim(1); }
};

// Result of striding a window reducer over the frame sequence.
struct WindowedFeatures {
  Tensor windows;  // [W, D]
  int window_size = 0;
  int stride = 0;
};

// Reduces one window of frames [L, F] to a D-vector.
class WindowReducer {
 public:
  virtual ~WindowReducer() = default;
  virtual int output_dim(int feature_dim) const = 0;
  // frames points at L rows of width feature_dim.
  virtual void reduce(const double* frames, int window, int feature_dim, double* out) const = 0;
  virtual std::string name() const = 0;
};

// Default: per-component mean over the window (D = F).
class MeanPoolReducer : public WindowReducer {
 public:
  int output_dim(int feature_dim) const override { return feature_dim; }
  void reduce(const double* frames, int window, int feature_dim, double* out) const override;
  std::string name() const override { return "mean-pool"; }
};

// Class probabilities: softmax over a classifier head applied to the
// mean-pooled window (D = number of classes).
class ClassProbReducer : public WindowReducer {
 public:
  ClassProbReducer(std::vector<double> weight, std::vector<double> bias, int feature_dim,
                   int classes);
  int output_dim(int feature_dim) const override;
  void reduce(const double* frames, int window, int feature_dim, double* out) const override;
  std::string name() const override { return "class-prob"; }

 private:
  std::vector<double> weight_;  // [F, C] row-major
  std::vector<double> bias_;    // [C]
  int feature_dim_;
  int classes_;
};

inline int window_count(int frames, int window, int stride) {
  return (frames - window) / stride + 1;
}

// Slides the reducer over the sequence: window w covers frames
// [w*stride, w*stride + L). Throws when the clip is shorter than one window.
WindowedFeatures sign_embed(const FeatureSequence& seq, const WindowReducer& reducer,
                            int window = 16, int stride = 4);

// fmat text format: first line "T F", then T lines of F doubles separated
// by single spaces, written with shortest round-trip precision.
FeatureSequence read_fmat(const std::string& path, const std::string& video_id = "");
void write_fmat(const std::string& path, const Tensor& frames);

}  // namespace cslt
