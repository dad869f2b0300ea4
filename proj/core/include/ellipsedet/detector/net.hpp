#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ellipsedet/detector/tape.hpp"
#include "ellipsedet/encoding.hpp"
#include "ellipsedet/losses.hpp"
#include "ellipsedet/synth.hpp"

namespace ellipsedet {

/// Layer widths of the toy detector.
///
/// Five stride-2 encoder stages, an upsampling decoder with 1x1 lateral
/// connections back to stride 4, and one head group per predicted quantity:
/// a 3x3 conv + ReLU followed by a 1x1 projection.
struct NetConfig {
  std::array<int, 5> encoder{16, 32, 64, 64, 64};
  int neck = 64;
  int head = 64;
  int num_classes = kNumClasses;
  /// Length head output is multiplied by this, so raw activations stay O(1).
  double length_scale = 64.0;
  /// Initial square-length prediction in pixels (sets the head bias).
  double length_prior = 100.0;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

inline constexpr int kNetStride = 4;

template <typename T>
class ToyNet {
 public:
  using Node = typename nn::Tape<T>::Node;

  /// Output nodes of the six heads on a tape.
  struct Heads {
    Node heatmap;      // post-sigmoid
    Node offset;
    Node length;       // pixels
    Node delta_a;      // post-sigmoid
    Node delta_b;      // post-sigmoid
    Node delta_theta;  // raw
  };

  ToyNet(const NetConfig& config, std::uint64_t seed);

  [[nodiscard]] const NetConfig& config() const { return config_; }
  nn::ParameterStore<T>& params() { return params_; }
  [[nodiscard]] const nn::ParameterStore<T>& params() const { return params_; }

  /// Records one image on `tape`. Throws InvalidArgument unless both image
  /// dimensions are multiples of 4.
  Heads forward(nn::Tape<T>& tape, const Image& image) const;

  /// Converts head node values to prediction maps.
  EncodedTargets read_heads(const nn::Tape<T>& tape, const Heads& heads) const;

  /// Seeds head gradients and back-propagates; parameter gradients accumulate.
  void backward(nn::Tape<T>& tape, const Heads& heads, const HeadGradients& grads) const;

  /// Forward pass on a private tape.
  EncodedTargets predict(const Image& image) const;

 private:
  struct ConvIds {
    int weight = -1;
    int bias = -1;
    int kernel = 3;
    int stride = 1;
  };

  ConvIds add_conv(const std::string& name, int in_c, int out_c, int kernel, int stride);

  NetConfig config_;
  nn::ParameterStore<T> params_;
  std::array<ConvIds, 5> enc_{};
  std::array<ConvIds, 4> lateral_{};  // on encoder stages 2..5
  std::array<ConvIds, 3> dec_{};      // strides 16, 8, 4
  std::array<ConvIds, 5> head_hidden_{};
  ConvIds out_heatmap_, out_offset_, out_length_, out_delta_a_, out_delta_b_, out_delta_theta_;
};

extern template class ToyNet<float>;
extern template class ToyNet<double>;

/// Binary checkpoint: magic, version, JSON net config, then named float32 tensors.
template <typename T>
void save_checkpoint(const ToyNet<T>& net, const std::filesystem::path& path);

/// Throws DataError on a missing or malformed file.
template <typename T>
ToyNet<T> load_checkpoint(const std::filesystem::path& path);

/// Decoded detections for one image.
template <typename T>
std::vector<Detection> infer(const ToyNet<T>& net, const Image& image, double score_threshold = 0.3,
                             int max_per_class = 1);

}  // namespace ellipsedet
