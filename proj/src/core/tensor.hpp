#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace seufi {

enum class ActivationKind { ReLU, Sigmoid, HardSigmoid };
enum class Padding { Same, Valid };

const char* to_string(ActivationKind k);
ActivationKind activation_from_string(const std::string& s);

// Dense fp32 tensor. Activations are laid out H x W x C, convolution kernels
// Kh x Kw x Cin x Cout, both row-major.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  static Tensor zeros(std::vector<int> s);

  long long count() const {
    long long n = 1;
    for (int e : shape) n *= e;
    return n;
  }

  int dim(size_t i) const { return shape[i]; }

  float& at3(int h, int w, int c) { return data[(static_cast<size_t>(h) * shape[1] + w) * shape[2] + c]; }
  float at3(int h, int w, int c) const { return data[(static_cast<size_t>(h) * shape[1] + w) * shape[2] + c]; }

  float& at4(int a, int b, int c, int d) {
    return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  float at4(int a, int b, int c, int d) const {
    return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
};

std::string shape_to_string(const std::vector<int>& shape);

// Per-pixel class indices produced by argmax over channels.
struct ClassMap {
  int h = 0;
  int w = 0;
  int classes = 0;
  std::vector<uint8_t> idx;

  uint8_t at(int y, int x) const { return idx[static_cast<size_t>(y) * w + x]; }
  size_t pixels() const { return idx.size(); }
};

// Element-wise activation. NaN inputs propagate to NaN for every kind.
inline float activate(float v, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU:
      if (std::isnan(v)) return v;
      return v > 0.0f ? v : 0.0f;
    case ActivationKind::Sigmoid:
      return 1.0f / (1.0f + std::exp(-v));
    case ActivationKind::HardSigmoid: {
      if (std::isnan(v)) return v;
      float t = 0.2f * v + 0.5f;
      return t < 0.0f ? 0.0f : (t > 1.0f ? 1.0f : t);
    }
  }
  return v;
}

// Direct convolution. Per output element the accumulation order is kernel
// row, kernel column, input channel (fp32 accumulator); the bias is added
// last. Padded taps are skipped, which is bit-equivalent to zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              Padding padding);

// Transposed convolution in scatter form: output extents are input extents
// times stride, initialized with the bias; contributions are accumulated in
// input-row, input-col, kernel-row, kernel-col, input-channel order.
// Scatter targets beyond the output extent are dropped.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
                        int stride);

// 2x2/2 max pooling. A NaN candidate never replaces the incumbent and a NaN
// incumbent is never replaced (comparisons with NaN are false), so outputs
// are deterministic under injected NaNs.
Tensor maxpool2d(const Tensor& input);

// Inference-mode batch normalization, evaluated per element in fp32 as
// gamma * (x - mean) / sqrt(var + eps) + beta. Rejects negative variance.
Tensor batchnorm_infer(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                       std::span<const float> mean, std::span<const float> var, float eps);

// Same computation without the variance precondition: sqrt of a negative
// argument yields NaN, which fault campaigns must observe rather than trap.
Tensor batchnorm_infer_unchecked(const Tensor& x, std::span<const float> gamma,
                                 std::span<const float> beta, std::span<const float> mean,
                                 std::span<const float> var, float eps);

Tensor apply_activation(const Tensor& x, ActivationKind kind);

// Channel concatenation; a's channels precede b's. Spatial extents must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Per-pixel argmax over channels. Ties break to the lowest index; NaN never
// wins a comparison, so the incumbent (lowest) index survives NaN logits.
ClassMap argmax_channels(const Tensor& logits);

}  // namespace seufi
