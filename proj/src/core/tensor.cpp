#include "core/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace seufi {

const char* to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::HardSigmoid: return "hard_sigmoid";
  }
  return "?";
}

ActivationKind activation_from_string(const std::string& s) {
  if (s == "relu") return ActivationKind::ReLU;
  if (s == "sigmoid") return ActivationKind::Sigmoid;
  if (s == "hard_sigmoid") return ActivationKind::HardSigmoid;
  fail_config("unknown activation kind: '" + s + "' (expected relu|sigmoid|hard_sigmoid)");
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> s) {
  long long n = 1;
  for (int e : s) {
    if (e < 1) fail_data("tensor extent must be >= 1, got shape " + shape_to_string(s));
    n *= e;
  }
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(static_cast<size_t>(n), 0.0f);
  return t;
}

namespace {

void require_rank(const Tensor& t, size_t rank, const char* what) {
  if (t.shape.size() != rank)
    fail_data(std::string(what) + ": expected rank " + std::to_string(rank) + " tensor, got shape " +
              shape_to_string(t.shape));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              Padding padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  const int h = input.shape[0], w = input.shape[1], c = input.shape[2];
  const int kh = kernel.shape[0], kw = kernel.shape[1], ci = kernel.shape[2], co = kernel.shape[3];
  if (ci != c)
    fail_data("conv2d: kernel " + shape_to_string(kernel.shape) + " does not accept input " +
              shape_to_string(input.shape));
  if (static_cast<int>(bias.size()) != co)
    fail_data("conv2d: bias length " + std::to_string(bias.size()) + " != output channels " +
              std::to_string(co));
  if (stride < 1) fail_data("conv2d: stride must be positive");

  int oh, ow, pad_top = 0, pad_left = 0;
  if (padding == Padding::Same) {
    oh = (h + stride - 1) / stride;
    ow = (w + stride - 1) / stride;
    pad_top = std::max((oh - 1) * stride + kh - h, 0) / 2;
    pad_left = std::max((ow - 1) * stride + kw - w, 0) / 2;
  } else {
    if (h < kh || w < kw)
      fail_data("conv2d: input " + shape_to_string(input.shape) + " smaller than kernel " +
                shape_to_string(kernel.shape) + " with valid padding");
    oh = (h - kh) / stride + 1;
    ow = (w - kw) / stride + 1;
  }

  Tensor out = Tensor::zeros({oh, ow, co});
  std::vector<float> acc(static_cast<size_t>(co));
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      std::fill(acc.begin(), acc.end(), 0.0f);
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad_top;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad_left;
          if (ix < 0 || ix >= w) continue;
          const float* px = &input.data[(static_cast<size_t>(iy) * w + ix) * c];
          const float* kr = &kernel.data[((static_cast<size_t>(ky) * kw + kx) * ci) * co];
          for (int ic = 0; ic < ci; ++ic) {
            const float a = px[ic];
            const float* kc = kr + static_cast<size_t>(ic) * co;
            for (int oc = 0; oc < co; ++oc) acc[static_cast<size_t>(oc)] += a * kc[oc];
          }
        }
      }
      float* dst = &out.data[(static_cast<size_t>(oy) * ow + ox) * co];
      for (int oc = 0; oc < co; ++oc) dst[oc] = acc[static_cast<size_t>(oc)] + bias[static_cast<size_t>(oc)];
    }
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
                        int stride) {
  require_rank(input, 3, "conv2d_transpose input");
  require_rank(kernel, 4, "conv2d_transpose kernel");
  const int h = input.shape[0], w = input.shape[1], c = input.shape[2];
  const int kh = kernel.shape[0], kw = kernel.shape[1], ci = kernel.shape[2], co = kernel.shape[3];
  if (ci != c)
    fail_data("conv2d_transpose: kernel " + shape_to_string(kernel.shape) + " does not accept input " +
              shape_to_string(input.shape));
  if (static_cast<int>(bias.size()) != co)
    fail_data("conv2d_transpose: bias length " + std::to_string(bias.size()) +
              " != output channels " + std::to_string(co));
  if (stride < 1) fail_data("conv2d_transpose: stride must be positive");

  const int oh = h * stride, ow = w * stride;
  Tensor out = Tensor::zeros({oh, ow, co});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      float* dst = &out.data[(static_cast<size_t>(oy) * ow + ox) * co];
      for (int oc = 0; oc < co; ++oc) dst[oc] = bias[static_cast<size_t>(oc)];
    }

  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      for (int ky = 0; ky < kh; ++ky) {
        const int oy = iy * stride + ky;
        if (oy >= oh) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ox = ix * stride + kx;
          if (ox >= ow) continue;
          const float* px = &input.data[(static_cast<size_t>(iy) * w + ix) * c];
          float* dst = &out.data[(static_cast<size_t>(oy) * ow + ox) * co];
          const float* kr = &kernel.data[((static_cast<size_t>(ky) * kw + kx) * ci) * co];
          for (int ic = 0; ic < ci; ++ic) {
            const float a = px[ic];
            const float* kc = kr + static_cast<size_t>(ic) * co;
            for (int oc = 0; oc < co; ++oc) dst[oc] += a * kc[oc];
          }
        }
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input) {
  require_rank(input, 3, "maxpool2d input");
  const int h = input.shape[0], w = input.shape[1], c = input.shape[2];
  if (h % 2 != 0 || w % 2 != 0)
    fail_data("maxpool2d: spatial extents must be even, got " + shape_to_string(input.shape));
  Tensor out = Tensor::zeros({h / 2, w / 2, c});
  for (int oy = 0; oy < h / 2; ++oy) {
    for (int ox = 0; ox < w / 2; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        float m = input.at3(2 * oy, 2 * ox, ch);
        const float c01 = input.at3(2 * oy, 2 * ox + 1, ch);
        const float c10 = input.at3(2 * oy + 1, 2 * ox, ch);
        const float c11 = input.at3(2 * oy + 1, 2 * ox + 1, ch);
        if (c01 > m) m = c01;
        if (c10 > m) m = c10;
        if (c11 > m) m = c11;
        out.at3(oy, ox, ch) = m;
      }
    }
  }
  return out;
}

Tensor batchnorm_infer_unchecked(const Tensor& x, std::span<const float> gamma,
                                 std::span<const float> beta, std::span<const float> mean,
                                 std::span<const float> var, float eps) {
  require_rank(x, 3, "batchnorm input");
  const int c = x.shape[2];
  if (static_cast<int>(gamma.size()) != c || static_cast<int>(beta.size()) != c ||
      static_cast<int>(mean.size()) != c || static_cast<int>(var.size()) != c)
    fail_data("batchnorm: parameter vectors must have length " + std::to_string(c));
  Tensor out = Tensor::zeros(x.shape);
  const size_t pixels = x.data.size() / static_cast<size_t>(c);
  for (size_t p = 0; p < pixels; ++p) {
    const float* src = &x.data[p * c];
    float* dst = &out.data[p * c];
    for (int ch = 0; ch < c; ++ch)
      dst[ch] = gamma[static_cast<size_t>(ch)] * (src[ch] - mean[static_cast<size_t>(ch)]) /
                    std::sqrt(var[static_cast<size_t>(ch)] + eps) +
                beta[static_cast<size_t>(ch)];
  }
  return out;
}

Tensor batchnorm_infer(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                       std::span<const float> mean, std::span<const float> var, float eps) {
  for (size_t i = 0; i < var.size(); ++i)
    if (var[i] < 0.0f)
      fail_data("batchnorm: variance[" + std::to_string(i) + "] = " + std::to_string(var[i]) +
                " is negative");
  return batchnorm_infer_unchecked(x, gamma, beta, mean, var, eps);
}

Tensor apply_activation(const Tensor& x, ActivationKind kind) {
  Tensor out;
  out.shape = x.shape;
  out.data.resize(x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = activate(x.data[i], kind);
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat input a");
  require_rank(b, 3, "concat input b");
  if (a.shape[0] != b.shape[0] || a.shape[1] != b.shape[1])
    fail_data("concat_channels: spatial mismatch " + shape_to_string(a.shape) + " vs " +
              shape_to_string(b.shape));
  const int h = a.shape[0], w = a.shape[1], ca = a.shape[2], cb = b.shape[2];
  Tensor out;
  out.shape = {h, w, ca + cb};
  out.data.resize(static_cast<size_t>(h) * w * (ca + cb));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float* dst = &out.data[(static_cast<size_t>(y) * w + x) * (ca + cb)];
      const float* pa = &a.data[(static_cast<size_t>(y) * w + x) * ca];
      std::copy(pa, pa + ca, dst);
      if (cb > 0) {
        const float* pb = &b.data[(static_cast<size_t>(y) * w + x) * cb];
        std::copy(pb, pb + cb, dst + ca);
      }
    }
  }
  return out;
}

ClassMap argmax_channels(const Tensor& logits) {
  require_rank(logits, 3, "argmax input");
  const int h = logits.shape[0], w = logits.shape[1], c = logits.shape[2];
  if (c < 1) fail_data("argmax_channels: need at least one channel");
  if (c > 256) fail_data("argmax_channels: class maps support at most 256 classes");
  ClassMap map;
  map.h = h;
  map.w = w;
  map.classes = c;
  map.idx.resize(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float* px = &logits.data[(static_cast<size_t>(y) * w + x) * c];
      int best = 0;
      float bv = px[0];
      for (int ch = 1; ch < c; ++ch) {
        if (px[ch] > bv) {
          bv = px[ch];
          best = ch;
        }
      }
      map.idx[static_cast<size_t>(y) * w + x] = static_cast<uint8_t>(best);
    }
  }
  return map;
}

}  // namespace seufi
