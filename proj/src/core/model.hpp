#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace seufi {

enum class LayerKind { Input, Conv, ConvTranspose, BatchNorm, Activation, MaxPool, Concat, OutputConv };
enum class ParamKind { ConvKernel, ConvBias, BNGamma, BNBeta, BNMean, BNVar };
enum class InitScheme { He, Glorot };

const char* to_string(LayerKind k);
const char* to_string(ParamKind k);
InitScheme init_scheme_from_string(const std::string& s);

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Conv;
  std::vector<std::string> inputs;
  int out_channels = 0;  // Conv / ConvTranspose / OutputConv
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  Padding padding = Padding::Same;
  float eps = 1e-3f;                          // BatchNorm
  ActivationKind af = ActivationKind::ReLU;   // Activation
};

// One named group of parameters (a conv kernel, a BN gamma vector, ...): the
// unit of fault targeting and reporting.
struct ParameterSet {
  std::string id;  // "<layer_id>.<kind tag>"
  ParamKind kind = ParamKind::ConvKernel;
  std::string layer_id;
  std::vector<int> shape;
  std::vector<float> values;

  long long count() const {
    long long n = 1;
    for (int e : shape) n *= e;
    return n;
  }
};

struct ModelMeta {
  int levels = 0;
  int base_filters = 0;
  int classes = 0;
  std::array<int, 3> input_shape{0, 0, 0};  // H, W, C
  ActivationKind af = ActivationKind::ReLU;
  bool folded = false;
};

// Ordered layer graph plus its parameter store. Layers are kept in
// topological order; params in enumeration order (layer order, then
// kernel, bias, gamma, beta, mean, var within a layer). Immutable by
// convention after build/load; init/fold/prune return new instances.
struct ModelGraph {
  ModelMeta meta;
  std::vector<LayerSpec> layers;
  std::vector<ParameterSet> params;

  const LayerSpec* find_layer(const std::string& id) const;
  bool has_param(const std::string& id) const;
  const ParameterSet& param(const std::string& id) const;
  ParameterSet& param(const std::string& id);
};

struct ParamSetDesc {
  std::string id;
  ParamKind kind;
  std::string layer_id;
  long long count;
  int bit_width;         // 32 for fp32 sets; 8 or 32 for quantized sets
  bool is_float = true;  // false for integer (quantized) payloads
};

struct TensorDims {
  int h = 0, w = 0, c = 0;
};

// Structural validation: unique ids, topological inputs, parameter presence
// and shape consistency, concat spatial agreement, pool extent parity.
void validate_model(const ModelGraph& m);

// Shape inference over the layer list for the given input dims.
std::vector<std::pair<std::string, TensorDims>> infer_shapes(const ModelGraph& m, TensorDims input);

// Encoder-decoder builder: `levels` encoder levels (two 3x3 conv+BN+AF, then
// 2x2 maxpool) with base_filters*2^i filters, a bottleneck pair at
// base_filters*2^levels, a mirrored decoder (2x2/2 transposed conv, skip
// concat with the encoder level, two conv+BN+AF) and a final 1x1 conv to
// `classes` logits. H and W must be divisible by 2^levels.
ModelGraph build_unet(int levels, int base_filters, int h, int w, int c, int classes,
                      ActivationKind af);

// Replaces a single parameter set's payload during forward without touching
// the golden model (private copy-on-write for fault campaigns).
struct ParamOverlay {
  std::string set_id;
  std::vector<float> values;
};

// min/max/NaN over all post-activation tensors of one or more forwards.
struct ActivationProbe {
  float min_v = std::numeric_limits<float>::infinity();
  float max_v = -std::numeric_limits<float>::infinity();
  bool any_nan = false;

  void observe(const Tensor& t);
};

struct ForwardHooks {
  ActivationProbe* post_af = nullptr;
  // Called with every layer's output tensor (including the input image under
  // the id "input"); used for calibration.
  const std::function<void(const std::string&, const Tensor&)>* tap = nullptr;
};

struct ForwardResult {
  Tensor logits;
  ClassMap classes;
};

ForwardResult forward(const ModelGraph& m, const Tensor& image, const ParamOverlay* overlay = nullptr,
                      const ForwardHooks* hooks = nullptr);

// Deterministic order: layer topological position, then kind order
// kernel, bias, gamma, beta, mean, var.
std::vector<ParamSetDesc> enumerate_param_sets(const ModelGraph& m);

struct ModelStats {
  long long params = 0;
  long long flops = 0;  // 2*MACs for conv/transposed conv + per-element BN/AF/pool costs
};

ModelStats count_params_flops(const ModelGraph& m);
ModelStats count_params_flops(const ModelGraph& m, TensorDims input);

// Kernel init per scheme (normal truncated at two standard deviations),
// biases uniform in [-0.05, 0.05], BN gamma=1 beta=0 mean=0 var=1.
// Deterministic: each parameter set derives its own stream from (seed, id).
ModelGraph init_weights(ModelGraph m, uint64_t seed, InitScheme scheme);

// Directory container: manifest.json plus one little-endian fp32 blob per
// parameter set. Round-trips are bit-exact, including non-finite payloads.
void save_model(const ModelGraph& m, const std::filesystem::path& dir);
ModelGraph load_model(const std::filesystem::path& dir);

// Absorbs inference-mode BN into the preceding conv: kernel' = kernel *
// gamma/sqrt(var+eps) per output channel, bias' = (bias-mean)*gamma/
// sqrt(var+eps) + beta. The folded model has no BN layers or BN sets.
ModelGraph fold_batchnorm(const ModelGraph& m);

// FNV-1a over every parameter set id and payload bit pattern, in enumeration
// order. Campaigns use it to prove the golden model was left untouched.
uint64_t model_param_hash(const ModelGraph& m);

}  // namespace seufi
