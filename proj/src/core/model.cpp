#include "core/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace seufi {

using nlohmann::json;

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "Input";
    case LayerKind::Conv: return "Conv";
    case LayerKind::ConvTranspose: return "ConvTranspose";
    case LayerKind::BatchNorm: return "BatchNorm";
    case LayerKind::Activation: return "Activation";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::Concat: return "Concat";
    case LayerKind::OutputConv: return "OutputConv";
  }
  return "?";
}

const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::ConvKernel: return "ConvKernel";
    case ParamKind::ConvBias: return "ConvBias";
    case ParamKind::BNGamma: return "BNGamma";
    case ParamKind::BNBeta: return "BNBeta";
    case ParamKind::BNMean: return "BNMean";
    case ParamKind::BNVar: return "BNVar";
  }
  return "?";
}

namespace {

LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::Input, LayerKind::Conv, LayerKind::ConvTranspose,
                      LayerKind::BatchNorm, LayerKind::Activation, LayerKind::MaxPool,
                      LayerKind::Concat, LayerKind::OutputConv})
    if (s == to_string(k)) return k;
  fail_data("unknown layer kind in manifest: '" + s + "'");
}

ParamKind param_kind_from_string(const std::string& s) {
  for (ParamKind k : {ParamKind::ConvKernel, ParamKind::ConvBias, ParamKind::BNGamma,
                      ParamKind::BNBeta, ParamKind::BNMean, ParamKind::BNVar})
    if (s == to_string(k)) return k;
  fail_data("unknown parameter kind in manifest: '" + s + "'");
}

const char* param_kind_tag(ParamKind k) {
  switch (k) {
    case ParamKind::ConvKernel: return "kernel";
    case ParamKind::ConvBias: return "bias";
    case ParamKind::BNGamma: return "gamma";
    case ParamKind::BNBeta: return "beta";
    case ParamKind::BNMean: return "mean";
    case ParamKind::BNVar: return "var";
  }
  return "?";
}

constexpr ParamKind kParamKindOrder[] = {ParamKind::ConvKernel, ParamKind::ConvBias,
                                         ParamKind::BNGamma,    ParamKind::BNBeta,
                                         ParamKind::BNMean,     ParamKind::BNVar};

bool is_conv_like(LayerKind k) {
  return k == LayerKind::Conv || k == LayerKind::ConvTranspose || k == LayerKind::OutputConv;
}

}  // namespace

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "he") return InitScheme::He;
  if (s == "glorot") return InitScheme::Glorot;
  fail_config("unknown init scheme: '" + s + "' (expected he|glorot)");
}

const LayerSpec* ModelGraph::find_layer(const std::string& id) const {
  for (const auto& l : layers)
    if (l.id == id) return &l;
  return nullptr;
}

bool ModelGraph::has_param(const std::string& id) const {
  for (const auto& p : params)
    if (p.id == id) return true;
  return false;
}

const ParameterSet& ModelGraph::param(const std::string& id) const {
  for (const auto& p : params)
    if (p.id == id) return p;
  fail_data("unknown parameter set: '" + id + "'");
}

ParameterSet& ModelGraph::param(const std::string& id) {
  for (auto& p : params)
    if (p.id == id) return p;
  fail_data("unknown parameter set: '" + id + "'");
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, TensorDims>> infer_shapes(const ModelGraph& m, TensorDims input) {
  std::vector<std::pair<std::string, TensorDims>> out;
  std::unordered_map<std::string, TensorDims> dims;
  dims["input"] = input;
  auto in_dims = [&](const LayerSpec& l, size_t i) -> TensorDims {
    if (i >= l.inputs.size()) fail_data("layer '" + l.id + "' is missing input " + std::to_string(i));
    auto it = dims.find(l.inputs[i]);
    if (it == dims.end())
      fail_data("layer '" + l.id + "' references unknown or later tensor '" + l.inputs[i] + "'");
    return it->second;
  };
  for (const auto& l : m.layers) {
    TensorDims d;
    switch (l.kind) {
      case LayerKind::Input:
        d = input;
        break;
      case LayerKind::Conv:
      case LayerKind::OutputConv: {
        TensorDims in = in_dims(l, 0);
        if (l.padding == Padding::Same) {
          d.h = (in.h + l.stride - 1) / l.stride;
          d.w = (in.w + l.stride - 1) / l.stride;
        } else {
          if (in.h < l.kernel_h || in.w < l.kernel_w)
            fail_data("layer '" + l.id + "': input smaller than kernel with valid padding");
          d.h = (in.h - l.kernel_h) / l.stride + 1;
          d.w = (in.w - l.kernel_w) / l.stride + 1;
        }
        d.c = l.out_channels;
        break;
      }
      case LayerKind::ConvTranspose: {
        TensorDims in = in_dims(l, 0);
        d.h = in.h * l.stride;
        d.w = in.w * l.stride;
        d.c = l.out_channels;
        break;
      }
      case LayerKind::BatchNorm:
      case LayerKind::Activation:
        d = in_dims(l, 0);
        break;
      case LayerKind::MaxPool: {
        TensorDims in = in_dims(l, 0);
        if (in.h % 2 != 0 || in.w % 2 != 0)
          fail_data("layer '" + l.id + "': maxpool input extents must be even, got " +
                    std::to_string(in.h) + "x" + std::to_string(in.w));
        d = {in.h / 2, in.w / 2, in.c};
        break;
      }
      case LayerKind::Concat: {
        if (l.inputs.size() != 2) fail_data("layer '" + l.id + "': concat takes exactly two inputs");
        TensorDims a = in_dims(l, 0), b = in_dims(l, 1);
        if (a.h != b.h || a.w != b.w)
          fail_data("layer '" + l.id + "': concat spatial mismatch " + std::to_string(a.h) + "x" +
                    std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
        d = {a.h, a.w, a.c + b.c};
        break;
      }
    }
    if (dims.count(l.id)) fail_data("duplicate layer id '" + l.id + "'");
    dims[l.id] = d;
    out.emplace_back(l.id, d);
  }
  return out;
}

void validate_model(const ModelGraph& m) {
  if (m.layers.empty()) fail_data("model has no layers");
  if (m.meta.input_shape[0] < 1 || m.meta.input_shape[1] < 1 || m.meta.input_shape[2] < 1)
    fail_data("model metadata lacks a valid input shape");

  std::unordered_set<std::string> ids;
  for (const auto& l : m.layers) {
    if (l.id.empty() || l.id == "input") fail_data("invalid layer id '" + l.id + "'");
    if (!ids.insert(l.id).second) fail_data("duplicate layer id '" + l.id + "'");
  }

  TensorDims input{m.meta.input_shape[0], m.meta.input_shape[1], m.meta.input_shape[2]};
  auto shapes = infer_shapes(m, input);  // also checks topology, concat, pools
  std::unordered_map<std::string, TensorDims> dims(shapes.begin(), shapes.end());
  dims["input"] = input;

  std::unordered_set<std::string> expected;
  for (const auto& l : m.layers) {
    if (is_conv_like(l.kind)) {
      const TensorDims in = dims.at(l.inputs.at(0));
      const std::string kid = l.id + ".kernel", bid = l.id + ".bias";
      expected.insert(kid);
      expected.insert(bid);
      if (!m.has_param(kid) || !m.has_param(bid))
        fail_data("layer '" + l.id + "' is missing kernel/bias parameter sets");
      const auto& k = m.param(kid);
      std::vector<int> want{l.kernel_h, l.kernel_w, in.c, l.out_channels};
      if (k.shape != want)
        fail_data("layer '" + l.id + "': kernel shape " + shape_to_string(k.shape) +
                  " does not match expected " + shape_to_string(want));
      const auto& b = m.param(bid);
      if (b.shape != std::vector<int>{l.out_channels})
        fail_data("layer '" + l.id + "': bias shape " + shape_to_string(b.shape) +
                  " does not match output channels " + std::to_string(l.out_channels));
      if (k.kind != ParamKind::ConvKernel || b.kind != ParamKind::ConvBias)
        fail_data("layer '" + l.id + "': parameter kinds inconsistent with a conv layer");
    } else if (l.kind == LayerKind::BatchNorm) {
      const TensorDims in = dims.at(l.inputs.at(0));
      for (ParamKind pk : {ParamKind::BNGamma, ParamKind::BNBeta, ParamKind::BNMean, ParamKind::BNVar}) {
        const std::string pid = l.id + "." + param_kind_tag(pk);
        expected.insert(pid);
        if (!m.has_param(pid)) fail_data("layer '" + l.id + "' is missing set '" + pid + "'");
        const auto& p = m.param(pid);
        if (p.shape != std::vector<int>{in.c})
          fail_data("set '" + pid + "' has shape " + shape_to_string(p.shape) +
                    ", expected length " + std::to_string(in.c));
        if (p.kind != pk) fail_data("set '" + pid + "' has inconsistent kind");
      }
    }
  }
  for (const auto& p : m.params) {
    if (!expected.count(p.id)) fail_data("orphan parameter set '" + p.id + "'");
    if (p.values.size() != static_cast<size_t>(p.count()))
      fail_data("set '" + p.id + "': payload length " + std::to_string(p.values.size()) +
                " != shape product " + std::to_string(p.count()));
    if (p.count() < 1) fail_data("set '" + p.id + "' is empty");
  }
  if (m.meta.classes > 0) {
    const auto& last = shapes.back().second;
    if (last.c != m.meta.classes)
      fail_data("final layer produces " + std::to_string(last.c) + " channels, expected " +
                std::to_string(m.meta.classes) + " classes");
  }
}

// ---------------------------------------------------------------------------
// Builder

namespace {

void add_param(ModelGraph& m, const std::string& layer_id, ParamKind kind, std::vector<int> shape) {
  ParameterSet p;
  p.id = layer_id + "." + param_kind_tag(kind);
  p.kind = kind;
  p.layer_id = layer_id;
  long long n = 1;
  for (int e : shape) n *= e;
  p.shape = std::move(shape);
  p.values.assign(static_cast<size_t>(n), 0.0f);
  m.params.push_back(std::move(p));
}

void add_conv(ModelGraph& m, const std::string& id, const std::string& input, LayerKind kind, int kh,
              int kw, int cin, int cout, int stride, Padding padding) {
  LayerSpec l;
  l.id = id;
  l.kind = kind;
  l.inputs = {input};
  l.kernel_h = kh;
  l.kernel_w = kw;
  l.out_channels = cout;
  l.stride = stride;
  l.padding = padding;
  m.layers.push_back(l);
  add_param(m, id, ParamKind::ConvKernel, {kh, kw, cin, cout});
  add_param(m, id, ParamKind::ConvBias, {cout});
}

void add_bn(ModelGraph& m, const std::string& id, const std::string& input, int channels) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::BatchNorm;
  l.inputs = {input};
  m.layers.push_back(l);
  for (ParamKind k : {ParamKind::BNGamma, ParamKind::BNBeta, ParamKind::BNMean, ParamKind::BNVar})
    add_param(m, id, k, {channels});
}

void add_af(ModelGraph& m, const std::string& id, const std::string& input, ActivationKind af) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::Activation;
  l.inputs = {input};
  l.af = af;
  m.layers.push_back(l);
}

// conv + BN + AF; returns the activation layer id.
std::string add_block(ModelGraph& m, const std::string& base, const std::string& input, int cin,
                      int cout, ActivationKind af) {
  add_conv(m, base + "_conv", input, LayerKind::Conv, 3, 3, cin, cout, 1, Padding::Same);
  add_bn(m, base + "_bn", base + "_conv", cout);
  add_af(m, base + "_act", base + "_bn", af);
  return base + "_act";
}

}  // namespace

ModelGraph build_unet(int levels, int base_filters, int h, int w, int c, int classes,
                      ActivationKind af) {
  if (levels < 2) fail_config("build_unet: levels must be >= 2, got " + std::to_string(levels));
  if (base_filters < 1) fail_config("build_unet: base_filters must be >= 1");
  if (h < 1 || w < 1 || c < 1) fail_config("build_unet: invalid input shape");
  if (classes < 1 || classes > 256) fail_config("build_unet: classes must be in [1, 256]");
  if (levels > 20) fail_config("build_unet: levels out of range");
  const int div = 1 << levels;
  if (h % div != 0 || w % div != 0)
    fail_config("build_unet: input extents " + std::to_string(h) + "x" + std::to_string(w) +
                " must be divisible by 2^levels = " + std::to_string(div));

  ModelGraph m;
  m.meta.levels = levels;
  m.meta.base_filters = base_filters;
  m.meta.classes = classes;
  m.meta.input_shape = {h, w, c};
  m.meta.af = af;
  m.meta.folded = false;

  auto filters = [&](int i) { return base_filters << i; };

  std::string cur = "input";
  int cur_c = c;
  std::vector<std::string> skips(static_cast<size_t>(levels));
  for (int i = 0; i < levels; ++i) {
    const std::string e = "enc" + std::to_string(i);
    cur = add_block(m, e + "_1", cur, cur_c, filters(i), af);
    cur = add_block(m, e + "_2", cur, filters(i), filters(i), af);
    skips[static_cast<size_t>(i)] = cur;
    LayerSpec pool;
    pool.id = e + "_pool";
    pool.kind = LayerKind::MaxPool;
    pool.inputs = {cur};
    m.layers.push_back(pool);
    cur = pool.id;
    cur_c = filters(i);
  }

  cur = add_block(m, "bott_1", cur, cur_c, filters(levels), af);
  cur = add_block(m, "bott_2", cur, filters(levels), filters(levels), af);
  cur_c = filters(levels);

  for (int i = levels - 1; i >= 0; --i) {
    const std::string d = "dec" + std::to_string(i);
    add_conv(m, d + "_up", cur, LayerKind::ConvTranspose, 2, 2, cur_c, filters(i), 2, Padding::Same);
    LayerSpec cat;
    cat.id = d + "_concat";
    cat.kind = LayerKind::Concat;
    cat.inputs = {skips[static_cast<size_t>(i)], d + "_up"};  // encoder features first
    m.layers.push_back(cat);
    cur = add_block(m, d + "_1", cat.id, 2 * filters(i), filters(i), af);
    cur = add_block(m, d + "_2", cur, filters(i), filters(i), af);
    cur_c = filters(i);
  }

  add_conv(m, "out_conv", cur, LayerKind::OutputConv, 1, 1, cur_c, classes, 1, Padding::Same);

  validate_model(m);
  return m;
}

// ---------------------------------------------------------------------------
// Forward

void ActivationProbe::observe(const Tensor& t) {
  for (float v : t.data) {
    if (std::isnan(v)) {
      any_nan = true;
      continue;
    }
    if (v < min_v) min_v = v;
    if (v > max_v) max_v = v;
  }
}

namespace {

std::span<const float> resolve_values(const ModelGraph& m, const ParamOverlay* overlay,
                                      const std::string& set_id) {
  if (overlay && overlay->set_id == set_id) return overlay->values;
  return m.param(set_id).values;
}

Tensor make_tensor(std::vector<int> shape, std::span<const float> values) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(values.begin(), values.end());
  return t;
}

}  // namespace

ForwardResult forward(const ModelGraph& m, const Tensor& image, const ParamOverlay* overlay,
                      const ForwardHooks* hooks) {
  if (image.shape.size() != 3) fail_data("forward: image must be rank-3 HWC");
  if (m.meta.input_shape[0] > 0) {
    std::vector<int> want{m.meta.input_shape[0], m.meta.input_shape[1], m.meta.input_shape[2]};
    if (image.shape != want)
      fail_data("forward: image shape " + shape_to_string(image.shape) +
                " does not match model input " + shape_to_string(want));
  }
  std::unordered_map<std::string, Tensor> env;
  env.emplace("input", image);
  if (hooks && hooks->tap && *hooks->tap) (*hooks->tap)("input", image);

  auto arg = [&](const LayerSpec& l, size_t i) -> const Tensor& {
    auto it = env.find(l.inputs.at(i));
    if (it == env.end()) fail_internal("forward: missing tensor '" + l.inputs.at(i) + "'");
    return it->second;
  };

  const std::string* last_id = nullptr;
  for (const auto& l : m.layers) {
    Tensor out;
    switch (l.kind) {
      case LayerKind::Input:
        out = image;
        break;
      case LayerKind::Conv:
      case LayerKind::OutputConv: {
        const auto& k = m.param(l.id + ".kernel");
        out = conv2d(arg(l, 0), make_tensor(k.shape, resolve_values(m, overlay, k.id)),
                     resolve_values(m, overlay, l.id + ".bias"), l.stride, l.padding);
        break;
      }
      case LayerKind::ConvTranspose: {
        const auto& k = m.param(l.id + ".kernel");
        out = conv2d_transpose(arg(l, 0), make_tensor(k.shape, resolve_values(m, overlay, k.id)),
                               resolve_values(m, overlay, l.id + ".bias"), l.stride);
        break;
      }
      case LayerKind::BatchNorm:
        // IEEE semantics: a faulted negative variance must surface as NaN,
        // not as an error.
        out = batchnorm_infer_unchecked(arg(l, 0), resolve_values(m, overlay, l.id + ".gamma"),
                                        resolve_values(m, overlay, l.id + ".beta"),
                                        resolve_values(m, overlay, l.id + ".mean"),
                                        resolve_values(m, overlay, l.id + ".var"), l.eps);
        break;
      case LayerKind::Activation:
        out = apply_activation(arg(l, 0), l.af);
        if (hooks && hooks->post_af) hooks->post_af->observe(out);
        break;
      case LayerKind::MaxPool:
        out = maxpool2d(arg(l, 0));
        break;
      case LayerKind::Concat:
        out = concat_channels(arg(l, 0), arg(l, 1));
        break;
    }
    if (hooks && hooks->tap && *hooks->tap) (*hooks->tap)(l.id, out);
    auto [it, inserted] = env.emplace(l.id, std::move(out));
    if (!inserted) fail_internal("forward: duplicate layer id '" + l.id + "'");
    last_id = &it->first;
  }
  if (!last_id) fail_data("forward: model has no layers");

  ForwardResult r;
  r.logits = std::move(env.at(*last_id));
  r.classes = argmax_channels(r.logits);
  return r;
}

// ---------------------------------------------------------------------------

std::vector<ParamSetDesc> enumerate_param_sets(const ModelGraph& m) {
  std::vector<ParamSetDesc> out;
  for (const auto& l : m.layers) {
    for (ParamKind k : kParamKindOrder) {
      const std::string id = l.id + "." + param_kind_tag(k);
      if (!m.has_param(id)) continue;
      const auto& p = m.param(id);
      out.push_back(ParamSetDesc{p.id, p.kind, p.layer_id, p.count(), 32, true});
    }
  }
  return out;
}

ModelStats count_params_flops(const ModelGraph& m) {
  return count_params_flops(m, TensorDims{m.meta.input_shape[0], m.meta.input_shape[1],
                                          m.meta.input_shape[2]});
}

ModelStats count_params_flops(const ModelGraph& m, TensorDims input) {
  ModelStats s;
  for (const auto& p : m.params) s.params += p.count();

  auto shapes = infer_shapes(m, input);
  std::unordered_map<std::string, TensorDims> dims(shapes.begin(), shapes.end());
  dims["input"] = input;
  auto elems = [](const TensorDims& d) {
    return static_cast<long long>(d.h) * d.w * d.c;
  };
  for (const auto& l : m.layers) {
    const TensorDims out = dims.at(l.id);
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::OutputConv: {
        const TensorDims in = dims.at(l.inputs.at(0));
        const long long macs = static_cast<long long>(l.kernel_h) * l.kernel_w * in.c *
                               static_cast<long long>(out.h) * out.w * out.c;
        s.flops += 2 * macs;
        break;
      }
      case LayerKind::ConvTranspose: {
        const TensorDims in = dims.at(l.inputs.at(0));
        const long long macs = static_cast<long long>(l.kernel_h) * l.kernel_w * out.c *
                               static_cast<long long>(in.h) * in.w * in.c;
        s.flops += 2 * macs;
        break;
      }
      case LayerKind::BatchNorm:
        s.flops += 2 * elems(out);
        break;
      case LayerKind::Activation:
        s.flops += elems(out);
        break;
      case LayerKind::MaxPool:
        s.flops += 3 * elems(out);
        break;
      case LayerKind::Concat:
      case LayerKind::Input:
        break;
    }
  }
  return s;
}

ModelGraph init_weights(ModelGraph m, uint64_t seed, InitScheme scheme) {
  for (auto& l : m.layers) {
    if (is_conv_like(l.kind)) {
      auto& k = m.param(l.id + ".kernel");
      auto& b = m.param(l.id + ".bias");
      const long long fan_in = static_cast<long long>(k.shape[0]) * k.shape[1] * k.shape[2];
      const long long fan_out = static_cast<long long>(k.shape[0]) * k.shape[1] * k.shape[3];
      const double stddev = scheme == InitScheme::He
                                ? std::sqrt(2.0 / static_cast<double>(fan_in))
                                : std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
      Rng rng(derive_seed(seed, l.id));
      for (auto& v : k.values) v = static_cast<float>(rng.truncated_normal() * stddev);
      for (auto& v : b.values) v = static_cast<float>(rng.uniform(-0.05, 0.05));
    } else if (l.kind == LayerKind::BatchNorm) {
      auto fill = [&](const char* tag, float value) {
        auto& p = m.param(l.id + "." + tag);
        std::fill(p.values.begin(), p.values.end(), value);
      };
      fill("gamma", 1.0f);
      fill("beta", 0.0f);
      fill("mean", 0.0f);
      fill("var", 1.0f);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Container

namespace {

json layer_to_json(const LayerSpec& l) {
  json j;
  j["id"] = l.id;
  j["kind"] = to_string(l.kind);
  j["inputs"] = l.inputs;
  if (is_conv_like(l.kind)) {
    j["out_channels"] = l.out_channels;
    j["kernel"] = {l.kernel_h, l.kernel_w};
    j["stride"] = l.stride;
    j["padding"] = l.padding == Padding::Same ? "same" : "valid";
  } else if (l.kind == LayerKind::BatchNorm) {
    j["eps"] = l.eps;
  } else if (l.kind == LayerKind::Activation) {
    j["af"] = to_string(l.af);
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  l.id = j.at("id").get<std::string>();
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  l.inputs = j.at("inputs").get<std::vector<std::string>>();
  if (is_conv_like(l.kind)) {
    l.out_channels = j.at("out_channels").get<int>();
    auto k = j.at("kernel").get<std::vector<int>>();
    if (k.size() != 2) fail_data("layer '" + l.id + "': kernel must have two extents");
    l.kernel_h = k[0];
    l.kernel_w = k[1];
    l.stride = j.at("stride").get<int>();
    const auto pad = j.at("padding").get<std::string>();
    if (pad != "same" && pad != "valid") fail_data("layer '" + l.id + "': bad padding '" + pad + "'");
    l.padding = pad == "same" ? Padding::Same : Padding::Valid;
  } else if (l.kind == LayerKind::BatchNorm) {
    l.eps = j.at("eps").get<float>();
  } else if (l.kind == LayerKind::Activation) {
    l.af = activation_from_string(j.at("af").get<std::string>());
  }
  return l;
}

std::string encode_f32_blob(const std::vector<float>& values) {
  std::string out;
  out.reserve(values.size() * 4);
  for (float v : values) put_u32_le(out, float_bits(v));
  return out;
}

}  // namespace

void save_model(const ModelGraph& m, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json manifest;
  manifest["version"] = 1;
  manifest["kind"] = "fp32";
  manifest["meta"] = {{"levels", m.meta.levels},
                      {"base_filters", m.meta.base_filters},
                      {"classes", m.meta.classes},
                      {"input_shape", m.meta.input_shape},
                      {"af", to_string(m.meta.af)},
                      {"folded", m.meta.folded}};
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back(layer_to_json(l));
  manifest["layers"] = layers;

  json sets = json::array();
  for (const auto& p : m.params) {
    const std::string blob_name = p.id + ".bin";
    const std::string blob = encode_f32_blob(p.values);
    write_file_atomic(dir / blob_name, blob);
    sets.push_back({{"id", p.id},
                    {"kind", to_string(p.kind)},
                    {"layer", p.layer_id},
                    {"shape", p.shape},
                    {"blob_file", blob_name},
                    {"byte_len", blob.size()}});
  }
  manifest["param_sets"] = sets;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelGraph load_model(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    fail_data("malformed manifest in " + dir.string() + ": " + e.what());
  }
  ModelGraph m;
  try {
    if (manifest.at("version").get<int>() != 1) fail_data("unsupported manifest version");
    if (manifest.at("kind").get<std::string>() != "fp32")
      fail_data("manifest kind is not fp32 (use the quantized loader)");
    const auto& meta = manifest.at("meta");
    m.meta.levels = meta.at("levels").get<int>();
    m.meta.base_filters = meta.at("base_filters").get<int>();
    m.meta.classes = meta.at("classes").get<int>();
    auto is = meta.at("input_shape").get<std::vector<int>>();
    if (is.size() != 3) fail_data("input_shape must have three extents");
    m.meta.input_shape = {is[0], is[1], is[2]};
    m.meta.af = activation_from_string(meta.at("af").get<std::string>());
    m.meta.folded = meta.at("folded").get<bool>();

    for (const auto& jl : manifest.at("layers")) m.layers.push_back(layer_from_json(jl));

    for (const auto& js : manifest.at("param_sets")) {
      ParameterSet p;
      p.id = js.at("id").get<std::string>();
      p.kind = param_kind_from_string(js.at("kind").get<std::string>());
      p.layer_id = js.at("layer").get<std::string>();
      p.shape = js.at("shape").get<std::vector<int>>();
      const auto byte_len = js.at("byte_len").get<size_t>();
      if (byte_len != static_cast<size_t>(p.count()) * 4)
        fail_data("set '" + p.id + "': blob length " + std::to_string(byte_len) +
                  " does not match shape " + shape_to_string(p.shape));
      const std::string blob = read_file(dir / js.at("blob_file").get<std::string>());
      if (blob.size() != byte_len)
        fail_data("set '" + p.id + "': blob file truncated (" + std::to_string(blob.size()) +
                  " of " + std::to_string(byte_len) + " bytes)");
      p.values.resize(byte_len / 4);
      const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
      for (size_t i = 0; i < p.values.size(); ++i) p.values[i] = bits_to_float(get_u32_le(bytes + 4 * i));
      m.params.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail_data("malformed manifest in " + dir.string() + ": " + e.what());
  }
  validate_model(m);
  return m;
}

// ---------------------------------------------------------------------------

ModelGraph fold_batchnorm(const ModelGraph& m) {
  ModelGraph out = m;

  std::unordered_map<std::string, std::string> replace;  // bn id -> conv id
  std::unordered_set<std::string> folded_convs;
  for (const auto& l : out.layers) {
    if (l.kind != LayerKind::BatchNorm) continue;
    const LayerSpec* prod = out.find_layer(l.inputs.at(0));
    if (!prod || !is_conv_like(prod->kind))
      fail_data("fold_batchnorm: '" + l.id + "' does not follow a conv layer");
    if (!folded_convs.insert(prod->id).second)
      fail_data("fold_batchnorm: conv '" + prod->id + "' feeds more than one batchnorm");

    const auto& gamma = out.param(l.id + ".gamma").values;
    const auto& beta = out.param(l.id + ".beta").values;
    const auto& mean = out.param(l.id + ".mean").values;
    const auto& var = out.param(l.id + ".var").values;
    for (float v : var)
      if (v < 0.0f) fail_data("fold_batchnorm: '" + l.id + "' has negative variance");

    auto& kernel = out.param(prod->id + ".kernel");
    auto& bias = out.param(prod->id + ".bias");
    const int co = kernel.shape[3];
    std::vector<float> scale(static_cast<size_t>(co));
    for (int i = 0; i < co; ++i)
      scale[static_cast<size_t>(i)] = gamma[static_cast<size_t>(i)] /
                                      std::sqrt(var[static_cast<size_t>(i)] + l.eps);
    for (size_t i = 0; i < kernel.values.size(); ++i)
      kernel.values[i] *= scale[i % static_cast<size_t>(co)];
    for (int i = 0; i < co; ++i)
      bias.values[static_cast<size_t>(i)] =
          (bias.values[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)]) *
              scale[static_cast<size_t>(i)] +
          beta[static_cast<size_t>(i)];

    replace[l.id] = prod->id;
  }

  // Rewire consumers, drop BN layers and their parameter sets.
  for (auto& l : out.layers)
    for (auto& in : l.inputs) {
      auto it = replace.find(in);
      if (it != replace.end()) in = it->second;
    }
  std::erase_if(out.layers, [](const LayerSpec& l) { return l.kind == LayerKind::BatchNorm; });
  std::erase_if(out.params, [&](const ParameterSet& p) {
    return p.kind == ParamKind::BNGamma || p.kind == ParamKind::BNBeta ||
           p.kind == ParamKind::BNMean || p.kind == ParamKind::BNVar;
  });
  out.meta.folded = true;
  validate_model(out);
  return out;
}

uint64_t model_param_hash(const ModelGraph& m) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : m.params) {
    h = fnv1a64(p.id, h);
    const unsigned char zero = 0;
    h = fnv1a64(&zero, 1, h);
    for (float v : p.values) {
      const uint32_t bits = float_bits(v);
      unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                            static_cast<unsigned char>((bits >> 8) & 0xff),
                            static_cast<unsigned char>((bits >> 16) & 0xff),
                            static_cast<unsigned char>((bits >> 24) & 0xff)};
      h = fnv1a64(b, 4, h);
    }
  }
  return h;
}

}  // namespace seufi
