#include "core/fault.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

namespace seufi {

using nlohmann::json;

const char* to_string(FaultDomain d) {
  switch (d) {
    case FaultDomain::F32: return "f32";
    case FaultDomain::I8: return "i8";
    case FaultDomain::I32: return "i32";
  }
  return "?";
}

FaultDomain fault_domain_from_string(const std::string& s) {
  if (s == "f32") return FaultDomain::F32;
  if (s == "i8") return FaultDomain::I8;
  if (s == "i32") return FaultDomain::I32;
  fail_data("unknown fault domain: '" + s + "'");
}

const char* to_string(PopulationUnit u) {
  return u == PopulationUnit::SetBit ? "set_bit" : "set";
}

PopulationUnit population_unit_from_string(const std::string& s) {
  if (s == "set_bit") return PopulationUnit::SetBit;
  if (s == "set") return PopulationUnit::Set;
  fail_config("unknown population unit: '" + s + "' (expected set_bit|set)");
}

float flip_bit_f32(float value, int bit_index) {
  if (bit_index < 0 || bit_index > 31)
    fail_config("flip_bit_f32: bit index " + std::to_string(bit_index) + " out of range [0, 31]");
  return bits_to_float(float_bits(value) ^ (1u << bit_index));
}

int32_t flip_bit_int(int32_t value, int bit_index, int width) {
  if (width != 8 && width != 32) fail_config("flip_bit_int: width must be 8 or 32");
  if (bit_index < 0 || bit_index >= width)
    fail_config("flip_bit_int: bit index " + std::to_string(bit_index) + " out of range for width " +
                std::to_string(width));
  if (width == 8) {
    auto b = static_cast<uint8_t>(static_cast<int8_t>(value));
    b = static_cast<uint8_t>(b ^ (1u << bit_index));
    return static_cast<int8_t>(b);  // sign extend
  }
  auto u = static_cast<uint32_t>(value);
  return static_cast<int32_t>(u ^ (1u << bit_index));
}

UndoToken apply_fault(ModelGraph& m, const FaultSpec& spec) {
  if (spec.domain != FaultDomain::F32)
    fail_data("apply_fault: fp32 model cannot take a " + std::string(to_string(spec.domain)) +
              " fault");
  auto& set = m.param(spec.set_id);
  if (spec.element_index < 0 || spec.element_index >= set.count())
    fail_data("apply_fault: element " + std::to_string(spec.element_index) +
              " out of bounds for set '" + spec.set_id + "' (" + std::to_string(set.count()) + ")");
  float& slot = set.values[static_cast<size_t>(spec.element_index)];
  UndoToken token{spec.set_id, spec.element_index, float_bits(slot)};
  slot = flip_bit_f32(slot, spec.bit_index);
  return token;
}

void undo_fault(ModelGraph& m, const UndoToken& token) {
  auto& set = m.param(token.set_id);
  if (token.element_index < 0 || token.element_index >= set.count())
    fail_data("undo_fault: stale token for set '" + token.set_id + "'");
  set.values[static_cast<size_t>(token.element_index)] = bits_to_float(token.original_bits);
}

std::vector<FaultSpec> FaultPlan::flatten() const {
  std::vector<FaultSpec> out;
  out.reserve(total_faults());
  for (const auto& g : groups)
    for (long long e : g.elements) out.push_back(FaultSpec{g.set_id, e, g.bit, g.domain});
  return out;
}

namespace {

// Floyd's algorithm: n distinct values uniform over [0, pop).
std::vector<long long> sample_without_replacement(Rng& rng, long long pop, long long n) {
  std::vector<long long> out;
  if (n >= pop) {
    out.resize(static_cast<size_t>(pop));
    for (long long i = 0; i < pop; ++i) out[static_cast<size_t>(i)] = i;
    return out;
  }
  std::unordered_set<long long> chosen;
  chosen.reserve(static_cast<size_t>(n) * 2);
  for (long long j = pop - n; j < pop; ++j) {
    const long long t = static_cast<long long>(rng.uniform_int(static_cast<uint64_t>(j) + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

FaultDomain domain_of(const ParamSetDesc& d) {
  if (d.is_float) return FaultDomain::F32;
  return d.bit_width == 8 ? FaultDomain::I8 : FaultDomain::I32;
}

}  // namespace

FaultPlan gen_fault_plan(const std::vector<ParamSetDesc>& sets, const std::vector<int>& bits,
                         long long per_group_n, uint64_t seed, PopulationUnit unit) {
  if (bits.empty()) fail_config("gen_fault_plan: empty bit list");
  if (per_group_n < 1) fail_config("gen_fault_plan: sample count must be positive");
  std::vector<int> sorted_bits = bits;
  std::sort(sorted_bits.begin(), sorted_bits.end());
  if (std::adjacent_find(sorted_bits.begin(), sorted_bits.end()) != sorted_bits.end())
    fail_config("gen_fault_plan: duplicate bit index");

  FaultPlan plan;
  plan.seed = seed;
  plan.rng_name = kRngName;
  plan.unit = unit;
  plan.bits = sorted_bits;

  for (const auto& set : sets) {
    std::vector<int> usable;
    for (int b : sorted_bits) {
      if (b < 0) fail_config("gen_fault_plan: negative bit index");
      if (b < set.bit_width) usable.push_back(b);
    }
    if (usable.empty()) continue;

    if (unit == PopulationUnit::SetBit) {
      for (int b : usable) {
        Rng rng(derive_seed(seed, set.id + "#" + std::to_string(b)));
        FaultPlanGroup g;
        g.set_id = set.id;
        g.bit = b;
        g.domain = domain_of(set);
        g.elements = sample_without_replacement(rng, set.count, per_group_n);
        plan.groups.push_back(std::move(g));
      }
    } else {
      // One sample over element x bit pairs of the whole set.
      const auto nbits = static_cast<long long>(usable.size());
      Rng rng(derive_seed(seed, set.id + "#set"));
      const auto pairs = sample_without_replacement(rng, set.count * nbits, per_group_n);
      std::vector<FaultPlanGroup> groups(usable.size());
      for (size_t i = 0; i < usable.size(); ++i) {
        groups[i].set_id = set.id;
        groups[i].bit = usable[i];
        groups[i].domain = domain_of(set);
      }
      for (long long pair : pairs)
        groups[static_cast<size_t>(pair % nbits)].elements.push_back(pair / nbits);
      for (auto& g : groups) {
        if (g.elements.empty()) continue;
        std::sort(g.elements.begin(), g.elements.end());
        plan.groups.push_back(std::move(g));
      }
    }
  }
  return plan;
}

void save_fault_plan(const FaultPlan& plan, const std::filesystem::path& path) {
  json j;
  j["version"] = 1;
  j["seed"] = plan.seed;
  j["rng"] = plan.rng_name;
  j["model_hash"] = hex64(plan.model_hash);
  j["unit"] = to_string(plan.unit);
  j["bits"] = plan.bits;
  json groups = json::array();
  for (const auto& g : plan.groups)
    groups.push_back({{"set", g.set_id},
                      {"bit", g.bit},
                      {"domain", to_string(g.domain)},
                      {"elements", g.elements}});
  j["groups"] = groups;
  write_file_atomic(path, j.dump(2) + "\n");
}

FaultPlan load_fault_plan(const std::filesystem::path& path) {
  FaultPlan plan;
  try {
    const json j = json::parse(read_file(path));
    if (j.at("version").get<int>() != 1) fail_data("unsupported fault plan version");
    plan.seed = j.at("seed").get<uint64_t>();
    plan.rng_name = j.at("rng").get<std::string>();
    plan.model_hash = std::stoull(j.at("model_hash").get<std::string>(), nullptr, 16);
    plan.unit = population_unit_from_string(j.at("unit").get<std::string>());
    plan.bits = j.at("bits").get<std::vector<int>>();
    for (const auto& jg : j.at("groups")) {
      FaultPlanGroup g;
      g.set_id = jg.at("set").get<std::string>();
      g.bit = jg.at("bit").get<int>();
      g.domain = fault_domain_from_string(jg.at("domain").get<std::string>());
      g.elements = jg.at("elements").get<std::vector<long long>>();
      plan.groups.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    fail_data("malformed fault plan " + path.string() + ": " + e.what());
  }
  return plan;
}

}  // namespace seufi
