#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace seufi {

enum class FaultDomain { F32, I8, I32 };

const char* to_string(FaultDomain d);
FaultDomain fault_domain_from_string(const std::string& s);

inline int domain_width(FaultDomain d) { return d == FaultDomain::I8 ? 8 : 32; }

// One planned bit flip. bit_index counts from the LSB: fp32 has the sign at
// 31 and the exponent MSB at 30; int8 has the sign at 7; int32 at 31.
struct FaultSpec {
  std::string set_id;
  long long element_index = 0;
  int bit_index = 0;
  FaultDomain domain = FaultDomain::F32;
};

// XOR of one bit on the IEEE-754 binary32 pattern. Total: NaN in/out allowed.
float flip_bit_f32(float value, int bit_index);

// XOR on the two's-complement pattern of the given width (8 or 32); int8
// results are sign-extended back to int32.
int32_t flip_bit_int(int32_t value, int bit_index, int width);

// In-place single-element perturbation with bit-exact restore.
struct UndoToken {
  std::string set_id;
  long long element_index = 0;
  uint32_t original_bits = 0;
};

UndoToken apply_fault(ModelGraph& m, const FaultSpec& spec);
void undo_fault(ModelGraph& m, const UndoToken& token);

// Whether 1550-style sample counts are drawn per (set, bit) group or once per
// set across all target bits.
enum class PopulationUnit { SetBit, Set };

const char* to_string(PopulationUnit u);
PopulationUnit population_unit_from_string(const std::string& s);

struct FaultPlanGroup {
  std::string set_id;
  int bit = 0;
  FaultDomain domain = FaultDomain::F32;
  std::vector<long long> elements;  // distinct, ascending
};

struct FaultPlan {
  uint64_t seed = 0;
  std::string rng_name;
  uint64_t model_hash = 0;
  PopulationUnit unit = PopulationUnit::SetBit;
  std::vector<int> bits;
  std::vector<FaultPlanGroup> groups;

  size_t total_faults() const {
    size_t n = 0;
    for (const auto& g : groups) n += g.elements.size();
    return n;
  }
  std::vector<FaultSpec> flatten() const;
};

// Uniform sampling without replacement, deterministic in the seed (each
// group derives its own substream, so plans are stable under reordering).
// per_group_n greater than the population degenerates to exhaustive
// enumeration. With PopulationUnit::Set the sample is drawn over
// element x bit pairs of the whole set instead.
FaultPlan gen_fault_plan(const std::vector<ParamSetDesc>& sets, const std::vector<int>& bits,
                         long long per_group_n, uint64_t seed,
                         PopulationUnit unit = PopulationUnit::SetBit);

void save_fault_plan(const FaultPlan& plan, const std::filesystem::path& path);
FaultPlan load_fault_plan(const std::filesystem::path& path);

}  // namespace seufi
