#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace seufi {

inline constexpr const char* kToolVersion = "0.1.0";
// RNG identity recorded in every plan/report for reproducibility.
inline constexpr const char* kRngName = "mt19937_64/splitmix64";

enum class ErrorCode : int {
  Config = 2,    // invalid configuration or arguments
  Data = 3,      // missing/malformed input data
  Internal = 4,  // invariant violation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorCode::Config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorCode::Data, msg); }
[[noreturn]] inline void fail_internal(const std::string& msg) { throw Error(ErrorCode::Internal, msg); }

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64)

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(uint64_t v);

// ---------------------------------------------------------------------------
// Deterministic RNG. Raw mt19937_64 output only; distributions are implemented
// here so results do not depend on the standard library vendor.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Substream seed for a named component of a campaign/model.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  uint64_t s = seed ^ fnv1a64(tag);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) fail_internal("uniform_int: empty range");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Box-Muller
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Standard normal conditioned on |z| <= limit (resampled).
  double truncated_normal(double limit = 2.0) {
    for (;;) {
      double z = normal();
      if (std::fabs(z) <= limit) return z;
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Work-sharing loop for independent items. jobs <= 0 selects the hardware
// concurrency. fn(i) must be safe to run concurrently for distinct i.

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn);

// ---------------------------------------------------------------------------
// Little-endian binary encoding (container blobs are LE by contract).

inline void put_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

inline uint32_t float_bits(float f) {
  uint32_t u;
  std::memcpy(&u, &f, sizeof(u));
  return u;
}

inline float bits_to_float(uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

// ---------------------------------------------------------------------------
// File helpers. Writes go through a temp file + rename so readers never see a
// partial artifact.

void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// Fixed-precision decimal formatting for CSV emission (locale-independent).
std::string format_fixed(double v, int digits);

}  // namespace seufi
