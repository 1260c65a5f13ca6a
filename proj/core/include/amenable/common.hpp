#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace amenable {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or raster shapes. Carries the offending layer index
/// when raised from inside a network (-1 otherwise).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what, int layer = -1)
      : Error(layer >= 0 ? "layer " + std::to_string(layer) + ": " + what : what),
        layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// A loss, reward or gradient became NaN/inf. `sample` is the offending
/// sample index within the batch, or -1 when not attributable.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, long sample = -1)
      : Error(sample >= 0 ? what + " (sample " + std::to_string(sample) + ")" : what),
        sample_(sample) {}
  long sample() const noexcept { return sample_; }

 private:
  long sample_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required file or checkpoint is missing or unreadable.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over a label, so stream names are stable across platforms.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives a child seed from a master seed and a label ("data", "controller",
/// "episode/3", ...). All module generators in a run come from one master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ hash_label(label)) + index);
}

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(master, label, index));
}

/// Uniform double in [0,1) from the raw 64-bit output; avoids the
/// implementation-defined std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Integer uniform in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Lemire's multiply-shift with rejection keeps it unbiased and portable.
  const std::uint64_t range = n;
  __uint128_t m = static_cast<__uint128_t>(rng()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<__uint128_t>(rng()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

/// Standard normal via Box-Muller on uniform01; portable across standard libraries.
double standard_normal(Rng& rng);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace amenable
