#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace peg {

struct BoundViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ClearingMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateScenarioSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleProblem : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SubproblemFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CommitmentMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IterationLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  std::vector<std::string> field_errors;
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), field_errors(std::move(errors)) {}

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out = "config invalid:";
    for (const auto& e : errors) out += "\n  " + e;
    return out;
  }
};

enum class SolveStatus { Converged, IterationLimit };

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// One master seed, independent engine per named purpose: adding a consumer
// never shifts the draws any other consumer sees.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view label) {
  std::seed_seq seq{seed, fnv1a(label)};
  return std::mt19937_64(seq);
}

}  // namespace peg
