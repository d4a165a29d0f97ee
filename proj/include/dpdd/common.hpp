#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dpdd {

/// Sample set stored one point per row (N x d).
using Points = Eigen::MatrixXd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or input-format violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Failure inside a numerical routine (non-finite input, solver breakdown,
/// degenerate reconstruction).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Sequence of empirical distributions. Row i of every snapshot belongs to
/// the same underlying unit (path, metro), so consecutive snapshots supply
/// genuine transition pairs.
struct DistributionPanel {
  std::vector<Points> snapshots;

  std::size_t size() const { return snapshots.size(); }
  bool empty() const { return snapshots.empty(); }
  int dim() const { return snapshots.empty() ? 0 : static_cast<int>(snapshots.front().cols()); }
  const Points& operator[](std::size_t t) const { return snapshots[t]; }

  /// True when every snapshot has the same number of rows.
  bool linked() const {
    for (const auto& s : snapshots)
      if (s.rows() != snapshots.front().rows()) return false;
    return true;
  }
};

// Seeding. Every random draw in the project comes from a generator created
// by make_rng(base, stream, index) so runs replay exactly.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(splitmix64(base ^ h) + index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t base, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

/// Unbiased sample standard deviation.
inline double sample_stddev(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = x.size();
  if (n < 2) return 0.0;
  const double m = x.mean();
  return std::sqrt((x.array() - m).square().sum() / static_cast<double>(n - 1));
}

}  // namespace dpdd
