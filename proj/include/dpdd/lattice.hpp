#pragma once

#include <string>
#include <vector>

#include "dpdd/common.hpp"

namespace dpdd {

/// Uniform point lattice over an axis-aligned box. Point ordering is
/// row-major: the last axis varies fastest.
struct Lattice {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<Index> counts;

  Lattice() = default;
  Lattice(Eigen::VectorXd lo, Eigen::VectorXd hi, std::vector<Index> n)
      : lower(std::move(lo)), upper(std::move(hi)), counts(std::move(n)) {
    if (lower.size() != upper.size() || static_cast<std::size_t>(lower.size()) != counts.size() || counts.empty())
      throw InvalidArgument("lattice: inconsistent dimensions");
    for (std::size_t a = 0; a < counts.size(); ++a) {
      if (counts[a] < 2) throw InvalidArgument("lattice: need at least 2 points per axis");
      if (!(upper(a) > lower(a))) throw InvalidArgument("lattice: empty extent on axis " + std::to_string(a));
    }
  }

  int dim() const { return static_cast<int>(counts.size()); }

  Index size() const {
    Index n = 1;
    for (Index c : counts) n *= c;
    return n;
  }

  double spacing(int axis) const { return (upper(axis) - lower(axis)) / static_cast<double>(counts[axis] - 1); }

  double coordinate(int axis, Index i) const {
    return i + 1 == counts[axis] ? upper(axis) : lower(axis) + static_cast<double>(i) * spacing(axis);
  }

  Eigen::VectorXd axis_coordinates(int axis) const {
    Eigen::VectorXd c(counts[axis]);
    for (Index i = 0; i < counts[axis]; ++i) c(i) = coordinate(axis, i);
    return c;
  }

  double cell_measure() const {
    double m = 1.0;
    for (int a = 0; a < dim(); ++a) m *= spacing(a);
    return m;
  }

  Points points() const {
    const Index n = size();
    Points p(n, dim());
    for (Index k = 0; k < n; ++k) {
      Index rem = k;
      for (int a = dim() - 1; a >= 0; --a) {
        p(k, a) = coordinate(a, rem % counts[a]);
        rem /= counts[a];
      }
    }
    return p;
  }
};

}  // namespace dpdd
