#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace bilip {

/// Axis-aligned box [lo, hi].
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  double diameter() const { return (hi - lo).norm(); }
  double volume() const { return (hi - lo).cwiseMax(0.0).prod(); }
};

/// Euclidean distance between two boxes (0 when they touch or overlap).
double box_distance(const Box& a, const Box& b);

/// Cube of the family D^k_i at level l: coordinate j spans
/// [c_j 2^-l + s_j/3, (c_j + 1) 2^-l + s_j/3] where s_j is bit j of `shift`.
struct DyadicCube {
  std::uint32_t shift = 0;
  int level = 0;
  std::vector<std::int64_t> corner;

  int dim() const { return static_cast<int>(corner.size()); }
  bool shifted(int j) const { return (shift >> j) & 1u; }
  double side() const { return std::ldexp(1.0, -level); }
  /// Lower end of coordinate j in units of 1 / (3 * 2^level).
  std::int64_t scaled_lower(int j) const {
    return 3 * corner[static_cast<std::size_t>(j)] + (shifted(j) ? (std::int64_t{1} << level) : 0);
  }
  double lower(int j) const { return std::ldexp(static_cast<double>(scaled_lower(j)) / 3.0, -level); }
  double upper(int j) const { return lower(j) + side(); }

  Box box() const;
  Eigen::VectorXd center() const;
  /// "bits:level:c1,...,ck" with bit j of the shift at position j.
  std::string id() const;
  DyadicCube parent() const;
  std::vector<DyadicCube> children() const;
  /// Closed containment of a point.
  bool contains(const Eigen::VectorXd& x) const;
  /// Closed containment of a same-family cube (ancestor test).
  bool contains(const DyadicCube& other) const;

  friend bool operator==(const DyadicCube&, const DyadicCube&) = default;
  /// Level, then shift, then corner (lexicographic).
  friend bool operator<(const DyadicCube& a, const DyadicCube& b) {
    if (a.level != b.level) return a.level < b.level;
    if (a.shift != b.shift) return a.shift < b.shift;
    return a.corner < b.corner;
  }
};

struct DyadicCubeHash {
  std::size_t operator()(const DyadicCube& q) const;
};

/// Parses an id produced by DyadicCube::id().
DyadicCube parse_cube_id(const std::string& id);

/// Cubes of one family and level. Clipped: those contained in [0,1]^k.
/// Unclipped: those whose interior meets [0,1]^k.
std::vector<DyadicCube> cubes_at(int k, std::uint32_t shift, int level, bool clip);

/// 0 < dist(Q1, Q2) <= 2 diam for two cubes of one family and level.
bool semi_adjacent(const DyadicCube& a, const DyadicCube& b);
/// Same test for boxes of equal diameter.
bool semi_adjacent(const Box& a, const Box& b);

/// Corner offsets d with Q + d semi-adjacent to Q, in lexicographic order.
const std::vector<std::vector<std::int64_t>>& semi_adjacent_offsets(int k);
std::vector<DyadicCube> semi_adjacent_neighbors(const DyadicCube& q);
/// C(k): number of semi-adjacent cubes of any cube.
std::size_t semi_adjacency_degree(int k);

/// Box with the same center and 7 times the side.
Box dilate7(const DyadicCube& q);

/// Finest cube over all 2^k families whose closed box contains the ball B(x, r);
/// ties at one level go to the lowest family.
DyadicCube find_containing_cube(const Eigen::VectorXd& x, double r);

// ---------------------------------------------------------------------------
// Grid nodes {0, ..., 2^J}^k versus cubes, in exact integer arithmetic.

/// Inclusive per-coordinate node index ranges; empty when some lo > hi.
struct NodeRange {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;

  bool empty() const;
  std::size_t count() const;
  bool contains(const std::vector<std::int64_t>& index) const;
};

/// Nodes of the grid at level J in the closed cube (or its 7-fold dilation).
NodeRange node_range(const DyadicCube& q, int J, bool dilated = false);

/// The cube of the family and level owning node `index` under the
/// half-open (a, b] convention.
DyadicCube owner_cube(const std::vector<std::int64_t>& index, int J, std::uint32_t shift, int level);

/// Box with integer coordinates in units of 1 / (3 * 2^J).
struct ScaledBox {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;
};

/// The cube (or 7Q) in units of 1 / (3 * 2^J); requires level <= J.
ScaledBox scaled_box(const DyadicCube& q, int J, bool dilated);

/// Lebesgue measure of the union of the boxes intersected with [0,1]^k; exact
/// up to the final conversion to double.
double union_measure(const std::vector<ScaledBox>& boxes, int k, int J);

}  // namespace bilip
