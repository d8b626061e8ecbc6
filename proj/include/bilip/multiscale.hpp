#pragma once

#include "bilip/grid.hpp"
#include "bilip/surrogate.hpp"

#include <functional>
#include <unordered_map>

namespace bilip {

struct QuadratureConfig {
  int m = 16;         // parameters per segment for the triple sum
  int n_dir = 16;     // line directions per cube (k >= 2)
  int n_off = 8;      // offsets per direction (k >= 2)
  std::uint64_t seed = 1;

  void validate() const;
};

/// dist(p(x),p(y)) + dist(p(y),p(z)) - dist(p(x),p(z)), clamped at 0.
double delta1(const SurrogateMap& p, const Point& x, const Point& y, const Point& z);

/// beta over the segment [a, b]:
///   beta^2 = diam^-4 sum_{i<j<l} delta1(t_i, t_j, t_l) h^3
/// with t_i = a + (i + 1/2) h (b - a) / diam and h = diam / m.
double beta_interval(const SurrogateMap& p, const Point& a, const Point& b, const QuadratureConfig& cfg);

/// beta^2 from the values of p at the m quadrature parameters (rows).
double beta_squared_from_values(const RowMatrix& values, double diam);

/// beta^k(Q) over 7Q. For k = 1 this is beta_interval over 7Q; for k >= 2 a
/// seeded Monte Carlo average over lines through 7Q with chord >= side(Q).
double beta_cube(const SurrogateMap& p, const DyadicCube& q, const QuadratureConfig& cfg);

/// Per-cube seed derived from the config seed and the cube id.
std::uint64_t cube_seed(std::uint64_t seed, const DyadicCube& q);

struct BetaEntry {
  DyadicCube cube;
  double beta = 0.0;
  double weight() const;  // beta^2 side^k
};

struct BetaTable {
  int k = 1;
  int J = 0;
  QuadratureConfig cfg;
  std::vector<BetaEntry> entries;  // levels 0..J, families in order, cubes in order
  bool complete = true;            // false when computation was stopped early
  double partial_weight = 0.0;     // lower bound on the weight of unfinished cubes

  /// Looks up a cube; throws when it is not in the table.
  double beta(const DyadicCube& q) const;
  void reindex();

 private:
  std::unordered_map<DyadicCube, std::size_t, DyadicCubeHash> index_;
};

/// Returns true to stop a long computation.
using StopToken = std::function<bool()>;

/// beta^k for every clipped cube of every family at levels 0..J, computed coarse to fine.
BetaTable compute_beta_table(const SurrogateMap& p, int J, const QuadratureConfig& cfg,
                             const StopToken& stop = {});

struct CarlesonSums {
  double total = 0.0;
  std::vector<double> per_family;  // indexed by shift bits
  std::vector<double> per_level;
};

/// Sum of beta^2 side^k over the table, in table order.
CarlesonSums carleson_sum(const BetaTable& table);

// ---------------------------------------------------------------------------
// Dyadic chains on [0,1].

/// v + r t mod 1.
double psi(double v, double r, double t);

/// delta1 at v + r a, v + r (a + b)/2, v + r b. Points are not wrapped; p
/// extends past the unit interval through the radial projection.
double delta_dyadic(const SurrogateMap& p, double a, double b, double v, double r);

struct ChainCheck {
  double lhs = 0.0;    // delta1(x, y, z)
  double sum = 0.0;    // sum of delta_dyadic over the chain
  double slack = 0.0;  // 8 L_p r 2^-J'
  std::size_t terms = 0;
  bool holds() const { return lhs <= sum + slack; }
};

/// Chain bound on I = [a, b] (dyadic, inside [0,1]) with x = v + r a, z = v + r b
/// and y in [x, z]. Throws when y lies outside.
ChainCheck chain_bound_check(const SurrogateMap& p, double a, double b, double v, double r,
                             double y, int J_trunc);

/// Sum of delta_dyadic over dyadic I' in [0,1] with |I'| >= 2^-J'.
double telescoping_sum(const SurrogateMap& p, double v, double r, int J_trunc);

}  // namespace bilip
