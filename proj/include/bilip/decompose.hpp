#pragma once

#include "bilip/grid.hpp"
#include "bilip/surrogate.hpp"

#include <set>

namespace bilip {

inline constexpr int RES_E2 = -1;
inline constexpr int RES_B1 = -2;

/// Scale and coarseness parameters of a decomposition; alpha' = 10 alpha.
struct DecomposeParams {
  double alpha = 0.01;
  double eps = 0.0;

  double alpha_prime() const { return 10.0 * alpha; }
  /// alpha'|x - y| >= 10 eps.
  bool testable(double len) const { return alpha_prime() * len >= 10.0 * eps; }
  /// (alpha'/10)|x - y|.
  double lower_bound(double len) const { return alpha_prime() / 10.0 * len; }
};

/// ceil(4 / alpha').
int default_chain_threshold(double alpha);

struct E1Entry {
  DyadicCube q1;
  DyadicCube q2;
  std::size_t x1 = 0;  // witness nodes
  std::size_t x2 = 0;
  double length = 0.0;
  double image_diam = 0.0;
  double endpoint_dist = 0.0;
};

struct E2Segment {
  DyadicCube q1;
  DyadicCube q2;
  std::size_t x1 = 0;
  std::size_t x2 = 0;
  double length = 0.0;
  double image_diam = 0.0;
};

struct Classification {
  std::vector<E1Entry> e1;               // one per ordered cube pair, in scan order
  std::size_t e2_count = 0;              // distinct node pairs
  std::vector<E2Segment> e2_sample;      // the first few segments found
  std::vector<std::uint8_t> e2_marks;    // per node
  std::size_t pairs_scanned = 0;
};

/// Scans every level l <= J, family, clipped Q1 and semi-adjacent Q2 over node
/// pairs (x1, x2) in the closed cubes. With len = |x1 - x2|, e = dist(p(x1), p(x2))
/// and D the image diameter of the segment sampled at spacing 2^-J, a testable pair
/// is an E1 witness when D >= alpha' len and e <= (alpha'/10) len, and an E2
/// segment when D <= alpha' len. Nodes within 2^-J-1 of an E2 segment are marked.
Classification classify(const SurrogateMap& p, const GridFunction& f, const DecomposeParams& params,
                        std::size_t e2_sample_cap = 1000);

std::vector<E1Entry> classify_E1(const SurrogateMap& p, const GridFunction& f, const DecomposeParams& params);
Classification classify_E2(const SurrogateMap& p, const GridFunction& f, const DecomposeParams& params);

/// Distinct Q1 cubes of the entries.
std::set<DyadicCube> e1_cubes(const std::vector<E1Entry>& e1);

/// E1 cubes with at least N strictly larger E1 cubes in their ancestor chain.
std::set<DyadicCube> compute_B(const std::vector<E1Entry>& e1, int N);

struct B1Marks {
  std::vector<std::uint8_t> marks;  // per node
  double measure = 0.0;             // Lebesgue measure of the union of 7Q, clipped to [0,1]^k
};

B1Marks mark_B1(const std::set<DyadicCube>& B, const GridFunction& f);

/// A retained E1 pair: no piece may meet the grid nodes of both cubes.
struct Constraint {
  DyadicCube q1;
  DyadicCube q2;
  friend bool operator<(const Constraint& a, const Constraint& b) {
    if (!(a.q1 == b.q1)) return a.q1 < b.q1;
    return a.q2 < b.q2;
  }
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// E1 pairs whose first cube is not in B, sorted coarse to fine by cube order.
std::vector<Constraint> retained_constraints(const std::vector<E1Entry>& e1, const std::set<DyadicCube>& B);

struct DecompositionLabels {
  std::vector<int> label;  // per node: 1..M, RES_E2 or RES_B1
  int M = 0;
  int N = 0;
  std::vector<std::size_t> piece_sizes;  // index i holds the size of piece i + 1
  std::size_t residual_e2 = 0;
  std::size_t residual_b1 = 0;
};

/// Top-down refinement: all non-residual nodes start in one piece; for each
/// constraint in order, every piece meeting both cubes splits into its part in
/// Q1 and the rest. Pieces are renumbered 1..M by first node.
DecompositionLabels label_pieces(const std::vector<Constraint>& constraints, const GridFunction& f,
                                 const std::vector<std::uint8_t>& e2_marks,
                                 const std::vector<std::uint8_t>& b1_marks, int N);

/// Number of constraints whose two cubes share a piece id.
std::size_t separation_violations(const std::vector<Constraint>& constraints, const GridFunction& f,
                                  const std::vector<int>& label);

/// Largest number of cubes of `cubes` in the owner chain (levels 0..J, one
/// family) of any non-residual node.
int max_chain_count(const std::set<DyadicCube>& cubes, const GridFunction& f, const std::vector<int>& label);

struct PairViolation {
  std::size_t x = 0;
  std::size_t y = 0;
  std::string kind;  // "lower_p", "lower_f" or "upper"
  double margin = 0.0;
};

struct VerificationReport {
  bool exhaustive = true;
  std::size_t pairs = 0;
  std::size_t testable_pairs = 0;
  std::size_t lower_p_violations = 0;
  std::size_t lower_f_violations = 0;
  std::size_t upper_violations = 0;
  double worst_lower_p_margin = std::numeric_limits<double>::infinity();
  double worst_lower_f_margin = std::numeric_limits<double>::infinity();
  double worst_upper_margin = std::numeric_limits<double>::infinity();
  std::vector<PairViolation> examples;  // at most 20

  bool passed() const { return lower_p_violations + lower_f_violations + upper_violations == 0; }
};

/// For same-piece testable pairs: dist(p(x),p(y)) >= (alpha'/10)|x-y| and
/// dist(f(x),f(y)) >= (alpha'/10)|x-y| - 14 eps. For all pairs:
/// dist(f(x),f(y)) <= L|x-y| + eps (to a relative 1e-12). Exhaustive up to
/// `exhaustive_limit` nodes, otherwise `sample_pairs` seeded pairs.
VerificationReport verify_pieces(const DecompositionLabels& labels, const GridFunction& f, const SurrogateMap& p,
                                 const DistanceOracle& oracle, const DecomposeParams& params, double lipschitz,
                                 std::size_t exhaustive_limit = 5000, std::size_t sample_pairs = 1000000,
                                 std::uint64_t seed = 1);

/// log2 of the bound 2^(C(k) N) on the number of pieces.
double log2_piece_bound(int k, int N);

}  // namespace bilip
