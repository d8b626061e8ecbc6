#pragma once

#include "bilip/metric.hpp"

#include <cstdint>
#include <limits>

namespace bilip {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The Lipschitz surrogate p of a sampled map f.
///
/// The domain net X (grid nodes) and the target net Z (image points) are
/// greedy eps-nets. f' snaps f to Z on X, and p is the coordinatewise McShane
/// extension of the Kuratowski image of f' in the sup-metric over Z:
///
///   p(u)_w = min_{x in X} dist(f'(x), w) + L_p |pi(u) - x|
///
/// where pi is the radial projection onto [0,1]^k. Values are rows of length |Z|.
class SurrogateMap {
 public:
  /// Uses the oracle's declared L and eps. L_p is L when eps = 0 and
  /// max(4L, L + 3) otherwise.
  static SurrogateMap build(const GridFunction& f, const DistanceOracle& oracle);
  SurrogateMap(const GridFunction& f, const DistanceOracle& oracle, double lipschitz, double eps);

  int dim() const { return k_; }
  int level() const { return J_; }
  double lipschitz() const { return lp_; }
  double epsilon() const { return eps_; }

  const EpsNet& domain_net() const { return x_net_; }
  const EpsNet& target_net() const { return z_net_; }
  std::size_t target_size() const { return z_net_.size(); }
  /// Row r holds the Kuratowski coordinates of f'(X.members[r]).
  const RowMatrix& coords() const { return coords_; }
  /// Column r is the position of X.members[r] in [0,1]^k.
  const Eigen::MatrixXd& sites() const { return sites_; }
  /// f'(X.members[r]) as a point id.
  std::size_t f_prime(std::size_t row) const { return z_net_.members[fprime_pos_[row]]; }
  /// Row of `node` in coords(), or npos when the node is not in X.
  std::size_t net_row(std::size_t node) const { return node_row_[node]; }
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  /// p(u). Grid nodes of X return their stored coordinates exactly.
  Eigen::RowVectorXd evaluate(const Point& u) const;
  /// p at each column of `points` (k x m); row q of the result is p(points.col(q)).
  RowMatrix evaluate_batch(const Eigen::MatrixXd& points) const;
  /// The McShane formula evaluated directly, without the node lookup.
  Eigen::RowVectorXd evaluate_formula(const Point& u) const;

  /// Sup-metric distance between p(u) and p(v).
  double p_dist(const Point& u, const Point& v) const;

  /// p at a grid node.
  Eigen::RowVectorXd node_value(std::size_t node) const;
  /// Sup-metric distance between p at two grid nodes; O(1) when both are in X.
  double node_dist(std::size_t a, std::size_t b) const {
    const std::size_t ra = node_row_[a];
    const std::size_t rb = node_row_[b];
    if (ra != npos && rb != npos)
      return coords_(static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(fprime_pos_[rb]));
    return sup_distance(node_value(a), node_value(b));
  }

 private:
  void evaluate_into(const Eigen::MatrixXd& projected, RowMatrix& out, bool use_nodes) const;
  void evaluate_line(double t, Eigen::Ref<Eigen::RowVectorXd> out) const;
  std::size_t exact_node(const Point& y) const;

  int k_ = 1;
  int J_ = 0;
  std::int64_t side_ = 2;
  double lp_ = 1.0;
  double eps_ = 0.0;
  EpsNet x_net_;
  EpsNet z_net_;
  Eigen::MatrixXd sites_;  // k x |X|
  RowMatrix coords_;       // |X| x |Z|
  std::vector<std::size_t> fprime_pos_;
  std::vector<std::size_t> node_row_;
  RowMatrix off_net_values_;  // p at grid nodes outside X
  std::vector<std::size_t> off_net_row_;
  // k = 1: X rows sorted by coordinate.
  std::vector<double> line_sites_;
  std::vector<std::size_t> line_rows_;
};

// Fidelity certificates for the surrogate.

/// max over pairs z1, z2 in Z of |sup_w |d(z1,w) - d(z2,w)| - d(z1,z2)|.
/// Exhaustive when |Z| <= exhaustive_limit, otherwise over `sample_pairs` pairs.
double kuratowski_isometry_error(const SurrogateMap& p, const DistanceOracle& oracle,
                                 std::size_t exhaustive_limit = 1500,
                                 std::size_t sample_pairs = 20000, std::uint64_t seed = 7);

/// max over (sampled) X rows of the deviation of the McShane formula from the stored coordinates.
double extension_agreement_error(const SurrogateMap& p, std::size_t max_rows = 5000);

/// max over `pairs` seeded uniform pairs in [0,1]^k of p_dist(u,v) - L_p |u - v|.
double lipschitz_certificate(const SurrogateMap& p, std::size_t pairs, std::uint64_t seed);

/// max over grid nodes of sup_w |dist(f(x), w) - p(x)_w|.
double closeness_to_kuratowski(const SurrogateMap& p, const GridFunction& f,
                               const DistanceOracle& oracle);

/// (L+1)eps + eps + L_p eps: the bound on closeness_to_kuratowski, 7 eps for L = 1.
double closeness_bound(double lipschitz, double lp, double eps);

}  // namespace bilip
