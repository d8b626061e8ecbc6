#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilip {

using Point = Eigen::VectorXd;

/// A finite metric space given by indexed points. Carries the declared
/// Lipschitz constant L and coarseness epsilon of the map sampled into it.
///
/// Implementations must be reentrant: dist() is called concurrently.
class DistanceOracle {
 public:
  explicit DistanceOracle(double lipschitz = 1.0, double epsilon = 0.0) {
    declare(lipschitz, epsilon);
  }
  virtual ~DistanceOracle() = default;

  virtual std::size_t size() const = 0;
  virtual double dist(std::size_t a, std::size_t b) const = 0;
  virtual std::string kind() const = 0;

  double lipschitz() const { return lipschitz_; }
  double epsilon() const { return epsilon_; }

  void declare(double lipschitz, double epsilon) {
    if (!(lipschitz > 0.0) || !std::isfinite(lipschitz))
      throw std::invalid_argument("Lipschitz constant must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("coarseness must be nonnegative");
    lipschitz_ = lipschitz;
    epsilon_ = epsilon;
  }

 private:
  double lipschitz_ = 1.0;
  double epsilon_ = 0.0;
};

/// Points in R^d (one per column) with dist = |x - y|^exponent.
/// exponent = 1 is the Euclidean metric, exponent in (0,1) a snowflake.
class EuclideanMetric final : public DistanceOracle {
 public:
  explicit EuclideanMetric(Eigen::MatrixXd points, double exponent = 1.0);

  std::size_t size() const override { return static_cast<std::size_t>(points_.cols()); }
  double dist(std::size_t a, std::size_t b) const override;
  std::string kind() const override { return exponent_ == 1.0 ? "euclidean" : "snowflake"; }

  const Eigen::MatrixXd& points() const { return points_; }
  double exponent() const { return exponent_; }

 private:
  Eigen::MatrixXd points_;
  double exponent_;
};

/// Explicit symmetric distance matrix.
class MatrixMetric final : public DistanceOracle {
 public:
  /// Validates shape, zero diagonal, symmetry and nonnegativity; the triangle
  /// inequality is checked to 1e-9 when `check_triangle` is set.
  explicit MatrixMetric(Eigen::MatrixXd d, bool check_triangle = true);

  std::size_t size() const override { return static_cast<std::size_t>(d_.rows()); }
  double dist(std::size_t a, std::size_t b) const override { return d_(a, b); }
  std::string kind() const override { return "matrix"; }

  const Eigen::MatrixXd& matrix() const { return d_; }

 private:
  Eigen::MatrixXd d_;
};

/// Largest amount by which d(a,c) exceeds d(a,b) + d(b,c). O(n^3).
double max_triangle_violation(const DistanceOracle& oracle);

// ---------------------------------------------------------------------------
// Nets

/// Subset of a point list that covers it at `radius` and is
/// `radius`-separated. Members are ids in the parent point set.
struct EpsNet {
  std::vector<std::size_t> members;
  double radius = 0.0;

  std::size_t size() const { return members.size(); }
};

/// Greedy scan: a point is admitted iff it is farther than eps from every
/// member admitted so far.
template <class Dist>
  requires std::invocable<Dist&, std::size_t, std::size_t>
EpsNet build_eps_net(std::span<const std::size_t> points, Dist&& dist, double eps) {
  if (points.empty()) throw std::invalid_argument("empty point set");
  if (!(eps >= 0.0)) throw std::invalid_argument("net radius must be nonnegative");
  EpsNet net;
  net.radius = eps;
  for (std::size_t p : points) {
    bool admit = true;
    for (std::size_t m : net.members) {
      if (!(dist(p, m) > eps)) {
        admit = false;
        break;
      }
    }
    if (admit) net.members.push_back(p);
  }
  return net;
}

EpsNet build_eps_net(std::span<const std::size_t> points, const DistanceOracle& oracle,
                     double eps);

/// Position (in net.members) of the nearest member; ties go to the lowest position.
template <class Dist>
  requires std::invocable<Dist&, std::size_t, std::size_t>
std::size_t snap_position(std::size_t point, const EpsNet& net, Dist&& dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.members.size(); ++i) {
    const double d = dist(point, net.members[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// Nearest net member (as a point id), lowest member index on ties.
std::size_t snap(std::size_t point, const EpsNet& net, const DistanceOracle& oracle);

/// (dist(z, w)) for w in Z.
Eigen::VectorXd kuratowski(std::size_t z, const EpsNet& Z, const DistanceOracle& oracle);

/// max_i |a[i] - b[i]| over contiguous arrays; 0 for n = 0. Uses AVX2 when the CPU has it.
double max_abs_difference(const double* a, const double* b, std::size_t n);

/// Sup-metric distance between two coordinate sequences.
template <class A, class B>
double sup_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() == 0) return 0.0;
  if constexpr (requires { a.derived().data(); b.derived().data(); a.derived().innerStride(); }) {
    if (a.derived().innerStride() == 1 && b.derived().innerStride() == 1 && (a.rows() == 1 || a.cols() == 1) &&
        (b.rows() == 1 || b.cols() == 1) && a.size() == b.size())
      return max_abs_difference(a.derived().data(), b.derived().data(), static_cast<std::size_t>(a.size()));
  }
  return (a.derived().array() - b.derived().array()).abs().maxCoeff();
}

// ---------------------------------------------------------------------------
// McShane extension

/// x -> min_i values(i) + L |x - sites.col(i)|, the largest L-Lipschitz
/// extension of the samples.
class McShaneExtension {
 public:
  /// Throws "inconsistent extension data" when the samples are not
  /// L-Lipschitz among themselves.
  McShaneExtension(Eigen::MatrixXd sites, Eigen::VectorXd values, double lipschitz);

  double operator()(const Point& x) const;

  double lipschitz() const { return lipschitz_; }

 private:
  Eigen::MatrixXd sites_;
  Eigen::VectorXd values_;
  double lipschitz_;
};

double mcshane_eval(const Eigen::MatrixXd& sites, const Eigen::VectorXd& values,
                    double lipschitz, const Point& x);

// ---------------------------------------------------------------------------
// Sampled map

/// f sampled on the grid {0, 2^-J, ..., 1}^k. Nodes are numbered row-major
/// (last coordinate fastest); values are point ids of a DistanceOracle.
class GridFunction {
 public:
  GridFunction(int k, int J, std::vector<std::size_t> values);

  int dim() const { return k_; }
  int level() const { return J_; }
  std::int64_t side_count() const { return side_; }
  double spacing() const { return std::ldexp(1.0, -J_); }
  std::size_t node_count() const { return values_.size(); }

  std::size_t value(std::size_t node) const { return values_[node]; }
  const std::vector<std::size_t>& values() const { return values_; }

  std::vector<std::int64_t> multi_index(std::size_t node) const;
  std::size_t node_index(std::span<const std::int64_t> index) const;
  Point node_point(std::size_t node) const;
  /// Euclidean distance between two nodes in [0,1]^k.
  double node_distance(std::size_t a, std::size_t b) const;

 private:
  int k_;
  int J_;
  std::int64_t side_;
  std::vector<std::size_t> values_;
};

struct CoarseLipschitzCheck {
  double worst_excess = -std::numeric_limits<double>::infinity();  // max dist - (L|x-y| + eps)
  std::size_t pairs = 0;
  bool exhaustive = true;
  bool holds(double tol = 1e-12) const { return worst_excess <= tol; }
};

/// Checks dist(f(x), f(y)) <= L|x - y| + eps over node pairs: exhaustively up
/// to `exhaustive_limit` nodes, otherwise on `sample_pairs` seeded pairs.
CoarseLipschitzCheck check_coarse_lipschitz(const GridFunction& f, const DistanceOracle& oracle,
                                            double lipschitz, double eps,
                                            std::size_t exhaustive_limit = 5000,
                                            std::size_t sample_pairs = 1000000,
                                            std::uint64_t seed = 1);

/// Fixes a map on rays from the cube center: points outside [0,1]^k go to the
/// boundary point on the ray through them, points inside are left alone.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> radial_project(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = x;
  const Scalar half(0.5);
  const Scalar offset = (y.array() - half).abs().maxCoeff();
  if (offset <= half) return y;
  y = (y.array() - half) / (Scalar(2) * offset) + half;
  return y;
}

}  // namespace bilip
