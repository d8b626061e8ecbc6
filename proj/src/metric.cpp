#include "bilip/metric.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#if defined(__x86_64__) && defined(__GNUC__)
#include <immintrin.h>
#define BILIP_X86 1
#endif

namespace bilip {

namespace {

double max_abs_difference_scalar(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

#ifdef BILIP_X86
__attribute__((target("avx2"))) double max_abs_difference_avx2(const double* a, const double* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m0 = _mm256_setzero_pd();
  __m256d m1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    m0 = _mm256_max_pd(m0, _mm256_andnot_pd(sign, d0));
    m1 = _mm256_max_pd(m1, _mm256_andnot_pd(sign, d1));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_max_pd(m0, m1));
  double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  return std::max(m, max_abs_difference_scalar(a + i, b + i, n - i));
}
#endif

}  // namespace

double max_abs_difference(const double* a, const double* b, std::size_t n) {
#ifdef BILIP_X86
  static const bool avx2 = __builtin_cpu_supports("avx2");
  if (avx2) return max_abs_difference_avx2(a, b, n);
#endif
  return max_abs_difference_scalar(a, b, n);
}

EuclideanMetric::EuclideanMetric(Eigen::MatrixXd points, double exponent)
    : points_(std::move(points)), exponent_(exponent) {
  if (points_.cols() == 0) throw std::invalid_argument("empty point set");
  if (!(exponent_ > 0.0 && exponent_ <= 1.0))
    throw std::invalid_argument("snowflake exponent must lie in (0, 1]");
}

double EuclideanMetric::dist(std::size_t a, std::size_t b) const {
  const double d = (points_.col(static_cast<Eigen::Index>(a)) -
                    points_.col(static_cast<Eigen::Index>(b)))
                       .norm();
  return exponent_ == 1.0 ? d : std::pow(d, exponent_);
}

MatrixMetric::MatrixMetric(Eigen::MatrixXd d, bool check_triangle) : d_(std::move(d)) {
  if (d_.rows() == 0 || d_.rows() != d_.cols())
    throw std::invalid_argument("distance matrix must be square and nonempty");
  const Eigen::Index n = d_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d_(i, i) != 0.0) throw std::invalid_argument("distance matrix has nonzero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(d_(i, j)) || d_(i, j) < 0.0)
        throw std::invalid_argument("distance matrix has negative or non-finite entries");
      if (d_(i, j) != d_(j, i)) throw std::invalid_argument("distance matrix is not symmetric");
    }
  }
  if (check_triangle && max_triangle_violation(*this) > 1e-9)
    throw std::invalid_argument("distance matrix violates the triangle inequality");
}

double max_triangle_violation(const DistanceOracle& oracle) {
  const std::size_t n = oracle.size();
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double ab = oracle.dist(a, b);
      for (std::size_t c = 0; c < n; ++c)
        worst = std::max(worst, oracle.dist(a, c) - ab - oracle.dist(b, c));
    }
  return worst;
}

EpsNet build_eps_net(std::span<const std::size_t> points, const DistanceOracle& oracle,
                     double eps) {
  return build_eps_net(
      points, [&](std::size_t a, std::size_t b) { return oracle.dist(a, b); }, eps);
}

std::size_t snap(std::size_t point, const EpsNet& net, const DistanceOracle& oracle) {
  if (net.members.empty()) throw std::invalid_argument("empty net");
  const std::size_t pos =
      snap_position(point, net, [&](std::size_t a, std::size_t b) { return oracle.dist(a, b); });
  return net.members[pos];
}

Eigen::VectorXd kuratowski(std::size_t z, const EpsNet& Z, const DistanceOracle& oracle) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(Z.size()));
  for (std::size_t i = 0; i < Z.size(); ++i)
    e(static_cast<Eigen::Index>(i)) = oracle.dist(z, Z.members[i]);
  return e;
}

McShaneExtension::McShaneExtension(Eigen::MatrixXd sites, Eigen::VectorXd values,
                                   double lipschitz)
    : sites_(std::move(sites)), values_(std::move(values)), lipschitz_(lipschitz) {
  if (values_.size() == 0) throw std::invalid_argument("empty extension data");
  if (sites_.cols() != values_.size())
    throw std::invalid_argument("extension sites and values differ in length");
  if (!(lipschitz_ > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
  const Eigen::Index n = values_.size();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double bound = lipschitz_ * (sites_.col(i) - sites_.col(j)).norm();
      const double tol = 1e-12 * (1.0 + std::abs(values_(i)) + std::abs(values_(j)));
      if (std::abs(values_(i) - values_(j)) > bound + tol)
        throw std::invalid_argument("inconsistent extension data");
    }
}

double McShaneExtension::operator()(const Point& x) const {
  return ((sites_.colwise() - x).colwise().norm().transpose() * lipschitz_ + values_).minCoeff();
}

double mcshane_eval(const Eigen::MatrixXd& sites, const Eigen::VectorXd& values,
                    double lipschitz, const Point& x) {
  return McShaneExtension(sites, values, lipschitz)(x);
}

GridFunction::GridFunction(int k, int J, std::vector<std::size_t> values)
    : k_(k), J_(J), values_(std::move(values)) {
  if (k_ < 1) throw std::invalid_argument("dimension must be at least 1");
  if (J_ < 0 || J_ > 24) throw std::invalid_argument("resolution level out of range");
  side_ = (std::int64_t{1} << J_) + 1;
  std::size_t count = 1;
  for (int j = 0; j < k_; ++j) count *= static_cast<std::size_t>(side_);
  if (values_.size() != count)
    throw std::invalid_argument("grid function has " + std::to_string(values_.size()) +
                                " values, expected " + std::to_string(count));
}

std::vector<std::int64_t> GridFunction::multi_index(std::size_t node) const {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(k_));
  for (int j = k_ - 1; j >= 0; --j) {
    idx[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(node % static_cast<std::size_t>(side_));
    node /= static_cast<std::size_t>(side_);
  }
  return idx;
}

std::size_t GridFunction::node_index(std::span<const std::int64_t> index) const {
  std::size_t node = 0;
  for (int j = 0; j < k_; ++j) {
    const std::int64_t v = index[static_cast<std::size_t>(j)];
    if (v < 0 || v >= side_) throw std::out_of_range("grid index out of range");
    node = node * static_cast<std::size_t>(side_) + static_cast<std::size_t>(v);
  }
  return node;
}

Point GridFunction::node_point(std::size_t node) const {
  Point x(k_);
  const double h = spacing();
  for (int j = k_ - 1; j >= 0; --j) {
    x(j) = static_cast<double>(node % static_cast<std::size_t>(side_)) * h;
    node /= static_cast<std::size_t>(side_);
  }
  return x;
}

double GridFunction::node_distance(std::size_t a, std::size_t b) const {
  if (k_ == 1) return std::abs(static_cast<double>(a) - static_cast<double>(b)) * spacing();
  double sq = 0.0;
  const auto s = static_cast<std::size_t>(side_);
  for (int j = 0; j < k_; ++j) {
    const double d = static_cast<double>(a % s) - static_cast<double>(b % s);
    sq += d * d;
    a /= s;
    b /= s;
  }
  return std::sqrt(sq) * spacing();
}

CoarseLipschitzCheck check_coarse_lipschitz(const GridFunction& f, const DistanceOracle& oracle,
                                            double lipschitz, double eps,
                                            std::size_t exhaustive_limit,
                                            std::size_t sample_pairs, std::uint64_t seed) {
  CoarseLipschitzCheck out;
  const std::size_t n = f.node_count();
  auto visit = [&](std::size_t a, std::size_t b) {
    const double excess =
        oracle.dist(f.value(a), f.value(b)) - (lipschitz * f.node_distance(a, b) + eps);
    out.worst_excess = std::max(out.worst_excess, excess);
    ++out.pairs;
  };
  if (n <= exhaustive_limit) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) visit(a, b);
  } else {
    out.exhaustive = false;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t s = 0; s < sample_pairs; ++s) visit(pick(rng), pick(rng));
  }
  return out;
}

}  // namespace bilip
