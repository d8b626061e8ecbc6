#include "bilip/surrogate.hpp"

#include "bilip/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_map>

namespace bilip {

namespace {

constexpr std::size_t kChunk = 64;

std::size_t chunks(std::size_t n) { return (n + kChunk - 1) / kChunk; }

}  // namespace

SurrogateMap SurrogateMap::build(const GridFunction& f, const DistanceOracle& oracle) {
  return SurrogateMap(f, oracle, oracle.lipschitz(), oracle.epsilon());
}

SurrogateMap::SurrogateMap(const GridFunction& f, const DistanceOracle& oracle, double lipschitz,
                           double eps)
    : k_(f.dim()), J_(f.level()), side_(f.side_count()), eps_(eps) {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
  if (!(eps >= 0.0)) throw std::invalid_argument("coarseness must be nonnegative");
  lp_ = eps > 0.0 ? std::max(4.0 * lipschitz, lipschitz + 3.0) : lipschitz;

  const std::size_t n = f.node_count();
  std::vector<std::size_t> nodes(n);
  std::iota(nodes.begin(), nodes.end(), std::size_t{0});
  if (eps == 0.0) {
    x_net_.members = nodes;
  } else {
    x_net_ = build_eps_net(
        nodes, [&](std::size_t a, std::size_t b) { return f.node_distance(a, b); }, eps);
  }
  x_net_.radius = eps;

  std::vector<std::size_t> images;
  {
    std::vector<bool> seen(oracle.size(), false);
    for (std::size_t v : f.values()) {
      if (v >= oracle.size()) throw std::out_of_range("grid value is not a point of the metric");
      if (!seen[v]) {
        seen[v] = true;
        images.push_back(v);
      }
    }
  }
  z_net_ = build_eps_net(images, oracle, eps);

  const std::size_t nx = x_net_.size();
  const std::size_t nz = z_net_.size();
  std::unordered_map<std::size_t, std::size_t> z_pos;
  for (std::size_t i = 0; i < nz; ++i) z_pos.emplace(z_net_.members[i], i);

  node_row_.assign(n, npos);
  sites_.resize(k_, static_cast<Eigen::Index>(nx));
  fprime_pos_.resize(nx);
  for (std::size_t r = 0; r < nx; ++r) {
    const std::size_t node = x_net_.members[r];
    node_row_[node] = r;
    sites_.col(static_cast<Eigen::Index>(r)) = f.node_point(node);
  }
  parallel_for(chunks(nx), [&](std::size_t c) {
    for (std::size_t r = c * kChunk; r < std::min(nx, (c + 1) * kChunk); ++r) {
      const std::size_t v = f.value(x_net_.members[r]);
      const auto it = z_pos.find(v);
      fprime_pos_[r] =
          it != z_pos.end()
              ? it->second
              : snap_position(v, z_net_,
                              [&](std::size_t a, std::size_t b) { return oracle.dist(a, b); });
    }
  });

  coords_.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nz));
  parallel_for(chunks(nx), [&](std::size_t c) {
    for (std::size_t r = c * kChunk; r < std::min(nx, (c + 1) * kChunk); ++r) {
      const std::size_t src = z_net_.members[fprime_pos_[r]];
      for (std::size_t w = 0; w < nz; ++w)
        coords_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(w)) =
            oracle.dist(src, z_net_.members[w]);
    }
  });

  // Each coordinate is L_p-Lipschitz on X iff dist(f'(x), f'(y)) <= L_p |x - y|.
  std::vector<char> bad(chunks(nx), 0);
  parallel_for(chunks(nx), [&](std::size_t c) {
    for (std::size_t r = c * kChunk; r < std::min(nx, (c + 1) * kChunk); ++r)
      for (std::size_t s = r + 1; s < nx; ++s) {
        const double d = coords_(static_cast<Eigen::Index>(r),
                                 static_cast<Eigen::Index>(fprime_pos_[s]));
        const double bound =
            lp_ * f.node_distance(x_net_.members[r], x_net_.members[s]);
        if (d > bound + 1e-12 * (1.0 + d)) {
          bad[c] = 1;
          return;
        }
      }
  });
  if (std::any_of(bad.begin(), bad.end(), [](char b) { return b != 0; }))
    throw std::invalid_argument("inconsistent extension data");

  if (k_ == 1) {
    line_sites_.resize(nx);
    for (std::size_t r = 0; r < nx; ++r) line_sites_[r] = sites_(0, static_cast<Eigen::Index>(r));
  }

  if (nx < n) {
    off_net_row_.assign(n, npos);
    std::vector<std::size_t> rest;
    for (std::size_t v = 0; v < n; ++v)
      if (node_row_[v] == npos) {
        off_net_row_[v] = rest.size();
        rest.push_back(v);
      }
    Eigen::MatrixXd pts(k_, static_cast<Eigen::Index>(rest.size()));
    for (std::size_t i = 0; i < rest.size(); ++i)
      pts.col(static_cast<Eigen::Index>(i)) = f.node_point(rest[i]);
    evaluate_into(pts, off_net_values_, false);
  }
}

void SurrogateMap::evaluate_line(double t, Eigen::Ref<Eigen::RowVectorXd> out) const {
  // With L_p-Lipschitz data on a line only the two sites around t can attain the minimum.
  const auto it = std::upper_bound(line_sites_.begin(), line_sites_.end(), t);
  const std::size_t j = it == line_sites_.begin() ? 0 : static_cast<std::size_t>(it - line_sites_.begin()) - 1;
  const auto rj = static_cast<Eigen::Index>(j);
  out = coords_.row(rj).array() + lp_ * std::abs(t - line_sites_[j]);
  if (j + 1 < line_sites_.size())
    out = out.array().min(coords_.row(rj + 1).array() + lp_ * (line_sites_[j + 1] - t));
}

std::size_t SurrogateMap::exact_node(const Point& y) const {
  std::size_t node = 0;
  for (int i = 0; i < k_; ++i) {
    const double s = std::ldexp(y(i), J_);
    if (s != std::floor(s) || s < 0.0 || s > static_cast<double>(side_ - 1)) return npos;
    node = node * static_cast<std::size_t>(side_) + static_cast<std::size_t>(s);
  }
  return node;
}

void SurrogateMap::evaluate_into(const Eigen::MatrixXd& points, RowMatrix& out,
                                 bool use_nodes) const {
  const auto m = static_cast<std::size_t>(points.cols());
  const auto nz = static_cast<Eigen::Index>(z_net_.size());
  out.resize(static_cast<Eigen::Index>(m), nz);
  parallel_for(chunks(m), [&](std::size_t c) {
    Eigen::RowVectorXd dist(sites_.cols());
    for (std::size_t q = c * kChunk; q < std::min(m, (c + 1) * kChunk); ++q) {
      const auto qi = static_cast<Eigen::Index>(q);
      const Point y = radial_project(points.col(qi));
      if (use_nodes) {
        const std::size_t node = exact_node(y);
        if (node != npos) {
          out.row(qi) = node_value(node);
          continue;
        }
      }
      if (k_ == 1) {
        evaluate_line(y(0), out.row(qi));
        continue;
      }
      dist = (sites_.colwise() - y).colwise().norm() * lp_;
      auto row = out.row(qi);
      row = coords_.row(0).array() + dist(0);
      for (Eigen::Index i = 1; i < sites_.cols(); ++i)
        row = row.array().min(coords_.row(i).array() + dist(i));
    }
  });
}

Eigen::RowVectorXd SurrogateMap::evaluate(const Point& u) const {
  if (u.size() != k_) throw std::invalid_argument("point has wrong dimension");
  RowMatrix out;
  evaluate_into(u, out, true);
  return out.row(0);
}

RowMatrix SurrogateMap::evaluate_batch(const Eigen::MatrixXd& points) const {
  if (points.rows() != k_) throw std::invalid_argument("points have wrong dimension");
  RowMatrix out;
  evaluate_into(points, out, true);
  return out;
}

Eigen::RowVectorXd SurrogateMap::evaluate_formula(const Point& u) const {
  if (u.size() != k_) throw std::invalid_argument("point has wrong dimension");
  RowMatrix out;
  evaluate_into(u, out, false);
  return out.row(0);
}

double SurrogateMap::p_dist(const Point& u, const Point& v) const {
  Eigen::MatrixXd pts(k_, 2);
  pts.col(0) = u;
  pts.col(1) = v;
  RowMatrix vals;
  evaluate_into(pts, vals, true);
  return sup_distance(vals.row(0), vals.row(1));
}

Eigen::RowVectorXd SurrogateMap::node_value(std::size_t node) const {
  const std::size_t r = node_row_.at(node);
  if (r != npos) return coords_.row(static_cast<Eigen::Index>(r));
  return off_net_values_.row(static_cast<Eigen::Index>(off_net_row_[node]));
}

double kuratowski_isometry_error(const SurrogateMap& p, const DistanceOracle& oracle,
                                 std::size_t exhaustive_limit, std::size_t sample_pairs,
                                 std::uint64_t seed) {
  const auto& Z = p.target_net().members;
  const std::size_t nz = Z.size();
  RowMatrix K(static_cast<Eigen::Index>(nz), static_cast<Eigen::Index>(nz));
  parallel_for(nz, [&](std::size_t a) {
    for (std::size_t b = 0; b < nz; ++b)
      K(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = oracle.dist(Z[a], Z[b]);
  });
  auto pair_error = [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    return std::abs(sup_distance(K.row(ia), K.row(ib)) - K(ia, ib));
  };
  if (nz <= exhaustive_limit) {
    std::vector<double> worst(nz, 0.0);
    parallel_for(nz, [&](std::size_t a) {
      for (std::size_t b = a + 1; b < nz; ++b) worst[a] = std::max(worst[a], pair_error(a, b));
    });
    return nz == 0 ? 0.0 : *std::max_element(worst.begin(), worst.end());
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, nz - 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs(sample_pairs);
  for (auto& pr : pairs) pr = {pick(rng), pick(rng)};
  std::vector<double> err(sample_pairs, 0.0);
  parallel_for(sample_pairs, [&](std::size_t s) { err[s] = pair_error(pairs[s].first, pairs[s].second); });
  return sample_pairs == 0 ? 0.0 : *std::max_element(err.begin(), err.end());
}

double extension_agreement_error(const SurrogateMap& p, std::size_t max_rows) {
  const std::size_t nx = p.domain_net().size();
  const std::size_t stride = nx <= max_rows ? 1 : (nx + max_rows - 1) / max_rows;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < nx; r += stride) rows.push_back(r);
  std::vector<double> err(rows.size(), 0.0);
  parallel_for(rows.size(), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    const Point x = p.sites().col(r);
    err[i] = sup_distance(p.evaluate_formula(x), p.coords().row(r));
  });
  return err.empty() ? 0.0 : *std::max_element(err.begin(), err.end());
}

double lipschitz_certificate(const SurrogateMap& p, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int k = p.dim();
  Eigen::MatrixXd pts(k, static_cast<Eigen::Index>(2 * pairs));
  for (Eigen::Index c = 0; c < pts.cols(); ++c)
    for (int j = 0; j < k; ++j) pts(j, c) = unit(rng);
  const RowMatrix vals = p.evaluate_batch(pts);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < pairs; ++s) {
    const auto a = static_cast<Eigen::Index>(2 * s);
    const double excess = sup_distance(vals.row(a), vals.row(a + 1)) -
                          p.lipschitz() * (pts.col(a) - pts.col(a + 1)).norm();
    worst = std::max(worst, excess);
  }
  return worst;
}

double closeness_to_kuratowski(const SurrogateMap& p, const GridFunction& f,
                               const DistanceOracle& oracle) {
  const std::size_t n = f.node_count();
  const auto& Z = p.target_net().members;
  std::vector<double> worst(chunks(n), 0.0);
  parallel_for(chunks(n), [&](std::size_t c) {
    Eigen::RowVectorXd ft(static_cast<Eigen::Index>(Z.size()));
    for (std::size_t v = c * kChunk; v < std::min(n, (c + 1) * kChunk); ++v) {
      for (std::size_t w = 0; w < Z.size(); ++w)
        ft(static_cast<Eigen::Index>(w)) = oracle.dist(f.value(v), Z[w]);
      worst[c] = std::max(worst[c], sup_distance(ft, p.node_value(v)));
    }
  });
  return worst.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
}

double closeness_bound(double lipschitz, double lp, double eps) {
  return (lipschitz + 1.0) * eps + eps + lp * eps;
}

}  // namespace bilip
