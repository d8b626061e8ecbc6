#include "bilip/multiscale.hpp"

#include "bilip/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace bilip {

void QuadratureConfig::validate() const {
  if (m < 4) throw std::invalid_argument("quadrature needs m >= 4");
  if (n_dir < 1 || n_off < 1) throw std::invalid_argument("sample counts must be positive");
}

double delta1(const SurrogateMap& p, const Point& x, const Point& y, const Point& z) {
  Eigen::MatrixXd pts(x.size(), 3);
  pts << x, y, z;
  const RowMatrix v = p.evaluate_batch(pts);
  const double d = sup_distance(v.row(0), v.row(1)) + sup_distance(v.row(1), v.row(2)) -
                   sup_distance(v.row(0), v.row(2));
  return std::max(d, 0.0);
}

double beta_squared_from_values(const RowMatrix& values, double diam) {
  if (!(diam > 0.0)) return 0.0;
  const Eigen::Index m = values.rows();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) D(i, j) = D(j, i) = sup_distance(values.row(i), values.row(j));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      for (Eigen::Index l = j + 1; l < m; ++l) sum += std::max(D(i, j) + D(j, l) - D(i, l), 0.0);
  // diam^-4 * sum * h^3 with h = diam / m
  const double md = static_cast<double>(m);
  return sum / (md * md * md * diam);
}

namespace {

Eigen::MatrixXd segment_params(const Point& a, const Point& b, int m) {
  Eigen::MatrixXd pts(a.size(), m);
  for (int i = 0; i < m; ++i) pts.col(i) = a + (b - a) * ((i + 0.5) / m);
  return pts;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Lower bound on beta^2 side^k from the chords processed so far, and whether all were processed.
struct CubeProgress {
  double weight = 0.0;
  bool done = true;
};

double ball_volume(int d, double radius) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) * std::pow(radius, d);
}

// Parameter interval of x0 + t g inside the box, or an empty one.
std::pair<double, double> clip_line(const Eigen::VectorXd& x0, const Eigen::VectorXd& g, const Box& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    if (g(j) == 0.0) {
      if (x0(j) < box.lo(j) || x0(j) > box.hi(j)) return {1.0, 0.0};
      continue;
    }
    double a = (box.lo(j) - x0(j)) / g(j);
    double b = (box.hi(j) - x0(j)) / g(j);
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return {t0, t1};
}

CubeProgress beta_cube_progress(const SurrogateMap& p, const DyadicCube& q, const QuadratureConfig& cfg,
                                const StopToken& stop) {
  const int k = q.dim();
  const double side = q.side();
  const Box box = dilate7(q);
  if (k == 1) {
    Point a(1), b(1);
    a << box.lo(0);
    b << box.hi(0);
    const double beta = beta_interval(p, a, b, cfg);
    return {beta * beta * side, true};
  }
  std::mt19937_64 rng(cube_seed(cfg.seed, q));
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd center = q.center();
  const double radius = 7.0 * side * std::sqrt(static_cast<double>(k)) / 2.0;
  const double total = static_cast<double>(cfg.n_dir) * cfg.n_off;
  const double scale = ball_volume(k - 1, radius) / std::pow(side, k - 1) / total;

  CubeProgress out;
  double sum = 0.0;
  for (int d = 0; d < cfg.n_dir; ++d) {
    if (stop && stop()) {
      out.done = false;
      break;
    }
    // In the plane both the angle and the offset are jittered within strata.
    Eigen::VectorXd g(k);
    if (k == 2) {
      const double theta = std::numbers::pi * (d + unit(rng)) / cfg.n_dir;
      g << std::cos(theta), std::sin(theta);
    } else {
      for (int j = 0; j < k; ++j) g(j) = gauss(rng);
      g.normalize();
    }
    const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    std::vector<std::pair<Point, Point>> chords;
    for (int o = 0; o < cfg.n_off; ++o) {
      Eigen::VectorXd dir(k - 1);
      if (k == 2) {
        dir(0) = radius * (2.0 * (o + unit(rng)) / cfg.n_off - 1.0);
      } else {
        for (int j = 0; j < k - 1; ++j) dir(j) = gauss(rng);
        const double n = dir.norm();
        const double rho = radius * std::pow(unit(rng), 1.0 / (k - 1));
        if (n > 0.0) dir *= rho / n;
      }
      const Eigen::VectorXd x0 = center + basis.rightCols(k - 1) * dir;
      const auto [t0, t1] = clip_line(x0, g, box);
      if (t1 - t0 >= side) chords.emplace_back(x0 + t0 * g, x0 + t1 * g);
    }
    if (chords.empty()) continue;
    Eigen::MatrixXd pts(k, static_cast<Eigen::Index>(chords.size()) * cfg.m);
    for (std::size_t c = 0; c < chords.size(); ++c)
      pts.middleCols(static_cast<Eigen::Index>(c) * cfg.m, cfg.m) =
          segment_params(chords[c].first, chords[c].second, cfg.m);
    const RowMatrix vals = p.evaluate_batch(pts);
    for (std::size_t c = 0; c < chords.size(); ++c) {
      const RowMatrix block = vals.middleRows(static_cast<Eigen::Index>(c) * cfg.m, cfg.m);
      sum += beta_squared_from_values(block, (chords[c].second - chords[c].first).norm());
    }
  }
  // mean over samples * disk volume / side^(k-1) = beta^k(Q)^2; weight multiplies by side^k
  out.weight = sum * scale * std::pow(side, k);
  return out;
}

}  // namespace

double beta_interval(const SurrogateMap& p, const Point& a, const Point& b, const QuadratureConfig& cfg) {
  const double diam = (b - a).norm();
  if (!(diam > 0.0)) return 0.0;
  const RowMatrix vals = p.evaluate_batch(segment_params(a, b, cfg.m));
  return std::sqrt(beta_squared_from_values(vals, diam));
}

std::uint64_t cube_seed(std::uint64_t seed, const DyadicCube& q) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : q.id()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

double beta_cube(const SurrogateMap& p, const DyadicCube& q, const QuadratureConfig& cfg) {
  const CubeProgress r = beta_cube_progress(p, q, cfg, {});
  return std::sqrt(r.weight / std::pow(q.side(), q.dim()));
}

double BetaEntry::weight() const { return beta * beta * std::pow(cube.side(), cube.dim()); }

double BetaTable::beta(const DyadicCube& q) const {
  const auto it = index_.find(q);
  if (it == index_.end()) throw std::out_of_range("cube not in beta table: " + q.id());
  return entries[it->second].beta;
}

void BetaTable::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < entries.size(); ++i) index_.emplace(entries[i].cube, i);
}

BetaTable compute_beta_table(const SurrogateMap& p, int J, const QuadratureConfig& cfg, const StopToken& stop) {
  cfg.validate();
  BetaTable table;
  table.k = p.dim();
  table.J = J;
  table.cfg = cfg;
  const int k = p.dim();
  for (int level = 0; level <= J && table.complete; ++level) {
    std::vector<DyadicCube> cubes;
    for (std::uint32_t s = 0; s < (1u << k); ++s) {
      auto c = cubes_at(k, s, level, true);
      cubes.insert(cubes.end(), c.begin(), c.end());
    }
    std::vector<CubeProgress> res(cubes.size(), CubeProgress{0.0, false});
    parallel_for(cubes.size(), [&](std::size_t i) {
      if (stop && stop()) return;
      res[i] = beta_cube_progress(p, cubes[i], cfg, stop);
    });
    for (std::size_t i = 0; i < cubes.size(); ++i) {
      if (!res[i].done) {
        table.complete = false;
        table.partial_weight += res[i].weight;
        continue;
      }
      const double beta = std::sqrt(res[i].weight / std::pow(cubes[i].side(), k));
      table.entries.push_back({cubes[i], beta});
    }
  }
  table.reindex();
  return table;
}

CarlesonSums carleson_sum(const BetaTable& table) {
  CarlesonSums s;
  s.per_family.assign(std::size_t{1} << table.k, 0.0);
  s.per_level.assign(static_cast<std::size_t>(table.J) + 1, 0.0);
  for (const auto& e : table.entries) {
    const double w = e.weight();
    s.total += w;
    s.per_family[e.cube.shift] += w;
    s.per_level[static_cast<std::size_t>(e.cube.level)] += w;
  }
  return s;
}

double psi(double v, double r, double t) {
  const double x = v + r * t;
  return x - std::floor(x);
}

double delta_dyadic(const SurrogateMap& p, double a, double b, double v, double r) {
  if (p.dim() != 1) throw std::invalid_argument("delta_dyadic needs a one-dimensional domain");
  Point x(1), y(1), z(1);
  x << v + r * a;
  y << v + r * ((a + b) / 2.0);
  z << v + r * b;
  return delta1(p, x, y, z);
}

ChainCheck chain_bound_check(const SurrogateMap& p, double a, double b, double v, double r, double y,
                             int J_trunc) {
  if (p.dim() != 1) throw std::invalid_argument("chain check needs a one-dimensional domain");
  if (!(b > a) || a < 0.0 || b > 1.0) throw std::invalid_argument("interval must lie in [0,1]");
  const double len = b - a;
  const int level = static_cast<int>(std::lround(-std::log2(len)));
  if (std::ldexp(1.0, -level) != len || std::ldexp(a, level) != std::floor(std::ldexp(a, level)))
    throw std::invalid_argument("interval is not dyadic");
  if (J_trunc < level) throw std::invalid_argument("truncation level coarser than the interval");
  const double x = v + r * a;
  const double z = v + r * b;
  if (y < x || y > z) throw std::invalid_argument("point outside the mapped interval");

  ChainCheck out;
  Point px(1), py(1), pz(1);
  px << x;
  py << y;
  pz << z;
  out.lhs = delta1(p, px, py, pz);
  out.slack = 8.0 * p.lipschitz() * r * std::ldexp(1.0, -J_trunc);
  if (r == 0.0) return out;
  const double s = std::clamp((y - v) / r, a, b);
  for (int j = level; j <= J_trunc; ++j) {
    const double scaled = std::ldexp(s, j);
    const auto idx = static_cast<std::int64_t>(std::floor(scaled));
    for (std::int64_t i : {idx - 1, idx}) {
      const double lo = std::ldexp(static_cast<double>(i), -j);
      const double hi = std::ldexp(static_cast<double>(i + 1), -j);
      if (lo < a || hi > b || s < lo || s > hi) continue;
      out.sum += delta_dyadic(p, lo, hi, v, r);
      ++out.terms;
    }
  }
  return out;
}

double telescoping_sum(const SurrogateMap& p, double v, double r, int J_trunc) {
  if (p.dim() != 1) throw std::invalid_argument("telescoping sum needs a one-dimensional domain");
  if (J_trunc < 0 || J_trunc > 20) throw std::invalid_argument("truncation level out of range");
  const std::int64_t fine = std::int64_t{1} << (J_trunc + 1);
  Eigen::MatrixXd pts(1, fine + 1);
  for (std::int64_t i = 0; i <= fine; ++i) pts(0, i) = v + r * std::ldexp(static_cast<double>(i), -(J_trunc + 1));
  const RowMatrix vals = p.evaluate_batch(pts);
  auto d = [&](std::int64_t i, std::int64_t j) { return sup_distance(vals.row(i), vals.row(j)); };
  double sum = 0.0;
  for (int level = 0; level <= J_trunc; ++level) {
    const std::int64_t step = fine >> level;
    for (std::int64_t lo = 0; lo < fine; lo += step) {
      const std::int64_t mid = lo + step / 2;
      sum += std::max(d(lo, mid) + d(mid, lo + step) - d(lo, lo + step), 0.0);
    }
  }
  return sum;
}

}  // namespace bilip
