#include "bilip/maps.hpp"

#include <cmath>
#include <map>
#include <random>

namespace bilip {
namespace {

// Distinct image points in order of first appearance.
class PointSet {
 public:
  std::size_t add(const std::vector<double>& x) {
    auto [it, inserted] = index_.emplace(x, points_.size());
    if (inserted) points_.push_back(x);
    return it->second;
  }

  Eigen::MatrixXd matrix() const {
    const auto d = static_cast<Eigen::Index>(points_.front().size());
    Eigen::MatrixXd m(d, static_cast<Eigen::Index>(points_.size()));
    for (std::size_t i = 0; i < points_.size(); ++i)
      for (Eigen::Index j = 0; j < d; ++j) m(j, static_cast<Eigen::Index>(i)) = points_[i][static_cast<std::size_t>(j)];
    return m;
  }

 private:
  std::map<std::vector<double>, std::size_t> index_;
  std::vector<std::vector<double>> points_;
};

std::size_t node_count(int k, int J) {
  std::size_t n = 1;
  for (int j = 0; j < k; ++j) n *= (std::size_t{1} << J) + 1;
  return n;
}

// Grid coordinates of node v as integers 0..2^J, first coordinate first.
std::vector<std::int64_t> node_index(std::size_t v, int k, int J) {
  const std::size_t side = (std::size_t{1} << J) + 1;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(k));
  for (int j = k - 1; j >= 0; --j) {
    idx[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(v % side);
    v /= side;
  }
  return idx;
}

// The map x -> image(x) into Euclidean space, with image taking integer node indices.
template <class Image>
GeneratedMap euclidean_map(int k, int J, Image&& image, double exponent = 1.0) {
  PointSet set;
  const std::size_t n = node_count(k, J);
  std::vector<std::size_t> values(n);
  for (std::size_t v = 0; v < n; ++v) values[v] = set.add(image(node_index(v, k, J)));
  return GeneratedMap(GridFunction(k, J, std::move(values)),
                      std::make_shared<EuclideanMetric>(set.matrix(), exponent));
}

double coord(std::int64_t i, int J) { return std::ldexp(static_cast<double>(i), -J); }

// Midpoint-displacement curve in R^2 with 2^depth + 1 vertices, scaled to slope < 1.
std::vector<Eigen::Vector2d> displacement_curve(std::uint64_t seed, int depth) {
  const std::size_t n = (std::size_t{1} << depth) + 1;
  std::vector<Eigen::Vector2d> g(n);
  g.front() = {0.0, 0.0};
  g.back() = {1.0, 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double amp = 0.5;
  for (int level = 0; level < depth; ++level, amp *= 0.75) {
    const std::size_t step = std::size_t{1} << (depth - level);
    for (std::size_t i = 0; i + step < n; i += step) {
      const Eigen::Vector2d a = g[i];
      const Eigen::Vector2d b = g[i + step];
      const Eigen::Vector2d normal(a.y() - b.y(), b.x() - a.x());  // |normal| = |b - a|
      g[i + step / 2] = (a + b) / 2.0 + normal * (amp * u(rng));
    }
  }
  double slope = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) slope = std::max(slope, (g[i + 1] - g[i]).norm());
  slope *= static_cast<double>(n - 1);
  const double scale = (1.0 - 1e-9) / slope;
  for (auto& p : g) p *= scale;
  return g;
}

double param(const nlohmann::json& params, const char* key, double fallback) {
  return params.contains(key) ? params.at(key).get<double>() : fallback;
}

GeneratedMap build(const std::string& name, const nlohmann::json& params, int k, int J) {
  nlohmann::json resolved = nlohmann::json::object();
  GeneratedMap out(GridFunction(k, J, std::vector<std::size_t>(node_count(k, J), 0)), nullptr);
  if (name == "identity") {
    out = euclidean_map(k, J, [&](const std::vector<std::int64_t>& i) {
      std::vector<double> x;
      for (auto c : i) x.push_back(coord(c, J));
      return x;
    });
  } else if (name == "constant") {
    out.oracle = std::make_shared<EuclideanMetric>(Eigen::MatrixXd::Zero(k, 1));
  } else if (name == "fold" || name == "zigzag") {
    const double m = name == "fold" ? 1.0 : param(params, "m", 4.0);
    if (name == "zigzag") {
      if (m < 1.0 || m != std::floor(m)) throw std::invalid_argument("zigzag needs an integer m >= 1");
      resolved["m"] = static_cast<int>(m);
    }
    out = euclidean_map(k, J, [&](const std::vector<std::int64_t>& i) {
      std::vector<double> x;
      for (auto c : i) x.push_back(coord(c, J));
      x[0] = name == "fold" ? std::abs(x[0] - 0.5) : std::abs(x[0] - std::round(x[0] * m) / m);
      return x;
    });
  } else if (name == "random_lipschitz") {
    const double s = param(params, "seed", 1.0);
    if (s < 0.0 || s != std::floor(s)) throw std::invalid_argument("seed must be a nonnegative integer");
    const auto seed = static_cast<std::uint64_t>(s);
    resolved["seed"] = seed;
    const int depth = std::max(16, J);
    const auto curve = displacement_curve(seed, depth);
    out = euclidean_map(k, J, [&](const std::vector<std::int64_t>& i) {
      const auto& g = curve[static_cast<std::size_t>(i[0]) << (depth - J)];
      std::vector<double> x{g.x(), g.y()};
      for (std::size_t j = 1; j < i.size(); ++j) x.push_back(coord(i[j], J));
      return x;
    });
  } else if (name == "snowflake") {
    const double s = param(params, "s", 0.5);
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("snowflake exponent must lie in (0, 1)");
    resolved["s"] = s;
    out = euclidean_map(
        k, J,
        [&](const std::vector<std::int64_t>& i) {
          std::vector<double> x;
          for (auto c : i) x.push_back(coord(c, J));
          return x;
        },
        s);
    // max over t >= 0 of t^s - t, attained at t = s^(1/(1-s))
    out.epsilon = (1.0 - s) * std::pow(s, s / (1.0 - s));
    const auto excess = check_coarse_lipschitz(out.f, *out.oracle, 1.0, 0.0);
    out.epsilon = std::max(out.epsilon, excess.worst_excess);
  } else if (name == "quantized") {
    const double eps = param(params, "eps", 0.05);
    if (!(eps > 0.0)) throw std::invalid_argument("quantization step must be positive");
    const std::string base = params.contains("base") ? params.at("base").get<std::string>() : "fold";
    if (base == "quantized" || base == "snowflake" || base == "constant")
      throw std::invalid_argument("quantized needs a Euclidean base map");
    const nlohmann::json base_params = params.contains("base_params") ? params.at("base_params") : nlohmann::json::object();
    GeneratedMap b = build(base, base_params, k, J);
    const auto* metric = dynamic_cast<const EuclideanMetric*>(b.oracle.get());
    const Eigen::MatrixXd& pts = metric->points();
    out = euclidean_map(k, J, [&](const std::vector<std::int64_t>& i) {
      std::size_t v = 0;
      for (auto c : i) v = v * ((std::size_t{1} << J) + 1) + static_cast<std::size_t>(c);
      std::vector<double> x;
      for (Eigen::Index j = 0; j < pts.rows(); ++j)
        x.push_back(std::round(pts(j, static_cast<Eigen::Index>(b.f.value(v))) / eps) * eps);
      return x;
    });
    resolved["eps"] = eps;
    resolved["base"] = base;
    resolved["base_params"] = b.params;
    // rounding moves each point by at most eps sqrt(d) / 2
    out.lipschitz = b.lipschitz;
    out.epsilon = b.epsilon + eps * std::sqrt(static_cast<double>(pts.rows()));
  } else {
    throw std::invalid_argument("unknown map: " + name);
  }
  out.params = resolved;
  return out;
}

}  // namespace

const std::vector<std::string>& builtin_map_names() {
  static const std::vector<std::string> names{"identity", "constant", "fold", "zigzag",
                                              "random_lipschitz", "snowflake", "quantized"};
  return names;
}

GeneratedMap generate_map(const std::string& name, const nlohmann::json& params, int k, int J) {
  if (k < 1) throw std::invalid_argument("dimension must be at least 1");
  if (J < 0 || J > 16) throw std::invalid_argument("resolution level out of range");
  GeneratedMap out = build(name, params.is_null() ? nlohmann::json::object() : params, k, J);
  out.certificate = check_coarse_lipschitz(out.f, *out.oracle, out.lipschitz, out.epsilon);
  if (!out.certificate.holds())
    throw std::runtime_error("map " + name + " fails its coarse-Lipschitz certificate by " +
                             std::to_string(out.certificate.worst_excess));
  if (const auto* e = dynamic_cast<const EuclideanMetric*>(out.oracle.get())) {
    auto declared = std::make_shared<EuclideanMetric>(*e);
    declared->declare(out.lipschitz, out.epsilon);
    out.oracle = std::move(declared);
  }
  return out;
}

}  // namespace bilip
