#include "bilip/content.hpp"

#include "bilip/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace bilip {

ContentEstimate hausdorff_content(std::vector<std::size_t> points, const DistanceOracle& oracle, int k,
                                  int levels) {
  ContentEstimate est;
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.empty()) return est;

  std::vector<double> row_max(points.size(), 0.0);
  parallel_for(points.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < points.size(); ++j)
      row_max[i] = std::max(row_max[i], oracle.dist(points[i], points[j]));
  });
  const double diam = *std::max_element(row_max.begin(), row_max.end());
  est.diameter = diam;
  est.whole_set = true;
  est.scale = diam / 2.0;
  est.value = std::pow(diam, k);
  est.cover = {{points.front(), diam / 2.0}};
  if (diam == 0.0) return est;

  std::vector<ScaleScore> scores(static_cast<std::size_t>(levels) + 1);
  std::vector<EpsNet> nets(scores.size());
  parallel_for(scores.size(), [&](std::size_t j) {
    const double r = std::ldexp(diam, -static_cast<int>(j));
    nets[j] = build_eps_net(points, oracle, r);
    scores[j] = {r, nets[j].size(), static_cast<double>(nets[j].size()) * std::pow(2.0 * r, k)};
  });
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j].score < est.value) {
      est.value = scores[j].score;
      est.scale = scores[j].radius;
      est.whole_set = false;
      est.cover.clear();
      for (auto c : nets[j].members) est.cover.push_back({c, scores[j].radius});
    }
  }
  est.scores = std::move(scores);
  return est;
}

bool cover_is_valid(const std::vector<std::size_t>& points, const ContentEstimate& est,
                    const DistanceOracle& oracle) {
  if (points.empty() || est.whole_set) return true;
  return std::all_of(points.begin(), points.end(), [&](std::size_t p) {
    return std::any_of(est.cover.begin(), est.cover.end(),
                       [&](const CoverBall& b) { return oracle.dist(p, b.center) <= b.radius; });
  });
}

ContentEstimate residual_content(const DecompositionLabels& labels, const GridFunction& f,
                                 const DistanceOracle& oracle) {
  std::vector<std::size_t> pts;
  for (std::size_t v = 0; v < f.node_count(); ++v)
    if (labels.label[v] < 0) pts.push_back(f.value(v));
  return hausdorff_content(std::move(pts), oracle, f.dim(), f.level());
}

}  // namespace bilip
