#pragma once

#include "bilip/decompose.hpp"
#include "bilip/metric.hpp"

namespace bilip {

struct CoverBall {
  std::size_t center = 0;  // point id
  double radius = 0.0;
};

struct ScaleScore {
  double radius = 0.0;
  std::size_t size = 0;
  double score = 0.0;  // size * (2 radius)^k
};

/// Upper estimate of h^k: value = sum over the cover of (2 radius)^k.
struct ContentEstimate {
  double value = 0.0;
  std::vector<CoverBall> cover;
  double scale = 0.0;
  bool whole_set = false;  // the one-set cover by S itself (radius diam/2)
  double diameter = 0.0;
  std::vector<ScaleScore> scores;
};

/// Minimum of diam(S)^k and, for r_j = diam(S) 2^-j with j = 0..levels, the
/// score of a greedy r_j-net. Duplicate ids are ignored; an empty set gives 0.
ContentEstimate hausdorff_content(std::vector<std::size_t> points, const DistanceOracle& oracle, int k,
                                  int levels);

/// Every point lies in some cover ball (trivially true for the one-set cover).
bool cover_is_valid(const std::vector<std::size_t>& points, const ContentEstimate& est,
                    const DistanceOracle& oracle);

/// Content of f at the residual nodes (labels RES_E2 or RES_B1).
ContentEstimate residual_content(const DecompositionLabels& labels, const GridFunction& f,
                                 const DistanceOracle& oracle);

}  // namespace bilip
