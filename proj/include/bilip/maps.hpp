#pragma once

#include "bilip/metric.hpp"

#include <json.hpp>

#include <memory>

namespace bilip {

/// A sampled map together with its target space.
struct GeneratedMap {
  GeneratedMap(GridFunction f_, std::shared_ptr<const DistanceOracle> oracle_)
      : f(std::move(f_)), oracle(std::move(oracle_)) {}

  GridFunction f;
  std::shared_ptr<const DistanceOracle> oracle;
  double lipschitz = 1.0;
  double epsilon = 0.0;
  nlohmann::json params;  // resolved parameters, including defaults
  CoarseLipschitzCheck certificate;
};

/// Built-in maps on {0, 2^-J, ..., 1}^k:
///   identity                  x
///   constant                  one point
///   fold                      (|x1 - 1/2|, x2, ...)
///   zigzag      {m}           (|x1 - round(m x1)/m|, x2, ...)
///   random_lipschitz {seed}   (g(x1), x2, ...) with g a midpoint-displacement curve in R^2, L <= 1
///   snowflake   {s}           x into |x - y|^s, eps = (1 - s) s^(s/(1-s))
///   quantized   {eps, base}   base map rounded to the lattice eps Z^d, eps-coarse with eps sqrt(d)
/// Every map is certified coarse-Lipschitz on the grid at build, and its oracle
/// declares the certified L and eps.
GeneratedMap generate_map(const std::string& name, const nlohmann::json& params, int k, int J);

/// Names accepted by generate_map.
const std::vector<std::string>& builtin_map_names();

}  // namespace bilip
