#pragma once

#include "bilip/content.hpp"
#include "bilip/decompose.hpp"
#include "bilip/maps.hpp"
#include "bilip/multiscale.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace bilip {

struct RunConfig {
  int k = 1;
  int J = 8;
  double alpha = 0.01;
  double epsilon = 0.0;
  std::optional<int> N;
  std::string map_name = "identity";
  nlohmann::json map_params = nlohmann::json::object();
  std::optional<std::filesystem::path> sample_file;
  nlohmann::json metric;  // metric spec for sample files; null when the sample file carries it
  double lipschitz = 1.0;  // declared L for sample files
  QuadratureConfig quadrature;
  std::uint64_t seed = 1;
  std::size_t exhaustive_limit = 5000;
  std::size_t sample_pairs = 1000000;
  std::string output;

  /// Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;
  /// Canonical form with defaults filled in; excludes the output path.
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical form, as 16 hex digits.
  std::string hash() const;
};

/// The sampled map, its target space and the effective constants.
struct Inputs {
  Inputs(GridFunction f_, std::shared_ptr<const DistanceOracle> oracle_)
      : f(std::move(f_)), oracle(std::move(oracle_)) {}

  GridFunction f;
  std::shared_ptr<const DistanceOracle> oracle;
  double lipschitz = 1.0;
  double epsilon = 0.0;  // max of the configured and the declared coarseness
  nlohmann::json source;
  CoarseLipschitzCheck certificate;
};

Inputs load_inputs(const RunConfig& cfg);

/// Metric from a spec: {"type": "euclidean" | "snowflake", "points": [[...]], "exponent": s},
/// {"type": "matrix", "rows": [[...]]}, or {"type": "csv" | "binary" | "edge_list", "path": ...}.
std::shared_ptr<const DistanceOracle> load_metric(const nlohmann::json& spec, const std::filesystem::path& base_dir);

/// Sample file {k, J, nodes, point_ids, metric, lipschitz, epsilon} for a generated map.
nlohmann::json sample_file_json(const GeneratedMap& map, const std::string& name);

struct Fidelity {
  double kuratowski_error = 0.0;
  bool kuratowski_exhaustive = true;
  double extension_error = 0.0;
  std::size_t extension_rows = 0;
  double lipschitz_excess = 0.0;
  std::size_t lipschitz_pairs = 0;
  double closeness = 0.0;
  double closeness_bound = 0.0;

  bool passed() const;
};

Fidelity check_fidelity(const SurrogateMap& p, const Inputs& in, std::uint64_t seed);

struct Decomposition {
  DecomposeParams params;
  Classification classification;
  int N = 1;
  std::set<DyadicCube> B;
  B1Marks b1;
  std::vector<Constraint> constraints;
  DecompositionLabels labels;
  VerificationReport verification;
  std::size_t separation_violations = 0;
  int max_chain = 0;
  ContentEstimate residual;
  std::optional<double> eps0;  // min beta over 7Q among E1 cubes

  bool verified() const { return verification.passed() && separation_violations == 0; }
};

/// Classification through verification for one alpha. `table` may be null.
Decomposition decompose(const SurrogateMap& p, const Inputs& in, double alpha, std::optional<int> N,
                        const BetaTable* table, std::size_t exhaustive_limit = 5000,
                        std::size_t sample_pairs = 1000000, std::uint64_t seed = 1);

/// min over the E1 cubes of the table's beta, if any E1 cube is in the table.
std::optional<double> min_e1_beta(const std::vector<E1Entry>& e1, const BetaTable& table);

struct PipelineOptions {
  bool timings = false;
  StopToken stop;  // checked during the beta table
};

struct AnalysisReport {
  nlohmann::json json;
  bool verified = false;
};

AnalysisReport run_pipeline(const RunConfig& cfg, const PipelineOptions& options = {});

/// Result of the verify subcommand.
struct VerifyOutcome {
  bool passed = false;
  std::size_t separation_violations = 0;
  VerificationReport verification;
};

/// Re-runs verification of the labels stored in `report` against the config.
/// Throws when the config hash does not match.
VerifyOutcome verify_report(const nlohmann::json& report, const RunConfig& cfg);

/// CSV rows "id,level,side,beta,weight" for the table.
std::string beta_csv(const BetaTable& table);
/// CSV rows "x1,...,xk,label".
std::string labels_csv(const DecompositionLabels& labels, const GridFunction& f);

}  // namespace bilip
