#include "bilip/pipeline.hpp"

#include "bilip/metric_io.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bilip {

using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys{"k",         "J",        "alpha",      "epsilon", "N",
                                        "map",       "metric",   "lipschitz",  "quadrature",
                                        "seed",      "output",   "verify",     "sample_file"};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kConfigKeys.count(key)) throw std::invalid_argument("unknown config key: " + key);
  RunConfig c;
  c.k = j.value("k", c.k);
  c.J = j.value("J", c.J);
  c.alpha = j.value("alpha", c.alpha);
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("N") && !j.at("N").is_null()) c.N = j.at("N").get<int>();
  std::string sample;
  if (j.contains("sample_file")) sample = j.at("sample_file").get<std::string>();
  if (j.contains("map")) {
    const json& m = j.at("map");
    if (m.is_string()) {
      c.map_name = m.get<std::string>();
    } else {
      if (m.contains("sample_file")) sample = m.at("sample_file").get<std::string>();
      c.map_name = m.value("name", sample.empty() ? c.map_name : std::string{});
      if (m.contains("params")) c.map_params = m.at("params");
    }
  }
  if (!sample.empty()) {
    c.map_name.clear();
    const std::filesystem::path path(sample);
    c.sample_file = path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }
  if (j.contains("metric")) c.metric = j.at("metric");
  c.lipschitz = j.value("lipschitz", c.lipschitz);
  if (j.contains("quadrature")) {
    const json& q = j.at("quadrature");
    c.quadrature.m = q.value("m", c.quadrature.m);
    c.quadrature.n_dir = q.value("n_dir", c.quadrature.n_dir);
    c.quadrature.n_off = q.value("n_off", c.quadrature.n_off);
  }
  c.seed = j.value("seed", c.seed);
  c.quadrature.seed = c.seed;
  c.output = j.value("output", std::string{});
  if (j.contains("verify")) {
    c.exhaustive_limit = j.at("verify").value("exhaustive_limit", c.exhaustive_limit);
    c.sample_pairs = j.at("verify").value("sample_pairs", c.sample_pairs);
  }
  if (!c.output.empty() && !base_dir.empty() && std::filesystem::path(c.output).is_relative())
    c.output = (base_dir / c.output).string();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunConfig::validate() const {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (J < 2) throw std::invalid_argument("J must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
  if (N && *N < 1) throw std::invalid_argument("N must be at least 1");
  if (!(lipschitz > 0.0)) throw std::invalid_argument("lipschitz must be positive");
  if (map_name.empty() && !sample_file) throw std::invalid_argument("config names no map");
  quadrature.validate();
}

json RunConfig::to_json() const {
  json j;
  j["k"] = k;
  j["J"] = J;
  j["alpha"] = alpha;
  j["epsilon"] = epsilon;
  j["N"] = N ? json(*N) : json(nullptr);
  if (sample_file) {
    j["map"] = {{"sample_file", sample_file->generic_string()}};
  } else {
    j["map"] = {{"name", map_name}, {"params", map_params}};
  }
  j["metric"] = metric;
  j["lipschitz"] = lipschitz;
  j["quadrature"] = {{"m", quadrature.m}, {"n_dir", quadrature.n_dir}, {"n_off", quadrature.n_off}};
  j["seed"] = seed;
  j["verify"] = {{"exhaustive_limit", exhaustive_limit}, {"sample_pairs", sample_pairs}};
  return j;
}

std::string RunConfig::hash() const {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(to_json().dump());
  return s.str();
}

std::shared_ptr<const DistanceOracle> load_metric(const json& spec, const std::filesystem::path& base_dir) {
  if (!spec.is_object() || !spec.contains("type")) throw std::invalid_argument("metric spec needs a type");
  const std::string type = spec.at("type").get<std::string>();
  auto path = [&] {
    const std::filesystem::path p(spec.at("path").get<std::string>());
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  auto matrix = [&](const char* key) {
    const auto rows = spec.at(key).get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::invalid_argument("empty point set");
    const std::size_t width = rows.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != width) throw std::invalid_argument("ragged rows in metric spec");
      for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
  };
  if (type == "euclidean") return std::make_shared<EuclideanMetric>(matrix("points").transpose());
  if (type == "snowflake")
    return std::make_shared<EuclideanMetric>(matrix("points").transpose(), spec.at("exponent").get<double>());
  if (type == "matrix") return std::make_shared<MatrixMetric>(matrix("rows"));
  if (type == "csv") return std::make_shared<MatrixMetric>(read_distance_csv(path()));
  if (type == "binary") return std::make_shared<MatrixMetric>(read_distance_binary(path()));
  if (type == "edge_list") return std::make_shared<MatrixMetric>(read_edge_list(path()));
  throw std::invalid_argument("unknown metric type: " + type);
}

Inputs load_inputs(const RunConfig& cfg) {
  if (!cfg.sample_file) {
    GeneratedMap m = generate_map(cfg.map_name, cfg.map_params, cfg.k, cfg.J);
    Inputs in(std::move(m.f), m.oracle);
    in.lipschitz = m.lipschitz;
    in.epsilon = std::max(cfg.epsilon, m.epsilon);
    in.source = {{"map", cfg.map_name}, {"params", m.params}, {"declared_epsilon", m.epsilon}};
    in.certificate = check_coarse_lipschitz(in.f, *in.oracle, in.lipschitz, in.epsilon);
    return in;
  }
  std::ifstream file(*cfg.sample_file);
  if (!file) throw std::runtime_error("cannot open sample file " + cfg.sample_file->string());
  json s;
  file >> s;
  const int k = s.at("k").get<int>();
  const int J = s.at("J").get<int>();
  if (k != cfg.k || J != cfg.J) throw std::invalid_argument("sample file k/J differ from the config");
  const auto nodes = s.at("nodes").get<std::vector<std::vector<std::int64_t>>>();
  const auto ids = s.at("point_ids").get<std::vector<std::size_t>>();
  if (nodes.size() != ids.size()) throw std::invalid_argument("nodes and point_ids differ in length");
  std::size_t count = 1;
  for (int j = 0; j < k; ++j) count *= (std::size_t{1} << J) + 1;
  std::vector<std::size_t> values(count, 0);
  std::vector<bool> seen(count, false);
  GridFunction probe(k, J, values);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].size() != static_cast<std::size_t>(k)) throw std::invalid_argument("node index has wrong length");
    const std::size_t v = probe.node_index(nodes[i]);
    if (seen[v]) throw std::invalid_argument("node listed twice in sample file");
    seen[v] = true;
    values[v] = ids[i];
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw std::invalid_argument("sample file does not cover every grid node");
  const json spec = cfg.metric.is_null() ? s.at("metric") : cfg.metric;
  auto oracle = load_metric(spec, cfg.sample_file->parent_path());
  Inputs in(GridFunction(k, J, std::move(values)), oracle);
  in.lipschitz = s.value("lipschitz", cfg.lipschitz);
  in.epsilon = std::max(cfg.epsilon, s.value("epsilon", 0.0));
  in.source = {{"sample_file", cfg.sample_file->generic_string()}, {"metric", spec.value("type", "")}};
  in.certificate = check_coarse_lipschitz(in.f, *in.oracle, in.lipschitz, in.epsilon);
  return in;
}

json sample_file_json(const GeneratedMap& map, const std::string& name) {
  json j;
  j["k"] = map.f.dim();
  j["J"] = map.f.level();
  json nodes = json::array();
  for (std::size_t v = 0; v < map.f.node_count(); ++v) nodes.push_back(map.f.multi_index(v));
  j["nodes"] = std::move(nodes);
  j["point_ids"] = map.f.values();
  const auto* e = dynamic_cast<const EuclideanMetric*>(map.oracle.get());
  if (!e) throw std::logic_error("generated maps are Euclidean");
  std::vector<std::vector<double>> pts;
  for (Eigen::Index c = 0; c < e->points().cols(); ++c) {
    pts.emplace_back();
    for (Eigen::Index r = 0; r < e->points().rows(); ++r) pts.back().push_back(e->points()(r, c));
  }
  j["metric"] = e->exponent() == 1.0 ? json{{"type", "euclidean"}, {"points", pts}}
                                     : json{{"type", "snowflake"}, {"exponent", e->exponent()}, {"points", pts}};
  j["lipschitz"] = map.lipschitz;
  j["epsilon"] = map.epsilon;
  j["generator"] = {{"name", name}, {"params", map.params}};
  return j;
}

bool Fidelity::passed() const {
  return kuratowski_error <= 1e-12 && extension_error == 0.0 && lipschitz_excess <= 1e-12 &&
         closeness <= closeness_bound + 1e-12;
}

Fidelity check_fidelity(const SurrogateMap& p, const Inputs& in, std::uint64_t seed) {
  Fidelity out;
  const std::size_t nz = p.target_size();
  const std::size_t nx = p.domain_net().size();
  out.kuratowski_exhaustive = nz <= 1500;
  out.kuratowski_error = kuratowski_isometry_error(p, *in.oracle, 1500, 20000, seed);
  // Off-node evaluation costs O(|Z|) on a line and O(|X||Z|) otherwise.
  const double cost = p.dim() == 1 ? static_cast<double>(nz) : static_cast<double>(nx) * static_cast<double>(nz);
  out.extension_rows = std::min<std::size_t>(nx, std::max<std::size_t>(8, static_cast<std::size_t>(2e9 / cost)));
  out.extension_error = extension_agreement_error(p, out.extension_rows);
  out.lipschitz_pairs = std::min<std::size_t>(10000, std::max<std::size_t>(4, static_cast<std::size_t>(1e9 / cost)));
  out.lipschitz_excess = lipschitz_certificate(p, out.lipschitz_pairs, seed);
  out.closeness = closeness_to_kuratowski(p, in.f, *in.oracle);
  out.closeness_bound = closeness_bound(in.lipschitz, p.lipschitz(), in.epsilon);
  return out;
}

std::optional<double> min_e1_beta(const std::vector<E1Entry>& e1, const BetaTable& table) {
  std::optional<double> best;
  for (const auto& q : e1_cubes(e1)) {
    try {
      const double b = table.beta(q);
      best = best ? std::min(*best, b) : b;
    } catch (const std::out_of_range&) {
    }
  }
  return best;
}

Decomposition decompose(const SurrogateMap& p, const Inputs& in, double alpha, std::optional<int> N,
                        const BetaTable* table, std::size_t exhaustive_limit, std::size_t sample_pairs,
                        std::uint64_t seed) {
  Decomposition d;
  d.params = {alpha, in.epsilon};
  d.classification = classify(p, in.f, d.params);
  d.N = N ? *N : default_chain_threshold(alpha);
  d.B = compute_B(d.classification.e1, d.N);
  d.b1 = mark_B1(d.B, in.f);
  d.constraints = retained_constraints(d.classification.e1, d.B);
  d.labels = label_pieces(d.constraints, in.f, d.classification.e2_marks, d.b1.marks, d.N);
  d.verification = verify_pieces(d.labels, in.f, p, *in.oracle, d.params, in.lipschitz, exhaustive_limit,
                                 sample_pairs, seed);
  d.separation_violations = separation_violations(d.constraints, in.f, d.labels.label);
  std::set<DyadicCube> retained = e1_cubes(d.classification.e1);
  for (const auto& q : d.B) retained.erase(q);
  d.max_chain = max_chain_count(retained, in.f, d.labels.label);
  d.residual = residual_content(d.labels, in.f, *in.oracle);
  if (table) d.eps0 = min_e1_beta(d.classification.e1, *table);
  return d;
}

namespace {

json content_json(const ContentEstimate& c) {
  json cover = json::array();
  for (const auto& b : c.cover) cover.push_back({{"center", b.center}, {"radius", b.radius}});
  json scores = json::array();
  for (const auto& s : c.scores) scores.push_back({{"radius", s.radius}, {"size", s.size}, {"score", s.score}});
  return {{"value", c.value}, {"scale", c.scale}, {"whole_set", c.whole_set}, {"diameter", c.diameter},
          {"cover", cover}, {"scores", scores}};
}

json verification_json(const VerificationReport& v) {
  json examples = json::array();
  for (const auto& e : v.examples)
    examples.push_back({{"x", e.x}, {"y", e.y}, {"kind", e.kind}, {"margin", e.margin}});
  return {{"mode", v.exhaustive ? "exhaustive" : "sampled"},
          {"pairs", v.pairs},
          {"testable_pairs", v.testable_pairs},
          {"lower_p_violations", v.lower_p_violations},
          {"lower_f_violations", v.lower_f_violations},
          {"upper_violations", v.upper_violations},
          {"worst_lower_p_margin", finite_or_null(v.worst_lower_p_margin)},
          {"worst_lower_f_margin", finite_or_null(v.worst_lower_f_margin)},
          {"worst_upper_margin", finite_or_null(v.worst_upper_margin)},
          {"examples", examples},
          {"passed", v.passed()}};
}

}  // namespace

AnalysisReport run_pipeline(const RunConfig& cfg, const PipelineOptions& options) {
  using clock = std::chrono::steady_clock;
  json timings;
  auto t0 = clock::now();
  auto lap = [&](const char* stage) {
    const auto now = clock::now();
    timings[stage] = std::chrono::duration<double>(now - t0).count();
    t0 = now;
  };
  auto stage = [](const char* name, auto&& body) {
    try {
      return body();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(name) + ": " + e.what());
    }
  };

  const Inputs in = stage("input", [&] { return load_inputs(cfg); });
  lap("input");
  const SurrogateMap p = stage("surrogate", [&] { return SurrogateMap(in.f, *in.oracle, in.lipschitz, in.epsilon); });
  lap("surrogate");
  const Fidelity fid = stage("fidelity", [&] { return check_fidelity(p, in, cfg.seed); });
  lap("fidelity");
  const BetaTable table = stage("beta", [&] { return compute_beta_table(p, cfg.J, cfg.quadrature, options.stop); });
  const CarlesonSums sums = carleson_sum(table);
  lap("beta");
  const Decomposition d = stage("decompose", [&] {
    return decompose(p, in, cfg.alpha, cfg.N, &table, cfg.exhaustive_limit, cfg.sample_pairs, cfg.seed);
  });
  lap("decompose");

  json r;
  r["config"] = cfg.to_json();
  r["config_hash"] = cfg.hash();
  r["input"] = in.source;
  r["input"]["coarse_lipschitz_excess"] = in.certificate.worst_excess;
  r["input"]["coarse_lipschitz_exhaustive"] = in.certificate.exhaustive;
  r["k"] = cfg.k;
  r["J"] = cfg.J;
  r["alpha"] = cfg.alpha;
  r["alpha_prime"] = d.params.alpha_prime();
  r["epsilon"] = in.epsilon;
  r["lipschitz"] = in.lipschitz;
  r["L_p"] = p.lipschitz();
  r["C_k"] = semi_adjacency_degree(cfg.k);
  r["N"] = d.N;
  r["nets"] = {{"X", p.domain_net().size()}, {"Z", p.target_size()}};
  r["fidelity"] = {{"kuratowski_error", fid.kuratowski_error},
                   {"kuratowski_exhaustive", fid.kuratowski_exhaustive},
                   {"extension_error", fid.extension_error},
                   {"extension_rows", fid.extension_rows},
                   {"lipschitz_excess", fid.lipschitz_excess},
                   {"lipschitz_pairs", fid.lipschitz_pairs},
                   {"closeness", fid.closeness},
                   {"closeness_bound", fid.closeness_bound},
                   {"passed", fid.passed()}};
  r["carleson"] = {{"total", sums.total},
                   {"per_family", sums.per_family},
                   {"per_level", sums.per_level},
                   {"complete", table.complete},
                   {"unfinished_lower_bound", table.partial_weight},
                   {"cubes", table.entries.size()}};
  const auto& cls = d.classification;
  json e1 = json::array();
  for (const auto& e : cls.e1)
    e1.push_back({{"q1", e.q1.id()}, {"q2", e.q2.id()}, {"x1", e.x1}, {"x2", e.x2}, {"length", e.length},
                  {"image_diam", e.image_diam}, {"endpoint_dist", e.endpoint_dist}});
  json e2 = json::array();
  for (const auto& e : cls.e2_sample)
    e2.push_back({{"q1", e.q1.id()}, {"q2", e.q2.id()}, {"x1", e.x1}, {"x2", e.x2}, {"length", e.length},
                  {"image_diam", e.image_diam}});
  json b = json::array();
  for (const auto& q : d.B) b.push_back(q.id());
  r["counts"] = {{"E1", cls.e1.size()},
                 {"E1_cubes", e1_cubes(cls.e1).size()},
                 {"E2", cls.e2_count},
                 {"B", d.B.size()},
                 {"retained_constraints", d.constraints.size()},
                 {"pairs_scanned", cls.pairs_scanned},
                 {"residual_E2", d.labels.residual_e2},
                 {"residual_B1", d.labels.residual_b1}};
  r["E1"] = e1;
  r["E2_sample"] = e2;
  r["B"] = b;
  r["B1_measure"] = d.b1.measure;
  r["M"] = d.labels.M;
  r["piece_sizes"] = d.labels.piece_sizes;
  r["log2_piece_bound"] = log2_piece_bound(cfg.k, d.N);
  r["piece_bound_ok"] = d.labels.M <= 1 || std::log2(static_cast<double>(d.labels.M)) <= log2_piece_bound(cfg.k, d.N);
  r["labels"] = d.labels.label;
  r["separation_violations"] = d.separation_violations;
  r["max_chain_count"] = d.max_chain;
  r["chain_bound_ok"] = d.max_chain <= d.N;
  r["verification"] = verification_json(d.verification);
  r["residual_content"] = content_json(d.residual);
  r["c1_emp"] = d.residual.value / cfg.alpha;
  r["eps0_emp"] = d.eps0 ? json(*d.eps0) : json(nullptr);
  r["status"] = d.verified() ? "verified" : "failed";
  lap("report");
  if (options.timings) r["timings"] = timings;
  return {r, d.verified()};
}

VerifyOutcome verify_report(const json& report, const RunConfig& cfg) {
  if (!report.contains("config_hash") || report.at("config_hash").get<std::string>() != cfg.hash())
    throw std::runtime_error("config hash mismatch");
  const Inputs in = load_inputs(cfg);
  const SurrogateMap p(in.f, *in.oracle, in.lipschitz, in.epsilon);
  const DecomposeParams params{cfg.alpha, in.epsilon};
  const Classification cls = classify(p, in.f, params);
  const int N = cfg.N ? *cfg.N : default_chain_threshold(cfg.alpha);
  const auto constraints = retained_constraints(cls.e1, compute_B(cls.e1, N));
  DecompositionLabels labels;
  labels.label = report.at("labels").get<std::vector<int>>();
  if (labels.label.size() != in.f.node_count()) throw std::runtime_error("label array does not match the grid");
  for (int l : labels.label) {
    if (l == 0 || l < RES_B1) throw std::runtime_error("invalid label " + std::to_string(l));
    labels.M = std::max(labels.M, l);
  }
  labels.N = N;
  VerifyOutcome out;
  out.separation_violations = separation_violations(constraints, in.f, labels.label);
  out.verification = verify_pieces(labels, in.f, p, *in.oracle, params, in.lipschitz, cfg.exhaustive_limit,
                                   cfg.sample_pairs, cfg.seed);
  out.passed = out.separation_violations == 0 && out.verification.passed();
  return out;
}

std::string beta_csv(const BetaTable& table) {
  std::ostringstream s;
  s << std::setprecision(17) << "cube,level,side,beta,weight\n";
  for (const auto& e : table.entries)
    s << e.cube.id() << ',' << e.cube.level << ',' << e.cube.side() << ',' << e.beta << ',' << e.weight() << '\n';
  return s.str();
}

std::string labels_csv(const DecompositionLabels& labels, const GridFunction& f) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (int j = 0; j < f.dim(); ++j) s << 'x' << (j + 1) << ',';
  s << "label\n";
  for (std::size_t v = 0; v < f.node_count(); ++v) {
    const Point x = f.node_point(v);
    for (int j = 0; j < f.dim(); ++j) s << x(j) << ',';
    s << labels.label[v] << '\n';
  }
  return s.str();
}

}  // namespace bilip
