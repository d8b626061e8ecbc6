#include "bilip/parallel.hpp"
#include "bilip/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

// key=value, with the value read as JSON when it parses and as a string otherwise.
json parse_params(const std::vector<std::string>& items) {
  json params = json::object();
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("expected key=value, got " + item);
    const std::string value = item.substr(eq + 1);
    json v = json::parse(value, nullptr, false);
    params[item.substr(0, eq)] = v.is_discarded() ? json(value) : v;
  }
  return params;
}

void print_verification(const bilip::VerificationReport& v, std::size_t separation) {
  std::cerr << "pairs " << v.pairs << " (" << (v.exhaustive ? "exhaustive" : "sampled") << "), violations: lower_p "
            << v.lower_p_violations << ", lower_f " << v.lower_f_violations << ", upper " << v.upper_violations
            << ", separation " << separation << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-Lipschitz decomposition of sampled coarse-Lipschitz maps"};
  app.require_subcommand(1);

  auto* analyze = app.add_subcommand("analyze", "Run the full pipeline on a config");
  std::string config_path, out_path, beta_path, labels_path;
  bool timings = false;
  analyze->add_option("config", config_path, "Config JSON")->required();
  analyze->add_option("--out,-o", out_path, "Report path (default: config output, else stdout)");
  analyze->add_option("--dump-beta", beta_path, "Write the beta table as CSV");
  analyze->add_option("--dump-labels", labels_path, "Write node labels as CSV");
  analyze->add_flag("--timings", timings, "Include stage timings in the report");

  auto* generate = app.add_subcommand("generate", "Write a sample file for a built-in map");
  std::string map_name, gen_out;
  std::vector<std::string> gen_params;
  int gen_k = 1, gen_J = 8;
  generate->add_option("name", map_name, "Map name")->required();
  generate->add_option("params", gen_params, "key=value parameters");
  generate->add_option("--k", gen_k, "Domain dimension");
  generate->add_option("--J", gen_J, "Grid level");
  generate->add_option("--out,-o", gen_out, "Output path (default stdout)");

  auto* verify = app.add_subcommand("verify", "Re-verify the labels in a report");
  std::string report_path, input_path;
  verify->add_option("report", report_path, "Report JSON")->required();
  verify->add_option("input", input_path, "Config JSON the report was produced from")->required();

  auto* beta = app.add_subcommand("beta-dump", "Print the beta table as CSV");
  std::string beta_config, beta_out;
  beta->add_option("config", beta_config, "Config JSON")->required();
  beta->add_option("--out,-o", beta_out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*analyze) {
      const bilip::RunConfig cfg = bilip::RunConfig::load(config_path);
      bilip::PipelineOptions options;
      options.timings = timings;
      const bilip::AnalysisReport report = bilip::run_pipeline(cfg, options);
      const json& r = report.json;
      write_text(out_path.empty() ? cfg.output : out_path, r.dump(2) + "\n");
      if (!beta_path.empty()) {
        const bilip::Inputs in = bilip::load_inputs(cfg);
        const bilip::SurrogateMap p(in.f, *in.oracle, in.lipschitz, in.epsilon);
        write_text(beta_path, bilip::beta_csv(bilip::compute_beta_table(p, cfg.J, cfg.quadrature)));
      }
      if (!labels_path.empty()) {
        std::size_t count = 1;
        for (int j = 0; j < cfg.k; ++j) count *= (std::size_t{1} << cfg.J) + 1;
        const bilip::GridFunction grid(cfg.k, cfg.J, std::vector<std::size_t>(count, 0));
        bilip::DecompositionLabels labels;
        labels.label = r.at("labels").get<std::vector<int>>();
        write_text(labels_path, bilip::labels_csv(labels, grid));
      }
      std::cerr << "M = " << r.at("M") << ", residual content " << r.at("residual_content").at("value")
                << ", Carleson sum " << r.at("carleson").at("total") << ", status " << r.at("status").get<std::string>()
                << '\n';
      return report.verified ? 0 : 2;
    }
    if (*generate) {
      const bilip::GeneratedMap m = bilip::generate_map(map_name, parse_params(gen_params), gen_k, gen_J);
      write_text(gen_out, bilip::sample_file_json(m, map_name).dump() + "\n");
      return 0;
    }
    if (*verify) {
      const json report = read_json(report_path);
      const bilip::RunConfig cfg = bilip::RunConfig::load(input_path);
      const bilip::VerifyOutcome v = bilip::verify_report(report, cfg);
      print_verification(v.verification, v.separation_violations);
      std::cerr << (v.passed ? "verified" : "verification failed") << '\n';
      return v.passed ? 0 : 2;
    }
    if (*beta) {
      const bilip::RunConfig cfg = bilip::RunConfig::load(beta_config);
      const bilip::Inputs in = bilip::load_inputs(cfg);
      const bilip::SurrogateMap p(in.f, *in.oracle, in.lipschitz, in.epsilon);
      write_text(beta_out, bilip::beta_csv(bilip::compute_beta_table(p, cfg.J, cfg.quadrature)));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
