#include "bilip/metric_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>
#include <tuple>

namespace bilip {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  return out;
}

bool parse_row(const std::vector<std::string>& fields, std::vector<double>& row) {
  row.clear();
  for (const auto& f : fields) {
    if (f.empty()) return false;
    std::size_t used = 0;
    try {
      row.push_back(std::stod(f, &used));
    } catch (const std::exception&) {
      return false;
    }
    if (used != f.size()) return false;
  }
  return true;
}

}  // namespace

MatrixMetric read_distance_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::vector<double> row;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const bool ok = parse_row(split_fields(line), row);
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw std::runtime_error("malformed CSV row in " + path.string());
    }
    first = false;
    rows.push_back(row);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw std::runtime_error("distance CSV is not square");
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return MatrixMetric(std::move(d));
}

MatrixMetric read_distance_binary(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n == 0 || n > (1u << 16)) throw std::runtime_error("bad point count in " + path.string());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> d(n, n);
  in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(n * n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated distance file " + path.string());
  return MatrixMetric(Eigen::MatrixXd(d));
}

void write_distance_binary(const std::filesystem::path& path, const Eigen::MatrixXd& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint64_t n = static_cast<std::uint64_t>(d.rows());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = d;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(n * n * sizeof(double)));
}

Eigen::MatrixXd shortest_paths(std::size_t n,
                               const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& [u, v, w] : edges) {
    if (u >= n || v >= n) throw std::invalid_argument("edge endpoint out of range");
    if (!(w >= 0.0)) throw std::invalid_argument("negative edge weight");
    adj[u].emplace_back(v, w);
    adj[v].emplace_back(u, w);
  }
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), inf);
  using Item = std::pair<double, std::size_t>;
  for (std::size_t s = 0; s < n; ++s) {
    auto row = d.row(static_cast<Eigen::Index>(s));
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    row(static_cast<Eigen::Index>(s)) = 0.0;
    queue.emplace(0.0, s);
    while (!queue.empty()) {
      const auto [du, u] = queue.top();
      queue.pop();
      if (du > row(static_cast<Eigen::Index>(u))) continue;
      for (const auto& [v, w] : adj[u]) {
        const double cand = du + w;
        if (cand < row(static_cast<Eigen::Index>(v))) {
          row(static_cast<Eigen::Index>(v)) = cand;
          queue.emplace(cand, v);
        }
      }
    }
  }
  if (!d.allFinite()) throw std::invalid_argument("graph is disconnected");
  // Symmetrize exactly; both directions are equal up to summation order.
  const Eigen::MatrixXd sym = d.cwiseMin(d.transpose());
  return sym;
}

MatrixMetric read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    long long u = 0, v = 0;
    double w = 0.0;
    if (!(row >> u)) continue;
    if (!(row >> v >> w) || u < 0 || v < 0) throw std::runtime_error("malformed edge: " + line);
    edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v), w);
    n = std::max({n, static_cast<std::size_t>(u) + 1, static_cast<std::size_t>(v) + 1});
  }
  if (n == 0) throw std::runtime_error("empty edge list " + path.string());
  return MatrixMetric(shortest_paths(n, edges), false);
}

}  // namespace bilip
