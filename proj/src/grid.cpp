#include "bilip/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace bilip {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

std::int64_t pow2(int e) { return std::int64_t{1} << e; }

// Calls visit(index) for every index in the product of [lo_j, hi_j].
template <class Visit>
void for_each_index(const std::vector<std::int64_t>& lo, const std::vector<std::int64_t>& hi,
                    Visit&& visit) {
  const std::size_t k = lo.size();
  for (std::size_t j = 0; j < k; ++j)
    if (lo[j] > hi[j]) return;
  std::vector<std::int64_t> idx = lo;
  for (;;) {
    visit(idx);
    std::size_t j = k;
    while (j > 0) {
      --j;
      if (idx[j] < hi[j]) {
        ++idx[j];
        break;
      }
      idx[j] = lo[j];
      if (j == 0) return;
    }
    if (k == 0) return;
  }
}

void check_same_grid(const DyadicCube& a, const DyadicCube& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  if (a.level != b.level) throw std::invalid_argument("diameter mismatch");
  if (a.shift != b.shift) throw std::invalid_argument("shift family mismatch");
}

}  // namespace

double box_distance(const Box& a, const Box& b) {
  return (b.lo - a.hi).cwiseMax(a.lo - b.hi).cwiseMax(0.0).norm();
}

Box DyadicCube::box() const {
  Box b{Eigen::VectorXd(dim()), Eigen::VectorXd(dim())};
  for (int j = 0; j < dim(); ++j) {
    b.lo(j) = lower(j);
    b.hi(j) = upper(j);
  }
  return b;
}

Eigen::VectorXd DyadicCube::center() const {
  const Box b = box();
  return (b.lo + b.hi) / 2.0;
}

std::string DyadicCube::id() const {
  std::string s;
  for (int j = 0; j < dim(); ++j) s += shifted(j) ? '1' : '0';
  s += ':' + std::to_string(level) + ':';
  for (int j = 0; j < dim(); ++j) {
    if (j) s += ',';
    s += std::to_string(corner[static_cast<std::size_t>(j)]);
  }
  return s;
}

DyadicCube parse_cube_id(const std::string& id) {
  const auto a = id.find(':');
  const auto b = id.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) throw std::invalid_argument("bad cube id: " + id);
  DyadicCube q;
  const std::string bits = id.substr(0, a);
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] == '1') q.shift |= 1u << j;
    else if (bits[j] != '0') throw std::invalid_argument("bad cube id: " + id);
  }
  q.level = std::stoi(id.substr(a + 1, b - a - 1));
  std::istringstream in(id.substr(b + 1));
  std::string field;
  while (std::getline(in, field, ',')) q.corner.push_back(std::stoll(field));
  if (q.corner.size() != bits.size()) throw std::invalid_argument("bad cube id: " + id);
  return q;
}

DyadicCube DyadicCube::parent() const {
  if (level == 0) throw std::logic_error("level-0 cube has no parent");
  DyadicCube p{shift, level - 1, corner};
  for (auto& c : p.corner) c = floor_div(c, 2);
  return p;
}

std::vector<DyadicCube> DyadicCube::children() const {
  std::vector<DyadicCube> out;
  const int k = dim();
  for (std::uint32_t b = 0; b < (1u << k); ++b) {
    DyadicCube c{shift, level + 1, corner};
    for (int j = 0; j < k; ++j) c.corner[static_cast<std::size_t>(j)] = 2 * corner[static_cast<std::size_t>(j)] + ((b >> j) & 1u);
    out.push_back(std::move(c));
  }
  return out;
}

bool DyadicCube::contains(const Eigen::VectorXd& x) const {
  for (int j = 0; j < dim(); ++j)
    if (x(j) < lower(j) || x(j) > upper(j)) return false;
  return true;
}

bool DyadicCube::contains(const DyadicCube& other) const {
  if (other.shift != shift || other.dim() != dim() || other.level < level) return false;
  const int up = other.level - level;
  for (int j = 0; j < dim(); ++j)
    if (floor_div(other.corner[static_cast<std::size_t>(j)], pow2(up)) != corner[static_cast<std::size_t>(j)])
      return false;
  return true;
}

std::size_t DyadicCubeHash::operator()(const DyadicCube& q) const {
  std::size_t h = std::hash<std::uint64_t>{}((std::uint64_t{q.shift} << 32) ^ static_cast<std::uint64_t>(q.level));
  for (auto c : q.corner) h ^= std::hash<std::int64_t>{}(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::vector<DyadicCube> cubes_at(int k, std::uint32_t shift, int level, bool clip) {
  if (k < 1) throw std::invalid_argument("dimension must be at least 1");
  if (level < 0 || level > 30) throw std::invalid_argument("level out of range");
  std::vector<std::int64_t> lo(static_cast<std::size_t>(k)), hi(static_cast<std::size_t>(k));
  const std::int64_t n = pow2(level);
  for (int j = 0; j < k; ++j) {
    const std::int64_t s = ((shift >> j) & 1u) ? n : 0;
    if (clip) {
      lo[static_cast<std::size_t>(j)] = ceil_div(-s, 3);
      hi[static_cast<std::size_t>(j)] = floor_div(3 * n - 3 - s, 3);
    } else {
      lo[static_cast<std::size_t>(j)] = floor_div(-3 - s, 3) + 1;
      hi[static_cast<std::size_t>(j)] = floor_div(3 * n - s - 1, 3);
    }
  }
  std::vector<DyadicCube> out;
  for_each_index(lo, hi, [&](const std::vector<std::int64_t>& c) { out.push_back({shift, level, c}); });
  return out;
}

bool semi_adjacent(const DyadicCube& a, const DyadicCube& b) {
  check_same_grid(a, b);
  std::int64_t gap2 = 0;
  for (int j = 0; j < a.dim(); ++j) {
    const std::int64_t d = std::abs(a.corner[static_cast<std::size_t>(j)] - b.corner[static_cast<std::size_t>(j)]);
    const std::int64_t g = std::max<std::int64_t>(d - 1, 0);
    gap2 += g * g;
  }
  // dist^2 = gap2 side^2 and (2 diam)^2 = 4 k side^2.
  return gap2 > 0 && gap2 <= 4 * a.dim();
}

bool semi_adjacent(const Box& a, const Box& b) {
  const double da = a.diameter();
  const double db = b.diameter();
  if (std::abs(da - db) > 1e-12 * std::max(da, db)) throw std::invalid_argument("diameter mismatch");
  const double d = box_distance(a, b);
  return d > 0.0 && d <= 2.0 * da;
}

const std::vector<std::vector<std::int64_t>>& semi_adjacent_offsets(int k) {
  static std::mutex mutex;
  static std::map<int, std::vector<std::vector<std::int64_t>>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  const auto reach = static_cast<std::int64_t>(std::floor(2.0 * std::sqrt(static_cast<double>(k)))) + 1;
  std::vector<std::vector<std::int64_t>> offsets;
  const DyadicCube origin{0, 0, std::vector<std::int64_t>(static_cast<std::size_t>(k), 0)};
  for_each_index(std::vector<std::int64_t>(static_cast<std::size_t>(k), -reach),
                 std::vector<std::int64_t>(static_cast<std::size_t>(k), reach),
                 [&](const std::vector<std::int64_t>& d) {
                   if (semi_adjacent(origin, DyadicCube{0, 0, d})) offsets.push_back(d);
                 });
  return cache.emplace(k, std::move(offsets)).first->second;
}

std::vector<DyadicCube> semi_adjacent_neighbors(const DyadicCube& q) {
  std::vector<DyadicCube> out;
  for (const auto& d : semi_adjacent_offsets(q.dim())) {
    DyadicCube n = q;
    for (std::size_t j = 0; j < d.size(); ++j) n.corner[j] += d[j];
    out.push_back(std::move(n));
  }
  return out;
}

std::size_t semi_adjacency_degree(int k) { return semi_adjacent_offsets(k).size(); }

Box dilate7(const DyadicCube& q) {
  const Eigen::VectorXd c = q.center();
  const double half = 3.5 * q.side();
  return Box{c.array() - half, c.array() + half};
}

DyadicCube find_containing_cube(const Eigen::VectorXd& x, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("radius must be positive");
  const int k = static_cast<int>(x.size());
  const int finest = std::max(0, static_cast<int>(std::floor(std::log2(1.0 / (2.0 * r)))));
  for (int level = finest; level >= 0; --level) {
    const double side = std::ldexp(1.0, -level);
    for (std::uint32_t shift = 0; shift < (1u << k); ++shift) {
      DyadicCube q{shift, level, std::vector<std::int64_t>(static_cast<std::size_t>(k))};
      bool fits = true;
      for (int j = 0; j < k && fits; ++j) {
        const double off = ((shift >> j) & 1u) ? 1.0 / 3.0 : 0.0;
        q.corner[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(std::floor((x(j) - r - off) / side));
        fits = q.lower(j) <= x(j) - r && x(j) + r <= q.upper(j);
      }
      if (fits) return q;
    }
  }
  throw std::invalid_argument("radius too large for a containing cube");
}

bool NodeRange::empty() const {
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (lo[j] > hi[j]) return true;
  return false;
}

std::size_t NodeRange::count() const {
  if (empty()) return 0;
  std::size_t n = 1;
  for (std::size_t j = 0; j < lo.size(); ++j) n *= static_cast<std::size_t>(hi[j] - lo[j] + 1);
  return n;
}

bool NodeRange::contains(const std::vector<std::int64_t>& index) const {
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (index[j] < lo[j] || index[j] > hi[j]) return false;
  return true;
}

NodeRange node_range(const DyadicCube& q, int J, bool dilated) {
  NodeRange r;
  const std::int64_t top = pow2(J);
  const std::int64_t unit = 3 * pow2(q.level);
  for (int j = 0; j < q.dim(); ++j) {
    std::int64_t a = q.scaled_lower(j);
    std::int64_t b = a + 3;
    if (dilated) {
      a -= 9;
      b += 9;
    }
    // node i lies at i / 2^J; a / unit <= i / 2^J <= b / unit
    r.lo.push_back(std::max<std::int64_t>(0, ceil_div(a * top, unit)));
    r.hi.push_back(std::min<std::int64_t>(top, floor_div(b * top, unit)));
  }
  return r;
}

DyadicCube owner_cube(const std::vector<std::int64_t>& index, int J, std::uint32_t shift, int level) {
  if (level > J) throw std::invalid_argument("level finer than the grid");
  DyadicCube q{shift, level, std::vector<std::int64_t>(index.size())};
  const std::int64_t width = 3 * pow2(J - level);
  for (std::size_t j = 0; j < index.size(); ++j) {
    const std::int64_t t = 3 * index[j] - (((shift >> j) & 1u) ? pow2(J) : 0);
    q.corner[j] = ceil_div(t, width) - 1;
  }
  return q;
}

ScaledBox scaled_box(const DyadicCube& q, int J, bool dilated) {
  if (q.level > J) throw std::invalid_argument("level finer than the grid");
  ScaledBox b;
  const std::int64_t m = pow2(J - q.level);
  for (int j = 0; j < q.dim(); ++j) {
    std::int64_t a = q.scaled_lower(j);
    std::int64_t c = a + 3;
    if (dilated) {
      a -= 9;
      c += 9;
    }
    b.lo.push_back(a * m);
    b.hi.push_back(c * m);
  }
  return b;
}

namespace {

double union_volume(const std::vector<const ScaledBox*>& boxes, std::size_t d, std::size_t k) {
  std::vector<std::int64_t> cuts;
  for (const auto* b : boxes) {
    cuts.push_back(b->lo[d]);
    cuts.push_back(b->hi[d]);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  std::vector<const ScaledBox*> active;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const std::int64_t a = cuts[s];
    const std::int64_t c = cuts[s + 1];
    active.clear();
    for (const auto* b : boxes)
      if (b->lo[d] <= a && b->hi[d] >= c) active.push_back(b);
    if (active.empty()) continue;
    const auto len = static_cast<double>(c - a);
    total += d + 1 == k ? len : len * union_volume(active, d + 1, k);
  }
  return total;
}

}  // namespace

double union_measure(const std::vector<ScaledBox>& boxes, int k, int J) {
  const std::int64_t top = 3 * pow2(J);
  std::vector<ScaledBox> clipped;
  for (const auto& b : boxes) {
    ScaledBox c = b;
    bool empty = false;
    for (std::size_t j = 0; j < c.lo.size(); ++j) {
      c.lo[j] = std::max<std::int64_t>(c.lo[j], 0);
      c.hi[j] = std::min(c.hi[j], top);
      empty = empty || c.lo[j] >= c.hi[j];
    }
    if (!empty) clipped.push_back(std::move(c));
  }
  if (clipped.empty()) return 0.0;
  std::vector<const ScaledBox*> ptrs;
  for (const auto& b : clipped) ptrs.push_back(&b);
  const double vol = union_volume(ptrs, 0, static_cast<std::size_t>(k));
  return vol / std::pow(static_cast<double>(top), k);
}

}  // namespace bilip
