#include "bilip/decompose.hpp"

#include "bilip/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace bilip {

int default_chain_threshold(double alpha) {
  const double ap = 10.0 * alpha;
  if (!(ap > 0.0)) throw std::invalid_argument("alpha must be positive");
  return std::max(1, static_cast<int>(std::ceil(4.0 / ap - 1e-9)));
}

namespace {

std::vector<std::size_t> nodes_in(const NodeRange& r, std::int64_t side) {
  std::vector<std::size_t> out;
  if (r.empty()) return out;
  out.reserve(r.count());
  std::vector<std::int64_t> idx = r.lo;
  const std::size_t k = idx.size();
  for (;;) {
    std::size_t node = 0;
    for (std::size_t j = 0; j < k; ++j) node = node * static_cast<std::size_t>(side) + static_cast<std::size_t>(idx[j]);
    out.push_back(node);
    std::size_t j = k;
    while (j > 0) {
      --j;
      if (idx[j] < r.hi[j]) {
        ++idx[j];
        break;
      }
      idx[j] = r.lo[j];
      if (j == 0) return out;
    }
  }
}

// Image diameter of the segment between two nodes, sampled at grid spacing.
class SegmentDiameter {
 public:
  SegmentDiameter(const SurrogateMap& p, const GridFunction& f) : p_(p), f_(f) {}

  // Exact value, or any value above `cap` once the diameter is known to exceed it.
  double operator()(std::size_t a, std::size_t b, double cap) const {
    if (f_.dim() == 1) {
      if (a > b) std::swap(a, b);
      if (f_.node_count() <= kTableLimit) {
        std::call_once(once_, [&] { build_table(); });
        return table_[a * f_.node_count() + b];
      }
      double d = 0.0;
      for (std::size_t i = a; i <= b; ++i)
        for (std::size_t j = i + 1; j <= b; ++j) {
          d = std::max(d, p_.node_dist(i, j));
          if (d > cap) return d;
        }
      return d;
    }
    const Point xa = f_.node_point(a);
    const Point xb = f_.node_point(b);
    const double len = (xb - xa).norm();
    const auto n = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(len / f_.spacing() - 1e-9)));
    Eigen::MatrixXd pts(f_.dim(), n + 1);
    for (Eigen::Index i = 0; i <= n; ++i) pts.col(i) = xa + (xb - xa) * (static_cast<double>(i) / static_cast<double>(n));
    const RowMatrix v = p_.evaluate_batch(pts);
    double d = 0.0;
    for (Eigen::Index i = 0; i <= n; ++i)
      for (Eigen::Index j = i + 1; j <= n; ++j) {
        d = std::max(d, sup_distance(v.row(i), v.row(j)));
        if (d > cap) return d;
      }
    return d;
  }

 private:
  static constexpr std::size_t kTableLimit = 4097;

  void build_table() const {
    const std::size_t n = f_.node_count();
    table_.assign(n * n, 0.0);
    for (std::size_t len = 1; len < n; ++len)
      for (std::size_t i = 0; i + len < n; ++i) {
        const std::size_t j = i + len;
        double d = p_.node_dist(i, j);
        if (len > 1) d = std::max({d, table_[i * n + j - 1], table_[(i + 1) * n + j]});
        table_[i * n + j] = d;
      }
  }

  const SurrogateMap& p_;
  const GridFunction& f_;
  mutable std::once_flag once_;
  mutable std::vector<double> table_;
};

// Unordered node pairs seen as E2 segments.
class PairSet {
 public:
  explicit PairSet(std::size_t n) : n_(n) {
    if (n <= kBitLimit) bits_ = std::vector<std::atomic<std::uint64_t>>((n * n + 63) / 64);
  }

  void insert(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    const std::size_t key = a * n_ + b;
    if (!bits_.empty()) {
      bits_[key / 64].fetch_or(std::uint64_t{1} << (key % 64), std::memory_order_relaxed);
      return;
    }
    std::lock_guard lock(mutex_);
    set_.insert(key);
  }

  template <class Visit>
  void for_each(Visit&& visit) const {
    if (!bits_.empty()) {
      for (std::size_t w = 0; w < bits_.size(); ++w) {
        std::uint64_t word = bits_[w].load(std::memory_order_relaxed);
        while (word) {
          const int bit = std::countr_zero(word);
          word &= word - 1;
          const std::size_t key = w * 64 + static_cast<std::size_t>(bit);
          visit(key / n_, key % n_);
        }
      }
      return;
    }
    std::vector<std::size_t> keys(set_.begin(), set_.end());
    std::sort(keys.begin(), keys.end());
    for (auto key : keys) visit(key / n_, key % n_);
  }

 private:
  static constexpr std::size_t kBitLimit = 20000;
  std::size_t n_;
  std::vector<std::atomic<std::uint64_t>> bits_;
  std::mutex mutex_;
  std::unordered_set<std::size_t> set_;
};

struct ScanResult {
  std::vector<E1Entry> e1;
  std::vector<E2Segment> e2;
  std::size_t pairs = 0;
};

// Marks nodes within half a grid step of the segment [a, b].
void mark_segment(const GridFunction& f, std::size_t a, std::size_t b, std::vector<std::uint8_t>& marks) {
  const int k = f.dim();
  const Point xa = f.node_point(a);
  const Point xb = f.node_point(b);
  const double h = f.spacing();
  NodeRange r;
  for (int j = 0; j < k; ++j) {
    const double lo = std::min(xa(j), xb(j)) - h / 2;
    const double hi = std::max(xa(j), xb(j)) + h / 2;
    r.lo.push_back(std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(lo / h))));
    r.hi.push_back(std::min<std::int64_t>(f.side_count() - 1, static_cast<std::int64_t>(std::floor(hi / h))));
  }
  const Eigen::VectorXd d = xb - xa;
  const double dd = d.squaredNorm();
  for (std::size_t node : nodes_in(r, f.side_count())) {
    const Point x = f.node_point(node);
    const double t = dd > 0.0 ? std::clamp((x - xa).dot(d) / dd, 0.0, 1.0) : 0.0;
    if ((x - (xa + t * d)).norm() <= h / 2 + 1e-12 * h) marks[node] = 1;
  }
}

}  // namespace

Classification classify(const SurrogateMap& p, const GridFunction& f, const DecomposeParams& params,
                        std::size_t e2_sample_cap) {
  if (!(params.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const int k = f.dim();
  const int J = f.level();
  const double ap = params.alpha_prime();
  const std::size_t n = f.node_count();
  const SegmentDiameter seg_diam(p, f);
  PairSet e2_pairs(n);

  std::vector<DyadicCube> tasks;
  for (int level = 0; level <= J; ++level)
    for (std::uint32_t s = 0; s < (1u << k); ++s) {
      auto cubes = cubes_at(k, s, level, true);
      tasks.insert(tasks.end(), cubes.begin(), cubes.end());
    }
  constexpr std::size_t kLocalSample = 8;
  std::vector<ScanResult> results(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    const DyadicCube& q1 = tasks[t];
    ScanResult& out = results[t];
    const std::vector<std::size_t> n1 = nodes_in(node_range(q1, J), f.side_count());
    for (const DyadicCube& q2 : semi_adjacent_neighbors(q1)) {
      const std::vector<std::size_t> n2 = nodes_in(node_range(q2, J), f.side_count());
      if (n2.empty()) continue;
      bool have_e1 = false;
      for (std::size_t a : n1)
        for (std::size_t b : n2) {
          ++out.pairs;
          const double len = f.node_distance(a, b);
          if (!params.testable(len)) continue;
          const double e = p.node_dist(a, b);
          if (e > ap * len) continue;
          const double diam = seg_diam(a, b, ap * len);
          if (!have_e1 && diam >= ap * len && e <= params.lower_bound(len)) {
            out.e1.push_back({q1, q2, a, b, len, diam, e});
            have_e1 = true;
          }
          if (diam <= ap * len) {
            e2_pairs.insert(a, b);
            if (out.e2.size() < kLocalSample) out.e2.push_back({q1, q2, a, b, len, diam});
          }
        }
    }
  });

  Classification c;
  c.e2_marks.assign(n, 0);
  for (auto& r : results) {
    c.pairs_scanned += r.pairs;
    c.e1.insert(c.e1.end(), r.e1.begin(), r.e1.end());
    for (auto& s : r.e2)
      if (c.e2_sample.size() < e2_sample_cap) c.e2_sample.push_back(s);
  }
  if (k == 1) {
    std::vector<std::int64_t> diff(n + 1, 0);
    e2_pairs.for_each([&](std::size_t a, std::size_t b) {
      ++c.e2_count;
      ++diff[a];
      --diff[b + 1];
    });
    std::int64_t run = 0;
    for (std::size_t i = 0; i < n; ++i) {
      run += diff[i];
      c.e2_marks[i] = run > 0 ? 1 : 0;
    }
  } else {
    e2_pairs.for_each([&](std::size_t a, std::size_t b) {
      ++c.e2_count;
      mark_segment(f, a, b, c.e2_marks);
    });
  }
  return c;
}

std::vector<E1Entry> classify_E1(const SurrogateMap& p, const GridFunction& f, const DecomposeParams& params) {
  return classify(p, f, params).e1;
}

Classification classify_E2(const SurrogateMap& p, const GridFunction& f, const DecomposeParams& params) {
  Classification c = classify(p, f, params);
  c.e1.clear();
  return c;
}

std::set<DyadicCube> e1_cubes(const std::vector<E1Entry>& e1) {
  std::set<DyadicCube> out;
  for (const auto& e : e1) out.insert(e.q1);
  return out;
}

std::set<DyadicCube> compute_B(const std::vector<E1Entry>& e1, int N) {
  if (N < 1) throw std::invalid_argument("chain threshold must be at least 1");
  const std::set<DyadicCube> cubes = e1_cubes(e1);
  std::set<DyadicCube> B;
  for (const auto& q : cubes) {
    int above = 0;
    for (DyadicCube a = q; a.level > 0;) {
      a = a.parent();
      if (cubes.count(a)) ++above;
    }
    if (above >= N) B.insert(q);
  }
  return B;
}

B1Marks mark_B1(const std::set<DyadicCube>& B, const GridFunction& f) {
  B1Marks out;
  out.marks.assign(f.node_count(), 0);
  std::vector<ScaledBox> boxes;
  for (const auto& q : B) {
    for (std::size_t node : nodes_in(node_range(q, f.level(), true), f.side_count())) out.marks[node] = 1;
    boxes.push_back(scaled_box(q, f.level(), true));
  }
  out.measure = union_measure(boxes, f.dim(), f.level());
  return out;
}

std::vector<Constraint> retained_constraints(const std::vector<E1Entry>& e1, const std::set<DyadicCube>& B) {
  std::vector<Constraint> out;
  for (const auto& e : e1)
    if (!B.count(e.q1)) out.push_back({e.q1, e.q2});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DecompositionLabels label_pieces(const std::vector<Constraint>& constraints, const GridFunction& f,
                                 const std::vector<std::uint8_t>& e2_marks,
                                 const std::vector<std::uint8_t>& b1_marks, int N) {
  const std::size_t n = f.node_count();
  if (e2_marks.size() != n || b1_marks.size() != n) throw std::invalid_argument("mark arrays do not match the grid");
  DecompositionLabels out;
  out.N = N;
  std::vector<int> piece(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (e2_marks[v]) {
      piece[v] = RES_E2;
      ++out.residual_e2;
    } else if (b1_marks[v]) {
      piece[v] = RES_B1;
      ++out.residual_b1;
    }
  }
  int next = 1;
  std::vector<int> in_q1, in_q2, both;
  for (const auto& c : constraints) {
    const auto n1 = nodes_in(node_range(c.q1, f.level()), f.side_count());
    const auto n2 = nodes_in(node_range(c.q2, f.level()), f.side_count());
    in_q1.clear();
    in_q2.clear();
    for (auto v : n1)
      if (piece[v] >= 0) in_q1.push_back(piece[v]);
    for (auto v : n2)
      if (piece[v] >= 0) in_q2.push_back(piece[v]);
    std::sort(in_q1.begin(), in_q1.end());
    in_q1.erase(std::unique(in_q1.begin(), in_q1.end()), in_q1.end());
    std::sort(in_q2.begin(), in_q2.end());
    in_q2.erase(std::unique(in_q2.begin(), in_q2.end()), in_q2.end());
    both.clear();
    std::set_intersection(in_q1.begin(), in_q1.end(), in_q2.begin(), in_q2.end(), std::back_inserter(both));
    if (both.empty()) continue;
    std::unordered_map<int, int> fresh;
    for (int s : both) fresh[s] = next++;
    for (auto v : n1) {
      const auto it = fresh.find(piece[v]);
      if (it != fresh.end()) piece[v] = it->second;
    }
  }
  std::unordered_map<int, int> renumber;
  out.label.assign(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (piece[v] < 0) {
      out.label[v] = piece[v];
      continue;
    }
    auto [it, inserted] = renumber.emplace(piece[v], static_cast<int>(renumber.size()) + 1);
    if (inserted) out.piece_sizes.push_back(0);
    out.label[v] = it->second;
    ++out.piece_sizes[static_cast<std::size_t>(it->second - 1)];
  }
  out.M = static_cast<int>(renumber.size());
  return out;
}

std::size_t separation_violations(const std::vector<Constraint>& constraints, const GridFunction& f,
                                  const std::vector<int>& label) {
  std::size_t bad = 0;
  std::vector<int> a, b, both;
  for (const auto& c : constraints) {
    a.clear();
    b.clear();
    for (auto v : nodes_in(node_range(c.q1, f.level()), f.side_count()))
      if (label[v] > 0) a.push_back(label[v]);
    for (auto v : nodes_in(node_range(c.q2, f.level()), f.side_count()))
      if (label[v] > 0) b.push_back(label[v]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    both.clear();
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    if (!both.empty()) ++bad;
  }
  return bad;
}

int max_chain_count(const std::set<DyadicCube>& cubes, const GridFunction& f, const std::vector<int>& label) {
  if (cubes.empty()) return 0;
  const int k = f.dim();
  int worst = 0;
  for (std::size_t v = 0; v < f.node_count(); ++v) {
    if (label[v] <= 0) continue;
    const auto idx = f.multi_index(v);
    for (std::uint32_t s = 0; s < (1u << k); ++s) {
      int count = 0;
      for (int level = 0; level <= f.level(); ++level)
        if (cubes.count(owner_cube(idx, f.level(), s, level))) ++count;
      worst = std::max(worst, count);
    }
  }
  return worst;
}

namespace {

void record(VerificationReport& r, std::size_t x, std::size_t y, const char* kind, double margin) {
  if (r.examples.size() < 20) r.examples.push_back({x, y, kind, margin});
}

void merge(VerificationReport& into, const VerificationReport& part) {
  into.pairs += part.pairs;
  into.testable_pairs += part.testable_pairs;
  into.lower_p_violations += part.lower_p_violations;
  into.lower_f_violations += part.lower_f_violations;
  into.upper_violations += part.upper_violations;
  into.worst_lower_p_margin = std::min(into.worst_lower_p_margin, part.worst_lower_p_margin);
  into.worst_lower_f_margin = std::min(into.worst_lower_f_margin, part.worst_lower_f_margin);
  into.worst_upper_margin = std::min(into.worst_upper_margin, part.worst_upper_margin);
  for (const auto& e : part.examples)
    if (into.examples.size() < 20) into.examples.push_back(e);
}

}  // namespace

VerificationReport verify_pieces(const DecompositionLabels& labels, const GridFunction& f, const SurrogateMap& p,
                                 const DistanceOracle& oracle, const DecomposeParams& params, double lipschitz,
                                 std::size_t exhaustive_limit, std::size_t sample_pairs, std::uint64_t seed) {
  const std::size_t n = f.node_count();
  if (labels.label.size() != n) throw std::invalid_argument("labels do not match the grid");
  auto check = [&](std::size_t a, std::size_t b, VerificationReport& r) {
    ++r.pairs;
    const double len = f.node_distance(a, b);
    const double df = oracle.dist(f.value(a), f.value(b));
    const double upper = lipschitz * len + params.eps - df;
    r.worst_upper_margin = std::min(r.worst_upper_margin, upper);
    if (upper < -1e-12 * (1.0 + df)) {
      ++r.upper_violations;
      record(r, a, b, "upper", upper);
    }
    const int la = labels.label[a];
    if (la <= 0 || la != labels.label[b] || !params.testable(len)) return;
    ++r.testable_pairs;
    const double lp = p.node_dist(a, b) - params.lower_bound(len);
    const double lf = df - (params.lower_bound(len) - 14.0 * params.eps);
    r.worst_lower_p_margin = std::min(r.worst_lower_p_margin, lp);
    r.worst_lower_f_margin = std::min(r.worst_lower_f_margin, lf);
    if (lp < 0.0) {
      ++r.lower_p_violations;
      record(r, a, b, "lower_p", lp);
    }
    if (lf < 0.0) {
      ++r.lower_f_violations;
      record(r, a, b, "lower_f", lf);
    }
  };

  VerificationReport out;
  constexpr std::size_t kChunk = 32;
  if (n <= exhaustive_limit) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<VerificationReport> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
      for (std::size_t a = c * kChunk; a < std::min(n, (c + 1) * kChunk); ++a)
        for (std::size_t b = a + 1; b < n; ++b) check(a, b, parts[c]);
    });
    for (const auto& part : parts) merge(out, part);
    return out;
  }
  out.exhaustive = false;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(sample_pairs);
  while (pairs.size() < sample_pairs) {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  constexpr std::size_t kSampleChunk = 4096;
  const std::size_t chunks = (pairs.size() + kSampleChunk - 1) / kSampleChunk;
  std::vector<VerificationReport> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    for (std::size_t i = c * kSampleChunk; i < std::min(pairs.size(), (c + 1) * kSampleChunk); ++i)
      check(pairs[i].first, pairs[i].second, parts[c]);
  });
  for (const auto& part : parts) merge(out, part);
  return out;
}

double log2_piece_bound(int k, int N) {
  return static_cast<double>(semi_adjacency_degree(k)) * static_cast<double>(N);
}

}  // namespace bilip
