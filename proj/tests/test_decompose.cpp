#include "bilip/decompose.hpp"
#include "bilip/maps.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <map>

using namespace bilip;

namespace {

struct Built {
  GeneratedMap g;
  SurrogateMap p;
};

Built build(const std::string& name, const nlohmann::json& params, int k, int J) {
  GeneratedMap g = generate_map(name, params, k, J);
  SurrogateMap p = SurrogateMap::build(g.f, *g.oracle);
  return {std::move(g), std::move(p)};
}

// Brute-force scan on the line: every level, family, clipped Q1, semi-adjacent
// Q2 and node pair, with the image diameter taken over all nodes in between.
struct Scan {
  std::set<std::pair<DyadicCube, DyadicCube>> e1;
  std::vector<std::uint8_t> e2_marks;
};

Scan brute_scan(const SurrogateMap& p, int J, const DecomposeParams& params) {
  const std::int64_t n = std::int64_t{1} << J;
  const double h = std::ldexp(1.0, -J);
  Scan out;
  out.e2_marks.assign(static_cast<std::size_t>(n + 1), 0);
  auto nodes_in = [&](const DyadicCube& q) {
    std::vector<std::int64_t> v;
    for (std::int64_t i = 0; i <= n; ++i)
      if (q.lower(0) <= i * h && i * h <= q.upper(0)) v.push_back(i);
    return v;
  };
  auto pd = [&](std::int64_t a, std::int64_t b) {
    return p.node_dist(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  };
  for (int level = 0; level <= J; ++level)
    for (std::uint32_t s = 0; s < 2; ++s)
      for (const auto& q1 : cubes_at(1, s, level, true))
        for (std::int64_t c2 = -(std::int64_t{1} << level) - 2; c2 <= (std::int64_t{2} << level) + 2; ++c2) {
          const DyadicCube q2{s, level, {c2}};
          if (q1 == q2 || !semi_adjacent(q1, q2)) continue;
          for (std::int64_t i : nodes_in(q1))
            for (std::int64_t j : nodes_in(q2)) {
              const double len = std::abs(i - j) * h;
              if (!params.testable(len)) continue;
              const std::int64_t lo = std::min(i, j), hi = std::max(i, j);
              double diam = 0.0;
              for (std::int64_t a = lo; a <= hi; ++a)
                for (std::int64_t b = a + 1; b <= hi; ++b) diam = std::max(diam, pd(a, b));
              const double ap = params.alpha_prime();
              if (diam >= ap * len && pd(i, j) <= ap / 10.0 * len) out.e1.insert({q1, q2});
              if (diam <= ap * len)
                for (std::int64_t a = lo; a <= hi; ++a) out.e2_marks[static_cast<std::size_t>(a)] = 1;
            }
        }
  return out;
}

std::set<std::pair<DyadicCube, DyadicCube>> pairs_of(const std::vector<E1Entry>& e1) {
  std::set<std::pair<DyadicCube, DyadicCube>> s;
  for (const auto& e : e1) s.insert({e.q1, e.q2});
  return s;
}

}  // namespace

TEST_CASE("chain threshold and piece bound") {
  CHECK(default_chain_threshold(0.01) == 40);
  CHECK(default_chain_threshold(0.1) == 4);
  CHECK(default_chain_threshold(0.03) == 14);
  CHECK(log2_piece_bound(1, 3) == 12.0);
  CHECK(log2_piece_bound(2, 3) == 120.0);
}

TEST_CASE("identity and constant maps have no E1 cubes") {
  DecomposeParams params{0.02, 0.0};
  const Built id = build("identity", {}, 1, 5);
  CHECK(classify_E1(id.p, id.g.f, params).empty());
  const Classification c = classify_E2(id.p, id.g.f, params);
  CHECK(c.e2_count == 0);
  CHECK(std::count(c.e2_marks.begin(), c.e2_marks.end(), 1) == 0);
  const Built k = build("constant", {}, 1, 5);
  CHECK(classify_E1(k.p, k.g.f, params).empty());
  const Built id2 = build("identity", {}, 2, 3);
  CHECK(classify_E1(id2.p, id2.g.f, params).empty());
}

TEST_CASE("constant map marks every node E2") {
  const Built k = build("constant", {}, 1, 5);
  const Classification c = classify(k.p, k.g.f, DecomposeParams{0.02, 0.0});
  CHECK(c.e2_count > 0);
  CHECK(std::count(c.e2_marks.begin(), c.e2_marks.end(), 1) == static_cast<long>(k.g.f.node_count()));
  const Built k2 = build("constant", {}, 2, 2);
  const Classification c2 = classify(k2.p, k2.g.f, DecomposeParams{0.02, 0.0});
  CHECK(std::count(c2.e2_marks.begin(), c2.e2_marks.end(), 1) == static_cast<long>(k2.g.f.node_count()));
}

TEST_CASE("fold E1 witnesses straddle the fold") {
  const int J = 6;
  const DecomposeParams params{0.02, 0.0};
  const Built fold = build("fold", {}, 1, J);
  const auto e1 = classify_E1(fold.p, fold.g.f, params);
  REQUIRE(!e1.empty());
  const double h = std::ldexp(1.0, -J);
  bool symmetric = false;
  for (const auto& e : e1) {
    const double a = static_cast<double>(e.x1) * h, b = static_cast<double>(e.x2) * h;
    CHECK((a - 0.5) * (b - 0.5) < 0.0);
    CHECK(e.length == doctest::Approx(std::abs(a - b)));
    CHECK(e.image_diam >= params.alpha_prime() * e.length);
    CHECK(e.endpoint_dist <= params.lower_bound(e.length));
    CHECK(e.image_diam == doctest::Approx(std::max(std::abs(a - 0.5), std::abs(b - 0.5))));
    if (std::abs(a + b - 1.0) < 1e-15) {
      symmetric = true;
      CHECK(e.endpoint_dist == 0.0);
    }
  }
  CHECK(symmetric);
}

TEST_CASE("classification matches brute force on the line") {
  const int J = 4;
  for (const char* name : {"fold", "zigzag", "random_lipschitz", "quantized"}) {
    const Built b = build(name, {}, 1, J);
    for (double alpha : {0.02, 0.06}) {
      const DecomposeParams params{alpha, b.p.epsilon()};
      const Classification c = classify(b.p, b.g.f, params);
      const Scan want = brute_scan(b.p, J, params);
      INFO(std::string(name) << " alpha " << alpha);
      const auto got = pairs_of(c.e1);
      for (const auto& [a, b] : got)
        if (!want.e1.count({a, b})) MESSAGE("extra " << a.id() << " " << b.id());
      for (const auto& [a, b] : want.e1)
        if (!got.count({a, b})) MESSAGE("missing " << a.id() << " " << b.id());
      CHECK(got == want.e1);
      CHECK(c.e2_marks == want.e2_marks);
    }
  }
}

TEST_CASE("fold E2 segments sit across the fold") {
  const int J = 5;
  const DecomposeParams params{0.06, 0.0};
  const Built fold = build("fold", {}, 1, J);
  const Classification c = classify(fold.p, fold.g.f, params);
  REQUIRE(c.e2_count > 0);
  const double h = std::ldexp(1.0, -J);
  for (const auto& s : c.e2_sample) {
    const double a = static_cast<double>(s.x1) * h, b = static_cast<double>(s.x2) * h;
    CHECK((a - 0.5) * (b - 0.5) < 0.0);
    CHECK(s.image_diam <= params.alpha_prime() * s.length);
  }
  CHECK(c.e2_marks[std::size_t{1} << (J - 1)] == 1);
  // at alpha' = 0.2 no segment is short enough in the image
  CHECK(classify(fold.p, fold.g.f, DecomposeParams{0.02, 0.0}).e2_count == 0);
}

TEST_CASE("B is the set of E1 cubes with N larger E1 ancestors") {
  const int J = 6;
  const Built fold = build("fold", {}, 1, J);
  const auto e1 = classify_E1(fold.p, fold.g.f, DecomposeParams{0.02, 0.0});
  const auto cubes = e1_cubes(e1);
  CHECK(compute_B({}, 3).empty());
  for (int N : {1, 2, 3, 5}) {
    std::set<DyadicCube> want;
    for (const auto& q : cubes) {
      int above = 0;
      for (const auto& r : cubes)
        if (r.shift == q.shift && r.level < q.level && r.contains(q)) ++above;
      if (above >= N) want.insert(q);
    }
    CHECK(compute_B(e1, N) == want);
  }
  CHECK(!compute_B(e1, 3).empty());
  CHECK(compute_B(e1, J + 1).empty());
  CHECK(compute_B(e1, J + 5).empty());
}

TEST_CASE("B1 marks and measure") {
  const GridFunction f(1, 4, std::vector<std::size_t>(17, 0));
  const B1Marks none = mark_B1({}, f);
  CHECK(none.measure == 0.0);
  CHECK(std::count(none.marks.begin(), none.marks.end(), 1) == 0);
  const B1Marks all = mark_B1({DyadicCube{0, 0, {0}}}, f);
  CHECK(all.measure == 1.0);
  CHECK(std::count(all.marks.begin(), all.marks.end(), 1) == 17);
  const GridFunction f2(2, 2, std::vector<std::size_t>(25, 0));
  CHECK(mark_B1({DyadicCube{0, 0, {0, 0}}}, f2).measure == 1.0);
  // 7Q of [0, 1/16] is [-3/16, 1/4]
  const B1Marks small = mark_B1({DyadicCube{0, 4, {0}}}, f);
  CHECK(small.measure == 0.25);
  CHECK(std::count(small.marks.begin(), small.marks.end(), 1) == 5);
}

TEST_CASE("B1 marks match the dilated boxes on the fold") {
  const int J = 6;
  const Built fold = build("fold", {}, 1, J);
  const auto B = compute_B(classify_E1(fold.p, fold.g.f, DecomposeParams{0.02, 0.0}), 3);
  REQUIRE(!B.empty());
  const B1Marks m = mark_B1(B, fold.g.f);
  for (std::size_t i = 0; i < fold.g.f.node_count(); ++i) {
    const double x = std::ldexp(static_cast<double>(i), -J);
    bool in = false;
    for (const auto& q : B) {
      const Box b = dilate7(q);
      in |= b.lo(0) <= x && x <= b.hi(0);
    }
    CHECK(static_cast<bool>(m.marks[i]) == in);
  }
  CHECK(m.measure > 0.0);
  CHECK(m.measure <= 1.0);
}

TEST_CASE("labels without constraints form one piece") {
  const GridFunction f(1, 3, std::vector<std::size_t>(9, 0));
  const std::vector<std::uint8_t> clear(9, 0);
  const DecompositionLabels l = label_pieces({}, f, clear, clear, 4);
  CHECK(l.M == 1);
  CHECK(l.N == 4);
  CHECK(l.label == std::vector<int>(9, 1));
  CHECK(l.piece_sizes == std::vector<std::size_t>{9});
}

TEST_CASE("one constraint splits into two pieces") {
  const GridFunction f(1, 3, std::vector<std::size_t>(9, 0));
  const std::vector<std::uint8_t> clear(9, 0);
  const Constraint c{DyadicCube{0, 2, {0}}, DyadicCube{0, 2, {2}}};  // [0,1/4] and [1/2,3/4]
  const DecompositionLabels l = label_pieces({c}, f, clear, clear, 4);
  CHECK(l.M == 2);
  CHECK(l.label == std::vector<int>{1, 1, 1, 2, 2, 2, 2, 2, 2});
  CHECK(separation_violations({c}, f, l.label) == 0);
  CHECK(separation_violations({c}, f, std::vector<int>(9, 1)) == 1);
}

TEST_CASE("residual marks take precedence and E2 wins over B1") {
  const GridFunction f(1, 3, std::vector<std::size_t>(9, 0));
  std::vector<std::uint8_t> e2(9, 0), b1(9, 0);
  e2[0] = e2[1] = 1;
  b1[1] = b1[8] = 1;
  const DecompositionLabels l = label_pieces({}, f, e2, b1, 4);
  CHECK(l.label[0] == RES_E2);
  CHECK(l.label[1] == RES_E2);
  CHECK(l.label[8] == RES_B1);
  CHECK(l.label[4] == 1);
  CHECK(l.residual_e2 == 2);
  CHECK(l.residual_b1 == 1);
  CHECK(l.M == 1);
}

TEST_CASE("identity verification margins") {
  const int J = 5;
  const DecomposeParams params{0.01, 0.0};
  const Built id = build("identity", {}, 1, J);
  const std::vector<std::uint8_t> clear(id.g.f.node_count(), 0);
  const DecompositionLabels l = label_pieces({}, id.g.f, clear, clear, default_chain_threshold(params.alpha));
  const VerificationReport r = verify_pieces(l, id.g.f, id.p, *id.g.oracle, params, 1.0);
  CHECK(r.passed());
  CHECK(r.exhaustive);
  const double h = std::ldexp(1.0, -J);
  CHECK(r.worst_lower_p_margin == doctest::Approx(h * (1.0 - params.alpha_prime() / 10.0)));
  CHECK(r.worst_lower_f_margin == doctest::Approx(h * (1.0 - params.alpha_prime() / 10.0)));
  CHECK(r.worst_upper_margin == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.pairs == id.g.f.node_count() * (id.g.f.node_count() - 1) / 2);
}

TEST_CASE("verification finds a merged fold") {
  const int J = 5;
  const DecomposeParams params{0.01, 0.0};
  const Built fold = build("fold", {}, 1, J);
  std::vector<std::uint8_t> clear(fold.g.f.node_count(), 0);
  const DecompositionLabels l = label_pieces({}, fold.g.f, clear, clear, 4);
  const VerificationReport r = verify_pieces(l, fold.g.f, fold.p, *fold.g.oracle, params, 1.0);
  CHECK_FALSE(r.passed());
  CHECK(r.lower_p_violations > 0);
  CHECK(r.worst_lower_p_margin < 0.0);
  REQUIRE(!r.examples.empty());
  CHECK(r.examples.size() <= 20);
  const auto& e = r.examples.front();
  CHECK(fold.p.node_dist(e.x, e.y) == doctest::Approx(std::abs(std::ldexp(double(e.x) + double(e.y), -J) - 1.0)));
}

TEST_CASE("constant map verification is vacuous") {
  const DecomposeParams params{0.01, 0.0};
  const Built k = build("constant", {}, 1, 5);
  const Classification c = classify(k.p, k.g.f, params);
  const std::vector<std::uint8_t> clear(k.g.f.node_count(), 0);
  const DecompositionLabels l = label_pieces({}, k.g.f, c.e2_marks, clear, 40);
  CHECK(l.M == 0);
  const VerificationReport r = verify_pieces(l, k.g.f, k.p, *k.g.oracle, params, 1.0);
  CHECK(r.testable_pairs == 0);
  CHECK(r.passed());
}

namespace {

struct Run {
  DecompositionLabels labels;
  VerificationReport report;
  std::vector<Constraint> constraints;
  std::set<DyadicCube> B;
  int N = 0;
};

Run full(const Built& b, double alpha) {
  const DecomposeParams params{alpha, b.p.epsilon()};
  const Classification c = classify(b.p, b.g.f, params);
  Run r;
  r.N = default_chain_threshold(alpha);
  r.B = compute_B(c.e1, r.N);
  const B1Marks b1 = mark_B1(r.B, b.g.f);
  r.constraints = retained_constraints(c.e1, r.B);
  r.labels = label_pieces(r.constraints, b.g.f, c.e2_marks, b1.marks, r.N);
  r.report = verify_pieces(r.labels, b.g.f, b.p, *b.g.oracle, params, b.g.lipschitz);
  return r;
}

}  // namespace

TEST_CASE("fold decomposes into verified pieces") {
  const Built fold = build("fold", {}, 1, 7);
  const Run r = full(fold, 0.01);
  CHECK(r.labels.M >= 2);
  CHECK(r.report.passed());
  CHECK(separation_violations(r.constraints, fold.g.f, r.labels.label) == 0);
  CHECK(std::log2(static_cast<double>(r.labels.M)) <= log2_piece_bound(1, r.N));
  std::set<DyadicCube> retained;
  for (const auto& c : r.constraints) retained.insert(c.q1);
  CHECK(max_chain_count(retained, fold.g.f, r.labels.label) <= r.N);
  for (const auto& c : r.constraints) CHECK(r.B.count(c.q1) == 0);
  CHECK(std::is_sorted(r.constraints.begin(), r.constraints.end()));
}

TEST_CASE("fold at alpha 0.1 is all residual") {
  const Built fold = build("fold", {}, 1, 6);
  const Run r = full(fold, 0.1);
  CHECK(r.labels.M == 0);
  CHECK(r.labels.residual_e2 == fold.g.f.node_count());
}

TEST_CASE("planar fold decomposes into verified pieces") {
  const Built fold = build("fold", {}, 2, 3);
  const Run r = full(fold, 0.01);
  CHECK(r.labels.M >= 2);
  CHECK(r.report.passed());
  CHECK(separation_violations(r.constraints, fold.g.f, r.labels.label) == 0);
}

TEST_CASE("snowflake targets verify") {
  for (double s : {0.5, 0.9}) {
    const Built b = build("snowflake", {{"s", s}}, 1, 6);
    const Run r = full(b, 0.09);
    INFO("s = " << s);
    CHECK(r.report.passed());
    CHECK(r.report.exhaustive);
  }
  const Built b = build("snowflake", {{"s", 0.9}}, 1, 6);
  CHECK(full(b, 0.09).report.testable_pairs > 0);
}
