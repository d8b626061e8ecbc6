#include "bilip/metric.hpp"
#include "bilip/metric_io.hpp"
#include "bilip/maps.hpp"
#include "bilip/surrogate.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace bilip;
using oracle::vec;

TEST_CASE("greedy net keeps 0 and 0.8 from {0, 0.4, 0.8} at radius 0.5") {
  auto m = oracle::line_points({0.0, 0.4, 0.8});
  const std::vector<std::size_t> ids{0, 1, 2};
  const EpsNet net = build_eps_net(ids, *m, 0.5);
  CHECK(net.members == std::vector<std::size_t>{0, 2});
}

TEST_CASE("net at radius 0 keeps every distinct point") {
  auto m = oracle::line_points({0.3, 0.1, 0.3, 0.7, 0.1});
  const std::vector<std::size_t> ids{0, 1, 2, 3, 4};
  CHECK(build_eps_net(ids, *m, 0.0).members == std::vector<std::size_t>{0, 1, 3});
}

TEST_CASE("net of one point") {
  auto m = oracle::line_points({0.25});
  const std::vector<std::size_t> ids{0};
  CHECK(build_eps_net(ids, *m, 10.0).members == std::vector<std::size_t>{0});
  CHECK_THROWS(build_eps_net(std::vector<std::size_t>{}, *m, 1.0));
}

TEST_CASE("greedy net is a covering and separated") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd pts(2, 300);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) << u(rng), u(rng);
  EuclideanMetric m(pts);
  std::vector<std::size_t> ids(300);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const double eps = 0.1;
  const EpsNet net = build_eps_net(ids, m, eps);
  for (std::size_t a = 0; a < net.size(); ++a)
    for (std::size_t b = a + 1; b < net.size(); ++b) CHECK(m.dist(net.members[a], net.members[b]) > eps);
  for (std::size_t p : ids) {
    double best = 1e9;
    for (std::size_t q : net.members) best = std::min(best, m.dist(p, q));
    CHECK(best <= eps);
  }
}

TEST_CASE("snap to nearest member with ties to the lower position") {
  auto m = oracle::line_points({0.0, 0.4, 0.8, 0.2, 0.6, 0.1, 0.3});
  EpsNet net;
  net.members = {0, 2};
  net.radius = 0.5;
  CHECK(snap(0, net, *m) == 0);
  CHECK(snap(2, net, *m) == 2);
  CHECK(snap(1, net, *m) == 0);  // 0.4 is 0.4 from both
  auto q = oracle::line_points({0.0, 0.5, 1.0, 0.25, 0.75});
  EpsNet tie;
  tie.members = {4, 3};  // 0.5 is 0.25 from both
  CHECK(snap_position(1, tie, [&](std::size_t a, std::size_t b) { return q->dist(a, b); }) == 0);
  CHECK(snap(1, tie, *q) == 4);
}

TEST_CASE("Kuratowski embedding of a three point space") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  MatrixMetric m(d);
  EpsNet z;
  z.members = {0, 1, 2};
  const Eigen::VectorXd ea = kuratowski(0, z, m);
  const Eigen::VectorXd eb = kuratowski(1, z, m);
  CHECK(ea == vec({0, 1, 2}));
  CHECK(eb == vec({1, 0, 1}));
  CHECK(sup_distance(ea, eb) == 1.0);
  CHECK(sup_distance(ea, ea) == 0.0);
  EpsNet one;
  one.members = {1};
  CHECK(sup_distance(kuratowski(0, one, m), kuratowski(2, one, m)) <= m.dist(0, 2));
}

TEST_CASE("sup distance agrees with a scalar loop on long rows") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int n : {0, 1, 3, 7, 8, 9, 31, 1000, 4097}) {
    Eigen::RowVectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) a(i) = g(rng), b(i) = g(rng);
    CHECK(sup_distance(a, b) == oracle::sup_dist(a, b));
    CHECK(max_abs_difference(a.data(), b.data(), static_cast<std::size_t>(n)) == oracle::sup_dist(a, b));
  }
}

TEST_CASE("McShane extension on two sites") {
  Eigen::MatrixXd sites(1, 2);
  sites << 0.0, 1.0;
  const Eigen::VectorXd values = vec({0.0, 1.0});
  CHECK(mcshane_eval(sites, values, 1.0, vec({0.5})) == doctest::Approx(0.5));
  CHECK(mcshane_eval(sites, values, 4.0, vec({0.5})) == doctest::Approx(2.0));
  CHECK(mcshane_eval(sites, values, 1.0, vec({0.0})) == 0.0);
  CHECK(mcshane_eval(sites, values, 1.0, vec({1.0})) == 1.0);
  CHECK_THROWS_WITH(McShaneExtension(sites, vec({0.0, 3.0}), 1.0), "inconsistent extension data");
}

TEST_CASE("radial projection") {
  CHECK(radial_project(vec({1.5, 0.5})) == vec({1.0, 0.5}));
  CHECK(radial_project(vec({0.5, 0.5})) == vec({0.5, 0.5}));
  CHECK(radial_project(vec({0.2, 0.9})) == vec({0.2, 0.9}));
  CHECK(radial_project(vec({-1.0})) == vec({0.0}));
  const Eigen::VectorXd y = radial_project(vec({2.0, 1.0}));
  CHECK(y(0) == doctest::Approx(1.0));
  CHECK(y(1) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("grid function indexing") {
  const GeneratedMap id = generate_map("identity", {}, 1, 3);
  CHECK(id.f.node_count() == 9);
  for (std::size_t v = 0; v < 9; ++v) {
    CHECK(id.f.node_point(v)(0) == v / 8.0);
    CHECK(id.oracle->dist(id.f.value(v), id.f.value(0)) == doctest::Approx(v / 8.0));
  }
  CHECK(id.lipschitz == 1.0);
  CHECK(id.epsilon == 0.0);
  const GeneratedMap two = generate_map("identity", {}, 2, 2);
  CHECK(two.f.node_count() == 25);
  const std::vector<std::int64_t> idx{3, 1};
  const std::size_t node = two.f.node_index(idx);
  CHECK(two.f.multi_index(node) == idx);
  CHECK(two.f.node_point(node) == vec({0.75, 0.25}));
}

TEST_CASE("constant map has one image point") {
  const GeneratedMap c = generate_map("constant", {}, 1, 4);
  CHECK(c.oracle->size() == 1);
  for (std::size_t v = 0; v < c.f.node_count(); ++v) CHECK(c.f.value(v) == 0);
}

TEST_CASE("snowflake certificate covers every grid pair") {
  const GeneratedMap s = generate_map("snowflake", {{"s", 0.5}}, 1, 6);
  CHECK(s.epsilon == doctest::Approx(0.25));
  double worst = -1.0;
  for (std::size_t a = 0; a < s.f.node_count(); ++a)
    for (std::size_t b = 0; b < s.f.node_count(); ++b) {
      const double t = s.f.node_distance(a, b);
      worst = std::max(worst, s.oracle->dist(s.f.value(a), s.f.value(b)) - t);
    }
  CHECK(worst <= s.epsilon + 1e-15);
  CHECK(s.certificate.holds());
}

TEST_CASE("unknown maps and bad parameters are rejected") {
  CHECK_THROWS(generate_map("spiral", {}, 1, 4));
  CHECK_THROWS(generate_map("snowflake", {{"s", 1.5}}, 1, 4));
  CHECK_THROWS(generate_map("zigzag", {{"m", 0}}, 1, 4));
  CHECK_THROWS(generate_map("quantized", {{"eps", -1.0}}, 1, 4));
}

TEST_CASE("every built-in map is certified coarse-Lipschitz") {
  for (const auto& name : builtin_map_names())
    for (int k : {1, 2}) {
      const GeneratedMap m = generate_map(name, {}, k, k == 1 ? 7 : 3);
      const CoarseLipschitzCheck c = check_coarse_lipschitz(m.f, *m.oracle, m.lipschitz, m.epsilon);
      CHECK_MESSAGE(c.holds(), name);
      CHECK(c.exhaustive);
    }
}

TEST_CASE("surrogate at epsilon 0 keeps every node and image") {
  const GeneratedMap fold = generate_map("fold", {}, 1, 5);
  const SurrogateMap p(fold.f, *fold.oracle, fold.lipschitz, fold.epsilon);
  CHECK(p.domain_net().size() == fold.f.node_count());
  CHECK(p.target_size() == 17);  // |t - 1/2| on 33 nodes
  CHECK(p.lipschitz() == 1.0);
  for (std::size_t a = 0; a < fold.f.node_count(); ++a)
    for (std::size_t b = 0; b < fold.f.node_count(); ++b)
      CHECK(p.node_dist(a, b) == doctest::Approx(fold.oracle->dist(fold.f.value(a), fold.f.value(b))).epsilon(1e-15));
  CHECK(p.p_dist(vec({0.0}), vec({1.0})) == 0.0);
  CHECK(p.p_dist(vec({0.3}), vec({0.3})) == 0.0);
}

TEST_CASE("identity surrogate is an isometry on nodes") {
  const GeneratedMap id = generate_map("identity", {}, 1, 6);
  const SurrogateMap p(id.f, *id.oracle, id.lipschitz, id.epsilon);
  for (std::size_t a = 0; a < id.f.node_count(); a += 3)
    for (std::size_t b = 0; b < id.f.node_count(); ++b)
      CHECK(p.p_dist(id.f.node_point(a), id.f.node_point(b)) == doctest::Approx(id.f.node_distance(a, b)).epsilon(1e-14));
}

TEST_CASE("surrogate matches a brute-force McShane evaluation off the grid") {
  for (int k : {1, 2}) {
    const GeneratedMap m = generate_map("quantized", {{"eps", 0.1}}, k, k == 1 ? 6 : 3);
    const SurrogateMap p(m.f, *m.oracle, m.lipschitz, m.epsilon);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.2, 1.2);
    for (int t = 0; t < 40; ++t) {
      Eigen::VectorXd x(k);
      for (int j = 0; j < k; ++j) x(j) = u(rng);
      const Eigen::VectorXd y = radial_project(x);
      const Eigen::RowVectorXd want = oracle::mcshane(p, y);
      CHECK(oracle::sup_dist(p.evaluate(x), want) <= 1e-12);
    }
  }
}

TEST_CASE("coarse inputs stay within 7 eps of their Kuratowski image") {
  for (const char* name : {"snowflake", "quantized"}) {
    const GeneratedMap m = generate_map(name, {}, 1, 8);
    const SurrogateMap p(m.f, *m.oracle, m.lipschitz, m.epsilon);
    CHECK(p.lipschitz() == 4.0);
    CHECK(closeness_bound(1.0, 4.0, m.epsilon) == doctest::Approx(7.0 * m.epsilon));
    CHECK(closeness_to_kuratowski(p, m.f, *m.oracle) <= 7.0 * m.epsilon);
    CHECK(kuratowski_isometry_error(p, *m.oracle) <= 1e-12);
    CHECK(extension_agreement_error(p) == 0.0);
    CHECK(lipschitz_certificate(p, 10000, 3) <= 1e-12);
  }
}

TEST_CASE("distance matrices round-trip through the file formats") {
  const auto dir = std::filesystem::temp_directory_path() / "bilip_test_metric";
  std::filesystem::create_directories(dir);
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 1.5, 1, 0, 2, 1.5, 2, 0;
  write_distance_binary(dir / "d.bin", d);
  CHECK(read_distance_binary(dir / "d.bin").matrix() == d);
  {
    std::ofstream csv(dir / "d.csv");
    csv << "a,b,c\n0,1,1.5\n1,0,2\n1.5,2,0\n";
  }
  CHECK(read_distance_csv(dir / "d.csv").matrix() == d);
  {
    std::ofstream e(dir / "g.txt");
    e << "# path 0-1-2 plus a long edge\n0 1 1\n1 2 1\n0 2 5\n";
  }
  const MatrixMetric g = read_edge_list(dir / "g.txt");
  CHECK(g.dist(0, 2) == 2.0);
  {
    std::ofstream e(dir / "split.txt");
    e << "0 1 1\n2 3 1\n";
  }
  CHECK_THROWS(read_edge_list(dir / "split.txt"));
  Eigen::MatrixXd asym = d;
  asym(0, 1) = 3.0;
  CHECK_THROWS(MatrixMetric(asym));
  Eigen::MatrixXd bad(3, 3);
  bad << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  CHECK_THROWS(MatrixMetric(bad));
  std::filesystem::remove_all(dir);
}
