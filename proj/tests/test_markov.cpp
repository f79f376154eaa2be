#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/instances.hpp"
#include "wlm/error.hpp"
#include "wlm/markov.hpp"

using namespace wlm;
using namespace wlm::testing;

namespace {

void check_row(const Lmmc& c, std::size_t x, std::vector<double> expected, double tol = 1e-15) {
    REQUIRE(c.size() == expected.size());
    for (std::size_t y = 0; y < expected.size(); ++y) CHECK(std::abs(c.kernel()(x, y) - expected[y]) <= tol);
}

}  // namespace

TEST_CASE("q-damped kernel on P2") {
    const Lmmc c = induce_q_damped(path2(), 0.5);
    check_row(c, 0, {0.5, 0.5});
    check_row(c, 1, {0.5, 0.5});
    CHECK(c.mu() == std::vector<double>{0.5, 0.5});
    CHECK(check_stationary(c, 1e-12));
}

TEST_CASE("q-damped kernel on an isolated vertex is a point mass") {
    const auto g = LabeledGraph::create({"a", "b", "c"}, 1, {0, 1, 2}, {{0, 1, 1.0}});
    const Lmmc c = induce_q_damped(g, 0.4);
    check_row(c, 2, {0.0, 0.0, 1.0});
    // Modified degrees (1, 1, 1).
    for (double m : c.mu()) CHECK(std::abs(m - 1.0 / 3.0) <= 1e-15);
}

TEST_CASE("q-damped triangle with q = 0.3") {
    const Lmmc c = induce_q_damped(triangle(), 0.3);
    // q on the diagonal, (1 - q) / 2 to each of the two neighbors.
    check_row(c, 0, {0.3, 0.35, 0.35}, 1e-15);
    check_row(c, 1, {0.35, 0.3, 0.35}, 1e-15);
    check_row(c, 2, {0.35, 0.35, 0.3}, 1e-15);
    for (double m : c.mu()) CHECK(std::abs(m - 1.0 / 3.0) <= 1e-15);
}

TEST_CASE("q must lie strictly inside (0, 1)") {
    CHECK_THROWS_AS(induce_q_damped(path2(), 0.0), ValidationError);
    CHECK_THROWS_AS(induce_q_damped(path2(), 1.0), ValidationError);
    CHECK_THROWS_AS(induce_q_damped(path2(), -0.2), ValidationError);
}

TEST_CASE("eps-normalized kernels") {
    check_row(induce_eps_normalized(single_node(4.0), 0.0), 0, {1.0});
    const Lmmc e0 = induce_eps_normalized(path2(), 0.0);
    check_row(e0, 0, {0.5, 0.5});
    check_row(e0, 1, {0.5, 0.5});
    CHECK(e0.mu() == std::vector<double>{0.5, 0.5});
    const Lmmc e1 = induce_eps_normalized(path2(), 1.0);
    check_row(e1, 0, {2.0 / 3.0, 1.0 / 3.0});
    check_row(e1, 1, {1.0 / 3.0, 2.0 / 3.0});
    CHECK(e1.mu() == std::vector<double>{0.5, 0.5});
    CHECK(check_stationary(e1, 1e-12));
    CHECK_THROWS_AS(induce_eps_normalized(path2(), -0.1), ValidationError);
}

TEST_CASE("a point-mass start on an asymmetric chain is not stationary") {
    // mu = delta_0; mu K = (0.2, 0.8).
    const Lmmc c = Lmmc::create(Matrix(2, 2, {0.2, 0.8, 0.6, 0.4}), {1.0, 0.0}, {0.0, 1.0}, LabelMetric{});
    CHECK_FALSE(check_stationary(c, 1e-12));
    CHECK_FALSE(c.stationary());
    CHECK(std::abs(stationarity_residual(c) - 0.8) <= 1e-15);
}

TEST_CASE("Lmmc construction rejects bad rows rather than renormalizing") {
    CHECK_THROWS_AS(Lmmc::create(Matrix(2, 2, {0.5, 0.5, 0.5, 0.6}), {0.5, 0.5}, {0, 1}, LabelMetric{}),
                    ValidationError);
    CHECK_THROWS_AS(Lmmc::create(Matrix(2, 2, {0.5, 0.5, 0.5, 0.5}), {0.6, 0.5}, {0, 1}, LabelMetric{}),
                    ValidationError);
    CHECK_THROWS_AS(Lmmc::create(Matrix(2, 2, {1.5, -0.5, 0.5, 0.5}), {0.5, 0.5}, {0, 1}, LabelMetric{}),
                    ValidationError);
    CHECK_THROWS_AS(Lmmc::create(Matrix(2, 2, {1, 0, 0, 1}), {0.5, 0.5}, {0, 1, 2}, LabelMetric{}),
                    ValidationError);
}

TEST_CASE("graph-induced measures are stationary") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = random_graph(rng, 1 + pick(rng, 8), 1, 0.4, false, true);
        for (double q : {0.1, 0.5, 0.9}) CHECK(check_stationary(induce_q_damped(g, q), 1e-12));
        for (double eps : {0.0, 1.0, 2.5}) CHECK(check_stationary(induce_eps_normalized(g, eps), 1e-12));
    }
}

TEST_CASE("path_distribution examples") {
    const Lmmc p2 = induce_q_damped(path2(), 0.5);
    const auto k0 = path_distribution(p2, 0);
    REQUIRE(k0.weights.size() == 2);
    CHECK(k0.weights.at(0) == 0.5);
    CHECK(k0.weights.at(1) == 0.5);
    const auto k1 = path_distribution(p2, 1);
    REQUIRE(k1.weights.size() == 4);
    for (const auto& [code, w] : k1.weights) CHECK(w == 0.25);
    const auto single = path_distribution(induce_q_damped(single_node(1.0), 0.5), 5);
    REQUIRE(single.weights.size() == 1);
    CHECK(single.weights.begin()->second == 1.0);
}

TEST_CASE("path codes round-trip") {
    PathDistribution p;
    p.horizon = 3;
    p.states = 4;
    const std::vector<std::size_t> path{3, 0, 2, 1};
    CHECK(p.decode(p.encode(path)) == path);
}

TEST_CASE("path_distribution marginals reproduce mu and the kernel") {
    Rng rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + pick(rng, 4);
        const Lmmc c = random_chain(rng, n, 1);
        const std::size_t k = 1 + pick(rng, 3);
        const auto p = path_distribution(c, k);
        CHECK(std::abs(p.total_mass() - 1.0) <= 1e-10);
        std::vector<double> first(n, 0.0);
        Matrix pair(n, n);
        for (const auto& [code, w] : p.weights) {
            const auto path = p.decode(code);
            first[path[0]] += w;
            pair(path[0], path[1]) += w;
        }
        for (std::size_t x = 0; x < n; ++x) {
            CHECK(std::abs(first[x] - c.mu()[x]) <= 1e-10);
            for (std::size_t y = 0; y < n; ++y) {
                CHECK(std::abs(pair(x, y) - c.mu()[x] * c.kernel()(x, y)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("path_distribution honours its cap") {
    const Lmmc c = induce_q_damped(triangle(), 0.3);
    CHECK_THROWS_AS(path_distribution(c, 6, 100), CapExceeded);
}

TEST_CASE("label_space_chain") {
    const Lmmc c = induce_q_damped(path2(), 0.5);
    const Lmmc z = label_space_chain(c);
    CHECK(z.kernel() == c.kernel());
    CHECK(z.mu() == c.mu());
    const Lmmc one = label_space_chain(induce_q_damped(single_node(7.0), 0.5));
    CHECK(one.size() == 1);
    CHECK(one.kernel()(0, 0) == 1.0);
    CHECK(one.label(0)[0] == 7.0);
    try {
        label_space_chain(induce_q_damped(path2(1.0, 1.0), 0.5));
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()) == "labels not injective");
    }
}

TEST_CASE("inducing commutes with permuting") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 2 + pick(rng, 6), 1, 0.5);
        const auto sigma = random_permutation(rng, g.size());
        const Lmmc a = induce_q_damped(permute_graph(g, sigma), 0.4);
        const Lmmc b = induce_q_damped(g, 0.4);
        for (std::size_t u = 0; u < g.size(); ++u) {
            CHECK(std::abs(a.mu()[sigma[u]] - b.mu()[u]) <= 1e-15);
            for (std::size_t v = 0; v < g.size(); ++v) {
                CHECK(std::abs(a.kernel()(sigma[u], sigma[v]) - b.kernel()(u, v)) <= 1e-15);
            }
        }
    }
}

TEST_CASE("chain documents round-trip") {
    Rng rng(24);
    const Lmmc c = random_chain(rng, 3, 2, MetricKind::L2);
    const Lmmc back = parse_lmmc(serialize_lmmc(c));
    CHECK(back.kernel() == c.kernel());
    CHECK(back.mu() == c.mu());
    CHECK(back.labels() == c.labels());
    CHECK(back.metric() == c.metric());
}
