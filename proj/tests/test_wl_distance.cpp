#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "support/instances.hpp"
#include "wlm/error.hpp"
#include "wlm/wl_distance.hpp"

using namespace wlm;
using namespace wlm::testing;

namespace {

Lmmc scaled(const Lmmc& c, double factor) {
    std::vector<double> labels = c.labels();
    for (double& x : labels) x *= factor;
    return c.with_labels(std::move(labels), c.dimension());
}

LabeledGraph cycle(std::size_t n) {
    std::vector<std::string> ids;
    std::vector<Edge> edges;
    for (std::size_t v = 0; v < n; ++v) {
        ids.push_back("c" + std::to_string(v));
        edges.push_back({std::min(v, (v + 1) % n), std::max(v, (v + 1) % n), 1.0});
    }
    return LabeledGraph::create(ids, 1, std::vector<double>(n, 0.0), edges);
}

LabeledGraph two_triangles() {
    return LabeledGraph::create({"a", "b", "c", "d", "e", "f"}, 1, std::vector<double>(6, 0.0),
                                {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0},
                                 {3, 4, 1.0}, {4, 5, 1.0}, {3, 5, 1.0}});
}

}  // namespace

TEST_CASE("k = 0 gives the label distance table") {
    const Lmmc X = induce_q_damped(path2(0.0, 1.0), 0.5);
    const Lmmc Y = induce_q_damped(path2(3.0, -1.0), 0.5);
    const auto tables = wl_cost_tables(X, Y, 0);
    REQUIRE(tables.size() == 1);
    CHECK(tables[0].depth == 0);
    CHECK(tables[0].values == Matrix(2, 2, {3.0, 1.0, 2.0, 2.0}));
}

TEST_CASE("P2 against a single node, one step") {
    const Lmmc X = induce_q_damped(path2(0.0, 1.0), 0.5);
    const Lmmc Y = induce_q_damped(single_node(0.0), 0.5);
    const auto r = wl_distance(X, Y, 1);
    REQUIRE(r.tables.size() == 2);
    CHECK(r.table(1) == Matrix(2, 1, {0.0, 1.0}));
    CHECK(r.table(0) == Matrix(2, 1, {0.5, 0.5}));
    CHECK(r.distance == 0.5);
    CHECK(r.initial_coupling(0, 0) == 0.5);
    CHECK(wl_distance_hierarchical(X, Y, 1) == 0.5);
}

TEST_CASE("identical chains have zero diagonals") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Lmmc X = random_chain(rng, 2 + pick(rng, 4), 1 + pick(rng, 2));
        const auto r = wl_distance(X, X, 3);
        for (std::size_t i = 0; i <= 3; ++i)
            for (std::size_t x = 0; x < X.size(); ++x) CHECK(r.table(i)(x, x) == 0.0);
        CHECK(r.distance <= 1e-10);
        CHECK(wl_distance_hierarchical(X, X, 3) <= 1e-10);
    }
}

TEST_CASE("single nodes at any depth") {
    const Lmmc X = induce_q_damped(single_node(0.0), 0.5);
    const Lmmc Y = induce_q_damped(single_node(3.0), 0.5);
    for (std::size_t k = 0; k <= 4; ++k) {
        CHECK(wl_distance(X, Y, k).distance == 3.0);
        CHECK(wl_distance_hierarchical(X, Y, k) == 3.0);
    }
}

TEST_CASE("metric mismatch is rejected") {
    const Lmmc X = induce_q_damped(path2(), 0.5, MetricKind::L1);
    const Lmmc Y = induce_q_damped(path2(), 0.5, MetricKind::L2);
    CHECK_THROWS_AS(wl_distance(X, Y, 1), ValidationError);
    const Lmmc Z = induce_q_damped(LabeledGraph::create({"a"}, 2, {0, 0}, {}), 0.5);
    CHECK_THROWS_AS(wl_distance(X, Z, 1), ValidationError);
}

TEST_CASE("wl_labels collapse equal nodes") {
    const Lmmc X = induce_q_damped(path2(0.0, 1.0), 0.5);
    const auto labels = wl_labels(X, 2);
    CHECK(labels.class_count(0) == 2);
    CHECK(labels.base_labels[0] == std::vector<double>{0.0});
    // Both kernel rows are (0.5, 0.5), so every deeper label coincides.
    CHECK(labels.class_count(1) == 1);
    CHECK(labels.class_of[1][0] == labels.class_of[1][1]);
    const auto dist = wl_label_distances(labels, labels, X.metric());
    CHECK(dist[0](0, 1) == 1.0);
    CHECK(dist[1](0, 0) == 0.0);
    CHECK(dist[2](0, 0) == 0.0);
}

TEST_CASE("depth-1 label table of P2 against a single node") {
    const Lmmc X = induce_q_damped(path2(0.0, 1.0), 0.5);
    const Lmmc Y = induce_q_damped(single_node(0.0), 0.5);
    const auto a = wl_labels(X, 1);
    const auto b = wl_labels(Y, 1);
    const auto tables = wl_label_distances(a, b, X.metric());
    for (std::size_t x = 0; x < 2; ++x) CHECK(tables[1](a.class_of[1][x], b.class_of[1][0]) == 0.5);
}

TEST_CASE("backward and hierarchical routes agree") {
    Rng rng(42);
    for (int trial = 0; trial < 150; ++trial) {
        const std::size_t d = 1 + pick(rng, 2);
        const auto kind = static_cast<MetricKind>(pick(rng, 3));
        const Lmmc X = random_chain(rng, 1 + pick(rng, 6), d, kind);
        const Lmmc Y = random_chain(rng, 1 + pick(rng, 6), d, kind);
        const std::size_t k = pick(rng, 5);
        CHECK(std::abs(wl_distance(X, Y, k).distance - wl_distance_hierarchical(X, Y, k)) <= 1e-8);
    }
}

TEST_CASE("pseudometric axioms on random triples") {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + pick(rng, 2);
        const std::size_t k = pick(rng, 4);
        const Lmmc A = random_chain(rng, 1 + pick(rng, 4), d);
        const Lmmc B = random_chain(rng, 1 + pick(rng, 4), d);
        const Lmmc C = random_chain(rng, 1 + pick(rng, 4), d);
        const double ab = wl_distance(A, B, k).distance;
        CHECK(std::abs(ab - wl_distance(B, A, k).distance) <= 1e-9);
        CHECK(wl_distance(A, C, k).distance <= ab + wl_distance(B, C, k).distance + 1e-8);
        CHECK(wl_distance(A, A, k).distance <= 1e-10);
    }
}

TEST_CASE("permuting a graph does not move it") {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 2 + pick(rng, 6), 1 + pick(rng, 2), 0.5, false, true);
        const auto h = permute_graph(g, random_permutation(rng, g.size()));
        for (std::size_t k = 0; k <= 4; ++k) {
            CHECK(wl_distance(induce_q_damped(g, 0.3), induce_q_damped(h, 0.3), k).distance <= 1e-10);
        }
    }
}

TEST_CASE("scaling labels scales the distance") {
    Rng rng(45);
    for (int trial = 0; trial < 50; ++trial) {
        const auto kind = static_cast<MetricKind>(pick(rng, 3));
        const Lmmc X = random_chain(rng, 1 + pick(rng, 4), 2, kind);
        const Lmmc Y = random_chain(rng, 1 + pick(rng, 4), 2, kind);
        const std::size_t k = pick(rng, 4);
        const double c = uniform(rng, 0.0, 4.0);
        const double base = wl_distance(X, Y, k).distance;
        CHECK(std::abs(wl_distance(scaled(X, c), scaled(Y, c), k).distance - c * base) <= 1e-9);
    }
}

TEST_CASE("tables do not depend on the worker count") {
    Rng rng(46);
    const Lmmc X = random_chain(rng, 6, 2);
    const Lmmc Y = random_chain(rng, 5, 2);
    setenv("WLM_THREADS", "1", 1);
    const auto serial = wl_distance(X, Y, 3);
    setenv("WLM_THREADS", "4", 1);
    const auto threaded = wl_distance(X, Y, 3);
    unsetenv("WLM_THREADS");
    for (std::size_t i = 0; i <= 3; ++i) CHECK(serial.table(i) == threaded.table(i));
    CHECK(serial.distance == threaded.distance);
}

TEST_CASE("classic refinement examples") {
    const auto tri = triangle();
    const auto p3 = path3();
    const auto r = classic_wl_refinement(tri, p3, 1);
    CHECK(r.distinguishable);
    REQUIRE(r.separation_round.has_value());
    CHECK(*r.separation_round == 1);
    CHECK_FALSE(classic_wl_refinement(tri, p3, 0).distinguishable);
    CHECK_FALSE(classic_wl_refinement(tri, tri, 3).distinguishable);
    CHECK(classic_wl_refinement(path2(0, 1), path2(0, 2), 0).distinguishable);
}

TEST_CASE("isomorphic graphs are never separated") {
    Rng rng(47);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 2 + pick(rng, 6), 1, 0.5);
        const auto h = permute_graph(g, random_permutation(rng, g.size()));
        CHECK_FALSE(classic_wl_refinement(g, h, 4).distinguishable);
    }
}

TEST_CASE("refinement never merges colors") {
    Rng rng(48);
    const auto g = random_graph(rng, 7, 1, 0.4);
    const auto r = classic_wl_refinement(g, g, 4);
    for (std::size_t round = 1; round < r.colors.first.size(); ++round) {
        for (std::size_t u = 0; u < g.size(); ++u)
            for (std::size_t v = 0; v < g.size(); ++v)
                if (r.colors.first[round][u] == r.colors.first[round][v]) {
                    CHECK(r.colors.first[round - 1][u] == r.colors.first[round - 1][v]);
                }
    }
}

TEST_CASE("refinement-equivalent graphs are at distance zero") {
    // C6 and two disjoint triangles: every vertex has degree 2 and the same
    // label, so refinement never separates them.
    const auto a = cycle(6);
    const auto b = two_triangles();
    CHECK_FALSE(classic_wl_refinement(a, b, 4).distinguishable);
    for (std::size_t k = 0; k <= 4; ++k) {
        CHECK(wl_distance(induce_q_damped(a, 0.5), induce_q_damped(b, 0.5), k).distance <= 1e-10);
    }
    // The classic test may separate graphs that still sit at distance zero.
    const auto tri = triangle();
    const auto p3 = path3();
    CHECK(classic_wl_refinement(tri, p3, 1).distinguishable);
    CHECK(wl_distance(induce_q_damped(tri, 0.5), induce_q_damped(p3, 0.5), 1).distance <= 1e-10);
}
