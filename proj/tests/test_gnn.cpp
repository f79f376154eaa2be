#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/instances.hpp"
#include "wlm/error.hpp"
#include "wlm/gnn.hpp"
#include "wlm/wl_distance.hpp"

using namespace wlm;
using namespace wlm::testing;

namespace {

DenseLayer dense(Matrix w, std::vector<double> b, Activation a = Activation::Identity) {
    return {std::move(w), std::move(b), a};
}

Mlp single(DenseLayer d) { return Mlp{{std::move(d)}}; }

MpgnnModel identity_model(Aggregation aggregation, double parameter, std::size_t maps) {
    MpgnnModel m;
    m.aggregation = aggregation;
    m.parameter = parameter;
    m.layers.assign(maps, Mlp::identity(1));
    m.readout = Mlp::identity(1);
    return m;
}

// Random discrete measure on R^d as (points, weights).
struct PointMeasure {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
};

PointMeasure random_measure(Rng& rng, std::size_t d) {
    PointMeasure m;
    const std::size_t n = 1 + pick(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p(d);
        for (double& x : p) x = uniform(rng, -2.0, 2.0);
        m.points.push_back(std::move(p));
    }
    m.weights = random_probability(rng, n);
    return m;
}

}  // namespace

TEST_CASE("activations parse and print") {
    CHECK(parse_activation("relu") == Activation::Relu);
    CHECK(parse_activation("linear") == Activation::Identity);
    CHECK(parse_activation(to_string(Activation::Abs)) == Activation::Abs);
    CHECK_THROWS_AS(parse_activation("tanh"), ValidationError);
}

TEST_CASE("MCNN layer examples") {
    const Lmmc X = induce_q_damped(path2(0.0, 1.0), 0.5);
    const Lmmc F = mcnn_layer(X, Mlp::identity(1));
    CHECK(F.label(0)[0] == 0.5);
    CHECK(F.label(1)[0] == 0.5);
    CHECK(F.kernel() == X.kernel());
    CHECK(F.mu() == X.mu());

    const Mlp constant = single(dense(Matrix(1, 1, {0.0}), {0.7}));
    const Lmmc C = mcnn_layer(X, constant);
    CHECK(C.label(0)[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(C.label(1)[0] == doctest::Approx(0.7).epsilon(1e-15));

    // Output dimension follows phi.
    const Mlp widen = single(dense(Matrix(2, 1, {1.0, -1.0}), {0.0, 0.0}, Activation::Relu));
    const Lmmc W = mcnn_layer(X, widen);
    CHECK(W.dimension() == 2);
    CHECK(W.label(0)[0] == 0.5);
    CHECK(W.label(0)[1] == 0.0);
}

TEST_CASE("MCNN readout examples") {
    const Lmmc one = induce_q_damped(single_node(3.0), 0.5);
    CHECK(mcnn_readout(one, Mlp::identity(1), Mlp::identity(1)) == 3.0);
    const Lmmc X = induce_q_damped(path2(0.0, 1.0), 0.5);
    CHECK(mcnn_readout(X, Mlp::identity(1), Mlp::identity(1)) == 0.5);
    const Mlp square_free = single(dense(Matrix(1, 1, {2.0}), {-1.0}, Activation::Abs));
    // mu uniform on labels {0, 1}: |2*0 - 1| and |2*1 - 1| both equal 1.
    CHECK(mcnn_readout(X, square_free, Mlp::identity(1)) == 1.0);
}

TEST_CASE("MP-GNN forward examples") {
    CHECK(mpgnn_forward(single_node(3.0), identity_model(Aggregation::QDamped, 0.5, 2), 1) == 3.0);
    CHECK(mpgnn_forward(path2(0.0, 1.0), identity_model(Aggregation::QDamped, 0.5, 2), 1) == 0.5);
    const auto flat = LabeledGraph::create({"a", "b", "c"}, 1, {2.0, 2.0, 2.0}, {{0, 1, 1.0}, {1, 2, 3.0}});
    CHECK(mpgnn_forward(flat, identity_model(Aggregation::QDamped, 0.3, 4), 3) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(mpgnn_forward(path2(), identity_model(Aggregation::QDamped, 0.5, 2), 2), ValidationError);
    CHECK_THROWS_AS(mpgnn_forward(path2(), identity_model(Aggregation::EpsNormalized, 0.0, 1), 1),
                    ValidationError);
}

TEST_CASE("MP-GNN restricted to the induced chain equals the MCNN pipeline") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + pick(rng, 2);
        const auto g = random_graph(rng, 1 + pick(rng, 6), d, 0.5, false, pick(rng, 2) == 1);
        const double q = uniform(rng, 0.0, 1.0);
        const std::size_t k = pick(rng, 4);
        const MpgnnModel model = random_model(rng, Aggregation::QDamped, q, d, k);
        const double direct = mpgnn_forward(g, model, k);
        const double chain = mcnn_pipeline(induce_q_damped(g, q), model);
        CHECK(std::abs(direct - chain) <= 1e-12 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("normalized GIN examples") {
    const auto p2 = path2(0.0, 1.0);
    CHECK(normalized_gin_forward(p2, identity_model(Aggregation::EpsNormalized, 0.0, 1), 1) == 0.5);
    // |agg - 1/2| per node: agg = 1/2 at eps = 0, close to the own label as eps grows.
    MpgnnModel m = identity_model(Aggregation::EpsNormalized, 0.0, 1);
    m.layers[0] = single(dense(Matrix(1, 1, {1.0}), {-0.5}, Activation::Abs));
    CHECK(normalized_gin_forward(p2, m, 1) == 0.0);
    m.parameter = 1e6;
    // agg = 1/(2 + eps) at node a and (1 + eps)/(2 + eps) at node b.
    const double eps = 1e6;
    const double oracle = 0.5 - 1.0 / (2.0 + eps);
    CHECK(std::abs(normalized_gin_forward(p2, m, 1) - oracle) <= 1e-12);
    CHECK(std::abs(normalized_gin_forward(p2, m, 1) - 0.5) <= 1e-5);
    CHECK(normalized_gin_forward(single_node(4.0), identity_model(Aggregation::EpsNormalized, 2.0, 3), 3) == 4.0);
}

TEST_CASE("layer Lipschitz bounds") {
    const DenseLayer id = dense(Matrix(2, 2, {1, 0, 0, 1}), {0, 0});
    for (auto kind : {MetricKind::L1, MetricKind::LInf}) CHECK(layer_lipschitz_bound(id, kind) == 1.0);
    CHECK(layer_lipschitz_bound(id, MetricKind::L2) >= 1.0);
    CHECK(layer_lipschitz_bound(id, MetricKind::L2) <= 1.0101);
    const DenseLayer diag = dense(Matrix(2, 2, {2, 0, 0, 3}), {0, 0});
    CHECK(layer_lipschitz_bound(diag, MetricKind::L1) == 3.0);
    CHECK(layer_lipschitz_bound(diag, MetricKind::LInf) == 3.0);
    const DenseLayer ones = dense(Matrix(2, 2, {1, 1, 1, 1}), {0, 0});
    CHECK(layer_lipschitz_bound(ones, MetricKind::L1) == 2.0);
    CHECK(layer_lipschitz_bound(ones, MetricKind::L2) >= 2.0);
    CHECK(layer_lipschitz_bound(ones, MetricKind::L2) <= 2.0201);
    // Column sums for L1, row sums for Linf.
    const DenseLayer skew = dense(Matrix(2, 2, {1, -4, 2, 0}), {0, 0});
    CHECK(layer_lipschitz_bound(skew, MetricKind::L1) == 4.0);
    CHECK(layer_lipschitz_bound(skew, MetricKind::LInf) == 5.0);
    CHECK(lipschitz_bound(Mlp{{diag, ones}}, MetricKind::L1) == 6.0);
}

TEST_CASE("Lipschitz audit equality case") {
    const auto audit = lipschitz_audit(single_node(0.0), single_node(3.0),
                                       identity_model(Aggregation::QDamped, 0.5, 2), 1);
    CHECK(audit.lhs == 3.0);
    CHECK(audit.bound_constant == 1.0);
    CHECK(audit.distance == 3.0);
    CHECK(audit.slack == 0.0);
    CHECK(audit.satisfied);
    CHECK_THROWS_AS(lipschitz_audit(path2(), path2(), identity_model(Aggregation::QDamped, 0.5, 2), 1,
                                    MetricKind::L2),
                    ValidationError);
    CHECK(lipschitz_audit(path2(), path2(1, 2), identity_model(Aggregation::QDamped, 0.5, 2), 1,
                          MetricKind::L2, true)
              .conservative);
}

TEST_CASE("Lipschitz audits hold for random q-damped models") {
    Rng rng(72);
    for (int trial = 0; trial < 150; ++trial) {
        const std::size_t d = 1 + pick(rng, 2);
        const auto g1 = random_graph(rng, 1 + pick(rng, 5), d);
        const auto g2 = random_graph(rng, 1 + pick(rng, 5), d);
        const std::size_t k = pick(rng, 3);
        const auto kind = pick(rng, 2) == 0 ? MetricKind::L1 : MetricKind::LInf;
        const auto model = random_model(rng, Aggregation::QDamped, uniform(rng, 0.05, 0.95), d, k);
        const auto audit = lipschitz_audit(g1, g2, model, k, kind);
        CHECK(audit.satisfied);
        CHECK(audit.slack >= -1e-8);
    }
}

TEST_CASE("Lipschitz audits hold for random normalized GIN models") {
    Rng rng(73);
    for (int trial = 0; trial < 150; ++trial) {
        const std::size_t d = 1 + pick(rng, 2);
        const auto g1 = random_graph(rng, 1 + pick(rng, 5), d);
        const auto g2 = random_graph(rng, 1 + pick(rng, 5), d);
        const std::size_t k = pick(rng, 3);
        const auto model = random_model(rng, Aggregation::EpsNormalized, uniform(rng, 0.0, 2.0), d, k);
        CHECK(lipschitz_audit(g1, g2, model, k).satisfied);
    }
}

TEST_CASE("mean embeddings are Lipschitz in W1") {
    Rng rng(74);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 1 + pick(rng, 3);
        const auto kind = pick(rng, 2) == 0 ? MetricKind::L1 : MetricKind::LInf;
        const LabelMetric metric{kind, d};
        const Mlp phi = random_mlp(rng, d, 1 + pick(rng, 3));
        const auto a = random_measure(rng, d);
        const auto b = random_measure(rng, d);
        auto embed = [&](const PointMeasure& m) {
            std::vector<double> out(phi.output_dim(), 0.0);
            for (std::size_t i = 0; i < m.points.size(); ++i) {
                const auto y = phi.apply(m.points[i]);
                for (std::size_t j = 0; j < y.size(); ++j) out[j] += m.weights[i] * y[j];
            }
            return out;
        };
        const auto ea = embed(a), eb = embed(b);
        Matrix cost(a.points.size(), b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i)
            for (std::size_t j = 0; j < b.points.size(); ++j) cost(i, j) = label_distance(metric, a.points[i], b.points[j]);
        const double w1 = wasserstein(cost, a.weights, b.weights).value;
        const double lhs = label_distance(LabelMetric{kind, ea.size()}, ea, eb);
        CHECK(lhs <= lipschitz_bound(phi, kind) * w1 + 1e-9);
    }
}

TEST_CASE("outputs are invariant under vertex permutations") {
    Rng rng(75);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 2 + pick(rng, 5), 1, 0.5, false, true);
        const auto h = permute_graph(g, random_permutation(rng, g.size()));
        const std::size_t k = pick(rng, 4);
        const auto qm = random_model(rng, Aggregation::QDamped, 0.4, 1, k);
        CHECK(std::abs(mpgnn_forward(g, qm, k) - mpgnn_forward(h, qm, k)) <= 1e-12);
        const auto em = random_model(rng, Aggregation::EpsNormalized, 0.5, 1, k);
        CHECK(std::abs(normalized_gin_forward(g, em, k) - normalized_gin_forward(h, em, k)) <= 1e-12);
    }
}

TEST_CASE("sampled models are deterministic and well formed") {
    const auto a = sample_model(9, 2, 3, 0.5, 2);
    const auto b = sample_model(9, 2, 3, 0.5, 2);
    CHECK(serialize_model(a) == serialize_model(b));
    CHECK(a.depth() == 3);
    CHECK_NOTHROW(a.validate(2));
    CHECK(serialize_model(sample_model(10, 2, 3, 0.5, 2)) != serialize_model(a));
    const auto u = unit_model(2, 1, 0.5);
    CHECK(mpgnn_forward(LabeledGraph::create({"a"}, 2, {1.0, 2.0}, {}), u, 1) == 3.0);
}

TEST_CASE("separator search") {
    const auto found = random_separator_search(single_node(0.0), single_node(3.0), 0.5, 2, 5, 1);
    REQUIRE(found.has_value());
    CHECK(found->trial == 1);
    CHECK(found->gap == 3.0);
    CHECK_FALSE(random_separator_search(path2(1, 1), single_node(1.0), 0.5, 2, 10, 1).has_value());
}

TEST_CASE("zero-distance pairs agree on every sampled model") {
    Rng rng(76);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_graph(rng, 2 + pick(rng, 5), 1);
        const auto h = permute_graph(g, random_permutation(rng, g.size()));
        const auto report = zero_set_audit(g, h, 0.5, 2, 10, trial);
        CHECK(report.zero_distance);
        CHECK(report.outputs_equal);
        CHECK(report.max_gap <= kEqualOutputTolerance);
        CHECK_FALSE(report.separator.has_value());
    }
    const auto far = zero_set_audit(single_node(0.0), single_node(1.0), 0.5, 2, 10, 3);
    CHECK_FALSE(far.zero_distance);
    CHECK(far.separator.has_value());
}

TEST_CASE("model JSON round trip") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const auto aggregation = pick(rng, 2) == 0 ? Aggregation::QDamped : Aggregation::EpsNormalized;
        const auto model = random_model(rng, aggregation, uniform(rng, 0.0, 1.0), 2, pick(rng, 3));
        const auto text = serialize_model(model);
        const auto back = parse_model(text);
        CHECK(serialize_model(back) == text);
        CHECK(back.parameter == model.parameter);
        const auto g = random_graph(rng, 3, 2);
        const std::size_t k = model.depth();
        if (aggregation == Aggregation::QDamped) {
            CHECK(mpgnn_forward(g, back, k) == mpgnn_forward(g, model, k));
        } else {
            CHECK(normalized_gin_forward(g, back, k) == normalized_gin_forward(g, model, k));
        }
    }
}

TEST_CASE("malformed models are rejected") {
    CHECK_THROWS_AS(parse_model("not json"), ValidationError);
    CHECK_THROWS_AS(parse_model(R"({"aggregation": "sum", "layers": [], "readout": {}})"), ValidationError);
    // Readout must map to R.
    CHECK_THROWS_AS(parse_model(R"({"aggregation": "q_damped", "q": 0.5,
        "layers": [{"weights": [[1]], "bias": [0], "activation": "relu"}],
        "readout": {"weights": [[1], [1]], "bias": [0, 0], "activation": "identity"}})"),
                    ValidationError);
    // Broken dimension chain.
    CHECK_THROWS_AS(parse_model(R"({"aggregation": "q_damped", "q": 0.5,
        "layers": [{"weights": [[1, 1]], "bias": [0], "activation": "relu"},
                   {"weights": [[1, 1]], "bias": [0], "activation": "relu"}],
        "readout": {"weights": [[1]], "bias": [0], "activation": "identity"}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_model(R"({"aggregation": "q_damped", "q": 1.5,
        "layers": [{"weights": [[1]], "bias": [0], "activation": "relu"}],
        "readout": {"weights": [[1]], "bias": [0], "activation": "identity"}})"),
                    ValidationError);
    const auto ok = parse_model(R"({"aggregation": "eps_normalized", "eps": 0.0,
        "layers": [[{"weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "abs"},
                    {"weights": [[1, 1]], "bias": [0], "activation": "identity"}]],
        "readout": {"weights": [[2]], "bias": [1], "activation": "identity"}})");
    CHECK(ok.depth() == 1);
    CHECK_THROWS_AS(ok.validate(3), ValidationError);
    // Node labels (1, -2) and (0, 0) joined by one edge: agg = (0.5, -1) at both.
    const auto g = LabeledGraph::create({"a", "b"}, 2, {1.0, -2.0, 0.0, 0.0}, {{0, 1, 1.0}});
    CHECK(normalized_gin_forward(g, ok, 1) == 2.0 * 1.5 + 1.0);
}
