#include "wlm/gnn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "json.hpp"
#include "wlm/error.hpp"
#include "wlm/parallel.hpp"
#include "wlm/wl_distance.hpp"

namespace wlm {

using nlohmann::json;

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Abs: return "abs";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "identity" || lower == "linear" || lower == "none") return Activation::Identity;
    if (lower == "relu") return Activation::Relu;
    if (lower == "abs") return Activation::Abs;
    throw ValidationError("unknown activation '" + std::string(name) +
                          "' (expected identity, relu or abs)");
}

std::vector<double> DenseLayer::apply(std::span<const double> x) const {
    if (x.size() != input_dim()) {
        throw ValidationError("layer expects input of dimension " + std::to_string(input_dim()) +
                              ", got " + std::to_string(x.size()));
    }
    std::vector<double> y(output_dim());
    for (std::size_t r = 0; r < y.size(); ++r) {
        double acc = bias.empty() ? 0.0 : bias[r];
        const auto row = weights.row(r);
        for (std::size_t c = 0; c < x.size(); ++c) acc += row[c] * x[c];
        switch (activation) {
            case Activation::Identity: break;
            case Activation::Relu: acc = std::max(0.0, acc); break;
            case Activation::Abs: acc = std::abs(acc); break;
        }
        y[r] = acc;
    }
    return y;
}

std::vector<double> Mlp::apply(std::span<const double> x) const {
    std::vector<double> current(x.begin(), x.end());
    for (const DenseLayer& stage : stages) current = stage.apply(current);
    return current;
}

Mlp Mlp::identity(std::size_t dim) {
    Matrix w(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) w(i, i) = 1.0;
    return Mlp{{DenseLayer{std::move(w), std::vector<double>(dim, 0.0), Activation::Identity}}};
}

std::size_t MpgnnModel::depth() const {
    if (aggregation == Aggregation::QDamped) {
        if (layers.empty()) throw ValidationError("q-damped model needs at least one layer");
        return layers.size() - 1;
    }
    return layers.size();
}

void MpgnnModel::validate(std::size_t input_dim) const {
    if (aggregation == Aggregation::QDamped) {
        if (!(parameter > 0.0 && parameter < 1.0)) {
            throw ValidationError("model q must lie in (0,1)");
        }
        if (layers.empty()) throw ValidationError("q-damped model needs at least one layer");
    } else if (!(parameter >= 0.0) || !std::isfinite(parameter)) {
        throw ValidationError("model eps must be >= 0");
    }
    auto check_mlp = [](const Mlp& mlp, const std::string& where) {
        if (mlp.stages.empty()) throw ValidationError(where + ": no dense stages");
        for (std::size_t s = 0; s < mlp.stages.size(); ++s) {
            const DenseLayer& d = mlp.stages[s];
            if (d.weights.rows() == 0 || d.weights.cols() == 0) {
                throw ValidationError(where + ": empty weight table");
            }
            if (!d.bias.empty() && d.bias.size() != d.output_dim()) {
                throw ValidationError(where + ": bias length does not match output dimension");
            }
            if (s > 0 && mlp.stages[s - 1].output_dim() != d.input_dim()) {
                throw ValidationError(where + ": stage dimensions do not chain");
            }
            for (double w : d.weights.data())
                if (!std::isfinite(w)) throw ValidationError(where + ": non-finite weight");
        }
    };
    std::size_t dim = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = "layer " + std::to_string(i + 1);
        check_mlp(layers[i], where);
        if (layers[i].input_dim() != dim) {
            throw ValidationError(where + ": expects input dimension " +
                                  std::to_string(layers[i].input_dim()) + ", got " +
                                  std::to_string(dim));
        }
        dim = layers[i].output_dim();
    }
    check_mlp(readout, "readout");
    if (readout.input_dim() != dim) {
        throw ValidationError("readout expects input dimension " +
                              std::to_string(readout.input_dim()) + ", got " + std::to_string(dim));
    }
    if (readout.output_dim() != 1) throw ValidationError("readout must map to a scalar");
}

namespace {

DenseLayer parse_dense(const json& node, const std::string& where) {
    if (!node.is_object()) throw ValidationError(where + ": expected an object");
    const auto w = node.find("weights");
    if (w == node.end() || !w->is_array() || w->empty()) {
        throw ValidationError(where + ".weights: expected a non-empty array of rows");
    }
    const std::size_t rows = w->size();
    const std::size_t cols = (*w)[0].is_array() ? (*w)[0].size() : 0;
    if (cols == 0) throw ValidationError(where + ".weights: rows must be non-empty arrays");
    Matrix weights(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const json& row = (*w)[r];
        if (!row.is_array() || row.size() != cols) {
            throw ValidationError(where + ".weights[" + std::to_string(r) + "]: ragged row");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number()) {
                throw ValidationError(where + ".weights[" + std::to_string(r) + "][" +
                                      std::to_string(c) + "]: expected a number");
            }
            weights(r, c) = row[c].get<double>();
        }
    }
    DenseLayer layer{std::move(weights), std::vector<double>(rows, 0.0), Activation::Identity};
    if (const auto b = node.find("bias"); b != node.end()) {
        if (!b->is_array() || b->size() != rows) {
            throw ValidationError(where + ".bias: expected " + std::to_string(rows) + " numbers");
        }
        for (std::size_t r = 0; r < rows; ++r) {
            if (!(*b)[r].is_number()) throw ValidationError(where + ".bias: expected numbers");
            layer.bias[r] = (*b)[r].get<double>();
        }
    }
    if (const auto a = node.find("activation"); a != node.end()) {
        if (!a->is_string()) throw ValidationError(where + ".activation: expected a string");
        layer.activation = parse_activation(a->get<std::string>());
    }
    return layer;
}

Mlp parse_mlp(const json& node, const std::string& where) {
    Mlp mlp;
    if (node.is_array()) {
        if (node.empty()) throw ValidationError(where + ": empty stage list");
        for (std::size_t s = 0; s < node.size(); ++s) {
            mlp.stages.push_back(parse_dense(node[s], where + "[" + std::to_string(s) + "]"));
        }
    } else {
        mlp.stages.push_back(parse_dense(node, where));
    }
    return mlp;
}

json dense_to_json(const DenseLayer& d) {
    json rows = json::array();
    for (std::size_t r = 0; r < d.weights.rows(); ++r) {
        const auto row = d.weights.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"weights", rows}, {"bias", d.bias}, {"activation", std::string(to_string(d.activation))}};
}

json mlp_to_json(const Mlp& mlp) {
    if (mlp.stages.size() == 1) return dense_to_json(mlp.stages.front());
    json stages = json::array();
    for (const DenseLayer& d : mlp.stages) stages.push_back(dense_to_json(d));
    return stages;
}

}  // namespace

MpgnnModel parse_model(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed model document at byte " + std::to_string(e.byte));
    }
    if (!doc.is_object()) throw ValidationError("$: expected a JSON object");
    MpgnnModel model;
    const std::string aggregation = doc.value("aggregation", std::string("q_damped"));
    if (aggregation == "q_damped") {
        model.aggregation = Aggregation::QDamped;
        const auto q = doc.find("q");
        if (q == doc.end() || !q->is_number()) throw ValidationError("$.q: expected a number");
        model.parameter = q->get<double>();
    } else if (aggregation == "eps_normalized") {
        model.aggregation = Aggregation::EpsNormalized;
        const auto eps = doc.find("eps");
        if (eps == doc.end() || !eps->is_number()) throw ValidationError("$.eps: expected a number");
        model.parameter = eps->get<double>();
    } else {
        throw ValidationError("$.aggregation: expected \"q_damped\" or \"eps_normalized\"");
    }
    const auto layers = doc.find("layers");
    if (layers == doc.end() || !layers->is_array()) {
        throw ValidationError("$.layers: expected an array");
    }
    for (std::size_t i = 0; i < layers->size(); ++i) {
        model.layers.push_back(parse_mlp((*layers)[i], "$.layers[" + std::to_string(i) + "]"));
    }
    const auto readout = doc.find("readout");
    if (readout == doc.end()) throw ValidationError("$: missing field \"readout\"");
    model.readout = parse_mlp(*readout, "$.readout");
    // The input dimension is only known against a graph; check the rest now.
    if (!model.layers.empty() && !model.layers.front().stages.empty()) {
        model.validate(model.layers.front().input_dim());
    } else {
        model.validate(model.readout.stages.empty() ? 0 : model.readout.input_dim());
    }
    return model;
}

std::string serialize_model(const MpgnnModel& model) {
    json doc;
    if (model.aggregation == Aggregation::QDamped) {
        doc["aggregation"] = "q_damped";
        doc["q"] = model.parameter;
    } else {
        doc["aggregation"] = "eps_normalized";
        doc["eps"] = model.parameter;
    }
    json layers = json::array();
    for (const Mlp& mlp : model.layers) layers.push_back(mlp_to_json(mlp));
    doc["layers"] = std::move(layers);
    doc["readout"] = mlp_to_json(model.readout);
    return doc.dump(2);
}

Lmmc mcnn_layer(const Lmmc& c, const Mlp& phi) {
    if (phi.input_dim() != c.dimension()) {
        throw ValidationError("layer input dimension " + std::to_string(phi.input_dim()) +
                              " does not match label dimension " + std::to_string(c.dimension()));
    }
    const std::size_t n = c.size();
    const std::size_t out = phi.output_dim();
    std::vector<std::vector<double>> mapped(n);
    for (std::size_t x = 0; x < n; ++x) mapped[x] = phi.apply(c.label(x));
    std::vector<double> labels(n * out, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        const auto row = c.row(x);
        for (std::size_t x2 = 0; x2 < n; ++x2) {
            if (row[x2] == 0.0) continue;
            for (std::size_t j = 0; j < out; ++j) labels[x * out + j] += row[x2] * mapped[x2][j];
        }
    }
    return c.with_labels(std::move(labels), out);
}

double mcnn_readout(const Lmmc& c, const Mlp& phi, const Mlp& psi) {
    if (phi.input_dim() != c.dimension() || psi.input_dim() != phi.output_dim() ||
        psi.output_dim() != 1) {
        throw ValidationError("readout dimensions do not chain");
    }
    std::vector<double> pooled(phi.output_dim(), 0.0);
    for (std::size_t x = 0; x < c.size(); ++x) {
        if (c.mu()[x] == 0.0) continue;
        const std::vector<double> y = phi.apply(c.label(x));
        for (std::size_t j = 0; j < y.size(); ++j) pooled[j] += c.mu()[x] * y[j];
    }
    return psi.apply(pooled)[0];
}

double mcnn_pipeline(const Lmmc& c, const MpgnnModel& model) {
    if (model.aggregation != Aggregation::QDamped) {
        throw ValidationError("the MCNN pipeline applies to q-damped models");
    }
    model.validate(c.dimension());
    Lmmc current = c;
    for (std::size_t i = 0; i + 1 < model.layers.size(); ++i) {
        current = mcnn_layer(current, model.layers[i]);
    }
    return mcnn_readout(current, model.layers.back(), model.readout);
}

namespace {

using LabelTable = std::vector<std::vector<double>>;

LabelTable graph_labels(const LabeledGraph& g) {
    LabelTable labels(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto l = g.label(v);
        labels[v].assign(l.begin(), l.end());
    }
    return labels;
}

void check_depth(const MpgnnModel& model, const LabeledGraph& g, std::size_t k,
                 Aggregation expected) {
    if (model.aggregation != expected) {
        throw ValidationError(expected == Aggregation::QDamped
                                  ? "expected a q-damped model"
                                  : "expected an eps-normalized model");
    }
    model.validate(g.dimension());
    if (model.depth() != k) {
        throw ValidationError("model has depth " + std::to_string(model.depth()) +
                              " but k = " + std::to_string(k));
    }
}

}  // namespace

double mpgnn_forward(const LabeledGraph& g, const MpgnnModel& model, std::size_t k) {
    check_depth(model, g, k, Aggregation::QDamped);
    const double q = model.parameter;
    LabelTable labels = graph_labels(g);
    for (std::size_t i = 0; i < k; ++i) {
        LabelTable mapped(g.size());
        for (std::size_t v = 0; v < g.size(); ++v) mapped[v] = model.layers[i].apply(labels[v]);
        const std::size_t out = model.layers[i].output_dim();
        for (std::size_t v = 0; v < g.size(); ++v) {
            const double deg = g.degree(v);
            if (deg == 0.0) {
                labels[v] = mapped[v];
                continue;
            }
            std::vector<double> next(out);
            for (std::size_t j = 0; j < out; ++j) next[j] = q * mapped[v][j];
            for (const Neighbor& nb : g.neighbors(v)) {
                const double w = (1.0 - q) / deg * nb.weight;
                for (std::size_t j = 0; j < out; ++j) next[j] += w * mapped[nb.vertex][j];
            }
            labels[v] = std::move(next);
        }
    }
    double total = 0.0;
    for (std::size_t v = 0; v < g.size(); ++v) total += g.modified_degree(v);
    std::vector<double> pooled(model.layers[k].output_dim(), 0.0);
    for (std::size_t v = 0; v < g.size(); ++v) {
        const std::vector<double> y = model.layers[k].apply(labels[v]);
        const double weight = g.modified_degree(v) / total;
        for (std::size_t j = 0; j < y.size(); ++j) pooled[j] += weight * y[j];
    }
    return model.readout.apply(pooled)[0];
}

double normalized_gin_forward(const LabeledGraph& g, const MpgnnModel& model, std::size_t k) {
    check_depth(model, g, k, Aggregation::EpsNormalized);
    const double eps = model.parameter;
    LabelTable labels = graph_labels(g);
    for (std::size_t i = 0; i < k; ++i) {
        LabelTable next(g.size());
        for (std::size_t v = 0; v < g.size(); ++v) {
            const double deg_eps = g.degree(v) + 1.0 + eps;
            std::vector<double> agg(labels[v].size());
            for (std::size_t j = 0; j < agg.size(); ++j) agg[j] = (1.0 + eps) * labels[v][j];
            for (const Neighbor& nb : g.neighbors(v))
                for (std::size_t j = 0; j < agg.size(); ++j) agg[j] += nb.weight * labels[nb.vertex][j];
            for (double& a : agg) a /= deg_eps;
            next[v] = model.layers[i].apply(agg);
        }
        labels = std::move(next);
    }
    double total = 0.0;
    for (std::size_t v = 0; v < g.size(); ++v) total += g.degree(v) + 1.0 + eps;
    std::vector<double> pooled(labels.front().size(), 0.0);
    for (std::size_t v = 0; v < g.size(); ++v) {
        const double weight = (g.degree(v) + 1.0 + eps) / total;
        for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += weight * labels[v][j];
    }
    return model.readout.apply(pooled)[0];
}

double layer_lipschitz_bound(const DenseLayer& layer, MetricKind metric) {
    const Matrix& w = layer.weights;
    switch (metric) {
        case MetricKind::L1: {
            double best = 0.0;
            for (std::size_t c = 0; c < w.cols(); ++c) {
                double sum = 0.0;
                for (std::size_t r = 0; r < w.rows(); ++r) sum += std::abs(w(r, c));
                best = std::max(best, sum);
            }
            return best;
        }
        case MetricKind::LInf: {
            double best = 0.0;
            for (std::size_t r = 0; r < w.rows(); ++r) {
                double sum = 0.0;
                for (double v : w.row(r)) sum += std::abs(v);
                best = std::max(best, sum);
            }
            return best;
        }
        case MetricKind::L2: {
            std::vector<double> v(w.cols(), 1.0 / std::sqrt(static_cast<double>(w.cols())));
            std::vector<double> wv(w.rows());
            double sigma = 0.0;
            for (int it = 0; it < 50; ++it) {
                for (std::size_t r = 0; r < w.rows(); ++r) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * v[c];
                    wv[r] = acc;
                }
                std::vector<double> next(w.cols(), 0.0);
                for (std::size_t r = 0; r < w.rows(); ++r)
                    for (std::size_t c = 0; c < w.cols(); ++c) next[c] += w(r, c) * wv[r];
                double norm = 0.0;
                for (double x : next) norm += x * x;
                norm = std::sqrt(norm);
                if (norm == 0.0) return 0.0;
                sigma = std::sqrt(norm);  // ||W^T W v|| with ||v|| = 1
                for (std::size_t c = 0; c < v.size(); ++c) v[c] = next[c] / norm;
            }
            return sigma * 1.01;
        }
    }
    return 0.0;
}

double lipschitz_bound(const Mlp& mlp, MetricKind metric) {
    double bound = 1.0;
    for (const DenseLayer& stage : mlp.stages) bound *= layer_lipschitz_bound(stage, metric);
    return bound;
}

LipschitzAudit lipschitz_audit(const LabeledGraph& g1, const LabeledGraph& g2,
                               const MpgnnModel& model, std::size_t k, MetricKind metric,
                               bool allow_l2) {
    if (metric == MetricKind::L2 && !allow_l2) {
        throw ValidationError("L2 audits use a conservative bound; pass the override to allow them");
    }
    if (g1.dimension() != g2.dimension()) {
        throw ValidationError("graphs have different label dimensions");
    }
    LipschitzAudit audit;
    audit.conservative = metric == MetricKind::L2;
    double bound = lipschitz_bound(model.readout, metric);
    for (const Mlp& layer : model.layers) bound *= lipschitz_bound(layer, metric);
    audit.bound_constant = bound;
    if (model.aggregation == Aggregation::QDamped) {
        audit.lhs = std::abs(mpgnn_forward(g1, model, k) - mpgnn_forward(g2, model, k));
        audit.distance = wl_distance(induce_q_damped(g1, model.parameter, metric),
                                     induce_q_damped(g2, model.parameter, metric), k)
                             .distance;
    } else {
        audit.lhs = std::abs(normalized_gin_forward(g1, model, k) - normalized_gin_forward(g2, model, k));
        audit.distance = wl_distance(induce_eps_normalized(g1, model.parameter, metric),
                                     induce_eps_normalized(g2, model.parameter, metric), k)
                             .distance;
    }
    audit.slack = audit.bound_constant * audit.distance - audit.lhs;
    audit.satisfied = audit.slack >= -kLipschitzSlackTolerance;
    return audit;
}

MpgnnModel sample_model(std::uint64_t seed, std::size_t input_dim, std::size_t k, double q,
                        std::size_t width) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    auto dense = [&](std::size_t out, std::size_t in, Activation act) {
        Matrix w(out, in);
        for (double& x : w.data()) x = uniform(rng);
        return DenseLayer{std::move(w), std::vector<double>(out, 0.0), act};
    };
    MpgnnModel model;
    model.aggregation = Aggregation::QDamped;
    model.parameter = q;
    std::size_t dim = input_dim;
    for (std::size_t i = 0; i <= k; ++i) {
        model.layers.push_back(Mlp{{dense(width, dim, Activation::Relu)}});
        dim = width;
    }
    model.readout = Mlp{{dense(1, dim, Activation::Identity)}};
    return model;
}

MpgnnModel unit_model(std::size_t input_dim, std::size_t k, double q) {
    MpgnnModel model;
    model.aggregation = Aggregation::QDamped;
    model.parameter = q;
    std::size_t dim = input_dim;
    for (std::size_t i = 0; i <= k; ++i) {
        model.layers.push_back(
            Mlp{{DenseLayer{Matrix(1, dim, 1.0), std::vector<double>(1, 0.0), Activation::Identity}}});
        dim = 1;
    }
    model.readout = Mlp::identity(1);
    return model;
}

namespace {

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::uint64_t out[1];
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    out[0] = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    return out[0];
}

}  // namespace

std::optional<SeparatorResult> random_separator_search(const LabeledGraph& g1,
                                                       const LabeledGraph& g2, double q,
                                                       std::size_t k, std::size_t trials,
                                                       std::uint64_t seed) {
    if (g1.dimension() != g2.dimension()) {
        throw ValidationError("graphs have different label dimensions");
    }
    for (std::size_t t = 1; t <= trials; ++t) {
        MpgnnModel model = t == 1 ? unit_model(g1.dimension(), k, q)
                                  : sample_model(trial_seed(seed, t), g1.dimension(), k, q, 1);
        const double gap = std::abs(mpgnn_forward(g1, model, k) - mpgnn_forward(g2, model, k));
        if (gap > kSeparationThreshold) return SeparatorResult{std::move(model), t, gap};
    }
    return std::nullopt;
}

ZeroSetReport zero_set_audit(const LabeledGraph& g1, const LabeledGraph& g2, double q,
                             std::size_t k, std::size_t trials, std::uint64_t seed) {
    if (g1.dimension() != g2.dimension()) {
        throw ValidationError("graphs have different label dimensions");
    }
    ZeroSetReport report;
    report.trials = trials;
    report.distance = wl_distance(induce_q_damped(g1, q), induce_q_damped(g2, q), k).distance;
    report.zero_distance = report.distance <= kZeroDistanceThreshold;
    if (!report.zero_distance) {
        report.separator = random_separator_search(g1, g2, q, k, trials, seed);
        return report;
    }
    std::vector<double> gaps(trials, 0.0);
    parallel_for(trials, [&](std::size_t t) {
        const MpgnnModel model = sample_model(trial_seed(seed, t + 1), g1.dimension(), k, q, 3);
        gaps[t] = std::abs(mpgnn_forward(g1, model, k) - mpgnn_forward(g2, model, k));
    });
    for (double gap : gaps) report.max_gap = std::max(report.max_gap, gap);
    report.outputs_equal = report.max_gap <= kEqualOutputTolerance;
    return report;
}

}  // namespace wlm
