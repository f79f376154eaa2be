#include "wlm/markov.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "wlm/error.hpp"

namespace wlm {

using nlohmann::json;

namespace {

void check_probability_vector(std::span<const double> p, const std::string& what) {
    double sum = 0.0;
    for (double value : p) {
        if (!std::isfinite(value) || value < 0.0) {
            throw ValidationError(what + " has a negative or non-finite entry");
        }
        sum += value;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
        throw ValidationError(what + " sums to " + std::to_string(sum) + ", not 1");
    }
}

}  // namespace

Lmmc Lmmc::create(Matrix kernel, std::vector<double> mu, std::vector<double> labels,
                  LabelMetric metric) {
    const std::size_t n = mu.size();
    if (n == 0) throw ValidationError("chain must have at least one state");
    if (kernel.rows() != n || kernel.cols() != n) {
        throw ValidationError("kernel must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (metric.dimension < 1) throw ValidationError("label dimension must be >= 1");
    if (labels.size() != n * metric.dimension) {
        throw ValidationError("label table does not match " + std::to_string(n) +
                              " states of dimension " + std::to_string(metric.dimension));
    }
    for (double value : labels) {
        if (!std::isfinite(value)) throw ValidationError("non-finite label entry");
    }
    for (std::size_t x = 0; x < n; ++x) {
        check_probability_vector(kernel.row(x), "kernel row " + std::to_string(x));
    }
    check_probability_vector(mu, "mu");

    Lmmc c;
    c.kernel_ = std::move(kernel);
    c.mu_ = std::move(mu);
    c.labels_ = std::move(labels);
    c.metric_ = metric;
    c.stationary_ = stationarity_residual(c) <= kStochasticTolerance;
    return c;
}

Lmmc Lmmc::with_labels(std::vector<double> labels, std::size_t dimension) const {
    return create(kernel_, mu_, std::move(labels), LabelMetric{metric_.kind, dimension});
}

Lmmc induce_q_damped(const LabeledGraph& g, double q, MetricKind metric) {
    if (!(q > 0.0 && q < 1.0)) {
        throw ValidationError("damping q must lie in (0,1), got " + std::to_string(q));
    }
    const std::size_t n = g.size();
    if (n == 0) throw ValidationError("graph has no vertices");
    Matrix kernel(n, n);
    std::vector<double> mu(n);
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const double deg = g.degree(v);
        if (deg > 0.0) {
            kernel(v, v) += q;
            for (const Neighbor& nb : g.neighbors(v)) {
                kernel(v, nb.vertex) += (1.0 - q) / deg * nb.weight;
            }
        } else {
            kernel(v, v) = 1.0;
        }
        mu[v] = g.modified_degree(v);
        total += mu[v];
    }
    for (double& m : mu) m /= total;
    return Lmmc::create(std::move(kernel), std::move(mu), g.labels(),
                        LabelMetric{metric, g.dimension()});
}

Lmmc induce_eps_normalized(const LabeledGraph& g, double eps, MetricKind metric) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
        throw ValidationError("epsilon must be >= 0, got " + std::to_string(eps));
    }
    const std::size_t n = g.size();
    if (n == 0) throw ValidationError("graph has no vertices");
    Matrix kernel(n, n);
    std::vector<double> mu(n);
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const double deg_eps = g.degree(v) + 1.0 + eps;
        kernel(v, v) += (1.0 + eps) / deg_eps;
        for (const Neighbor& nb : g.neighbors(v)) kernel(v, nb.vertex) += nb.weight / deg_eps;
        mu[v] = deg_eps;
        total += deg_eps;
    }
    for (double& m : mu) m /= total;
    return Lmmc::create(std::move(kernel), std::move(mu), g.labels(),
                        LabelMetric{metric, g.dimension()});
}

double stationarity_residual(const Lmmc& c) {
    const std::size_t n = c.size();
    double worst = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
        double flow = 0.0;
        for (std::size_t x = 0; x < n; ++x) flow += c.mu()[x] * c.kernel()(x, y);
        worst = std::max(worst, std::abs(flow - c.mu()[y]));
    }
    return worst;
}

bool check_stationary(const Lmmc& c, double tol) { return stationarity_residual(c) <= tol; }

std::vector<std::size_t> PathDistribution::decode(std::uint64_t code) const {
    std::vector<std::size_t> path(horizon + 1);
    for (std::size_t t = 0; t <= horizon; ++t) {
        path[t] = static_cast<std::size_t>(code % states);
        code /= states;
    }
    return path;
}

std::uint64_t PathDistribution::encode(std::span<const std::size_t> path) const {
    std::uint64_t code = 0;
    for (std::size_t t = path.size(); t-- > 0;) code = code * states + path[t];
    return code;
}

double PathDistribution::total_mass() const {
    double total = 0.0;
    for (const auto& [code, w] : weights) total += w;
    return total;
}

PathDistribution path_distribution(const Lmmc& c, std::size_t k, std::size_t cap) {
    const std::size_t n = c.size();
    double states_pow = 1.0;
    for (std::size_t t = 0; t <= k; ++t) states_pow *= static_cast<double>(n);
    if (states_pow >= 1.8e19) {
        throw CapExceeded("path space of " + std::to_string(n) + "^" + std::to_string(k + 1) +
                          " sequences cannot be encoded");
    }

    PathDistribution out;
    out.horizon = k;
    out.states = n;

    // Frontier of positive-weight prefixes as (code, weight, last state, place value).
    struct Prefix {
        std::uint64_t code;
        double weight;
        std::size_t last;
    };
    std::vector<Prefix> frontier;
    for (std::size_t x = 0; x < n; ++x) {
        if (c.mu()[x] > 0.0) frontier.push_back({x, c.mu()[x], x});
    }
    std::uint64_t place = n;
    for (std::size_t t = 1; t <= k; ++t) {
        std::vector<Prefix> next;
        for (const Prefix& p : frontier) {
            const auto row = c.row(p.last);
            for (std::size_t x = 0; x < n; ++x) {
                if (row[x] > 0.0) {
                    next.push_back({p.code + place * x, p.weight * row[x], x});
                    if (next.size() > cap) {
                        throw CapExceeded("path distribution support exceeds cap of " +
                                          std::to_string(cap) + " entries");
                    }
                }
            }
        }
        frontier = std::move(next);
        place *= n;
    }
    if (frontier.size() > cap) {
        throw CapExceeded("path distribution support exceeds cap of " + std::to_string(cap) +
                          " entries");
    }
    for (const Prefix& p : frontier) out.weights.emplace(p.code, p.weight);
    return out;
}

bool labels_injective(const Lmmc& c) {
    std::vector<std::vector<double>> seen;
    seen.reserve(c.size());
    for (std::size_t x = 0; x < c.size(); ++x) {
        const auto l = c.label(x);
        seen.emplace_back(l.begin(), l.end());
    }
    std::sort(seen.begin(), seen.end());
    return std::adjacent_find(seen.begin(), seen.end()) == seen.end();
}

Lmmc label_space_chain(const Lmmc& c) {
    const std::size_t n = c.size();
    const std::size_t d = c.dimension();
    // State of the pushed-forward chain for each original state.
    std::vector<std::vector<double>> points;
    std::vector<std::size_t> point_of(n);
    for (std::size_t x = 0; x < n; ++x) {
        const auto l = c.label(x);
        std::vector<double> z(l.begin(), l.end());
        const auto it = std::find(points.begin(), points.end(), z);
        if (it != points.end()) throw ValidationError("labels not injective");
        point_of[x] = points.size();
        points.push_back(std::move(z));
    }
    const std::size_t m = points.size();
    Matrix kernel(m, m);
    std::vector<double> mu(m, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        mu[point_of[x]] += c.mu()[x];
        for (std::size_t y = 0; y < n; ++y) kernel(point_of[x], point_of[y]) += c.kernel()(x, y);
    }
    std::vector<double> labels;
    labels.reserve(m * d);
    for (const auto& z : points) labels.insert(labels.end(), z.begin(), z.end());
    return Lmmc::create(std::move(kernel), std::move(mu), std::move(labels), c.metric());
}

std::string serialize_lmmc(const Lmmc& c) {
    json doc;
    doc["n"] = c.size();
    doc["d"] = c.dimension();
    doc["metric"] = std::string(to_string(c.metric().kind));
    doc["kernel"] = c.kernel().data();
    doc["mu"] = c.mu();
    json labels = json::array();
    for (std::size_t x = 0; x < c.size(); ++x) {
        const auto l = c.label(x);
        labels.push_back(std::vector<double>(l.begin(), l.end()));
    }
    doc["labels"] = std::move(labels);
    doc["stationary"] = c.stationary();
    return doc.dump(2);
}

Lmmc parse_lmmc(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
        const auto n = doc.at("n").get<std::size_t>();
        const auto d = doc.at("d").get<std::size_t>();
        const MetricKind kind = parse_metric_kind(doc.at("metric").get<std::string>());
        auto flat = doc.at("kernel").get<std::vector<double>>();
        if (flat.size() != n * n) throw ValidationError("kernel must have n*n entries");
        auto mu = doc.at("mu").get<std::vector<double>>();
        std::vector<double> labels;
        for (const auto& row : doc.at("labels")) {
            const auto values = row.get<std::vector<double>>();
            if (values.size() != d) throw ValidationError("label row dimension mismatch");
            labels.insert(labels.end(), values.begin(), values.end());
        }
        return Lmmc::create(Matrix(n, n, std::move(flat)), std::move(mu), std::move(labels),
                            LabelMetric{kind, d});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed chain document: ") + e.what());
    }
}

}  // namespace wlm
