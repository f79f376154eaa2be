#include "wlm/wl_distance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <string>

#include "wlm/error.hpp"
#include "wlm/parallel.hpp"

namespace wlm {

void check_compatible(const Lmmc& X, const Lmmc& Y) {
    if (X.metric().kind != Y.metric().kind) {
        throw ValidationError("metric mismatch: " + std::string(to_string(X.metric().kind)) +
                              " vs " + std::string(to_string(Y.metric().kind)));
    }
    if (X.dimension() != Y.dimension()) {
        throw ValidationError("metric mismatch: label dimensions " +
                              std::to_string(X.dimension()) + " and " +
                              std::to_string(Y.dimension()));
    }
}

std::vector<CostTable> wl_cost_tables(const Lmmc& X, const Lmmc& Y, std::size_t k) {
    check_compatible(X, Y);
    const std::size_t n = X.size();
    const std::size_t m = Y.size();

    std::vector<CostTable> tables;
    tables.reserve(k + 1);
    Matrix terminal(n, m);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < m; ++y)
            terminal(x, y) = label_distance(X.metric(), X.label(x), Y.label(y));
    tables.push_back({k, std::move(terminal)});

    for (std::size_t i = k; i > 0; --i) {
        const Matrix& next = tables.back().values;
        Matrix current(n, m);
        parallel_for(n * m, [&](std::size_t cell) {
            const std::size_t x = cell / m;
            const std::size_t y = cell % m;
            current(x, y) = wasserstein(next, X.row(x), Y.row(y)).value;
        });
        tables.push_back({i - 1, std::move(current)});
    }
    return tables;
}

WlResult wl_distance(const Lmmc& X, const Lmmc& Y, std::size_t k) {
    WlResult result;
    result.tables = wl_cost_tables(X, Y, k);
    TransportResult top = wasserstein(result.tables.back().values, X.mu(), Y.mu());
    result.distance = top.value;
    result.initial_coupling = std::move(top.plan);
    return result;
}

std::size_t NestedLabels::class_count(std::size_t j) const {
    if (j == 0) return base_labels.size();
    return pushforward.at(j).size();
}

NestedLabels wl_labels(const Lmmc& X, std::size_t k) {
    const std::size_t n = X.size();
    NestedLabels out;
    out.horizon = k;
    out.dimension = X.dimension();
    out.class_of.assign(k + 1, std::vector<std::size_t>(n));
    out.pushforward.resize(k + 1);

    std::map<std::vector<double>, std::size_t> base_index;
    for (std::size_t x = 0; x < n; ++x) {
        const auto l = X.label(x);
        std::vector<double> key(l.begin(), l.end());
        const auto [it, inserted] = base_index.emplace(key, out.base_labels.size());
        if (inserted) out.base_labels.push_back(std::move(key));
        out.class_of[0][x] = it->second;
    }

    using Measure = std::vector<std::pair<std::size_t, double>>;
    for (std::size_t j = 1; j <= k; ++j) {
        const auto& prev = out.class_of[j - 1];
        std::map<Measure, std::size_t> index;
        for (std::size_t x = 0; x < n; ++x) {
            std::map<std::size_t, double> bins;
            const auto row = X.row(x);
            for (std::size_t x2 = 0; x2 < n; ++x2) {
                if (row[x2] > 0.0) bins[prev[x2]] += row[x2];
            }
            Measure key(bins.begin(), bins.end());
            const auto [it, inserted] = index.emplace(key, out.pushforward[j].size());
            if (inserted) out.pushforward[j].push_back(std::move(key));
            out.class_of[j][x] = it->second;
        }
    }
    return out;
}

namespace {

// Wasserstein between two sparse class measures under a class-pair table.
double sparse_wasserstein(const Matrix& ground, const std::vector<std::pair<std::size_t, double>>& a,
                          const std::vector<std::pair<std::size_t, double>>& b) {
    Matrix cost(a.size(), b.size());
    std::vector<double> mu(a.size()), nu(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        mu[i] = a[i].second;
        for (std::size_t j = 0; j < b.size(); ++j) cost(i, j) = ground(a[i].first, b[j].first);
    }
    for (std::size_t j = 0; j < b.size(); ++j) nu[j] = b[j].second;
    return wasserstein(cost, mu, nu).value;
}

std::vector<std::pair<std::size_t, double>> pushforward_of(const std::vector<double>& mu,
                                                           const std::vector<std::size_t>& cls) {
    std::map<std::size_t, double> bins;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        if (mu[x] > 0.0) bins[cls[x]] += mu[x];
    }
    return {bins.begin(), bins.end()};
}

}  // namespace

std::vector<Matrix> wl_label_distances(const NestedLabels& a, const NestedLabels& b,
                                       const LabelMetric& metric) {
    if (a.horizon != b.horizon) throw ValidationError("nested labels have different depths");
    std::vector<Matrix> tables;
    tables.reserve(a.horizon + 1);
    Matrix base(a.class_count(0), b.class_count(0));
    for (std::size_t i = 0; i < base.rows(); ++i)
        for (std::size_t j = 0; j < base.cols(); ++j)
            base(i, j) = label_distance(metric, a.base_labels[i], b.base_labels[j]);
    tables.push_back(std::move(base));
    for (std::size_t depth = 1; depth <= a.horizon; ++depth) {
        const Matrix& ground = tables.back();
        Matrix table(a.class_count(depth), b.class_count(depth));
        for (std::size_t i = 0; i < table.rows(); ++i)
            for (std::size_t j = 0; j < table.cols(); ++j)
                table(i, j) =
                    sparse_wasserstein(ground, a.pushforward[depth][i], b.pushforward[depth][j]);
        tables.push_back(std::move(table));
    }
    return tables;
}

double wl_distance_hierarchical(const Lmmc& X, const Lmmc& Y, std::size_t k) {
    check_compatible(X, Y);
    const NestedLabels a = wl_labels(X, k);
    const NestedLabels b = wl_labels(Y, k);
    const std::vector<Matrix> tables = wl_label_distances(a, b, X.metric());
    return sparse_wasserstein(tables.back(), pushforward_of(X.mu(), a.class_of[k]),
                              pushforward_of(Y.mu(), b.class_of[k]));
}

namespace {

std::string weight_text(double w) {
    char buffer[64];
    const auto res = std::to_chars(buffer, buffer + sizeof buffer, w);
    return std::string(buffer, res.ptr);
}

using Signature = std::pair<std::size_t, std::vector<std::pair<std::size_t, std::string>>>;

Signature signature_of(const LabeledGraph& g, const std::vector<std::size_t>& colors,
                       std::size_t v) {
    Signature sig{colors[v], {}};
    for (const Neighbor& nb : g.neighbors(v)) {
        sig.second.emplace_back(colors[nb.vertex], weight_text(nb.weight));
    }
    std::sort(sig.second.begin(), sig.second.end());
    return sig;
}

// Normalized modified-degree mass per color.
std::map<std::size_t, double> histogram(const LabeledGraph& g,
                                        const std::vector<std::size_t>& colors) {
    double total = 0.0;
    for (std::size_t v = 0; v < g.size(); ++v) total += g.modified_degree(v);
    std::map<std::size_t, double> hist;
    for (std::size_t v = 0; v < g.size(); ++v) hist[colors[v]] += g.modified_degree(v) / total;
    return hist;
}

bool histograms_differ(const std::map<std::size_t, double>& a,
                       const std::map<std::size_t, double>& b) {
    std::map<std::size_t, double> diff = a;
    for (const auto& [c, mass] : b) diff[c] -= mass;
    return std::any_of(diff.begin(), diff.end(),
                       [](const auto& entry) { return std::abs(entry.second) > 1e-12; });
}

// Ids follow the sorted order of keys, so the palette is canonical.
template <class Key>
std::vector<std::size_t> assign_palette(const std::vector<Key>& keys_first,
                                        const std::vector<Key>& keys_second,
                                        std::vector<std::size_t>& second_out) {
    std::map<Key, std::size_t> palette;
    for (const Key& key : keys_first) palette.emplace(key, 0);
    for (const Key& key : keys_second) palette.emplace(key, 0);
    std::size_t next = 0;
    for (auto& [key, id] : palette) id = next++;
    std::vector<std::size_t> first_out(keys_first.size());
    for (std::size_t v = 0; v < keys_first.size(); ++v) first_out[v] = palette.at(keys_first[v]);
    second_out.resize(keys_second.size());
    for (std::size_t v = 0; v < keys_second.size(); ++v) second_out[v] = palette.at(keys_second[v]);
    return first_out;
}

}  // namespace

WlTestResult classic_wl_refinement(const LabeledGraph& g1, const LabeledGraph& g2,
                                   std::size_t rounds) {
    WlTestResult result;
    auto labels_of = [](const LabeledGraph& g) {
        std::vector<std::vector<double>> keys;
        for (std::size_t v = 0; v < g.size(); ++v) {
            const auto l = g.label(v);
            keys.emplace_back(l.begin(), l.end());
        }
        return keys;
    };
    std::vector<std::size_t> second;
    std::vector<std::size_t> first = assign_palette(labels_of(g1), labels_of(g2), second);
    result.colors.first.push_back(first);
    result.colors.second.push_back(second);

    auto check_round = [&](std::size_t round) {
        if (!result.separation_round &&
            (g1.dimension() != g2.dimension() ||
             histograms_differ(histogram(g1, result.colors.first.back()),
                               histogram(g2, result.colors.second.back())))) {
            result.separation_round = round;
        }
    };
    check_round(0);
    for (std::size_t r = 1; r <= rounds; ++r) {
        const auto& c1 = result.colors.first.back();
        const auto& c2 = result.colors.second.back();
        std::vector<Signature> s1, s2;
        for (std::size_t v = 0; v < g1.size(); ++v) s1.push_back(signature_of(g1, c1, v));
        for (std::size_t v = 0; v < g2.size(); ++v) s2.push_back(signature_of(g2, c2, v));
        std::vector<std::size_t> next_second;
        std::vector<std::size_t> next_first = assign_palette(s1, s2, next_second);
        result.colors.first.push_back(std::move(next_first));
        result.colors.second.push_back(std::move(next_second));
        check_round(r);
    }
    result.distinguishable = result.separation_round.has_value();
    return result;
}

}  // namespace wlm
