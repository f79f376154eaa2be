#include "wlm/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "wlm/error.hpp"

namespace wlm {

using nlohmann::json;

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::L1: return "L1";
        case MetricKind::L2: return "L2";
        case MetricKind::LInf: return "Linf";
    }
    return "L1";
}

MetricKind parse_metric_kind(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "l1") return MetricKind::L1;
    if (lower == "l2") return MetricKind::L2;
    if (lower == "linf") return MetricKind::LInf;
    throw ValidationError("unknown label metric '" + std::string(text) + "' (expected L1, L2 or Linf)");
}

double label_distance(const LabelMetric& metric, std::span<const double> z1,
                      std::span<const double> z2) {
    if (z1.size() != metric.dimension || z2.size() != metric.dimension) {
        throw ValidationError("label dimension mismatch: metric expects " +
                              std::to_string(metric.dimension) + ", got " +
                              std::to_string(z1.size()) + " and " + std::to_string(z2.size()));
    }
    double acc = 0.0;
    switch (metric.kind) {
        case MetricKind::L1:
            for (std::size_t i = 0; i < z1.size(); ++i) acc += std::abs(z1[i] - z2[i]);
            return acc;
        case MetricKind::L2:
            for (std::size_t i = 0; i < z1.size(); ++i) {
                const double diff = z1[i] - z2[i];
                acc += diff * diff;
            }
            return std::sqrt(acc);
        case MetricKind::LInf:
            for (std::size_t i = 0; i < z1.size(); ++i) acc = std::max(acc, std::abs(z1[i] - z2[i]));
            return acc;
    }
    return acc;
}

LabeledGraph LabeledGraph::create(std::vector<std::string> ids, std::size_t dimension,
                                  std::vector<double> labels, std::vector<Edge> edges) {
    if (dimension < 1) throw ValidationError("label dimension must be >= 1");
    if (labels.size() != ids.size() * dimension) {
        throw ValidationError("label table size " + std::to_string(labels.size()) +
                              " does not match " + std::to_string(ids.size()) + " vertices x d=" +
                              std::to_string(dimension));
    }
    for (double value : labels) {
        if (!std::isfinite(value)) throw ValidationError("non-finite label entry");
    }

    LabeledGraph g;
    g.dimension_ = dimension;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!g.index_.emplace(ids[i], i).second) {
            throw ValidationError("duplicate vertex id '" + ids[i] + "'");
        }
    }
    g.ids_ = std::move(ids);
    g.labels_ = std::move(labels);

    const std::size_t n = g.ids_.size();
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        Edge& edge = edges[e];
        if (edge.u >= n || edge.v >= n) {
            throw ValidationError("edge " + std::to_string(e) + ": unknown endpoint");
        }
        if (!(edge.weight > 0.0) || !std::isfinite(edge.weight)) {
            throw ValidationError("edge " + std::to_string(e) + ": nonpositive weight");
        }
        if (edge.u > edge.v) std::swap(edge.u, edge.v);
        if (!seen.emplace(edge.u, edge.v).second) {
            throw ValidationError("edge " + std::to_string(e) + ": duplicate edge between '" +
                                  g.ids_[edge.u] + "' and '" + g.ids_[edge.v] + "'");
        }
    }
    g.edges_ = std::move(edges);

    g.adjacency_.assign(n, {});
    g.degrees_.assign(n, 0.0);
    for (const Edge& edge : g.edges_) {
        g.adjacency_[edge.u].push_back({edge.v, edge.weight});
        g.degrees_[edge.u] += edge.weight;
        if (edge.u != edge.v) {
            g.adjacency_[edge.v].push_back({edge.u, edge.weight});
            g.degrees_[edge.v] += edge.weight;
        }
    }
    return g;
}

std::optional<std::size_t> LabeledGraph::index_of(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool operator==(const LabeledGraph& a, const LabeledGraph& b) {
    if (a.ids_ != b.ids_ || a.dimension_ != b.dimension_ || a.labels_ != b.labels_) return false;
    if (a.edges_.size() != b.edges_.size()) return false;
    auto key = [](const Edge& e) { return std::tuple(e.u, e.v, e.weight); };
    std::vector<std::tuple<std::size_t, std::size_t, double>> ea, eb;
    for (const Edge& e : a.edges_) ea.push_back(key(e));
    for (const Edge& e : b.edges_) eb.push_back(key(e));
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    return ea == eb;
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + ": missing field \"" + key + "\"");
    return *it;
}

double require_number(const json& value, const std::string& where) {
    if (!value.is_number()) throw ValidationError(where + ": expected a number");
    return value.get<double>();
}

}  // namespace

LabeledGraph parse_graph(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed document at byte " + std::to_string(e.byte) + ": " +
                              e.what());
    }
    if (!doc.is_object()) throw ValidationError("$: expected a JSON object");
    if (const auto it = doc.find("directed"); it != doc.end() && it->is_boolean() && it->get<bool>()) {
        throw ValidationError("$.directed: directed graphs are not supported");
    }

    const json& d_field = require(doc, "d", "$");
    if (!d_field.is_number_integer() || d_field.get<long long>() < 1) {
        throw ValidationError("$.d: expected a positive integer");
    }
    const auto dimension = static_cast<std::size_t>(d_field.get<long long>());

    const json& nodes = require(doc, "nodes", "$");
    if (!nodes.is_array()) throw ValidationError("$.nodes: expected an array");

    std::vector<std::string> ids;
    std::vector<double> labels;
    ids.reserve(nodes.size());
    labels.reserve(nodes.size() * dimension);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "$.nodes[" + std::to_string(i) + "]";
        const json& node = nodes[i];
        if (!node.is_object()) throw ValidationError(where + ": expected an object");
        const json& id = require(node, "id", where);
        if (!id.is_string()) throw ValidationError(where + ".id: expected a string");
        const json& label = require(node, "label", where);
        if (!label.is_array()) throw ValidationError(where + ".label: expected an array");
        if (label.size() != dimension) {
            throw ValidationError(where + ".label: label dimension mismatch (expected " +
                                  std::to_string(dimension) + ", got " +
                                  std::to_string(label.size()) + ")");
        }
        for (std::size_t c = 0; c < label.size(); ++c) {
            labels.push_back(require_number(label[c], where + ".label[" + std::to_string(c) + "]"));
        }
        if (!index.emplace(id.get<std::string>(), i).second) {
            throw ValidationError(where + ".id: duplicate vertex id '" + id.get<std::string>() + "'");
        }
        ids.push_back(id.get<std::string>());
    }

    std::vector<Edge> edges;
    if (const auto it = doc.find("edges"); it != doc.end()) {
        if (!it->is_array()) throw ValidationError("$.edges: expected an array");
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t e = 0; e < it->size(); ++e) {
            const std::string where = "$.edges[" + std::to_string(e) + "]";
            const json& edge = (*it)[e];
            if (!edge.is_object()) throw ValidationError(where + ": expected an object");
            if (const auto dir = edge.find("directed");
                dir != edge.end() && dir->is_boolean() && dir->get<bool>()) {
                throw ValidationError(where + ": directed edges are not supported");
            }
            auto endpoint = [&](const char* key) {
                const json& value = require(edge, key, where);
                if (!value.is_string()) {
                    throw ValidationError(where + "." + key + ": expected a vertex id string");
                }
                const auto found = index.find(value.get<std::string>());
                if (found == index.end()) {
                    throw ValidationError(where + "." + key + ": unknown endpoint '" +
                                          value.get<std::string>() + "'");
                }
                return found->second;
            };
            Edge parsed;
            parsed.u = endpoint("u");
            parsed.v = endpoint("v");
            if (const auto w = edge.find("w"); w != edge.end()) {
                parsed.weight = require_number(*w, where + ".w");
            }
            if (!(parsed.weight > 0.0) || !std::isfinite(parsed.weight)) {
                throw ValidationError(where + ".w: nonpositive weight");
            }
            if (parsed.u > parsed.v) std::swap(parsed.u, parsed.v);
            if (!seen.emplace(parsed.u, parsed.v).second) {
                throw ValidationError(where + ": duplicate edge");
            }
            edges.push_back(parsed);
        }
    }
    return LabeledGraph::create(std::move(ids), dimension, std::move(labels), std::move(edges));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

LabeledGraph load_graph(const std::string& path) {
    try {
        return parse_graph(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string serialize_graph(const LabeledGraph& g) {
    json doc;
    doc["d"] = g.dimension();
    json nodes = json::array();
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto label = g.label(v);
        nodes.push_back({{"id", g.id(v)}, {"label", std::vector<double>(label.begin(), label.end())}});
    }
    doc["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const Edge& e : g.edges()) {
        edges.push_back({{"u", g.id(e.u)}, {"v", g.id(e.v)}, {"w", e.weight}});
    }
    doc["edges"] = std::move(edges);
    return doc.dump(2);
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> sigma) {
    std::vector<std::size_t> inverse(sigma.size(), sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (sigma[i] >= sigma.size() || inverse[sigma[i]] != sigma.size()) {
            throw ValidationError("permutation is not a bijection on vertex indices");
        }
        inverse[sigma[i]] = i;
    }
    return inverse;
}

LabeledGraph permute_graph(const LabeledGraph& g, std::span<const std::size_t> sigma) {
    if (sigma.size() != g.size()) {
        throw ValidationError("permutation has " + std::to_string(sigma.size()) +
                              " entries for a graph with " + std::to_string(g.size()) + " vertices");
    }
    inverse_permutation(sigma);  // validates bijectivity

    const std::size_t d = g.dimension();
    std::vector<double> labels(g.labels().size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto src = g.label(v);
        std::copy(src.begin(), src.end(), labels.begin() + static_cast<std::ptrdiff_t>(sigma[v] * d));
    }
    std::vector<Edge> edges;
    edges.reserve(g.edges().size());
    for (const Edge& e : g.edges()) edges.push_back({sigma[e.u], sigma[e.v], e.weight});
    return LabeledGraph::create(g.ids(), d, std::move(labels), std::move(edges));
}

}  // namespace wlm
