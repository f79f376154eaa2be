#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wlm {

enum class MetricKind { L1, L2, LInf };

std::string_view to_string(MetricKind kind);
// Accepts "L1", "L2", "Linf"/"LInf" (case-insensitive).
MetricKind parse_metric_kind(std::string_view text);

// Ground metric on R^d used for node labels.
struct LabelMetric {
    MetricKind kind = MetricKind::L1;
    std::size_t dimension = 1;

    friend bool operator==(const LabelMetric&, const LabelMetric&) = default;
};

// Norm of z1 - z2 under the metric's kind. Throws ValidationError when either
// vector's length differs from the metric dimension.
double label_distance(const LabelMetric& metric, std::span<const double> z1,
                      std::span<const double> z2);

struct Edge {
    std::size_t u = 0;  // u <= v
    std::size_t v = 0;
    double weight = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
    std::size_t vertex = 0;
    double weight = 0.0;
};

// Undirected graph with positive edge weights and real-vector node labels.
// Vertices are addressed by dense indices in construction order; ids are
// opaque strings kept for I/O.
class LabeledGraph {
public:
    // Validates every invariant; throws ValidationError naming the offender.
    static LabeledGraph create(std::vector<std::string> ids, std::size_t dimension,
                               std::vector<double> labels, std::vector<Edge> edges);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::string& id(std::size_t v) const { return ids_[v]; }
    std::optional<std::size_t> index_of(std::string_view id) const;

    std::span<const double> label(std::size_t v) const noexcept {
        return {labels_.data() + v * dimension_, dimension_};
    }
    const std::vector<double>& labels() const noexcept { return labels_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    // Neighbors in edge order; a self-loop lists the vertex itself once.
    const std::vector<Neighbor>& neighbors(std::size_t v) const { return adjacency_[v]; }

    // Sum of incident edge weights, self-loops counted once.
    double degree(std::size_t v) const noexcept { return degrees_[v]; }
    // Degree, or 1 for isolated vertices.
    double modified_degree(std::size_t v) const noexcept {
        return degrees_[v] > 0.0 ? degrees_[v] : 1.0;
    }

    // Same ids, labels and edge set (edge order ignored).
    friend bool operator==(const LabeledGraph& a, const LabeledGraph& b);

private:
    LabeledGraph() = default;

    std::vector<std::string> ids_;
    std::size_t dimension_ = 1;
    std::vector<double> labels_;
    std::vector<Edge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<double> degrees_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Graph document:
//   {"d": int, "nodes": [{"id": str, "label": [float, ...]}],
//    "edges": [{"u": str, "v": str, "w": float}]}
// "w" defaults to 1.0. Errors carry the JSON location of the offending field.
LabeledGraph parse_graph(std::string_view document);
LabeledGraph load_graph(const std::string& path);
std::string serialize_graph(const LabeledGraph& g);

// sigma[i] is the new position of vertex i's label and incidences. Vertex ids
// stay in place, so the result is the same vertex set carrying transported
// structure. Throws ValidationError unless sigma is a bijection on indices.
LabeledGraph permute_graph(const LabeledGraph& g, std::span<const std::size_t> sigma);

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> sigma);

// Reads a whole file; throws ValidationError if it cannot be opened.
std::string read_file(const std::string& path);

}  // namespace wlm
