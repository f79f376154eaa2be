#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "wlm/core.hpp"
#include "wlm/markov.hpp"
#include "wlm/matrix.hpp"
#include "wlm/transport.hpp"

namespace wlm {

// W_depth(x, y) for x in X, y in Y.
struct CostTable {
    std::size_t depth = 0;
    Matrix values;
};

struct WlResult {
    double distance = 0.0;
    Coupling initial_coupling;      // an optimal coupling of mu_X and mu_Y under W_0
    std::vector<CostTable> tables;  // W_k, W_{k-1}, ..., W_0

    std::size_t horizon() const noexcept { return tables.empty() ? 0 : tables.size() - 1; }
    // W_i, 0 <= i <= horizon().
    const Matrix& table(std::size_t i) const { return tables.at(horizon() - i).values; }
};

// Throws ValidationError unless X and Y share metric kind and label dimension.
void check_compatible(const Lmmc& X, const Lmmc& Y);

// Backward recursion: W_k is the label distance and
// W_{i-1}(x, y) = wasserstein(W_i, m_x, m_y). Entries of each table are
// computed independently and may run on several threads; the output does not
// depend on the schedule.
std::vector<CostTable> wl_cost_tables(const Lmmc& X, const Lmmc& Y, std::size_t k);

// distance = wasserstein(W_0, mu_X, mu_Y).
WlResult wl_distance(const Lmmc& X, const Lmmc& Y, std::size_t k);

// Nested WL labels of one chain, collapsed to equivalence classes. Depth-0
// classes are distinct label vectors; a depth-j class (j >= 1) is a distinct
// pushforward of a kernel row onto depth-(j-1) classes.
struct NestedLabels {
    std::size_t horizon = 0;
    std::size_t dimension = 0;
    std::vector<std::vector<std::size_t>> class_of;  // [j][x]
    std::vector<std::vector<double>> base_labels;    // depth-0 class -> label vector
    // [j][c] for j >= 1: sparse measure over depth-(j-1) classes, sorted by class.
    std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> pushforward;

    std::size_t class_count(std::size_t j) const;
};

NestedLabels wl_labels(const Lmmc& X, std::size_t k);

// Ground-distance tables between the classes of `a` (rows) and `b` (columns)
// for depths 0..k. Each class pair is solved once.
std::vector<Matrix> wl_label_distances(const NestedLabels& a, const NestedLabels& b,
                                       const LabelMetric& metric);

// Wasserstein distance between the depth-k label pushforwards of mu_X and
// mu_Y. Computed independently of the backward recursion.
double wl_distance_hierarchical(const Lmmc& X, const Lmmc& Y, std::size_t k);

// Colors per refinement round, from a palette shared by both graphs.
struct ColorPartition {
    std::vector<std::vector<std::size_t>> first;   // [round][vertex]
    std::vector<std::vector<std::size_t>> second;  // [round][vertex]
};

struct WlTestResult {
    ColorPartition colors;
    bool distinguishable = false;
    std::optional<std::size_t> separation_round;  // first round whose histograms differ
};

// Weighted color refinement for `rounds` rounds. A new color is the pair (old
// color, sorted multiset of (neighbor color, edge weight)); edge weights are
// compared through their shortest round-trip decimal text. Color histograms
// are weighted by normalized modified degree and compared at 1e-12.
WlTestResult classic_wl_refinement(const LabeledGraph& g1, const LabeledGraph& g2,
                                   std::size_t rounds);

}  // namespace wlm
