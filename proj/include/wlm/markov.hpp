#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wlm/core.hpp"
#include "wlm/matrix.hpp"

namespace wlm {

inline constexpr double kStochasticTolerance = 1e-12;

// Finite labeled measure Markov chain: a row-stochastic kernel, an initial
// probability vector and one label vector per state.
class Lmmc {
public:
    // Throws ValidationError if a kernel row or mu is not a probability vector
    // within kStochasticTolerance, or if the label table does not match the
    // metric dimension. Rows are checked, never renormalized.
    static Lmmc create(Matrix kernel, std::vector<double> mu, std::vector<double> labels,
                       LabelMetric metric);

    std::size_t size() const noexcept { return mu_.size(); }
    std::size_t dimension() const noexcept { return metric_.dimension; }
    const LabelMetric& metric() const noexcept { return metric_; }

    const Matrix& kernel() const noexcept { return kernel_; }
    std::span<const double> row(std::size_t x) const noexcept { return kernel_.row(x); }
    const std::vector<double>& mu() const noexcept { return mu_; }

    std::span<const double> label(std::size_t x) const noexcept {
        return {labels_.data() + x * metric_.dimension, metric_.dimension};
    }
    const std::vector<double>& labels() const noexcept { return labels_; }

    // Whether mu is stationary for the kernel at kStochasticTolerance. Chains
    // with non-stationary mu are accepted; callers may surface this as a warning.
    bool stationary() const noexcept { return stationary_; }

    // Same kernel and mu with a new label table of the given dimension.
    Lmmc with_labels(std::vector<double> labels, std::size_t dimension) const;

private:
    Lmmc() = default;

    Matrix kernel_;
    std::vector<double> mu_;
    std::vector<double> labels_;
    LabelMetric metric_;
    bool stationary_ = false;
};

// q-damped random walk: row v is q*delta_v + (1-q)/deg(v) * sum_w w_vv' delta_v'
// (delta_v for isolated v); mu is proportional to the modified degree.
Lmmc induce_q_damped(const LabeledGraph& g, double q, MetricKind metric = MetricKind::L1);

// epsilon-normalized walk: row v is ((1+eps) delta_v + sum w_vv' delta_v') / (deg(v)+1+eps);
// mu is proportional to deg(v)+1+eps.
Lmmc induce_eps_normalized(const LabeledGraph& g, double eps, MetricKind metric = MetricKind::L1);

// Infinity-norm residual of mu^T K - mu^T.
double stationarity_residual(const Lmmc& c);
bool check_stationary(const Lmmc& c, double tol);

// Distribution of the first k+1 states of the chain started from mu. A path
// (x_0..x_k) is encoded as sum_t x_t * n^t, so the prefix of length l+1 is
// code mod n^(l+1).
struct PathDistribution {
    std::size_t horizon = 0;
    std::size_t states = 0;
    std::map<std::uint64_t, double> weights;  // zero-weight paths omitted

    std::vector<std::size_t> decode(std::uint64_t code) const;
    std::uint64_t encode(std::span<const std::size_t> path) const;
    double total_mass() const;
};

inline constexpr std::size_t kDefaultPathCap = 1'000'000;

// Throws CapExceeded when the support would exceed `cap` entries.
PathDistribution path_distribution(const Lmmc& c, std::size_t k, std::size_t cap = kDefaultPathCap);

// Pushes kernel and mu forward along an injective label map: one state per
// distinct label point, labelled by itself. Throws ValidationError
// ("labels not injective") when two states share a label.
Lmmc label_space_chain(const Lmmc& c);

bool labels_injective(const Lmmc& c);

// JSON form: {"n", "d", "metric", "kernel": [row-major n*n], "mu", "labels": [[..]..],
// "stationary"}.
std::string serialize_lmmc(const Lmmc& c);
Lmmc parse_lmmc(std::string_view document);

}  // namespace wlm
