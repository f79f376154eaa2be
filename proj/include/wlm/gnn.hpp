#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wlm/core.hpp"
#include "wlm/markov.hpp"
#include "wlm/matrix.hpp"

namespace wlm {

// Componentwise and exactly 1-Lipschitz.
enum class Activation { Identity, Relu, Abs };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// y = activation(W x + b), W stored out x in.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    std::size_t input_dim() const noexcept { return weights.cols(); }
    std::size_t output_dim() const noexcept { return weights.rows(); }
    std::vector<double> apply(std::span<const double> x) const;
};

// Composition of dense stages, applied front to back.
struct Mlp {
    std::vector<DenseLayer> stages;

    std::size_t input_dim() const { return stages.front().input_dim(); }
    std::size_t output_dim() const { return stages.back().output_dim(); }
    std::vector<double> apply(std::span<const double> x) const;

    static Mlp identity(std::size_t dim);
};

enum class Aggregation { QDamped, EpsNormalized };

// q-damped models carry k+1 maps phi_1..phi_{k+1}; eps-normalized models
// carry k maps. `parameter` is q or eps respectively. The readout maps to R.
struct MpgnnModel {
    Aggregation aggregation = Aggregation::QDamped;
    double parameter = 0.5;
    std::vector<Mlp> layers;
    Mlp readout;

    // Depth implied by the layer count.
    std::size_t depth() const;
    // Throws ValidationError on broken dimension chains, a non-scalar readout,
    // an out-of-range parameter, or an input dimension other than `input_dim`.
    void validate(std::size_t input_dim) const;
};

// {"aggregation": "q_damped"|"eps_normalized", "q" | "eps": number,
//  "layers": [dense | [dense, ...]], "readout": dense | [dense, ...]},
// dense = {"weights": [[...] rows of length in], "bias": [...], "activation": name}.
MpgnnModel parse_model(std::string_view document);
std::string serialize_model(const MpgnnModel& model);

// Labels become x -> sum_x' m_x(x') phi(l(x')); kernel and mu are kept.
Lmmc mcnn_layer(const Lmmc& c, const Mlp& phi);
// psi(sum_x mu(x) phi(l(x))).
double mcnn_readout(const Lmmc& c, const Mlp& phi, const Mlp& psi);
// psi o S_{phi_{k+1}} o F_{phi_k} o ... o F_{phi_1} applied to c (q-damped models).
double mcnn_pipeline(const Lmmc& c, const MpgnnModel& model);

// Message passing evaluated directly on the graph's neighbor lists.
double mpgnn_forward(const LabeledGraph& g, const MpgnnModel& model, std::size_t k);
double normalized_gin_forward(const LabeledGraph& g, const MpgnnModel& model, std::size_t k);

// Induced operator norm of the affine part (the activation adds factor 1).
// L1 and Linf are exact; L2 is 50 power iterations inflated by 1.01.
double layer_lipschitz_bound(const DenseLayer& layer, MetricKind metric);
double lipschitz_bound(const Mlp& mlp, MetricKind metric);

struct LipschitzAudit {
    double lhs = 0.0;
    double bound_constant = 0.0;
    double distance = 0.0;
    double slack = 0.0;
    bool satisfied = false;
    bool conservative = false;  // L2 bounds come from power iteration
};

inline constexpr double kLipschitzSlackTolerance = 1e-8;

// Compares |h(g1) - h(g2)| with C * prod C_i * d^(k), the distance taken over
// the chains induced by the model's aggregation. L2 requires allow_l2.
LipschitzAudit lipschitz_audit(const LabeledGraph& g1, const LabeledGraph& g2,
                               const MpgnnModel& model, std::size_t k,
                               MetricKind metric = MetricKind::L1, bool allow_l2 = false);

// Random q-damped model: hidden widths `width`, weights uniform in [-1, 1],
// zero biases, ReLU on every phi, identity readout.
MpgnnModel sample_model(std::uint64_t seed, std::size_t input_dim, std::size_t k, double q,
                        std::size_t width = 1);

// Every phi and psi is the all-ones row, identity activation.
MpgnnModel unit_model(std::size_t input_dim, std::size_t k, double q);

struct SeparatorResult {
    MpgnnModel model;
    std::size_t trial = 0;  // 1-based
    double gap = 0.0;
};

inline constexpr double kSeparationThreshold = 1e-6;

// Trial 1 is unit_model; trial t > 1 is sample_model with width 1 and a seed
// derived from (seed, t). Returns the first model whose outputs differ by
// more than kSeparationThreshold.
std::optional<SeparatorResult> random_separator_search(const LabeledGraph& g1,
                                                       const LabeledGraph& g2, double q,
                                                       std::size_t k, std::size_t trials,
                                                       std::uint64_t seed);

struct ZeroSetReport {
    double distance = 0.0;
    bool zero_distance = false;
    std::size_t trials = 0;
    double max_gap = 0.0;        // over the random models, zero-distance case
    bool outputs_equal = false;  // max_gap <= 1e-8, zero-distance case
    std::optional<SeparatorResult> separator;
};

inline constexpr double kZeroDistanceThreshold = 1e-10;
inline constexpr double kEqualOutputTolerance = 1e-8;

// Zero-distance pairs are checked against `trials` random models of width
// 3; other pairs go through random_separator_search.
ZeroSetReport zero_set_audit(const LabeledGraph& g1, const LabeledGraph& g2, double q,
                             std::size_t k, std::size_t trials, std::uint64_t seed);

}  // namespace wlm
