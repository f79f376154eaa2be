#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "wlm/markov.hpp"
#include "wlm/transport.hpp"
#include "wlm/wl_distance.hpp"

namespace wlm {

inline constexpr double kCausalityTolerance = 1e-9;
inline constexpr double kNullEventThreshold = 1e-14;
inline constexpr std::size_t kDefaultLpCap = 100'000;

// For every state pair (x, y), a coupling of the kernel rows m_x and m_y.
class OneStepCoupling {
public:
    // entries[x * |Y| + y] must couple X.row(x) with Y.row(y) within 1e-9.
    static OneStepCoupling create(const Lmmc& X, const Lmmc& Y, std::vector<Coupling> entries);
    static OneStepCoupling product(const Lmmc& X, const Lmmc& Y);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const Coupling& at(std::size_t x, std::size_t y) const { return entries_[x * cols_ + y]; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Coupling> entries_;
};

// Law of ((X_0..X_k), (Y_0..Y_k)); path codes follow PathDistribution.
struct JointPathMeasure {
    std::size_t horizon = 0;
    std::size_t x_states = 0;
    std::size_t y_states = 0;
    std::map<std::pair<std::uint64_t, std::uint64_t>, double> weights;

    double total_mass() const;
    PathDistribution x_marginal() const;
    PathDistribution y_marginal() const;
};

// Kolmogorov composition: gamma0(x0,y0) * prod_i steps[i]_{x_i,y_i}(x_{i+1},y_{i+1}).
// Throws ValidationError when gamma0 does not couple mu_X and mu_Y or a step
// has the wrong shape; CapExceeded past `cap` support entries.
JointPathMeasure compose_markovian(const Lmmc& X, const Lmmc& Y, const Coupling& gamma0,
                                   const std::vector<OneStepCoupling>& steps,
                                   std::size_t cap = kDefaultPathCap);

// Law of (X_k, Y_k).
Coupling k_step_marginal(const JointPathMeasure& m);

// Expectation of d_Z(l_X(x_k), l_Y(y_k)).
double expected_terminal_cost(const JointPathMeasure& m, const Lmmc& X, const Lmmc& Y);

// For each step i -> i+1, optimal couplings of (m_x, m_y) under W_{i+1}.
std::vector<OneStepCoupling> optimal_step_couplings(const Lmmc& X, const Lmmc& Y,
                                                    const WlResult& wl);

// Largest defect over the cross-multiplied causality identities in both
// directions, and over the two path-marginal constraints. Conditioning
// prefixes of probability <= kNullEventThreshold are skipped.
double bicausal_violation(const JointPathMeasure& m, const Lmmc& X, const Lmmc& Y);
bool check_bicausal(const JointPathMeasure& m, const Lmmc& X, const Lmmc& Y,
                    double tol = kCausalityTolerance);

struct BicausalLpResult {
    double value = 0.0;
    std::size_t variables = 0;
    std::size_t constraints = 0;
    std::size_t pivots = 0;
    std::size_t redundant_rows = 0;
};

// Bicausal optimal transport over paired paths with terminal label cost.
// Throws CapExceeded when (|X||Y|)^(k+1) > cap.
BicausalLpResult bicausal_lp(const Lmmc& X, const Lmmc& Y, std::size_t k,
                             std::size_t cap = kDefaultLpCap);

// V_i over full histories (x_0..x_i, y_0..y_i), stored densely by path codes.
struct HistoryTable {
    std::size_t depth = 0;
    std::size_t x_states = 0;
    std::size_t y_states = 0;
    std::vector<double> values;  // index x_code * |Y|^(depth+1) + y_code

    double at(std::uint64_t x_code, std::uint64_t y_code) const;
};

// Tables V_0..V_k (index i holds V_i). Throws CapExceeded when
// (|X||Y|)^(k+1) > cap.
std::vector<HistoryTable> v_full_history(const Lmmc& X, const Lmmc& Y, std::size_t k,
                                         std::size_t cap = kDefaultLpCap);

// max |V_i(history) - W_i(x_i, y_i)| over all tables and histories.
double history_collapse_deviation(const std::vector<HistoryTable>& v, const WlResult& wl);

// Both chains pushed onto the union Z of their label points (states outside a
// chain's image are absorbing), then bicausal_lp with cost d_Z(z_k, z'_k).
// Throws ValidationError("labels not injective") when either label map
// repeats a point.
double label_space_wl(const Lmmc& X, const Lmmc& Y, std::size_t k,
                      std::size_t cap = kDefaultLpCap);

}  // namespace wlm
