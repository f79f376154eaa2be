#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "wlm/matrix.hpp"

namespace wlm {

inline constexpr double kFeasibilityTolerance = 1e-9;
inline constexpr double kOptimalityTolerance = 1e-8;

// Joint probability table with prescribed marginals.
class Coupling {
public:
    // Clamps entries in [-1e-15, 0) to zero and checks row/column sums against
    // the marginals within kFeasibilityTolerance. Throws ValidationError otherwise.
    static Coupling create(Matrix probs, std::vector<double> row_marginal,
                           std::vector<double> col_marginal);

    std::size_t rows() const noexcept { return probs_.rows(); }
    std::size_t cols() const noexcept { return probs_.cols(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return probs_(i, j); }
    const Matrix& probs() const noexcept { return probs_; }
    const std::vector<double>& row_marginal() const noexcept { return row_marginal_; }
    const std::vector<double>& col_marginal() const noexcept { return col_marginal_; }

    double expected_cost(const Matrix& cost) const;

    // mu (x) nu.
    static Coupling product(std::span<const double> mu, std::span<const double> nu);

    Coupling() = default;  // empty 0x0 coupling

private:
    Matrix probs_;
    std::vector<double> row_marginal_;
    std::vector<double> col_marginal_;
};

struct TransportResult {
    double value = 0.0;
    Coupling plan;
    // Dual potentials over all rows/columns (zero-mass ones included) such that
    // cost(i,j) - row_potential[i] - col_potential[j] >= 0 at optimality.
    std::vector<double> row_potential;
    std::vector<double> col_potential;
    std::size_t pivots = 0;
};

// Exact optimal transport between two finite probability vectors under a cost
// table, solved by the transportation simplex with Bland's rule. Rows and
// columns with zero mass are excluded from the basis. The returned plan is one
// optimum; only the value is unique.
//
// Throws ValidationError for invalid marginals, shape mismatch or non-finite
// costs, and SolverError if the final basis fails the optimality certificate.
TransportResult wasserstein(const Matrix& cost, std::span<const double> mu,
                            std::span<const double> nu);

struct OptimalityCertificate {
    double primal_value = 0.0;
    double dual_value = 0.0;
    double max_dual_violation = 0.0;    // max over cells of -(c - u - v), clamped at 0
    double max_slackness_violation = 0.0;  // max over cells of plan * |c - u - v|
    double max_marginal_residual = 0.0;
    bool certified = false;
};

// Independent complementary-slackness check of a transport solution.
OptimalityCertificate certify_transport(const Matrix& cost, std::span<const double> mu,
                                        std::span<const double> nu, const TransportResult& result,
                                        double tol = kOptimalityTolerance);

// ---------------------------------------------------------------------------
// General linear programs: minimize c^T x subject to A x = b, x >= 0.

struct LpConstraint {
    std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
    double rhs = 0.0;
};

struct LpProblem {
    std::vector<double> objective;
    std::vector<LpConstraint> constraints;

    std::size_t num_vars() const noexcept { return objective.size(); }
    void add_equality(std::vector<std::pair<std::size_t, double>> terms, double rhs) {
        constraints.push_back({std::move(terms), rhs});
    }
};

struct LpOptions {
    // Upper bound on dense tableau entries; larger problems raise CapExceeded.
    std::size_t max_tableau_entries = 60'000'000;
    std::size_t max_pivots = 0;  // 0 picks a size-based default
};

struct LpSolution {
    double value = 0.0;
    std::vector<double> x;
    std::vector<double> duals;  // one per constraint; zero for rows found redundant
    std::size_t pivots = 0;
    std::size_t redundant_rows = 0;
    double max_dual_violation = 0.0;
    double max_primal_residual = 0.0;
};

// Two-phase dense simplex on row-equilibrated constraints. Dantzig pricing,
// with Bland's rule over degenerate stretches so it cannot cycle. The final
// basis is refactored and certified: primal residual <= 1e-9 and reduced
// costs >= -1e-8 * max(1, max|c|).
// Throws InfeasibleError, UnboundedError, CapExceeded, or SolverError.
LpSolution lp_solve(const LpProblem& problem, const LpOptions& options = {});

// The transportation LP of wasserstein(cost, mu, nu) in lp_solve form; the
// variable for cell (i,j) is i*cols+j.
LpProblem transportation_lp(const Matrix& cost, std::span<const double> mu,
                            std::span<const double> nu);

}  // namespace wlm
