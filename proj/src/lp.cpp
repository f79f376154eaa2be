#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wlm/error.hpp"
#include "wlm/transport.hpp"

namespace wlm {

namespace {

constexpr double kPivotTolerance = 1e-9;
constexpr double kRatioTieTolerance = 1e-12;
constexpr double kPhaseOneTolerance = 1e-9;
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Dense simplex tableau for min c^T x, A x = b, x >= 0 with b >= 0. Column
// `width-1` holds the right-hand side; `cost` holds reduced costs, with the
// negated objective value in its last slot.
class Tableau {
public:
    // Columns from `artificial_begin` on are artificial and are retired as soon
    // as they leave the basis.
    Tableau(std::size_t rows, std::size_t width, std::size_t artificial_begin)
        : rows_(rows), width_(width), artificial_begin_(artificial_begin),
          a_(rows * width, 0.0), cost_(width, 0.0), basis_(rows, kNone),
          active_(width - 1, true) {}

    double& at(std::size_t r, std::size_t c) { return a_[r * width_ + c]; }
    double at(std::size_t r, std::size_t c) const { return a_[r * width_ + c]; }
    double rhs(std::size_t r) const { return at(r, width_ - 1); }
    std::vector<double>& cost() { return cost_; }
    std::vector<std::size_t>& basis() { return basis_; }
    std::size_t rows() const { return rows_; }
    std::size_t columns() const { return width_ - 1; }
    void deactivate(std::size_t c) { active_[c] = false; }
    bool active(std::size_t c) const { return active_[c]; }

    void pivot(std::size_t r, std::size_t c) {
        double* prow = &a_[r * width_];
        const double inv = 1.0 / prow[c];
        nz_.clear();
        for (std::size_t j = 0; j < width_; ++j) {
            if (prow[j] != 0.0) {
                prow[j] *= inv;
                nz_.push_back(j);
            }
        }
        prow[c] = 1.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i == r) continue;
            double* row = &a_[i * width_];
            const double f = row[c];
            if (f == 0.0) continue;
            for (std::size_t j : nz_) row[j] -= f * prow[j];
            row[c] = 0.0;
        }
        const double f = cost_[c];
        if (f != 0.0) {
            for (std::size_t j : nz_) cost_[j] -= f * prow[j];
            cost_[c] = 0.0;
        }
        if (basis_[r] != kNone && basis_[r] >= artificial_begin_) active_[basis_[r]] = false;
        basis_[r] = c;
    }

    // Dantzig pricing (most negative reduced cost, ties to the lowest index)
    // with ratio ties going to the largest pivot; `bland` switches to the
    // lowest-index improving column and lowest basic index on ties, which
    // cannot cycle.
    enum class Step { Optimal, Pivoted, Unbounded };
    Step step(double entering_tol, bool bland) {
        std::size_t entering = kNone;
        double most_negative = -entering_tol;
        for (std::size_t j = 0; j < columns(); ++j) {
            if (!active_[j] || cost_[j] >= most_negative) continue;
            entering = j;
            if (bland) break;
            most_negative = cost_[j];
        }
        if (entering == kNone) return Step::Optimal;
        std::size_t leave = kNone;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rows_; ++i) {
            const double piv = at(i, entering);
            if (piv <= kPivotTolerance) continue;
            const double ratio = std::max(0.0, rhs(i)) / piv;
            bool take = leave == kNone || ratio < best - kRatioTieTolerance;
            if (!take && ratio <= best + kRatioTieTolerance) {
                take = bland ? basis_[i] < basis_[leave] : piv > at(leave, entering);
            }
            if (take) {
                best = std::min(best, ratio);
                leave = i;
            }
        }
        if (leave == kNone) return Step::Unbounded;
        pivot(leave, entering);
        return Step::Pivoted;
    }

    double objective() const { return -cost_[width_ - 1]; }

    void remove_row(std::size_t r) {
        a_.erase(a_.begin() + static_cast<std::ptrdiff_t>(r * width_),
                 a_.begin() + static_cast<std::ptrdiff_t>((r + 1) * width_));
        basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
        --rows_;
    }

private:
    std::size_t rows_;
    std::size_t width_;
    std::size_t artificial_begin_;
    std::vector<double> a_;
    std::vector<double> cost_;
    std::vector<std::size_t> basis_;
    std::vector<bool> active_;
    std::vector<std::size_t> nz_;
};

}  // namespace

LpSolution lp_solve(const LpProblem& problem, const LpOptions& options) {
    const std::size_t n = problem.num_vars();
    const std::size_t m = problem.constraints.size();
    for (double c : problem.objective) {
        if (!std::isfinite(c)) throw ValidationError("LP objective has a non-finite coefficient");
    }
    for (std::size_t r = 0; r < m; ++r) {
        const LpConstraint& row = problem.constraints[r];
        if (!std::isfinite(row.rhs)) throw ValidationError("LP right-hand side is not finite");
        for (const auto& [var, coef] : row.terms) {
            if (var >= n) {
                throw ValidationError("LP constraint " + std::to_string(r) +
                                      " references variable " + std::to_string(var));
            }
            if (!std::isfinite(coef)) throw ValidationError("LP coefficient is not finite");
        }
    }
    const double entries = static_cast<double>(m) * static_cast<double>(n + m + 1);
    if (entries > static_cast<double>(options.max_tableau_entries)) {
        throw CapExceeded("LP tableau of " + std::to_string(m) + " rows and " +
                          std::to_string(n + m) + " columns exceeds the size cap");
    }

    // Phase 1: artificial column n+r is basic in row r.
    Tableau t(m, n + m + 1, n);
    for (std::size_t r = 0; r < m; ++r) {
        const LpConstraint& row = problem.constraints[r];
        // Rows are equilibrated to unit max coefficient; the final refactor
        // goes back to the unscaled rows.
        double largest = 0.0;
        for (const auto& [var, coef] : row.terms) largest = std::max(largest, std::abs(coef));
        const double scale = (row.rhs < 0.0 ? -1.0 : 1.0) / (largest > 0.0 ? largest : 1.0);
        for (const auto& [var, coef] : row.terms) t.at(r, var) += scale * coef;
        t.at(r, n + m) = scale * row.rhs;
        t.at(r, n + r) = 1.0;
        t.basis()[r] = n + r;
    }
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j <= n + m; ++j) {
            if (j < n || j == n + m) t.cost()[j] -= t.at(r, j);
        }
    }

    std::size_t max_pivots = options.max_pivots;
    if (max_pivots == 0) max_pivots = 200 * (n + m) + 10'000;
    LpSolution sol;
    // Bland's rule takes over after a run of degenerate pivots and stays on
    // until the objective strictly decreases.
    constexpr std::size_t kStallLimit = 50;
    auto run = [&](double tol) {
        std::size_t stalled = 0;
        while (true) {
            const double before = t.objective();
            const auto step = t.step(tol, stalled >= kStallLimit);
            if (step == Tableau::Step::Optimal) return;
            if (step == Tableau::Step::Unbounded) {
                throw UnboundedError("LP objective is unbounded below");
            }
            if (++sol.pivots > max_pivots) throw SolverError("LP simplex exceeded its pivot limit");
            if (t.objective() < before - 1e-13 * (1.0 + std::abs(before))) {
                stalled = 0;
            } else {
                ++stalled;
            }
        }
    };
    double cost_scale = 1.0;
    for (double c : problem.objective) cost_scale = std::max(cost_scale, std::abs(c));
    run(1e-11);
    if (-t.cost()[n + m] > kPhaseOneTolerance) {
        throw InfeasibleError("LP is infeasible (phase-one residual " +
                              std::to_string(-t.cost()[n + m]) + ")");
    }

    // Drive remaining artificials out; rows where that is impossible are redundant.
    std::vector<std::size_t> original_row(m);
    for (std::size_t r = 0; r < m; ++r) original_row[r] = r;
    for (std::size_t r = 0; r < t.rows();) {
        if (t.basis()[r] < n) {
            ++r;
            continue;
        }
        std::size_t best = kNone;
        double best_abs = kPivotTolerance;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(t.at(r, j)) > best_abs) {
                best_abs = std::abs(t.at(r, j));
                best = j;
            }
        }
        if (best == kNone) {
            t.remove_row(r);
            original_row.erase(original_row.begin() + static_cast<std::ptrdiff_t>(r));
            ++sol.redundant_rows;
        } else {
            t.pivot(r, best);
            ++r;
        }
    }
    for (std::size_t j = n; j < n + m; ++j) t.deactivate(j);

    // Phase 2 reduced costs.
    std::vector<double>& cost = t.cost();
    std::fill(cost.begin(), cost.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) cost[j] = problem.objective[j];
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const double cb = problem.objective[t.basis()[r]];
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) cost[j] -= cb * t.at(r, j);
        cost[n + m] -= cb * t.rhs(r);
    }
    for (std::size_t r = 0; r < t.rows(); ++r) cost[t.basis()[r]] = 0.0;
    run(1e-11 * cost_scale);

    // Refactor the final basis against the original rows.
    const std::size_t k = t.rows();
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                         static_cast<Eigen::Index>(k));
    Eigen::VectorXd b(static_cast<Eigen::Index>(k));
    Eigen::VectorXd cb(static_cast<Eigen::Index>(k));
    std::vector<std::size_t> column_slot(n, kNone);
    for (std::size_t s = 0; s < k; ++s) {
        column_slot[t.basis()[s]] = s;
        cb(static_cast<Eigen::Index>(s)) = problem.objective[t.basis()[s]];
    }
    for (std::size_t s = 0; s < k; ++s) {
        const LpConstraint& row = problem.constraints[original_row[s]];
        b(static_cast<Eigen::Index>(s)) = row.rhs;
        for (const auto& [var, coef] : row.terms) {
            if (column_slot[var] != kNone) {
                basis_matrix(static_cast<Eigen::Index>(s),
                             static_cast<Eigen::Index>(column_slot[var])) += coef;
            }
        }
    }
    sol.x.assign(n, 0.0);
    sol.duals.assign(m, 0.0);
    if (k > 0) {
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
        const Eigen::VectorXd xb = lu.solve(b);
        const Eigen::VectorXd y = lu.transpose().solve(cb);
        for (std::size_t s = 0; s < k; ++s) {
            const double value = xb(static_cast<Eigen::Index>(s));
            if (value < -kFeasibilityTolerance) {
                throw SolverError("refactored LP basis is primal infeasible");
            }
            sol.x[t.basis()[s]] = std::max(0.0, value);
            sol.duals[original_row[s]] = y(static_cast<Eigen::Index>(s));
        }
    }

    // Certificate over every original row and column.
    std::vector<double> reduced(problem.objective);
    for (std::size_t r = 0; r < m; ++r) {
        const LpConstraint& row = problem.constraints[r];
        double lhs = 0.0;
        for (const auto& [var, coef] : row.terms) {
            lhs += coef * sol.x[var];
            reduced[var] -= coef * sol.duals[r];
        }
        sol.max_primal_residual = std::max(sol.max_primal_residual, std::abs(lhs - row.rhs));
    }
    for (double rc : reduced) sol.max_dual_violation = std::max(sol.max_dual_violation, -rc);
    if (sol.max_primal_residual > kFeasibilityTolerance) {
        throw SolverError("LP solution fails primal certification (residual " +
                          std::to_string(sol.max_primal_residual) + ")");
    }
    if (sol.max_dual_violation > kOptimalityTolerance * cost_scale) {
        throw SolverError("LP solution fails dual certification (violation " +
                          std::to_string(sol.max_dual_violation) + ")");
    }
    sol.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) sol.value += problem.objective[j] * sol.x[j];
    return sol;
}

}  // namespace wlm
