#include "wlm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "wlm/error.hpp"

namespace wlm {

namespace {

void check_marginal(std::span<const double> p, const char* what) {
    double sum = 0.0;
    for (double value : p) {
        if (!std::isfinite(value) || value < 0.0) {
            throw ValidationError(std::string(what) + " has a negative or non-finite entry");
        }
        sum += value;
    }
    if (p.empty() || std::abs(sum - 1.0) > kFeasibilityTolerance) {
        throw ValidationError(std::string(what) + " is not a probability vector (sum " +
                              std::to_string(sum) + ")");
    }
}

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Transportation simplex on the positive-mass sub-problem. Basic cells always
// form a spanning tree of the bipartite row/column graph.
class TransportSimplex {
public:
    TransportSimplex(const Matrix& cost, std::vector<double> supply, std::vector<double> demand)
        : cost_(cost), rows_(supply.size()), cols_(demand.size()),
          basic_index_(rows_ * cols_, kNone) {
        north_west_corner(std::move(supply), std::move(demand));
        double scale = 0.0;
        for (double c : cost_.data()) scale = std::max(scale, std::abs(c));
        entering_tol_ = 1e-12 * (1.0 + scale);
    }

    std::size_t solve() {
        const std::size_t max_pivots = 50 * (rows_ + cols_) * (rows_ + cols_) + 10'000;
        std::size_t pivots = 0;
        while (true) {
            compute_potentials();
            const std::size_t entering = find_entering();
            if (entering == kNone) break;
            pivot(entering);
            if (++pivots > max_pivots) {
                throw SolverError("transportation simplex exceeded its pivot limit");
            }
        }
        return pivots;
    }

    double flow(std::size_t i, std::size_t j) const {
        const std::size_t b = basic_index_[i * cols_ + j];
        return b == kNone ? 0.0 : std::max(0.0, flows_[b]);
    }
    const std::vector<double>& u() const { return u_; }
    const std::vector<double>& v() const { return v_; }

private:
    void add_basic(std::size_t cell, double amount) {
        basic_index_[cell] = cells_.size();
        cells_.push_back(cell);
        flows_.push_back(amount);
    }

    void north_west_corner(std::vector<double> supply, std::vector<double> demand) {
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < rows_ && j < cols_) {
            const double amount = std::min(supply[i], demand[j]);
            add_basic(i * cols_ + j, amount);
            supply[i] -= amount;
            demand[j] -= amount;
            if (i + 1 == rows_) {
                ++j;
            } else if (j + 1 == cols_) {
                ++i;
            } else if (supply[i] <= demand[j]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    void build_adjacency() {
        row_cells_.assign(rows_, {});
        col_cells_.assign(cols_, {});
        for (std::size_t b = 0; b < cells_.size(); ++b) {
            row_cells_[cells_[b] / cols_].push_back(b);
            col_cells_[cells_[b] % cols_].push_back(b);
        }
    }

    void compute_potentials() {
        build_adjacency();
        constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
        u_.assign(rows_, kUnset);
        v_.assign(cols_, kUnset);
        u_[0] = 0.0;
        // Nodes: rows are 0..rows-1, columns are rows..rows+cols-1.
        std::deque<std::size_t> queue{0};
        while (!queue.empty()) {
            const std::size_t node = queue.front();
            queue.pop_front();
            if (node < rows_) {
                for (std::size_t b : row_cells_[node]) {
                    const std::size_t j = cells_[b] % cols_;
                    if (std::isnan(v_[j])) {
                        v_[j] = cost_(node, j) - u_[node];
                        queue.push_back(rows_ + j);
                    }
                }
            } else {
                const std::size_t j = node - rows_;
                for (std::size_t b : col_cells_[j]) {
                    const std::size_t i = cells_[b] / cols_;
                    if (std::isnan(u_[i])) {
                        u_[i] = cost_(i, j) - v_[j];
                        queue.push_back(i);
                    }
                }
            }
        }
    }

    // Bland: the lowest-index cell with a negative reduced cost.
    std::size_t find_entering() const {
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                const std::size_t cell = i * cols_ + j;
                if (basic_index_[cell] != kNone) continue;
                if (cost_(i, j) - u_[i] - v_[j] < -entering_tol_) return cell;
            }
        }
        return kNone;
    }

    // Tree path from row `start` to column `target`, as basic cell indices.
    std::vector<std::size_t> tree_path(std::size_t start, std::size_t target) const {
        const std::size_t nodes = rows_ + cols_;
        std::vector<std::size_t> via(nodes, kNone);  // basic cell used to reach node
        std::vector<bool> seen(nodes, false);
        std::deque<std::size_t> queue{start};
        seen[start] = true;
        const std::size_t goal = rows_ + target;
        while (!queue.empty() && !seen[goal]) {
            const std::size_t node = queue.front();
            queue.pop_front();
            const auto& incident = node < rows_ ? row_cells_[node] : col_cells_[node - rows_];
            for (std::size_t b : incident) {
                const std::size_t i = cells_[b] / cols_;
                const std::size_t j = cells_[b] % cols_;
                const std::size_t other = node < rows_ ? rows_ + j : i;
                if (!seen[other]) {
                    seen[other] = true;
                    via[other] = b;
                    queue.push_back(other);
                }
            }
        }
        std::vector<std::size_t> path;  // from target back to start
        std::size_t node = goal;
        while (node != start) {
            const std::size_t b = via[node];
            path.push_back(b);
            const std::size_t i = cells_[b] / cols_;
            const std::size_t j = cells_[b] % cols_;
            node = node < rows_ ? rows_ + j : i;
        }
        return path;
    }

    void pivot(std::size_t entering) {
        const std::size_t ie = entering / cols_;
        const std::size_t je = entering % cols_;
        // path[0] touches column je and gets a minus sign; signs alternate.
        const std::vector<std::size_t> path = tree_path(ie, je);
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < path.size(); p += 2) theta = std::min(theta, flows_[path[p]]);
        std::size_t leaving = kNone;
        for (std::size_t p = 0; p < path.size(); p += 2) {
            const std::size_t b = path[p];
            if (flows_[b] == theta && (leaving == kNone || cells_[b] < cells_[leaving])) leaving = b;
        }
        for (std::size_t p = 0; p < path.size(); ++p) {
            flows_[path[p]] += (p % 2 == 0) ? -theta : theta;
        }
        // Replace the leaving cell in place by the entering one.
        basic_index_[cells_[leaving]] = kNone;
        cells_[leaving] = entering;
        flows_[leaving] = theta;
        basic_index_[entering] = leaving;
    }

    const Matrix& cost_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::size_t> basic_index_;  // cell -> position in cells_, or kNone
    std::vector<std::size_t> cells_;
    std::vector<double> flows_;
    std::vector<std::vector<std::size_t>> row_cells_;
    std::vector<std::vector<std::size_t>> col_cells_;
    std::vector<double> u_;
    std::vector<double> v_;
    double entering_tol_ = 1e-12;
};

}  // namespace

Coupling Coupling::create(Matrix probs, std::vector<double> row_marginal,
                          std::vector<double> col_marginal) {
    if (probs.rows() != row_marginal.size() || probs.cols() != col_marginal.size()) {
        throw ValidationError("coupling shape does not match its marginals");
    }
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            double& p = probs(i, j);
            if (!std::isfinite(p) || p < -1e-15) {
                throw ValidationError("coupling entry (" + std::to_string(i) + "," +
                                      std::to_string(j) + ") is negative");
            }
            if (p < 0.0) p = 0.0;
        }
    }
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (double p : probs.row(i)) sum += p;
        if (std::abs(sum - row_marginal[i]) > kFeasibilityTolerance) {
            throw ValidationError("coupling row " + std::to_string(i) + " violates its marginal");
        }
    }
    for (std::size_t j = 0; j < probs.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < probs.rows(); ++i) sum += probs(i, j);
        if (std::abs(sum - col_marginal[j]) > kFeasibilityTolerance) {
            throw ValidationError("coupling column " + std::to_string(j) + " violates its marginal");
        }
    }
    Coupling c;
    c.probs_ = std::move(probs);
    c.row_marginal_ = std::move(row_marginal);
    c.col_marginal_ = std::move(col_marginal);
    return c;
}

double Coupling::expected_cost(const Matrix& cost) const {
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < cols(); ++j) total += probs_(i, j) * cost(i, j);
    return total;
}

Coupling Coupling::product(std::span<const double> mu, std::span<const double> nu) {
    Matrix probs(mu.size(), nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) probs(i, j) = mu[i] * nu[j];
    return create(std::move(probs), {mu.begin(), mu.end()}, {nu.begin(), nu.end()});
}

TransportResult wasserstein(const Matrix& cost, std::span<const double> mu,
                            std::span<const double> nu) {
    if (cost.rows() != mu.size() || cost.cols() != nu.size()) {
        throw ValidationError("cost table is " + std::to_string(cost.rows()) + "x" +
                              std::to_string(cost.cols()) + " but marginals have sizes " +
                              std::to_string(mu.size()) + " and " + std::to_string(nu.size()));
    }
    for (double c : cost.data()) {
        if (!std::isfinite(c)) throw ValidationError("cost table has a non-finite entry");
    }
    check_marginal(mu, "row marginal");
    check_marginal(nu, "column marginal");

    std::vector<std::size_t> row_ids, col_ids;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu[i] > 0.0) row_ids.push_back(i);
    for (std::size_t j = 0; j < nu.size(); ++j)
        if (nu[j] > 0.0) col_ids.push_back(j);

    Matrix sub_cost(row_ids.size(), col_ids.size());
    std::vector<double> supply(row_ids.size()), demand(col_ids.size());
    for (std::size_t a = 0; a < row_ids.size(); ++a) {
        supply[a] = mu[row_ids[a]];
        for (std::size_t b = 0; b < col_ids.size(); ++b) sub_cost(a, b) = cost(row_ids[a], col_ids[b]);
    }
    for (std::size_t b = 0; b < col_ids.size(); ++b) demand[b] = nu[col_ids[b]];

    TransportSimplex simplex(sub_cost, supply, demand);
    TransportResult result;
    result.pivots = simplex.solve();

    Matrix plan(mu.size(), nu.size());
    for (std::size_t a = 0; a < row_ids.size(); ++a)
        for (std::size_t b = 0; b < col_ids.size(); ++b)
            plan(row_ids[a], col_ids[b]) = simplex.flow(a, b);

    // Extend the duals to zero-mass rows and columns so they stay feasible.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(mu.size(), kInf), v(nu.size(), kInf);
    for (std::size_t a = 0; a < row_ids.size(); ++a) u[row_ids[a]] = simplex.u()[a];
    for (std::size_t b = 0; b < col_ids.size(); ++b) v[col_ids[b]] = simplex.v()[b];
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (mu[i] > 0.0) continue;
        double best = kInf;
        for (std::size_t j : col_ids) best = std::min(best, cost(i, j) - v[j]);
        u[i] = std::isfinite(best) ? best : 0.0;
    }
    for (std::size_t j = 0; j < nu.size(); ++j) {
        if (nu[j] > 0.0) continue;
        double best = kInf;
        for (std::size_t i = 0; i < mu.size(); ++i) best = std::min(best, cost(i, j) - u[i]);
        v[j] = best;
    }

    double value = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i)
        for (std::size_t j = 0; j < plan.cols(); ++j) value += plan(i, j) * cost(i, j);

    result.value = value;
    result.plan = Coupling::create(std::move(plan), {mu.begin(), mu.end()}, {nu.begin(), nu.end()});
    result.row_potential = std::move(u);
    result.col_potential = std::move(v);

    const OptimalityCertificate cert = certify_transport(cost, mu, nu, result);
    if (!cert.certified) {
        throw SolverError("transport solution failed its optimality certificate (dual violation " +
                          std::to_string(cert.max_dual_violation) + ")");
    }
    return result;
}

OptimalityCertificate certify_transport(const Matrix& cost, std::span<const double> mu,
                                        std::span<const double> nu, const TransportResult& result,
                                        double tol) {
    OptimalityCertificate cert;
    const Matrix& plan = result.plan.probs();
    const auto& u = result.row_potential;
    const auto& v = result.col_potential;
    if (plan.rows() != mu.size() || plan.cols() != nu.size() || u.size() != mu.size() ||
        v.size() != nu.size()) {
        return cert;
    }
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < nu.size(); ++j) {
            const double reduced = cost(i, j) - u[i] - v[j];
            cert.primal_value += plan(i, j) * cost(i, j);
            cert.max_dual_violation = std::max(cert.max_dual_violation, -reduced);
            cert.max_slackness_violation =
                std::max(cert.max_slackness_violation, plan(i, j) * std::abs(reduced));
            row_sum += plan(i, j);
        }
        cert.max_marginal_residual = std::max(cert.max_marginal_residual, std::abs(row_sum - mu[i]));
        cert.dual_value += mu[i] * u[i];
    }
    for (std::size_t j = 0; j < nu.size(); ++j) {
        double col_sum = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) col_sum += plan(i, j);
        cert.max_marginal_residual = std::max(cert.max_marginal_residual, std::abs(col_sum - nu[j]));
        cert.dual_value += nu[j] * v[j];
    }
    cert.certified = cert.max_dual_violation <= tol && cert.max_slackness_violation <= tol &&
                     cert.max_marginal_residual <= kFeasibilityTolerance &&
                     std::abs(cert.primal_value - cert.dual_value) <= tol;
    return cert;
}

LpProblem transportation_lp(const Matrix& cost, std::span<const double> mu,
                            std::span<const double> nu) {
    LpProblem lp;
    const std::size_t n = mu.size();
    const std::size_t m = nu.size();
    lp.objective.assign(cost.data().begin(), cost.data().end());
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<std::size_t, double>> terms;
        for (std::size_t j = 0; j < m; ++j) terms.emplace_back(i * m + j, 1.0);
        lp.add_equality(std::move(terms), mu[i]);
    }
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<std::pair<std::size_t, double>> terms;
        for (std::size_t i = 0; i < n; ++i) terms.emplace_back(i * m + j, 1.0);
        lp.add_equality(std::move(terms), nu[j]);
    }
    return lp;
}

}  // namespace wlm
