#include "wlm/coupling_lab.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "wlm/error.hpp"
#include "wlm/parallel.hpp"

namespace wlm {

namespace {

std::uint64_t power(std::size_t base, std::size_t exp) {
    std::uint64_t out = 1;
    for (std::size_t i = 0; i < exp; ++i) out *= base;
    return out;
}

void check_row_marginals(const Coupling& c, std::span<const double> mu, std::span<const double> nu,
                         const std::string& what) {
    if (c.rows() != mu.size() || c.cols() != nu.size()) {
        throw ValidationError(what + " has shape " + std::to_string(c.rows()) + "x" +
                              std::to_string(c.cols()) + ", expected " +
                              std::to_string(mu.size()) + "x" + std::to_string(nu.size()));
    }
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < nu.size(); ++j) sum += c(i, j);
        if (std::abs(sum - mu[i]) > kFeasibilityTolerance) {
            throw ValidationError(what + ": row " + std::to_string(i) + " marginal violated");
        }
    }
    for (std::size_t j = 0; j < nu.size(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) sum += c(i, j);
        if (std::abs(sum - nu[j]) > kFeasibilityTolerance) {
            throw ValidationError(what + ": column " + std::to_string(j) + " marginal violated");
        }
    }
}

void check_cap(std::size_t n, std::size_t m, std::size_t k, std::size_t cap) {
    double size = 1.0;
    for (std::size_t i = 0; i <= k; ++i) size *= static_cast<double>(n) * static_cast<double>(m);
    if (size > static_cast<double>(cap)) {
        throw CapExceeded("instance too large for oracle: (" + std::to_string(n) + "*" +
                          std::to_string(m) + ")^" + std::to_string(k + 1) +
                          " paired paths exceed the cap of " + std::to_string(cap));
    }
}

struct SupportPath {
    std::uint64_t code;
    double weight;
};

std::vector<SupportPath> support_of(const PathDistribution& p) {
    std::vector<SupportPath> out;
    out.reserve(p.weights.size());
    for (const auto& [code, w] : p.weights) out.push_back({code, w});
    return out;
}

// Groups support indices by their prefix code of length l+1.
std::unordered_map<std::uint64_t, std::vector<std::size_t>> group_by_prefix(
    const std::vector<SupportPath>& paths, std::uint64_t modulus) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < paths.size(); ++i) groups[paths[i].code % modulus].push_back(i);
    return groups;
}

// Causality rows from the `a` side to the `b` side. Variables are
// index(ia, ib); the cross-multiplied identity for the full path ia and the
// b-prefix group reads
//   alpha^l(prefix(ia)) * sum_{ib in group} pi(ia, ib)
//     - alpha^k(ia) * sum_{ia' ~ prefix(ia)} sum_{ib in group} pi(ia', ib) = 0.
template <class Index>
void add_causality_rows(LpProblem& lp, const std::vector<SupportPath>& a,
                        const std::vector<SupportPath>& b, std::size_t a_states,
                        std::size_t b_states, std::size_t k, Index index) {
    for (std::size_t l = 0; l < k; ++l) {
        const auto a_groups = group_by_prefix(a, power(a_states, l + 1));
        const auto b_groups = group_by_prefix(b, power(b_states, l + 1));
        // Deterministic order: iterate prefixes by ascending code.
        std::vector<std::uint64_t> a_keys, b_keys;
        for (const auto& [key, members] : a_groups) a_keys.push_back(key);
        for (const auto& [key, members] : b_groups) b_keys.push_back(key);
        std::sort(a_keys.begin(), a_keys.end());
        std::sort(b_keys.begin(), b_keys.end());
        for (std::uint64_t a_key : a_keys) {
            const auto& a_members = a_groups.at(a_key);
            double prefix_mass = 0.0;
            for (std::size_t ia : a_members) prefix_mass += a[ia].weight;
            if (prefix_mass <= kNullEventThreshold) continue;
            for (std::size_t ia : a_members) {
                for (std::uint64_t b_key : b_keys) {
                    const auto& b_members = b_groups.at(b_key);
                    std::vector<std::pair<std::size_t, double>> terms;
                    terms.reserve(b_members.size() * (a_members.size() + 1));
                    for (std::size_t ib : b_members) terms.emplace_back(index(ia, ib), prefix_mass);
                    for (std::size_t ia2 : a_members) {
                        for (std::size_t ib : b_members) {
                            terms.emplace_back(index(ia2, ib), -a[ia].weight);
                        }
                    }
                    lp.add_equality(std::move(terms), 0.0);
                }
            }
        }
    }
}

BicausalLpResult solve_bicausal(const Lmmc& X, const Lmmc& Y, std::size_t k) {
    check_compatible(X, Y);
    const PathDistribution pa = path_distribution(X, k);
    const PathDistribution pb = path_distribution(Y, k);
    const std::vector<SupportPath> a = support_of(pa);
    const std::vector<SupportPath> b = support_of(pb);
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::uint64_t x_last = power(X.size(), k);
    const std::uint64_t y_last = power(Y.size(), k);

    LpProblem lp;
    lp.objective.resize(na * nb);
    for (std::size_t ia = 0; ia < na; ++ia) {
        const std::size_t xk = static_cast<std::size_t>(a[ia].code / x_last);
        for (std::size_t ib = 0; ib < nb; ++ib) {
            const std::size_t yk = static_cast<std::size_t>(b[ib].code / y_last);
            lp.objective[ia * nb + ib] = label_distance(X.metric(), X.label(xk), Y.label(yk));
        }
    }
    for (std::size_t ia = 0; ia < na; ++ia) {
        std::vector<std::pair<std::size_t, double>> terms;
        for (std::size_t ib = 0; ib < nb; ++ib) terms.emplace_back(ia * nb + ib, 1.0);
        lp.add_equality(std::move(terms), a[ia].weight);
    }
    for (std::size_t ib = 0; ib < nb; ++ib) {
        std::vector<std::pair<std::size_t, double>> terms;
        for (std::size_t ia = 0; ia < na; ++ia) terms.emplace_back(ia * nb + ib, 1.0);
        lp.add_equality(std::move(terms), b[ib].weight);
    }
    add_causality_rows(lp, a, b, X.size(), Y.size(), k,
                       [nb](std::size_t ia, std::size_t ib) { return ia * nb + ib; });
    add_causality_rows(lp, b, a, Y.size(), X.size(), k,
                       [nb](std::size_t ib, std::size_t ia) { return ia * nb + ib; });

    const LpSolution sol = lp_solve(lp);
    BicausalLpResult result;
    result.value = sol.value;
    result.variables = lp.num_vars();
    result.constraints = lp.constraints.size();
    result.pivots = sol.pivots;
    result.redundant_rows = sol.redundant_rows;
    return result;
}

}  // namespace

OneStepCoupling OneStepCoupling::create(const Lmmc& X, const Lmmc& Y, std::vector<Coupling> entries) {
    if (entries.size() != X.size() * Y.size()) {
        throw ValidationError("one-step coupling needs " + std::to_string(X.size() * Y.size()) +
                              " entries, got " + std::to_string(entries.size()));
    }
    for (std::size_t x = 0; x < X.size(); ++x) {
        for (std::size_t y = 0; y < Y.size(); ++y) {
            check_row_marginals(entries[x * Y.size() + y], X.row(x), Y.row(y),
                                "one-step coupling (" + std::to_string(x) + "," +
                                    std::to_string(y) + ")");
        }
    }
    OneStepCoupling out;
    out.rows_ = X.size();
    out.cols_ = Y.size();
    out.entries_ = std::move(entries);
    return out;
}

OneStepCoupling OneStepCoupling::product(const Lmmc& X, const Lmmc& Y) {
    std::vector<Coupling> entries;
    entries.reserve(X.size() * Y.size());
    for (std::size_t x = 0; x < X.size(); ++x)
        for (std::size_t y = 0; y < Y.size(); ++y)
            entries.push_back(Coupling::product(X.row(x), Y.row(y)));
    return create(X, Y, std::move(entries));
}

double JointPathMeasure::total_mass() const {
    double total = 0.0;
    for (const auto& [key, w] : weights) total += w;
    return total;
}

PathDistribution JointPathMeasure::x_marginal() const {
    PathDistribution out;
    out.horizon = horizon;
    out.states = x_states;
    for (const auto& [key, w] : weights) out.weights[key.first] += w;
    return out;
}

PathDistribution JointPathMeasure::y_marginal() const {
    PathDistribution out;
    out.horizon = horizon;
    out.states = y_states;
    for (const auto& [key, w] : weights) out.weights[key.second] += w;
    return out;
}

JointPathMeasure compose_markovian(const Lmmc& X, const Lmmc& Y, const Coupling& gamma0,
                                   const std::vector<OneStepCoupling>& steps, std::size_t cap) {
    const std::size_t n = X.size();
    const std::size_t m = Y.size();
    check_row_marginals(gamma0, X.mu(), Y.mu(), "initial coupling");
    for (std::size_t s = 0; s < steps.size(); ++s) {
        if (steps[s].rows() != n || steps[s].cols() != m) {
            throw ValidationError("step coupling " + std::to_string(s) + " has the wrong shape");
        }
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < m; ++y)
                check_row_marginals(steps[s].at(x, y), X.row(x), Y.row(y),
                                    "step coupling " + std::to_string(s));
    }

    struct Entry {
        std::uint64_t x_code;
        std::uint64_t y_code;
        double weight;
        std::size_t x_last;
        std::size_t y_last;
    };
    std::vector<Entry> frontier;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < m; ++y)
            if (gamma0(x, y) > 0.0) frontier.push_back({x, y, gamma0(x, y), x, y});

    std::uint64_t x_place = n;
    std::uint64_t y_place = m;
    for (const OneStepCoupling& step : steps) {
        std::vector<Entry> next;
        for (const Entry& e : frontier) {
            const Coupling& nu = step.at(e.x_last, e.y_last);
            for (std::size_t x = 0; x < n; ++x) {
                for (std::size_t y = 0; y < m; ++y) {
                    const double p = nu(x, y);
                    if (p <= 0.0) continue;
                    next.push_back({e.x_code + x_place * x, e.y_code + y_place * y, e.weight * p, x, y});
                }
            }
            if (next.size() > cap) {
                throw CapExceeded("joint path measure exceeds " + std::to_string(cap) + " entries");
            }
        }
        frontier = std::move(next);
        x_place *= n;
        y_place *= m;
    }

    JointPathMeasure out;
    out.horizon = steps.size();
    out.x_states = n;
    out.y_states = m;
    for (const Entry& e : frontier) out.weights[{e.x_code, e.y_code}] += e.weight;
    return out;
}

Coupling k_step_marginal(const JointPathMeasure& m) {
    const std::uint64_t x_last = power(m.x_states, m.horizon);
    const std::uint64_t y_last = power(m.y_states, m.horizon);
    Matrix probs(m.x_states, m.y_states);
    std::vector<double> rows(m.x_states, 0.0), cols(m.y_states, 0.0);
    for (const auto& [key, w] : m.weights) {
        const auto x = static_cast<std::size_t>(key.first / x_last);
        const auto y = static_cast<std::size_t>(key.second / y_last);
        probs(x, y) += w;
        rows[x] += w;
        cols[y] += w;
    }
    return Coupling::create(std::move(probs), std::move(rows), std::move(cols));
}

double expected_terminal_cost(const JointPathMeasure& m, const Lmmc& X, const Lmmc& Y) {
    check_compatible(X, Y);
    const Coupling terminal = k_step_marginal(m);
    double total = 0.0;
    for (std::size_t x = 0; x < terminal.rows(); ++x)
        for (std::size_t y = 0; y < terminal.cols(); ++y)
            if (terminal(x, y) > 0.0)
                total += terminal(x, y) * label_distance(X.metric(), X.label(x), Y.label(y));
    return total;
}

std::vector<OneStepCoupling> optimal_step_couplings(const Lmmc& X, const Lmmc& Y,
                                                    const WlResult& wl) {
    const std::size_t n = X.size();
    const std::size_t m = Y.size();
    std::vector<OneStepCoupling> steps;
    for (std::size_t i = 0; i < wl.horizon(); ++i) {
        const Matrix& cost = wl.table(i + 1);
        std::vector<Coupling> entries(n * m);
        parallel_for(n * m, [&](std::size_t cell) {
            entries[cell] = wasserstein(cost, X.row(cell / m), Y.row(cell % m)).plan;
        });
        steps.push_back(OneStepCoupling::create(X, Y, std::move(entries)));
    }
    return steps;
}

namespace {

using PairKey = std::pair<std::uint64_t, std::uint64_t>;

// Defect of causality from the `a` process to the `b` process. `swap` tells
// whether `a` is the second coordinate of the measure's keys.
double causality_defect(const JointPathMeasure& m, const PathDistribution& a, std::size_t a_states,
                        std::size_t b_states, bool swap) {
    double worst = 0.0;
    for (std::size_t l = 0; l < m.horizon; ++l) {
        const std::uint64_t a_mod = power(a_states, l + 1);
        const std::uint64_t b_mod = power(b_states, l + 1);
        std::map<std::uint64_t, double> prefix_mass;
        std::map<std::uint64_t, std::vector<std::uint64_t>> full_paths;
        for (const auto& [code, w] : a.weights) {
            prefix_mass[code % a_mod] += w;
            full_paths[code % a_mod].push_back(code);
        }
        std::map<PairKey, double> full_joint;    // (a full path, b prefix)
        std::map<PairKey, double> prefix_joint;  // (a prefix, b prefix)
        for (const auto& [key, w] : m.weights) {
            const std::uint64_t ac = swap ? key.second : key.first;
            const std::uint64_t bc = swap ? key.first : key.second;
            full_joint[{ac, bc % b_mod}] += w;
            prefix_joint[{ac % a_mod, bc % b_mod}] += w;
        }
        for (const auto& [key, joint] : prefix_joint) {
            const auto mass = prefix_mass.find(key.first);
            if (mass == prefix_mass.end() || mass->second <= kNullEventThreshold) continue;
            for (std::uint64_t full : full_paths[key.first]) {
                const auto it = full_joint.find({full, key.second});
                const double pi_full = it == full_joint.end() ? 0.0 : it->second;
                const double defect =
                    std::abs(mass->second * pi_full - a.weights.at(full) * joint);
                worst = std::max(worst, defect);
            }
        }
    }
    return worst;
}

double marginal_defect(const PathDistribution& expected, const PathDistribution& actual) {
    double worst = 0.0;
    for (const auto& [code, w] : expected.weights) {
        const auto it = actual.weights.find(code);
        worst = std::max(worst, std::abs(w - (it == actual.weights.end() ? 0.0 : it->second)));
    }
    for (const auto& [code, w] : actual.weights) {
        if (!expected.weights.count(code)) worst = std::max(worst, std::abs(w));
    }
    return worst;
}

}  // namespace

double bicausal_violation(const JointPathMeasure& m, const Lmmc& X, const Lmmc& Y) {
    if (m.x_states != X.size() || m.y_states != Y.size()) {
        throw ValidationError("joint path measure does not match the chains' state counts");
    }
    const PathDistribution a = path_distribution(X, m.horizon);
    const PathDistribution b = path_distribution(Y, m.horizon);
    double worst = std::max(marginal_defect(a, m.x_marginal()), marginal_defect(b, m.y_marginal()));
    worst = std::max(worst, causality_defect(m, a, X.size(), Y.size(), false));
    worst = std::max(worst, causality_defect(m, b, Y.size(), X.size(), true));
    return worst;
}

bool check_bicausal(const JointPathMeasure& m, const Lmmc& X, const Lmmc& Y, double tol) {
    return bicausal_violation(m, X, Y) <= tol;
}

BicausalLpResult bicausal_lp(const Lmmc& X, const Lmmc& Y, std::size_t k, std::size_t cap) {
    check_cap(X.size(), Y.size(), k, cap);
    return solve_bicausal(X, Y, k);
}

double HistoryTable::at(std::uint64_t x_code, std::uint64_t y_code) const {
    return values.at(x_code * power(y_states, depth + 1) + y_code);
}

std::vector<HistoryTable> v_full_history(const Lmmc& X, const Lmmc& Y, std::size_t k,
                                         std::size_t cap) {
    check_compatible(X, Y);
    check_cap(X.size(), Y.size(), k, cap);
    const std::size_t n = X.size();
    const std::size_t m = Y.size();
    std::vector<HistoryTable> tables(k + 1);

    HistoryTable& last = tables[k];
    last.depth = k;
    last.x_states = n;
    last.y_states = m;
    const std::uint64_t xs = power(n, k + 1);
    const std::uint64_t ys = power(m, k + 1);
    const std::uint64_t x_place = power(n, k);
    const std::uint64_t y_place = power(m, k);
    last.values.resize(xs * ys);
    for (std::uint64_t xc = 0; xc < xs; ++xc)
        for (std::uint64_t yc = 0; yc < ys; ++yc)
            last.values[xc * ys + yc] =
                label_distance(X.metric(), X.label(xc / x_place), Y.label(yc / y_place));

    for (std::size_t i = k; i > 0; --i) {
        const HistoryTable& next = tables[i];
        HistoryTable& cur = tables[i - 1];
        cur.depth = i - 1;
        cur.x_states = n;
        cur.y_states = m;
        const std::uint64_t cur_xs = power(n, i);
        const std::uint64_t cur_ys = power(m, i);
        const std::uint64_t next_ys = cur_ys * m;
        const std::uint64_t xl = power(n, i - 1);
        const std::uint64_t yl = power(m, i - 1);
        cur.values.resize(cur_xs * cur_ys);
        parallel_for(static_cast<std::size_t>(cur_xs * cur_ys), [&](std::size_t cell) {
            const std::uint64_t xc = cell / cur_ys;
            const std::uint64_t yc = cell % cur_ys;
            Matrix cost(n, m);
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t y = 0; y < m; ++y)
                    cost(x, y) = next.values[(xc + cur_xs * x) * next_ys + (yc + cur_ys * y)];
            cur.values[cell] =
                wasserstein(cost, X.row(static_cast<std::size_t>(xc / xl)),
                            Y.row(static_cast<std::size_t>(yc / yl)))
                    .value;
        });
    }
    return tables;
}

double history_collapse_deviation(const std::vector<HistoryTable>& v, const WlResult& wl) {
    if (v.size() != wl.tables.size()) {
        throw ValidationError("history tables and cost tables have different depths");
    }
    double worst = 0.0;
    for (const HistoryTable& t : v) {
        const Matrix& w = wl.table(t.depth);
        const std::uint64_t ys = power(t.y_states, t.depth + 1);
        const std::uint64_t xl = power(t.x_states, t.depth);
        const std::uint64_t yl = power(t.y_states, t.depth);
        for (std::size_t idx = 0; idx < t.values.size(); ++idx) {
            const std::uint64_t xc = idx / ys;
            const std::uint64_t yc = idx % ys;
            const double target = w(static_cast<std::size_t>(xc / xl), static_cast<std::size_t>(yc / yl));
            worst = std::max(worst, std::abs(t.values[idx] - target));
        }
    }
    return worst;
}

namespace {

// Chain on the point set `points` carrying the pushforward of `c`; points
// outside the image of the label map are absorbing.
Lmmc chain_on_points(const Lmmc& c, const std::vector<std::vector<double>>& points) {
    const std::size_t z = points.size();
    const std::size_t d = c.dimension();
    auto point_index = [&](std::size_t x) {
        const auto l = c.label(x);
        const std::vector<double> key(l.begin(), l.end());
        return static_cast<std::size_t>(
            std::lower_bound(points.begin(), points.end(), key) - points.begin());
    };
    std::vector<std::size_t> image(c.size());
    std::vector<bool> covered(z, false);
    for (std::size_t x = 0; x < c.size(); ++x) {
        image[x] = point_index(x);
        covered[image[x]] = true;
    }
    Matrix kernel(z, z);
    std::vector<double> mu(z, 0.0);
    for (std::size_t x = 0; x < c.size(); ++x) {
        mu[image[x]] += c.mu()[x];
        for (std::size_t x2 = 0; x2 < c.size(); ++x2) kernel(image[x], image[x2]) += c.kernel()(x, x2);
    }
    for (std::size_t p = 0; p < z; ++p)
        if (!covered[p]) kernel(p, p) = 1.0;
    std::vector<double> labels;
    labels.reserve(z * d);
    for (const auto& point : points) labels.insert(labels.end(), point.begin(), point.end());
    return Lmmc::create(std::move(kernel), std::move(mu), std::move(labels), c.metric());
}

}  // namespace

double label_space_wl(const Lmmc& X, const Lmmc& Y, std::size_t k, std::size_t cap) {
    check_compatible(X, Y);
    if (!labels_injective(X) || !labels_injective(Y)) {
        throw ValidationError("labels not injective");
    }
    check_cap(X.size(), Y.size(), k, cap);
    std::vector<std::vector<double>> points;
    for (const Lmmc* c : {&X, &Y}) {
        for (std::size_t x = 0; x < c->size(); ++x) {
            const auto l = c->label(x);
            points.emplace_back(l.begin(), l.end());
        }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return solve_bicausal(chain_on_points(X, points), chain_on_points(Y, points), k).value;
}

}  // namespace wlm
