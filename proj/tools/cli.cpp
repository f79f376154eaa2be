#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wlm/core.hpp"
#include "wlm/coupling_lab.hpp"
#include "wlm/error.hpp"
#include "wlm/gnn.hpp"
#include "wlm/markov.hpp"
#include "wlm/wl_distance.hpp"

namespace wlm::cli {
namespace {

using json = nlohmann::ordered_json;

// Distances are sums of certified transport values.
constexpr double kDistanceTolerance = 1e-9;
constexpr double kOracleTolerance = 1e-8;
constexpr double kCollapseTolerance = 1e-9;
constexpr double kStationarityTolerance = 1e-12;
constexpr double kZeroDistance = 1e-10;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string format_number(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

struct Report {
    std::string command;
    std::vector<std::string> argv;
    json inputs = json::array();
    std::uint64_t seed = 0;
    json results = json::array();
    json checks = json::array();
    json details = json::object();
    std::string status = "ok";
    int exit_code = kExitOk;
    std::optional<std::string> error;
    double wall_time = 0.0;

    void result(const std::string& name, double value, double tolerance) {
        results.push_back({{"name", name}, {"value", value}, {"tolerance", tolerance}});
    }

    // Passing iff value <= tolerance, unless `passed` is given.
    bool check(const std::string& name, double value, double tolerance,
               std::optional<bool> passed = std::nullopt) {
        const bool ok = passed.value_or(value <= tolerance);
        checks.push_back({{"name", name}, {"passed", ok}, {"value", value}, {"tolerance", tolerance}});
        if (!ok && exit_code == kExitOk) {
            status = "check_failed";
            exit_code = kExitCheckFailed;
        }
        return ok;
    }

    void fail(std::string status_name, int code, std::string message) {
        status = std::move(status_name);
        exit_code = code;
        error = std::move(message);
    }

    json to_json() const {
        json doc;
        doc["command"] = command;
        doc["argv"] = argv;
        doc["inputs"] = inputs;
        doc["seed"] = seed;
        doc["results"] = results;
        doc["checks"] = checks;
        doc["details"] = details;
        doc["status"] = status;
        doc["exit_code"] = exit_code;
        if (error) doc["error"] = *error;
        doc["wall_time_seconds"] = wall_time;
        return doc;
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "command,kind,name,value,tolerance,passed\n";
        for (const auto& r : results) {
            os << command << ",result," << csv_field(r["name"].get<std::string>()) << ','
               << format_number(r["value"].get<double>()) << ','
               << format_number(r["tolerance"].get<double>()) << ",\n";
        }
        for (const auto& c : checks) {
            os << command << ",check," << csv_field(c["name"].get<std::string>()) << ','
               << format_number(c["value"].get<double>()) << ','
               << format_number(c["tolerance"].get<double>()) << ','
               << (c["passed"].get<bool>() ? "true" : "false") << '\n';
        }
        if (error) os << command << ",error," << status << ',' << csv_field(*error) << ",,\n";
        return os.str();
    }
};

// Reads an input file once, so the digest covers exactly the parsed bytes.
std::string read_input(Report& report, const std::string& role, const std::string& path) {
    std::string bytes = read_file(path);
    report.inputs.push_back({{"role", role}, {"path", path}, {"sha256", sha256_hex(bytes)}});
    return bytes;
}

LabeledGraph read_graph(Report& report, const std::string& role, const std::string& path) {
    return parse_graph(read_input(report, role, path));
}

json coupling_json(const Coupling& c, const LabeledGraph& g1, const LabeledGraph& g2) {
    json rows = json::array();
    for (std::size_t i = 0; i < c.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < c.cols(); ++j) row.push_back(c(i, j));
        rows.push_back(std::move(row));
    }
    return {{"row_ids", g1.ids()}, {"col_ids", g2.ids()}, {"probabilities", rows},
            {"tolerance", kDistanceTolerance}};
}

struct Options {
    bool csv = false;
    std::uint64_t seed = 0;
    std::string graph1, graph2, model_path, out_path;
    std::size_t k = 3;
    double q = 0.5;
    double eps = 0.0;
    bool eps_variant = false;
    bool coupling = false;
    bool cross = false;
    bool allow_l2 = false;
    std::string metric = "L1";
    double cap = static_cast<double>(kDefaultLpCap);
};

std::size_t checked_cap(double cap) {
    if (!(cap >= 1.0) || !std::isfinite(cap) || cap > 1e15) {
        throw ValidationError("--cap must be a positive number of LP variables");
    }
    return static_cast<std::size_t>(cap);
}

void cmd_dist(const Options& o, Report& r, std::ostream& err) {
    const LabeledGraph g1 = read_graph(r, "graph1", o.graph1);
    const LabeledGraph g2 = read_graph(r, "graph2", o.graph2);
    const MetricKind metric = parse_metric_kind(o.metric);
    const Lmmc X = o.eps_variant ? induce_eps_normalized(g1, o.eps, metric) : induce_q_damped(g1, o.q, metric);
    const Lmmc Y = o.eps_variant ? induce_eps_normalized(g2, o.eps, metric) : induce_q_damped(g2, o.q, metric);
    const WlResult wl = wl_distance(X, Y, o.k);
    r.details["k"] = o.k;
    r.details["variant"] = o.eps_variant ? "eps_normalized" : "q_damped";
    r.details[o.eps_variant ? "eps" : "q"] = o.eps_variant ? o.eps : o.q;
    r.details["metric"] = std::string(to_string(metric));
    r.result("distance", wl.distance, kDistanceTolerance);
    if (o.coupling) r.details["initial_coupling"] = coupling_json(wl.initial_coupling, g1, g2);
    err << "d^(" << o.k << ") = " << format_number(wl.distance) << '\n';
}

void cmd_oracle(const Options& o, Report& r, std::ostream& err) {
    const LabeledGraph g1 = read_graph(r, "graph1", o.graph1);
    const LabeledGraph g2 = read_graph(r, "graph2", o.graph2);
    const std::size_t cap = checked_cap(o.cap);
    const MetricKind metric = parse_metric_kind(o.metric);
    const Lmmc X = induce_q_damped(g1, o.q, metric);
    const Lmmc Y = induce_q_damped(g2, o.q, metric);
    r.details["k"] = o.k;
    r.details["q"] = o.q;
    r.details["metric"] = std::string(to_string(metric));
    r.details["cap"] = cap;

    // The LP and history oracles are the ones with a size guard; run them first.
    const BicausalLpResult lp = bicausal_lp(X, Y, o.k, cap);
    const auto history = v_full_history(X, Y, o.k, cap);
    const WlResult wl = wl_distance(X, Y, o.k);
    std::vector<std::pair<std::string, double>> values{
        {"recursion", wl.distance},
        {"hierarchical", wl_distance_hierarchical(X, Y, o.k)},
        {"bicausal_lp", lp.value},
    };
    const bool injective = labels_injective(X) && labels_injective(Y);
    if (injective) values.emplace_back("label_space", label_space_wl(X, Y, o.k, cap));
    r.details["label_space"] = injective ? "computed" : "skipped: labels not injective";
    r.details["lp"] = {{"variables", lp.variables}, {"constraints", lp.constraints},
                       {"pivots", lp.pivots}, {"redundant_rows", lp.redundant_rows}};
    for (const auto& [name, v] : values) r.result(name, v, kOracleTolerance);

    double deviation = 0.0;
    for (std::size_t a = 0; a < values.size(); ++a)
        for (std::size_t b = a + 1; b < values.size(); ++b)
            deviation = std::max(deviation, std::abs(values[a].second - values[b].second));
    const double collapse = history_collapse_deviation(history, wl);
    const bool agree = r.check("max_pairwise_deviation", deviation, kOracleTolerance);
    const bool collapsed = r.check("history_collapse_deviation", collapse, kCollapseTolerance);

    for (const auto& [name, v] : values) err << name << ": " << format_number(v) << '\n';
    err << "max pairwise deviation " << format_number(deviation) << (agree ? " (ok)" : " (FAILED)") << '\n';
    err << "history collapse deviation " << format_number(collapse) << (collapsed ? " (ok)" : " (FAILED)")
        << '\n';
}

void cmd_lipschitz(const Options& o, bool k_given, Report& r, std::ostream& err) {
    const LabeledGraph g1 = read_graph(r, "graph1", o.graph1);
    const LabeledGraph g2 = read_graph(r, "graph2", o.graph2);
    const MpgnnModel model = parse_model(read_input(r, "model", o.model_path));
    const std::size_t depth = model.depth();
    if (k_given && o.k != depth) {
        throw ValidationError("--k " + std::to_string(o.k) + " does not match the model depth " +
                              std::to_string(depth));
    }
    model.validate(g1.dimension());
    const MetricKind metric = parse_metric_kind(o.metric);
    const LipschitzAudit audit = lipschitz_audit(g1, g2, model, depth, metric, o.allow_l2);
    r.details["k"] = depth;
    r.details["aggregation"] = model.aggregation == Aggregation::QDamped ? "q_damped" : "eps_normalized";
    r.details["parameter"] = model.parameter;
    r.details["metric"] = std::string(to_string(metric));
    r.details["conservative"] = audit.conservative;
    r.result("lhs", audit.lhs, 1e-12);
    r.result("bound_constant", audit.bound_constant, 0.0);
    r.result("distance", audit.distance, kDistanceTolerance);
    r.result("slack", audit.slack, kLipschitzSlackTolerance);
    r.check("lipschitz_slack", audit.slack, kLipschitzSlackTolerance, audit.satisfied);
    err << "|h(G1) - h(G2)| = " << format_number(audit.lhs) << ", bound "
        << format_number(audit.bound_constant) << " * " << format_number(audit.distance) << ", slack "
        << format_number(audit.slack) << (audit.satisfied ? " (ok)" : " (VIOLATED)") << '\n';
}

void cmd_wltest(const Options& o, Report& r, std::ostream& err) {
    const LabeledGraph g1 = read_graph(r, "graph1", o.graph1);
    const LabeledGraph g2 = read_graph(r, "graph2", o.graph2);
    const WlTestResult t = classic_wl_refinement(g1, g2, o.k);
    r.details["rounds"] = o.k;
    r.details["distinguishable"] = t.distinguishable;
    r.details["separation_round"] = t.separation_round ? json(*t.separation_round) : json(nullptr);
    err << (t.distinguishable ? "distinguishable" : "not distinguishable");
    if (t.separation_round) err << " at round " << *t.separation_round;
    err << '\n';
    if (!o.cross) return;
    const double d = wl_distance(induce_q_damped(g1, o.q), induce_q_damped(g2, o.q), o.k).distance;
    r.details["q"] = o.q;
    r.result("distance", d, kDistanceTolerance);
    const bool positive = d > kZeroDistance;
    r.details["agreement"] = positive == t.distinguishable;
    // Only one direction is guaranteed: refinement-equivalent graphs sit at distance zero.
    r.check("equivalent_implies_zero_distance", t.distinguishable ? 0.0 : d, kZeroDistance);
    err << "distance " << format_number(d) << (positive == t.distinguishable ? ", agrees" : ", disagrees")
        << " with the refinement test\n";
}

void cmd_convert(const Options& o, bool q_given, bool eps_given, Report& r, std::ostream& err) {
    if (q_given == eps_given) throw ValidationError("convert needs exactly one of --q or --eps");
    const LabeledGraph g = read_graph(r, "graph", o.graph1);
    const MetricKind metric = parse_metric_kind(o.metric);
    const Lmmc c = q_given ? induce_q_damped(g, o.q, metric) : induce_eps_normalized(g, o.eps, metric);
    const std::string text = serialize_lmmc(c);
    r.details["variant"] = q_given ? "q_damped" : "eps_normalized";
    r.details[q_given ? "q" : "eps"] = q_given ? o.q : o.eps;
    r.details["states"] = c.size();
    r.result("stationarity_residual", stationarity_residual(c), kStationarityTolerance);
    r.check("stationary", stationarity_residual(c), kStationarityTolerance);
    if (o.out_path.empty()) {
        r.details["lmmc"] = json::parse(text);
    } else {
        std::ofstream file(o.out_path, std::ios::binary);
        if (!(file << text)) throw ValidationError("cannot write " + o.out_path);
        r.details["output"] = {{"path", o.out_path}, {"sha256", sha256_hex(text)}};
        err << "wrote " << o.out_path << '\n';
    }
    err << c.size() << "-state chain\n";
}

void emit(const Report& r, bool csv, std::ostream& out) {
    if (csv) {
        out << r.to_csv();
    } else {
        out << r.to_json().dump(2) << '\n';
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Depth-k Weisfeiler-Lehman distance between labeled weighted graphs", "wlm"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--csv", o.csv, "Tabular output instead of JSON");
    app.add_option("--seed", o.seed, "Seed recorded in the report; randomized steps derive from it");

    auto graphs = [&](CLI::App* sub) {
        sub->add_option("graph1", o.graph1, "First graph (JSON)")->required();
        sub->add_option("graph2", o.graph2, "Second graph (JSON)")->required();
    };
    auto metric = [&](CLI::App* sub) {
        sub->add_option("--metric", o.metric, "Label metric: L1, L2 or Linf")->capture_default_str();
    };

    CLI::App* dist = app.add_subcommand("dist", "Compute the WL distance");
    graphs(dist);
    dist->add_option("--k", o.k, "Depth")->capture_default_str();
    CLI::Option* dist_q = dist->add_option("--q", o.q, "Laziness q in (0,1)")->capture_default_str();
    CLI::Option* eps_variant = dist->add_flag("--eps-variant", o.eps_variant, "Use the eps-normalized chains");
    dist->add_option("--eps", o.eps, "eps >= 0 for --eps-variant")->needs(eps_variant)->capture_default_str();
    eps_variant->excludes(dist_q);
    metric(dist);
    dist->add_flag("--coupling", o.coupling, "Include the optimal initial coupling");

    CLI::App* oracle = app.add_subcommand("oracle", "Cross-check every formulation of the distance");
    graphs(oracle);
    oracle->add_option("--k", o.k, "Depth")->capture_default_str();
    oracle->add_option("--q", o.q, "Laziness q in (0,1)")->capture_default_str();
    oracle->add_option("--cap", o.cap, "Largest LP variable count attempted")->capture_default_str();
    metric(oracle);

    CLI::App* lipschitz = app.add_subcommand("lipschitz", "Audit the Lipschitz bound of an MP-GNN model");
    graphs(lipschitz);
    lipschitz->add_option("model", o.model_path, "Model (JSON)")->required();
    CLI::Option* lip_k = lipschitz->add_option("--k", o.k, "Depth; must match the model if given");
    metric(lipschitz);
    lipschitz->add_flag("--allow-l2", o.allow_l2, "Accept the power-iteration bound under L2");

    CLI::App* wltest = app.add_subcommand("wltest", "Classic color refinement");
    graphs(wltest);
    wltest->add_option("--k", o.k, "Refinement rounds")->capture_default_str();
    wltest->add_flag("--cross", o.cross, "Also compute the distance and compare");
    wltest->add_option("--q", o.q, "Laziness for --cross")->capture_default_str();

    CLI::App* convert = app.add_subcommand("convert", "Write the chain induced by a graph");
    convert->add_option("graph", o.graph1, "Graph (JSON)")->required();
    CLI::Option* conv_q = convert->add_option("--q", o.q, "q-damped chain");
    CLI::Option* conv_eps = convert->add_option("--eps", o.eps, "eps-normalized chain");
    conv_q->excludes(conv_eps);
    convert->add_option("--out", o.out_path, "Output path; the chain is embedded in the report otherwise");
    metric(convert);

    Report report;
    for (int i = 0; i < argc; ++i) report.argv.emplace_back(argv[i]);
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&]() {
        report.seed = o.seed;
        report.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        emit(report, o.csv, out);
        if (report.error) err << "error: " << *report.error << '\n';
        return report.exit_code;
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        const auto subs = app.get_subcommands();
        report.command = subs.empty() ? "" : subs.front()->get_name();
        report.fail("validation_error", kExitValidation, e.what());
        return finish();
    }

    CLI::App* sub = app.get_subcommands().front();
    report.command = sub->get_name();
    try {
        if (sub == dist) cmd_dist(o, report, err);
        else if (sub == oracle) cmd_oracle(o, report, err);
        else if (sub == lipschitz) cmd_lipschitz(o, lip_k->count() > 0, report, err);
        else if (sub == wltest) cmd_wltest(o, report, err);
        else cmd_convert(o, conv_q->count() > 0, conv_eps->count() > 0, report, err);
    } catch (const CapExceeded& e) {
        report.fail("cap_exceeded", kExitCap, e.what());
    } catch (const ValidationError& e) {
        report.fail("validation_error", kExitValidation, e.what());
    } catch (const Error& e) {
        report.fail("solver_error", kExitCheckFailed, e.what());
    } catch (const std::exception& e) {
        report.fail("validation_error", kExitValidation, e.what());
    }
    if (report.exit_code != kExitOk) {
        // A failed command reports no partial numbers.
        if (report.error) {
            report.results = json::array();
            report.checks = json::array();
        }
    }
    return finish();
}

}  // namespace wlm::cli
