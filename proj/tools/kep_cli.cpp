// kep_cli: thresholding, path fitting, simulation and manifest replay.
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <kep/kep.hpp>

namespace {

using json = nlohmann::ordered_json;

enum Exit : int { ok = 0, usage = 2, data = 3, numeric = 4 };

struct Options
{
    // threshold
    double z = 0.0;
    std::optional<double> eta;
    std::optional<double> alpha_single;
    std::string kind = "kep";
    // fit
    std::string input;
    std::string response = "y";
    std::string solver = "cd";
    std::string lambdas;
    std::string alphas;
    std::size_t grid_lambdas = 50;
    std::size_t grid_alphas = 20;
    int q = 1;
    double tol = 1e-6;
    int max_sweeps = 1000;
    // simulate
    std::string preset;
    std::string protocol;
    std::string methods;
    std::optional<long> n;
    long m = 1000;
    std::optional<long> p;
    std::optional<double> snr;
    int repeats = 20;
    std::uint64_t seed = 1;
    int folds = 5;
    int threads = 1;
    bool traces = false;
    // replay
    std::string manifest;
    std::string out;
};

std::vector<double> parse_list(const std::string& s, const char* flag)
{
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (item.empty() || used != item.size()) throw CLI::ValidationError(flag, "not a number list: " + s);
        v.push_back(x);
    }
    return v;
}

std::uint64_t fnv1a_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw kep::input_error("cannot write " + path);
    f << content;
}

void write_manifest(const std::string& out, const std::string& command, const std::vector<std::string>& args,
                    json params, std::optional<std::uint64_t> seed, const std::vector<std::string>& outputs)
{
    json j;
    j["command"] = command;
    j["args"] = args;
    j["params"] = std::move(params);
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["version"] = kep::version;
    j["outputs"] = outputs;
    write_file(out + ".manifest.json", j.dump(2) + "\n");
}

int cmd_threshold(const Options& o)
{
    const kep::PenaltyKind kind = kep::parse_penalty_kind(o.kind);
    json j;
    j["kind"] = std::string(kep::to_string(kind));
    j["z"] = o.z;
    kep::ThresholdDecision d;
    if (kind == kep::PenaltyKind::kep || kind == kep::PenaltyKind::mcp) {
        if (!o.alpha_single) throw kep::domain_error("--alpha is required for kep and mcp");
        kep::PenaltyParams params;
        if (o.eta) {
            params = {*o.eta, *o.alpha_single, 1, std::nullopt};
        } else if (!o.lambdas.empty() && kind == kep::PenaltyKind::kep) {
            params = kep::PenaltyParams::from_lambda(parse_list(o.lambdas, "--lambda").at(0), *o.alpha_single);
        } else {
            throw kep::domain_error("--eta (or --lambda for kep) is required");
        }
        d = kind == kep::PenaltyKind::kep ? kep::kep_threshold(o.z, params) : kep::mcp_threshold(o.z, params);
        j["eta"] = params.eta;
        j["alpha"] = params.alpha;
    } else {
        double lambda = 0.0;
        if (!o.lambdas.empty()) {
            lambda = parse_list(o.lambdas, "--lambda").at(0);
        } else if (o.eta) {
            lambda = *o.eta;
        } else {
            throw kep::domain_error("--lambda (or --eta) is required");
        }
        j["lambda"] = lambda;
        if (kind == kep::PenaltyKind::l1) {
            d.estimate = kep::soft_threshold(o.z, lambda);
            d.threshold_point = d.stationary_point = lambda;
            d.regime = kep::Regime::continuous;
        } else {
            d.estimate = kep::half_threshold(o.z, lambda);
            d.threshold_point = kep::half_threshold_point(lambda);
            d.stationary_point = 3.0 * std::pow(lambda / 4.0, 2.0 / 3.0);
            d.regime = kep::Regime::discontinuous;
        }
    }
    j["estimate"] = d.estimate;
    j["threshold_point"] = d.threshold_point;
    j["stationary_point"] = d.stationary_point;
    j["regime"] = std::string(kep::to_string(d.regime));
    std::cout << j.dump() << '\n';
    return ok;
}

int cmd_fit(const Options& o, const std::vector<std::string>& args)
{
    if (o.input.empty()) throw CLI::RequiredError("--input");
    if (o.out.empty()) throw CLI::RequiredError("--out");
    const kep::PenaltyKind kind = kep::parse_penalty_kind(o.kind);
    const kep::CsvTable table = kep::read_csv(o.input);
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> names;
    kep::table_to_xy(table, o.response, X, y, names);
    if (X.rows() < 2) throw kep::input_error("need at least two data rows");
    if (X.cols() == 0) throw kep::precondition_error("no feature columns");

    const kep::StandardizedDesign d = kep::standardize(X, y, kep::ConstantColumnPolicy::exclude);
    for (auto j : d.excluded_columns()) {
        std::cerr << "warning: feature '" << names[static_cast<std::size_t>(j)] << "' is constant; excluded\n";
    }
    if (d.excluded_columns().size() == names.size()) throw kep::precondition_error("no non-constant feature columns");

    const bool one_dim = kind == kep::PenaltyKind::l1 || kind == kep::PenaltyKind::lhalf || o.solver == "irls";
    kep::PathGrid grid = kep::default_grid(d, o.grid_lambdas, one_dim ? 1 : o.grid_alphas);
    if (!o.lambdas.empty()) {
        grid.lambdas = parse_list(o.lambdas, "--lambda");
        std::sort(grid.lambdas.begin(), grid.lambdas.end());
    }
    if (!o.alphas.empty()) {
        grid.alphas = parse_list(o.alphas, "--alpha");
        std::sort(grid.alphas.begin(), grid.alphas.end(), std::greater<>());
    } else if (o.alpha_single) {
        grid.alphas = {*o.alpha_single};
    }
    grid.validate();

    std::ostringstream csv;
    csv << "l,k,lambda,alpha,eta,status,intercept";
    for (const auto& name : names) csv << ',' << name;
    csv << '\n';
    auto emit = [&](std::size_t l, std::size_t k, double lambda, std::optional<double> alpha, double eta,
                    const char* status, const Eigen::VectorXd* b) {
        csv << l << ',' << k << ',' << kep::format_double(lambda) << ','
            << (alpha ? kep::format_double(*alpha) : std::string()) << ',' << kep::format_double(eta) << ','
            << status << ',';
        if (b) {
            const Eigen::VectorXd raw = d.to_original(*b);
            csv << kep::format_double(d.intercept(*b));
            for (Eigen::Index j = 0; j < raw.size(); ++j) csv << ',' << kep::format_double(raw[j]);
        } else {
            for (std::size_t j = 0; j < names.size(); ++j) csv << ',';
        }
        csv << '\n';
    };

    if (o.solver == "irls") {
        for (std::size_t l = 0; l < grid.L(); ++l) {
            kep::IrlsOptions io;
            io.tol = o.tol;
            const kep::IrlsResult r = kep::irls_lq(d, grid.lambdas[l], o.q, io);
            emit(l, 0, grid.lambdas[l], std::nullopt, grid.lambdas[l], r.converged ? "ok" : "nonconverged",
                 &r.coefficients);
        }
    } else {
        kep::PathOptions opts;
        opts.kind = kind;
        if (o.solver == "cd") {
            opts.solver = kep::PathSolver::coordinate_descent;
        } else if (o.solver == "lla") {
            opts.solver = kep::PathSolver::lla;
        } else {
            throw CLI::ValidationError("--solver", "expected cd, lla or irls");
        }
        opts.tol = o.tol;
        opts.max_sweeps = o.max_sweeps;
        const kep::PathSolution sol = kep::cd_path(d, grid, opts);
        for (std::size_t l = 0; l < grid.L(); ++l) {
            for (std::size_t k = 0; k < grid.K(); ++k) {
                const kep::PenaltyParams params = kep::cell_params(kind, grid.lambdas[l], grid.alphas[k]);
                const kep::PathCell* c = sol.cell(l, k);
                const char* status = !c ? "skipped" : (c->converged ? "ok" : "nonconverged");
                emit(l, k, grid.lambdas[l], grid.alphas[k], params.eta, status, c ? &c->coefficients : nullptr);
            }
        }
        if (!sol.nonconverged_cells.empty()) {
            std::cerr << "warning: " << sol.nonconverged_cells.size() << " cells hit --max-sweeps\n";
        }
    }
    write_file(o.out, csv.str());

    json params;
    params["input"] = o.input;
    params["input_fnv1a64"] = fnv1a_file(o.input);
    params["response"] = o.response;
    params["kind"] = std::string(kep::to_string(kind));
    params["solver"] = o.solver;
    params["q"] = o.q;
    params["tol"] = o.tol;
    params["max_sweeps"] = o.max_sweeps;
    params["lambdas"] = grid.lambdas;
    params["alphas"] = grid.alphas;
    write_manifest(o.out, "fit", args, std::move(params), std::nullopt, {o.out});
    return ok;
}

struct Preset
{
    const char* name;
    long p;
    double snr;
    bool cv;
};

constexpr Preset presets[] = {
    {"table1", 200, 3.0, false}, {"table2", 200, 6.0, false}, {"table3", 200, 9.0, false},
    {"table4", 200, 12.0, false}, {"table5", 50, 3.0, true},  {"table6", 200, 3.0, true},
    {"table7", 500, 3.0, true},
};

int cmd_simulate(const Options& o, const std::vector<std::string>& args)
{
    kep::SimConfig c;
    bool cv = false;
    if (!o.preset.empty()) {
        const Preset* found = nullptr;
        for (const auto& pr : presets) {
            if (o.preset == pr.name) found = &pr;
        }
        if (!found) throw CLI::ValidationError("--preset", "unknown preset " + o.preset);
        c.p = found->p;
        c.snr = found->snr;
        cv = found->cv;
    }
    if (o.protocol == "cv") cv = true;
    if (o.protocol == "schedule") cv = false;
    if (!o.protocol.empty() && o.protocol != "cv" && o.protocol != "schedule") {
        throw CLI::ValidationError("--protocol", "expected schedule or cv");
    }
    if (o.n) c.n = *o.n;
    if (o.p) c.p = *o.p;
    if (o.snr) c.snr = *o.snr;
    c.m = o.m;
    c.repeats = o.repeats;
    c.seed = o.seed;
    c.threads = o.threads;
    c.tol = o.tol;
    c.max_sweeps = o.max_sweeps;
    c.grid_lambdas = o.grid_lambdas;
    c.grid_alphas = o.grid_alphas;
    if (!cv) c.schedule = kep::Schedule{};

    std::vector<kep::Method> methods = cv ? kep::methods::cv_default() : kep::methods::schedule_default();
    if (!o.methods.empty()) {
        methods.clear();
        std::stringstream ss(o.methods);
        std::string item;
        while (std::getline(ss, item, ',')) methods.push_back(kep::methods::parse(item));
    }

    const kep::SimReport report =
        cv ? kep::run_cv_experiment(c, methods, o.folds) : kep::run_schedule_experiment(c, methods, o.traces);
    const json agg = kep::aggregates_json(report);
    if (o.out.empty()) {
        std::cout << agg.dump(2) << '\n';
        return ok;
    }

    std::vector<std::string> outputs;
    std::ostringstream runs;
    kep::write_runs_csv(runs, report);
    write_file(o.out + ".runs.csv", runs.str());
    outputs.push_back(o.out + ".runs.csv");
    write_file(o.out + ".aggregates.json", agg.dump(2) + "\n");
    outputs.push_back(o.out + ".aggregates.json");
    if (o.traces && !cv) {
        for (const auto& run : report.runs) {
            if (run.repeat != 0 || run.trace.empty()) continue;
            std::ostringstream t;
            kep::write_trace_csv(t, run.trace);
            const std::string path = o.out + ".trace." + run.method + ".csv";
            write_file(path, t.str());
            outputs.push_back(path);
        }
    }
    json params = kep::config_json(c);
    params["protocol"] = report.protocol;
    params["folds"] = cv ? json(o.folds) : json(nullptr);
    params["preset"] = o.preset.empty() ? json(nullptr) : json(o.preset);
    json names = json::array();
    for (const auto& m : methods) names.push_back(m.name);
    params["methods"] = names;
    write_manifest(o.out, "simulate", args, std::move(params), c.seed, outputs);
    return ok;
}

int run(std::vector<std::string> args, int depth = 0);

int cmd_replay(const Options& o, int depth)
{
    if (depth > 0) throw kep::input_error("a manifest cannot replay another replay");
    std::ifstream in(o.manifest, std::ios::binary);
    if (!in) throw kep::input_error("cannot open manifest " + o.manifest);
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw kep::input_error(std::string("malformed manifest: ") + e.what());
    }
    if (!m.contains("args") || !m["args"].is_array()) throw kep::input_error("manifest has no args array");
    std::vector<std::string> args = m["args"].get<std::vector<std::string>>();
    if (!o.out.empty()) {
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--out" && i + 1 < args.size()) args[i + 1] = o.out;
            if (args[i].rfind("--out=", 0) == 0) args[i] = "--out=" + o.out;
        }
    }
    return run(std::move(args), depth + 1);
}

int run(std::vector<std::string> args, int depth)
{
    CLI::App app{"KEP penalized regression toolkit"};
    app.require_subcommand(1);
    Options o;

    auto* th = app.add_subcommand("threshold", "Evaluate a scalar thresholding rule");
    th->add_option("--z", o.z, "Input value")->required();
    th->add_option("--eta", o.eta, "Penalty scale");
    th->add_option("--alpha", o.alpha_single, "Concavity parameter");
    th->add_option("--lambda", o.lambdas, "lambda (nesting for kep; the weight for l1 and lhalf)");
    th->add_option("--kind", o.kind, "kep, mcp, l1 or lhalf");

    auto* fit = app.add_subcommand("fit", "Fit a regularization path to CSV data");
    fit->add_option("--input", o.input, "CSV with a header row");
    fit->add_option("--response", o.response, "Name of the response column");
    fit->add_option("--kind", o.kind, "kep, mcp, l1 or lhalf");
    fit->add_option("--solver", o.solver, "cd, lla or irls");
    fit->add_option("--lambda", o.lambdas, "Comma-separated lambda values (overrides the default grid)");
    fit->add_option("--alpha", o.alphas, "Comma-separated alpha values (overrides the default grid)");
    fit->add_option("--grid-lambdas", o.grid_lambdas, "Default grid size L");
    fit->add_option("--grid-alphas", o.grid_alphas, "Default grid size K");
    fit->add_option("--q", o.q, "IRLS exponent (1 or 2)");
    fit->add_option("--tol", o.tol, "Coordinate change tolerance");
    fit->add_option("--max-sweeps", o.max_sweeps, "Sweep cap per cell");
    fit->add_option("--out", o.out, "Coefficient CSV path");

    auto* sim = app.add_subcommand("simulate", "Run a simulation protocol");
    sim->add_option("--preset", o.preset, "table1 ... table7");
    sim->add_option("--protocol", o.protocol, "schedule or cv");
    sim->add_option("--methods", o.methods, "Comma-separated: KEP, KEP-IR, MCP, LHALF, Lasso");
    sim->add_option("--n", o.n, "Training size");
    sim->add_option("--m", o.m, "Test size");
    sim->add_option("--p", o.p, "Dimension");
    sim->add_option("--snr", o.snr, "Signal-to-noise ratio");
    sim->add_option("--repeats", o.repeats, "Number of repeats");
    sim->add_option("--seed", o.seed, "Base seed");
    sim->add_option("--folds", o.folds, "CV folds");
    sim->add_option("--threads", o.threads, "Worker threads over repeats");
    sim->add_option("--grid-lambdas", o.grid_lambdas, "CV grid size L");
    sim->add_option("--grid-alphas", o.grid_alphas, "CV grid size K");
    sim->add_option("--tol", o.tol, "Coordinate change tolerance");
    sim->add_option("--max-sweeps", o.max_sweeps, "Sweep cap");
    sim->add_flag("--traces", o.traces, "Write objective traces for repeat 0");
    sim->add_option("--out", o.out, "Output prefix (omit to print aggregates)");

    auto* rep = app.add_subcommand("replay", "Re-run a manifest");
    rep->add_option("--manifest", o.manifest, "Manifest JSON")->required();
    rep->add_option("--out", o.out, "Replacement output path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (*th) return cmd_threshold(o);
        if (*fit) return cmd_fit(o, args);
        if (*sim) return cmd_simulate(o, args);
        return cmd_replay(o, depth);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const kep::input_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const kep::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numeric;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numeric;
    }
}

} // namespace

int main(int argc, char** argv)
{
    return run(std::vector<std::string>(argv + 1, argv + argc));
}
