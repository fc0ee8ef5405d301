#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>
#include <Eigen/Core>
#include <kep/design.hpp>
#include <kep/error.hpp>
#include <kep/model_select.hpp>
#include <kep/rng.hpp>
#include <kep/solvers.hpp>

namespace kep {

/// eta_n = n^eta_exponent, alpha_n = n^alpha_exponent.
struct Schedule
{
    double eta_exponent = 0.25;
    double alpha_exponent = -0.5;

    double eta(Eigen::Index n) const { return std::pow(static_cast<double>(n), eta_exponent); }
    double alpha(Eigen::Index n) const { return std::pow(static_cast<double>(n), alpha_exponent); }
};

struct SimConfig
{
    Eigen::Index n = 100;
    Eigen::Index m = 1000;
    Eigen::Index p = 200;
    double snr = 3.0;
    std::uint64_t seed = 1;
    int repeats = 20;
    std::optional<Schedule> schedule;
    double rho = 0.7;
    bool zero_signal = false;           ///< force b* = 0; sigma comes from noise_sd
    double noise_sd = 1.0;
    int threads = 1;
    std::size_t grid_lambdas = 50;      ///< CV protocol only
    std::size_t grid_alphas = 20;
    double tol = 1e-6;
    int max_sweeps = 1000;

    void validate() const
    {
        detail::require(n >= 2, "SimConfig: n must be >= 2");
        detail::require(m >= 1, "SimConfig: m must be >= 1");
        detail::require(p >= 10 && p % 2 == 0, "SimConfig: p must be even and >= 10");
        detail::require(repeats >= 1, "SimConfig: repeats must be >= 1");
        detail::require(threads >= 1, "SimConfig: threads must be >= 1");
        detail::require(rho > -1.0 && rho < 1.0, "SimConfig: rho must lie in (-1, 1)");
        if (zero_signal) {
            detail::require(noise_sd > 0, "SimConfig: noise_sd must be > 0");
        } else if (!(std::isfinite(snr) && snr > 0)) {
            throw domain_error("SimConfig: snr must be > 0");
        }
    }
};

struct SimTruth
{
    Eigen::VectorXd b_star;
    double sigma = 1.0;
    Eigen::MatrixXd Sigma;
    std::vector<Eigen::Index> active_set;
    double signal_variance = 0.0;       ///< b*^T Sigma b*
};

struct Instance
{
    Eigen::MatrixXd X_train;
    Eigen::VectorXd y_train;
    Eigen::MatrixXd X_test;
    Eigen::VectorXd y_test;
    SimTruth truth;
};

/// rho^{|i-j|}.
inline Eigen::MatrixXd ar1_covariance(Eigen::Index p, double rho)
{
    Eigen::MatrixXd S(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) S(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
    return S;
}

inline SimTruth make_truth(const SimConfig& config)
{
    config.validate();
    SimTruth t;
    const Eigen::Index p = config.p;
    t.b_star = Eigen::VectorXd::Zero(p);
    if (!config.zero_signal) {
        for (Eigen::Index i = 1; i <= 5; ++i) {
            t.b_star[i - 1] = 0.2 * static_cast<double>(i);
            t.b_star[i - 1 + p / 2] = 0.2 * static_cast<double>(i);
        }
    }
    t.Sigma = ar1_covariance(p, config.rho);
    t.signal_variance = t.b_star.dot(t.Sigma * t.b_star);
    t.sigma = config.zero_signal ? config.noise_sd : std::sqrt(t.signal_variance) / config.snr;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (t.b_star[j] != 0.0) t.active_set.push_back(j);
    }
    return t;
}

/// Rows of N(0, Sigma) through the AR(1) recursion
/// x_0 = e_0, x_j = rho x_{j-1} + sqrt(1 - rho^2) e_j.
inline Eigen::MatrixXd draw_ar1_rows(CounterRng& rng, Eigen::Index rows, Eigen::Index p, double rho)
{
    Eigen::MatrixXd X(rows, p);
    const double c = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double prev = rng.normal();
        X(i, 0) = prev;
        for (Eigen::Index j = 1; j < p; ++j) {
            prev = rho * prev + c * rng.normal();
            X(i, j) = prev;
        }
    }
    return X;
}

/**
 * Training and test sets for one repeat. Draw order on the substream
 * keyed by seed ^ repeat: training rows, training noise, test rows, test
 * noise.
 */
inline Instance generate_instance(const SimConfig& config, std::uint64_t repeat = 0)
{
    Instance inst;
    inst.truth = make_truth(config);
    CounterRng rng(substream_key(config.seed, repeat));
    auto draw = [&](Eigen::MatrixXd& X, Eigen::VectorXd& y, Eigen::Index rows) {
        X = draw_ar1_rows(rng, rows, config.p, config.rho);
        y = X * inst.truth.b_star;
        for (Eigen::Index i = 0; i < rows; ++i) y[i] += inst.truth.sigma * rng.normal();
    };
    draw(inst.X_train, inst.y_train, config.n);
    draw(inst.X_test, inst.y_test, config.m);
    return inst;
}

/// sum_i (y_i - intercept - x_i^T b)^2 / (m sigma^2).
inline double spe(const Eigen::Ref<const Eigen::VectorXd>& y_test,
                  const Eigen::Ref<const Eigen::MatrixXd>& X_test,
                  const Eigen::Ref<const Eigen::VectorXd>& b_hat,
                  double sigma,
                  double intercept = 0.0)
{
    detail::require(X_test.rows() == y_test.size() && X_test.cols() == b_hat.size(), "spe: dimension mismatch");
    detail::require(y_test.size() > 0, "spe: empty test set");
    if (!(sigma > 0)) throw domain_error("spe: sigma must be > 0");
    const Eigen::VectorXd r = (y_test - X_test * b_hat).array() - intercept;
    return r.squaredNorm() / (static_cast<double>(y_test.size()) * sigma * sigma);
}

/// Fraction of coordinates whose zero pattern disagrees with b_star.
inline double fse(const Eigen::Ref<const Eigen::VectorXd>& b_hat, const Eigen::Ref<const Eigen::VectorXd>& b_star)
{
    detail::require(b_hat.size() == b_star.size() && b_hat.size() > 0, "fse: length mismatch");
    Eigen::Index wrong = 0;
    for (Eigen::Index j = 0; j < b_hat.size(); ++j) wrong += (b_hat[j] == 0.0) != (b_star[j] == 0.0);
    return static_cast<double>(wrong) / static_cast<double>(b_hat.size());
}

struct Method
{
    std::string name;
    PenaltyKind kind = PenaltyKind::kep;
    PathSolver solver = PathSolver::coordinate_descent;
};

namespace methods {
inline const Method kep_cd{"KEP", PenaltyKind::kep, PathSolver::coordinate_descent};
inline const Method kep_ir{"KEP-IR", PenaltyKind::kep, PathSolver::lla};
inline const Method mcp{"MCP", PenaltyKind::mcp, PathSolver::coordinate_descent};
inline const Method lhalf{"LHALF", PenaltyKind::lhalf, PathSolver::coordinate_descent};
inline const Method lasso{"Lasso", PenaltyKind::l1, PathSolver::coordinate_descent};

inline std::vector<Method> schedule_default() { return {kep_cd, mcp, lasso}; }
inline std::vector<Method> cv_default() { return {kep_cd, kep_ir, mcp, lhalf, lasso}; }

inline Method parse(const std::string& name)
{
    for (const Method* m : {&kep_cd, &kep_ir, &mcp, &lhalf, &lasso}) {
        if (m->name == name) return *m;
    }
    if (name == "KEP-CD") return kep_cd;
    throw precondition_error("unknown method: " + name);
}
} // namespace methods

/// One method fitted on one repeat.
struct MethodRun
{
    std::string method;
    int repeat = 0;
    double spe = 0.0;
    double fse = 0.0;
    Eigen::Index nonzeros = 0;
    double eta = 0.0;
    double alpha = 0.0;
    int sweeps = 0;
    bool converged = false;
    std::optional<std::string> error;   ///< set when the fit threw; metrics are then undefined
    std::vector<double> trace;          ///< objective per sweep, when requested
};

struct MethodAggregate
{
    std::string method;
    int repeats_ok = 0;
    int repeats_failed = 0;
    double mean_spe = 0.0;
    double se_spe = 0.0;
    double mean_fse = 0.0;
    double se_fse = 0.0;
};

struct SimReport
{
    SimConfig config;
    std::string protocol;               ///< "schedule" or "cv"
    int folds = 0;
    std::vector<Method> methods;
    std::vector<MethodRun> runs;        ///< repeat-major, then method order
    std::vector<MethodAggregate> aggregates;
};

namespace detail {

/// Run body(i) for i in [0, count) on up to `threads` workers. Each index
/// writes only its own slot, so the result does not depend on scheduling.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body)
{
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = next++; i < count; i = next++) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline void mean_se(const std::vector<double>& v, double& mean, double& se)
{
    mean = se = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline void score(MethodRun& run, const Instance& inst, const StandardizedDesign& d, const Eigen::VectorXd& b_std)
{
    const Eigen::VectorXd raw = d.to_original(b_std);
    run.spe = spe(inst.y_test, inst.X_test, raw, inst.truth.sigma, d.intercept(b_std));
    run.fse = fse(raw, inst.truth.b_star);
    run.nonzeros = static_cast<Eigen::Index>((raw.array() != 0.0).count());
}

template <class Fit>
SimReport run_repeats(const SimConfig& config, const std::vector<Method>& methods, Fit&& fit)
{
    config.validate();
    detail::require(!methods.empty(), "experiment: no methods requested");
    SimReport report;
    report.config = config;
    report.methods = methods;
    std::vector<std::vector<MethodRun>> slots(static_cast<std::size_t>(config.repeats));
    parallel_for(config.repeats, config.threads, [&](int rep) {
        const Instance inst = generate_instance(config, static_cast<std::uint64_t>(rep));
        const StandardizedDesign d = standardize(inst.X_train, inst.y_train, ConstantColumnPolicy::exclude);
        auto& out = slots[static_cast<std::size_t>(rep)];
        for (const Method& m : methods) {
            MethodRun run;
            run.method = m.name;
            run.repeat = rep;
            try {
                fit(run, m, inst, d, static_cast<std::uint64_t>(rep));
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            out.push_back(std::move(run));
        }
    });
    for (auto& s : slots) {
        for (auto& r : s) report.runs.push_back(std::move(r));
    }
    for (const Method& m : methods) {
        MethodAggregate agg;
        agg.method = m.name;
        std::vector<double> s, f;
        for (const auto& r : report.runs) {
            if (r.method != m.name) continue;
            if (r.error) {
                ++agg.repeats_failed;
                continue;
            }
            ++agg.repeats_ok;
            s.push_back(r.spe);
            f.push_back(r.fse);
        }
        mean_se(s, agg.mean_spe, agg.se_spe);
        mean_se(f, agg.mean_fse, agg.se_fse);
        report.aggregates.push_back(agg);
    }
    return report;
}

} // namespace detail

/**
 * Fixed-schedule protocol: every method is fitted once per repeat at
 * eta = eta_n, alpha = alpha_n (Lasso and LHALF at lambda = eta_n), from
 * b = 0. Solver failures are recorded per run.
 */
inline SimReport run_schedule_experiment(const SimConfig& config,
                                         const std::vector<Method>& methods = methods::schedule_default(),
                                         bool record_traces = false)
{
    detail::require(config.schedule.has_value(), "run_schedule_experiment: config has no schedule");
    const double eta = config.schedule->eta(config.n);
    const double alpha = config.schedule->alpha(config.n);
    SimReport report = detail::run_repeats(config, methods, [&](MethodRun& run, const Method& m, const Instance& inst,
                                                                const StandardizedDesign& d, std::uint64_t) {
        const PenaltyParams params{eta, alpha, 1, std::nullopt};
        run.eta = eta;
        run.alpha = alpha;
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d.p());
        Eigen::VectorXd b;
        if (m.solver == PathSolver::lla) {
            detail::require(m.kind == PenaltyKind::kep, "LLA is defined for KEP");
            LlaResult res = lla_solve(d, params, zero, std::min(1e-9, config.tol), config.tol, 200, config.max_sweeps);
            run.sweeps = res.inner_sweeps;
            run.converged = res.converged;
            b = std::move(res.coefficients);
        } else {
            CdResult res = cd_single(d, params, m.kind, zero, config.tol, config.max_sweeps, record_traces);
            run.sweeps = res.sweeps;
            run.converged = res.converged;
            run.trace = std::move(res.objective_trace);
            b = std::move(res.coefficients);
        }
        detail::score(run, inst, d, b);
    });
    report.protocol = "schedule";
    return report;
}

/**
 * Cross-validated protocol: per repeat and method, choose the grid cell by
 * `folds`-fold CV over default_grid (a single alpha for Lasso and LHALF),
 * then refit the path on the full training set and score that cell.
 */
inline SimReport run_cv_experiment(const SimConfig& config,
                                   const std::vector<Method>& methods = methods::cv_default(),
                                   int folds = 5)
{
    detail::require(folds >= 2, "run_cv_experiment: folds must be >= 2");
    SimReport report = detail::run_repeats(config, methods, [&](MethodRun& run, const Method& m, const Instance& inst,
                                                                const StandardizedDesign& d, std::uint64_t rep) {
        const bool one_dim = m.kind == PenaltyKind::l1 || m.kind == PenaltyKind::lhalf;
        const PathGrid grid = default_grid(d, config.grid_lambdas, one_dim ? 1 : config.grid_alphas);
        PathOptions opts;
        opts.kind = m.kind;
        opts.solver = m.solver;
        opts.tol = config.tol;
        opts.max_sweeps = config.max_sweeps;
        const std::uint64_t fold_seed = mix64(substream_key(config.seed, rep)) ^ 0x63765f666f6c6473ULL;
        const CvResult cv = cross_validate(inst.X_train, inst.y_train, grid, folds, fold_seed, opts);
        const PathSolution path = cd_path(d, grid, opts);
        const PathCell* cell = path.cell(cv.best_cell.l, cv.best_cell.k);
        detail::require(cell != nullptr, "run_cv_experiment: selected cell was skipped on the full data");
        run.eta = cell->params.eta;
        run.alpha = cell->params.alpha;
        run.sweeps = cell->sweeps;
        run.converged = cell->converged;
        detail::score(run, inst, d, cell->coefficients);
    });
    report.protocol = "cv";
    report.folds = folds;
    return report;
}

} // namespace kep
