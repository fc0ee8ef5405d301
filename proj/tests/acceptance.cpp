// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>
#include <kep/kep.hpp>

namespace {

using Clock = std::chrono::steady_clock;
using kep::PenaltyKind;
using kep::PenaltyParams;

int failures = 0;

void report(int id, bool ok, const std::string& detail)
{
    std::printf("%s %d %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

PenaltyParams pp(double eta, double alpha) { return {eta, alpha, 1, std::nullopt}; }

double central_difference(auto&& f, double x, double h) { return (f(x + h) - f(x - h)) / (2.0 * h); }

int threads()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

kep::SimConfig table_config(Eigen::Index n, double snr)
{
    kep::SimConfig c;
    c.n = n;
    c.p = 200;
    c.snr = snr;
    c.m = 1000;
    c.seed = 1;
    c.repeats = 20;
    c.schedule = kep::Schedule{};
    c.threads = threads();
    return c;
}

const kep::MethodAggregate& aggregate(const kep::SimReport& r, const std::string& name)
{
    for (const auto& a : r.aggregates)
        if (a.method == name) return a;
    throw kep::precondition_error("missing aggregate " + name);
}

void oracle_equivalence()
{
    const auto t0 = Clock::now();
    kep::CounterRng rng(2024);
    double worst_kep = 0.0, worst_mcp = 0.0;
    int discontinuous = 0;
    for (int i = 0; i < 1000; ++i) {
        const double z = -10.0 + 20.0 * rng.uniform();
        const double eta = 5.0 * rng.uniform();
        const double alpha = 5.0 * rng.uniform();
        const auto p = pp(eta, alpha);
        if (eta * alpha > 1.0) ++discontinuous;
        const double ok = kep::oracle_threshold({z, p, PenaltyKind::kep}, 1e-5);
        const double om = kep::oracle_threshold({z, p, PenaltyKind::mcp}, 1e-5);
        worst_kep = std::max(worst_kep, std::abs(kep::kep_threshold(z, p).estimate - ok));
        worst_mcp = std::max(worst_mcp, std::abs(kep::mcp_threshold(z, p).estimate - om));
    }
    const double secs = seconds_since(t0);
    report(1, worst_kep <= 2e-5 && worst_mcp <= 2e-5 && secs <= 30.0 && discontinuous > 0 && discontinuous < 1000,
           fmt("oracle equivalence: max |kep-oracle| %.3g, max |mcp-oracle| %.3g, %d/1000 discontinuous, %.1f s",
               worst_kep, worst_mcp, discontinuous, secs));
}

void limit_recovery()
{
    double soft = 0.0, half = 0.0;
    const double big_alpha = 1e8;
    const auto ph = PenaltyParams::from_lambda(1.0, big_alpha);
    for (int i = -50; i <= 50; ++i) {
        const double z = i / 10.0;
        soft = std::max(soft, std::abs(kep::kep_threshold(z, pp(1.0, 1e-10)).estimate - kep::soft_threshold(z, 1.0)));
        if (std::abs(z) >= 1.3)
            half = std::max(half, std::abs(kep::kep_threshold(z, ph).estimate - kep::half_threshold(z, 1.0)));
    }
    report(2, soft <= 1e-5 && half <= 1e-3,
           fmt("limits: max |kep-soft| %.3g at alpha=1e-10, max |kep-half| %.3g at alpha=1e8", soft, half));
}

void sandwich()
{
    bool ok = true;
    double min_gap = INFINITY;
    for (int i = 0; i <= 10000; ++i) {
        const double s = i * 1e-3;
        for (auto [eta, alpha] : {std::pair{1.0, 0.5}, {2.0, 0.1}, {0.5, 1.5}}) {
            const auto p = pp(eta, alpha);
            const double m = kep::mcp_penalty(s, p);
            const double k = kep::kep_penalty(s, p);
            const double l = eta * s;
            if (i == 0) {
                ok = ok && m == 0.0 && k == 0.0;
            } else {
                ok = ok && m < k && k < l;
                min_gap = std::min({min_gap, k - m, l - k});
            }
        }
    }
    report(3, ok, fmt("sandwich M < Psi/eta < s on (0, 10]: smallest gap %.3g", min_gap));
}

double lipschitz_bound(double t)
{
    const double w = (2.0 * t + 1.0) / 3.0;
    return 4.0 / 3.0 + (2.0 / 3.0) / std::sqrt(w * w * w / (t * t) - 1.0);
}

bool lemma2_suite(std::string& detail)
{
    bool mono = true;
    double worst_fixed = 0.0;
    bool lip = true;
    double worst_ratio = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double t = i / 10.0;
        worst_fixed = std::max(worst_fixed, std::abs(kep::cubic_root_branch(2.0 * t, t) - 1.0));
        double prev = -INFINITY;
        for (int j = 0; j <= 20000; ++j) {
            const double u = 2.0 * t + j * 5e-4;
            const double phi = kep::cubic_root_branch(u, t);
            if (!(phi > prev)) mono = false;
            prev = phi;
        }
        if (i == 0 || i == 10) continue;
        const double bound = lipschitz_bound(t);
        const double h = 1e-4;
        double q = 0.0;
        for (int j = 0; j < 100000; ++j) {
            const double u = 2.0 * t + j * h;
            const double a = kep::cubic_root_branch(u, t);
            const double b = kep::cubic_root_branch(u + h, t);
            q = std::max(q, (b * b - a * a) / h);
        }
        worst_ratio = std::max(worst_ratio, q / bound);
        if (q > bound) lip = false;
    }
    detail = fmt("phi increasing: %s, max |phi(2t)-1| %.3g, max Lipschitz quotient/bound %.4f", mono ? "yes" : "no",
                 worst_fixed, worst_ratio);
    return mono && worst_fixed <= 1e-10 && lip;
}

void gradient_check()
{
    double worst = 0.0;
    for (auto [eta, alpha] : {std::pair{1.3, 0.7}, {0.5, 3.0}, {2.0, 0.01}}) {
        const auto p = pp(eta, alpha);
        for (int i = 0; i < 50; ++i) {
            const double b = 0.01 * std::pow(1e4, i / 49.0);
            const double fd = central_difference([&](double x) { return kep::kep_penalty(x, p); }, b, 1e-5 * b);
            const double d = kep::kep_penalty_derivative(b, p);
            worst = std::max(worst, std::abs(d - fd) / std::abs(d));
        }
    }
    report(5, worst <= 1e-6, fmt("max relative |Psi' - finite difference| %.3g over b in [0.01, 100]", worst));
}

void cd_convergence()
{
    const auto t0 = Clock::now();
    auto c = table_config(12800, 3.0);
    const auto inst = kep::generate_instance(c, 0);
    const auto d = kep::standardize(inst.X_train, inst.y_train);
    const auto p = pp(c.schedule->eta(c.n), c.schedule->alpha(c.n));
    const auto res = kep::cd_single(d, p, PenaltyKind::kep, Eigen::VectorXd::Zero(c.p));
    const auto& tr = res.objective_trace;
    bool mono = true;
    for (std::size_t i = 1; i < tr.size(); ++i)
        if (tr[i] > tr[i - 1] + 1e-12 * std::abs(tr[i - 1])) mono = false;
    const double f = tr.back();
    std::size_t first = 0;
    while (std::abs(tr[first] - f) > 1e-6 * std::abs(f)) ++first;
    const double secs = seconds_since(t0);
    report(6, mono && first <= 15 && secs <= 60.0,
           fmt("cd on n=12800 p=200: trace nonincreasing %s, within 1e-6 relative after %zu sweeps "
               "(%d to coefficient tolerance), %.1f s",
               mono ? "yes" : "no", first, res.sweeps, secs));
}

void lla_rate()
{
    bool ok = true;
    std::string detail = "lla error <= C (eta alpha)^t:";
    const double z = 3.0;
    Eigen::MatrixXd X(2, 1);
    X << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    const auto d = kep::StandardizedDesign::from_standardized(X, z * X.col(0));
    for (double t : {0.3, 0.5, 0.8}) {
        const auto p = pp(1.0, t);
        const double bhat = kep::kep_threshold(z, p).estimate;
        const auto res = kep::lla_solve(d, p, Eigen::VectorXd::Zero(1), 1e-15, 1e-300, 20, 1000, true);
        const double C = std::abs(res.iterates.at(0)[0] - bhat) / t;
        double worst = 0.0;
        for (std::size_t k = 1; k <= res.iterates.size(); ++k) {
            const double e = std::abs(res.iterates[k - 1][0] - bhat);
            // Rounding floor once the error reaches machine precision.
            const double bound = C * std::pow(t, static_cast<double>(k)) + 4e-16 * std::abs(bhat);
            worst = std::max(worst, e / bound);
            if (e > bound) ok = false;
        }
        detail += fmt(" t=%.1f: %zu iterates, max error/bound %.3f;", t, res.iterates.size(), worst);
    }
    report(7, ok, detail);
}

void table1()
{
    const auto t0 = Clock::now();
    const auto methods = std::vector<kep::Method>{kep::methods::kep_cd, kep::methods::lasso};
    const auto r100 = kep::run_schedule_experiment(table_config(100, 3.0), methods);
    const auto r400 = kep::run_schedule_experiment(table_config(400, 3.0), methods);
    const auto& k100 = aggregate(r100, "KEP");
    const auto& k400 = aggregate(r400, "KEP");
    const auto& l100 = aggregate(r100, "Lasso");
    const auto& l400 = aggregate(r400, "Lasso");
    const double secs = seconds_since(t0);
    const bool band100 = std::abs(k100.mean_spe - 1.979) <= 0.35;
    const bool band400 = std::abs(k400.mean_spe - 1.098) <= 0.15;
    const bool beats = k100.mean_spe <= l100.mean_spe && k400.mean_spe <= l400.mean_spe;
    const bool fse = k100.mean_fse <= 0.05 && k400.mean_fse <= 0.05;
    const bool clean = k100.repeats_ok == 20 && k400.repeats_ok == 20;
    report(8, band100 && band400 && beats && fse && clean && secs <= 600.0,
           fmt("table1 SNR=3: n=100 KEP SPE %.3f (target 1.979 +- 0.35: %s), Lasso %.3f; "
               "n=400 KEP SPE %.3f (target 1.098 +- 0.15: %s), Lasso %.3f; KEP <= Lasso: %s; "
               "KEP FSE %.4f / %.4f; %.1f s",
               k100.mean_spe, band100 ? "in" : "out", l100.mean_spe, k400.mean_spe, band400 ? "in" : "out",
               l400.mean_spe, beats ? "yes" : "no", k100.mean_fse, k400.mean_fse, secs));
}

void table4()
{
    const auto r = kep::run_schedule_experiment(table_config(100, 12.0), {kep::methods::kep_cd, kep::methods::lasso});
    const double k = aggregate(r, "KEP").mean_spe;
    const double l = aggregate(r, "Lasso").mean_spe;
    report(9, 2.0 * k <= l, fmt("table4 SNR=12 n=100: KEP SPE %.3f, Lasso SPE %.3f, ratio %.2f (needs >= 2)", k, l,
                                l / k));
}

bool consistency(std::string& detail)
{
    std::vector<double> fse;
    for (Eigen::Index n : {100, 400, 1600}) {
        const auto r = kep::run_schedule_experiment(table_config(n, 3.0), {kep::methods::kep_cd});
        fse.push_back(aggregate(r, "KEP").mean_fse);
    }
    const auto big = kep::run_schedule_experiment(table_config(12800, 3.0), {kep::methods::kep_cd});
    int exact = 0;
    for (const auto& run : big.runs)
        if (!run.error && run.fse == 0.0) ++exact;
    const bool mono = fse[0] >= fse[1] && fse[1] >= fse[2];
    detail = fmt("KEP FSE n=100/400/1600: %.4f %.4f %.4f (nonincreasing: %s); FSE = 0 on %d/20 repeats at n=12800",
                 fse[0], fse[1], fse[2], mono ? "yes" : "no", exact);
    return mono && exact >= 18;
}

} // namespace

int main()
{
    try {
        oracle_equivalence();
        limit_recovery();
        sandwich();
        std::string lemma;
        const bool lemma_ok = lemma2_suite(lemma);
        report(4, lemma_ok, lemma);
        gradient_check();
        cd_convergence();
        lla_rate();
        table1();
        table4();
        std::string trend;
        const bool trend_ok = consistency(trend);
        report(10, trend_ok, trend);
        report(11, lemma_ok && trend_ok,
               "asymptotic claims are not checked directly; status follows the covering checks 4 and 10");
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
