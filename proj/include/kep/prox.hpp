#pragma once
#include <algorithm>
#include <cmath>
#include <numbers>
#include <kep/error.hpp>
#include <kep/penalties.hpp>

namespace kep {

enum class Regime
{
    continuous,     ///< eta * alpha <= 1 (KEP) / < 1 (MCP)
    discontinuous
};

inline std::string_view to_string(Regime r)
{
    return r == Regime::continuous ? "continuous" : "discontinuous";
}

/// Output of a scalar thresholding rule.
struct ThresholdDecision
{
    double estimate = 0.0;
    double threshold_point = 0.0;   ///< |z| at or below which the estimate is 0
    double stationary_point = 0.0;  ///< |z| from which a nonzero stationary point exists
    Regime regime = Regime::continuous;
};

/// J1(b) = 1/2 (z - b)^2 + penalty(|b|).
struct UnivariateProblem
{
    double z = 0.0;
    PenaltyParams params;
    PenaltyKind kind = PenaltyKind::kep;

    double objective(double b) const
    {
        const double r = z - b;
        return 0.5 * r * r + penalty_value(kind, std::abs(b), params);
    }
};

namespace detail {

/// Clamp an arccos argument that may overshoot [-1, 1] by rounding.
inline double clamp_unit(double x)
{
    constexpr double slack = 1e-12;
    if (!(x >= -1.0 - slack && x <= 1.0 + slack)) {
        throw numerical_error("arccos argument outside [-1, 1] beyond rounding slack");
    }
    return std::clamp(x, -1.0, 1.0);
}

/// J1(b) - J1(0) for the KEP penalty at b >= 0 and target a >= 0.
inline double kep_excess(double b, double a, double eta, double alpha)
{
    return b * (0.5 * b - a) + eta * kep_core(b, alpha);
}

/// Safeguarded Newton refinement of g(b) = b + eta (2 alpha b + 1)^{-1/2} - a
/// on the branch where g' > 0. The trigonometric root loses digits to
/// cancellation when alpha is small; a few steps restore full precision.
inline double polish_kep_root(double b, double a, double eta, double alpha)
{
    auto g = [&](double x) { return x + eta / std::sqrt(2.0 * alpha * x + 1.0) - a; };
    auto dg = [&](double x) {
        const double base = 2.0 * alpha * x + 1.0;
        return 1.0 - eta * alpha / (base * std::sqrt(base));
    };
    double gb = g(b);
    for (int it = 0; it < 8 && gb != 0.0; ++it) {
        const double d = dg(b);
        if (!(d > 0)) break;
        const double nb = std::max(0.0, b - gb / d);
        const double gn = g(nb);
        if (!(std::abs(gn) < std::abs(gb)) || !(dg(nb) > 0)) break;
        b = nb;
        gb = gn;
    }
    return b;
}

/// Nonzero stationary point of J1 for |z| = a past the stationary threshold.
double kep_root(double a, double eta, double alpha);

/// Smallest a at which the stationary point beats b = 0 (eta alpha > 1).
double kep_jump(double eta, double alpha);

} // namespace detail

/**
 * phi(u) = 2 sqrt((u+1)/3) cos[ (1/3) arccos( -t ((u+1)/3)^{-3/2} ) ],
 * the largest root of h(v) = v^3 - (u+1) v + 2t. With u = 2 alpha |z| and
 * t = alpha eta it is sqrt(2 alpha b + 1) at the KEP stationary point b.
 * Requires u >= 3 t^{2/3} - 1.
 */
inline double cubic_root_branch(double u, double t)
{
    const double w = (u + 1.0) / 3.0;
    const double arg = detail::clamp_unit(-t / (w * std::sqrt(w)));
    return 2.0 * std::sqrt(w) * std::cos(std::acos(arg) / 3.0);
}

namespace detail {

inline double kep_root(double a, double eta, double alpha)
{
    const double v = cubic_root_branch(2.0 * alpha * a, eta * alpha);
    const double b = (v - 1.0) * (v + 1.0) / (2.0 * alpha);
    return polish_kep_root(std::clamp(b, 0.0, a), a, eta, alpha);
}

inline double kep_jump(double eta, double alpha)
{
    const double t = eta * alpha;
    // The excess decreases in a and is negative once a > 2 eta, since Psi(s) < eta s.
    double lo = (1.5 * std::cbrt(t * t) - 0.5) / alpha;
    double hi = std::max(lo, 2.0 * eta);
    if (kep_excess(kep_root(lo, eta, alpha), lo, eta, alpha) < 0.0) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kep_excess(kep_root(mid, eta, alpha), mid, eta, alpha) < 0.0 ? hi : lo) = mid;
    }
    return hi;
}

} // namespace detail

/**
 * Exact minimizer of 1/2 (z - b)^2 + Psi(|b|; eta, alpha) for q = 1.
 *
 * For eta alpha <= 1 the rule is continuous with dead zone |z| <= eta. For
 * eta alpha > 1 the stationary point exists past
 * (3/(2 alpha))(alpha eta)^{2/3} - 1/(2 alpha) but beats b = 0 only later;
 * threshold_point is that later jump, found by bisection on J1(b) - J1(0).
 */
inline ThresholdDecision kep_threshold(double z, const PenaltyParams& params)
{
    detail::require_finite(z, "z");
    params.validate();
    if (params.q != 1) throw domain_error("kep_threshold: defined for q = 1");

    const double eta = params.eta;
    const double alpha = params.alpha;
    const double t = eta * alpha;
    ThresholdDecision out;
    const double a = std::abs(z);
    if (t <= 1.0) {
        out.threshold_point = out.stationary_point = eta;
        if (a > eta) out.estimate = std::copysign(detail::kep_root(a, eta, alpha), z);
        return out;
    }
    out.regime = Regime::discontinuous;
    out.stationary_point = (1.5 * std::cbrt(t * t) - 0.5) / alpha;
    out.threshold_point = detail::kep_jump(eta, alpha);
    if (a <= out.stationary_point) return out;

    const double b = detail::kep_root(a, eta, alpha);
    if (detail::kep_excess(b, a, eta, alpha) < 0.0) out.estimate = std::copysign(b, z);
    return out;
}

/**
 * Exact minimizer of 1/2 (z - b)^2 + eta M(|b|).
 *
 * eta alpha < 1: firm thresholding with knots eta and 1/alpha.
 * eta alpha >= 1: hard thresholding at sqrt(eta/alpha), where
 * 1/2 z^2 = eta/(2 alpha) and the two candidates 0 and z tie.
 */
inline ThresholdDecision mcp_threshold(double z, const PenaltyParams& params)
{
    detail::require_finite(z, "z");
    params.validate();
    const double eta = params.eta;
    const double alpha = params.alpha;
    const double t = eta * alpha;
    const double a = std::abs(z);
    ThresholdDecision out;
    if (t < 1.0) {
        out.regime = Regime::continuous;
        out.threshold_point = out.stationary_point = eta;
        if (a <= eta) return out;
        out.estimate = a <= 1.0 / alpha ? std::copysign((a - eta) / (1.0 - t), z) : z;
        return out;
    }
    out.regime = Regime::discontinuous;
    out.threshold_point = std::sqrt(eta / alpha);
    out.stationary_point = 1.0 / alpha;
    if (a > out.threshold_point) out.estimate = z;
    return out;
}

/// sgn(z) max(|z| - lambda, 0).
inline double soft_threshold(double z, double lambda)
{
    if (!(lambda > 0)) throw domain_error("soft_threshold: lambda must be > 0");
    const double a = std::abs(z) - lambda;
    return a > 0 ? std::copysign(a, z) : 0.0;
}

/// |z| at which the half rule jumps: (3/2) lambda^{2/3}.
inline double half_threshold_point(double lambda)
{
    const double c = std::cbrt(lambda);
    return 1.5 * c * c;
}

/**
 * Exact minimizer of 1/2 (z - b)^2 + lambda |b|^{1/2}.
 *
 * Nonzero branch: sgn(z)(4|z|/3) cos^2[(1/3) arccos(-(lambda/4)(3/|z|)^{3/2})],
 * which exists from |z| = 3 (lambda/4)^{2/3} but is the global minimizer only
 * from (3/2) lambda^{2/3} on. At that point both candidates tie and the
 * nonzero one is returned, which is the alpha -> infinity limit of
 * kep_threshold under nesting_eta().
 */
inline double half_threshold(double z, double lambda)
{
    if (!(lambda > 0)) throw domain_error("half_threshold: lambda must be > 0");
    const double a = std::abs(z);
    if (a < half_threshold_point(lambda)) return 0.0;
    const double r = 3.0 / a;
    const double arg = detail::clamp_unit(-(lambda / 4.0) * r * std::sqrt(r));
    const double c = std::cos(std::acos(arg) / 3.0);
    return std::copysign(4.0 * a / 3.0 * c * c, z);
}

/// Dispatch to the exact thresholding rule for a penalty kind.
/// L1 and LHALF read their lambda from params.eta.
inline double threshold_estimate(double z, const PenaltyParams& params, PenaltyKind kind)
{
    switch (kind) {
        case PenaltyKind::kep: return kep_threshold(z, params).estimate;
        case PenaltyKind::mcp: return mcp_threshold(z, params).estimate;
        case PenaltyKind::l1: return soft_threshold(z, params.eta);
        case PenaltyKind::lhalf: return half_threshold(z, params.eta);
    }
    return 0.0;
}

namespace detail {

template <class Penalty>
double grid_argmin(double z, double step, Penalty&& pen)
{
    const double a = std::abs(z);
    const auto count = static_cast<long long>(std::floor(2.0 * a / step));
    // Excess over J1(0) = z^2/2; b = 0 is the first candidate so ties keep it.
    double best_b = 0.0;
    double best = 0.0;
    auto visit = [&](double b) {
        const double e = b * (0.5 * b - z) + pen(std::abs(b));
        if (e < best) {
            best = e;
            best_b = b;
        }
    };
    for (long long i = 0; i <= count; ++i) visit(-a + static_cast<double>(i) * step);
    visit(a);
    return best_b;
}

} // namespace detail

/**
 * Brute-force minimizer of J1 over the grid -|z| + i * step on [-|z|, |z|],
 * plus b = 0 and b = |z|. Used as ground truth for the closed-form rules.
 */
inline double oracle_threshold(const UnivariateProblem& problem, double step)
{
    detail::require_finite(problem.z, "z");
    if (!(step > 0)) throw precondition_error("oracle_threshold: step must be > 0");
    if (problem.z == 0.0) return 0.0;
    if (step > std::abs(problem.z) / 10.0) throw precondition_error("oracle_threshold: step must be <= |z|/10");

    const PenaltyParams& p = problem.params;
    const double eta = p.eta;
    const double alpha = p.alpha;
    switch (problem.kind) {
        case PenaltyKind::kep:
            return detail::grid_argmin(problem.z, step, [=](double s) {
                return eta / alpha * (std::sqrt(2.0 * alpha * s + 1.0) - 1.0);
            });
        case PenaltyKind::mcp:
            return detail::grid_argmin(problem.z, step, [=](double s) {
                return s >= 1.0 / alpha ? eta / (2.0 * alpha) : eta * (s - 0.5 * alpha * s * s);
            });
        case PenaltyKind::l1:
            return detail::grid_argmin(problem.z, step, [=](double s) { return eta * s; });
        case PenaltyKind::lhalf:
            return detail::grid_argmin(problem.z, step, [=](double s) { return eta * std::sqrt(s); });
    }
    return 0.0;
}

} // namespace kep
