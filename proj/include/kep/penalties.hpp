#pragma once
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <Eigen/Core>
#include <kep/error.hpp>

namespace kep {

enum class PenaltyKind
{
    kep,    ///< kinetic energy plus, (eta/alpha)(sqrt(2 alpha |b|^q + 1) - 1)
    mcp,    ///< minimax concave, eta * M(|b|)
    l1,     ///< lasso, eta * |b|
    lhalf   ///< bridge l_{1/2}, eta * |b|^{1/2}
};

inline std::string_view to_string(PenaltyKind kind)
{
    switch (kind) {
        case PenaltyKind::kep: return "kep";
        case PenaltyKind::mcp: return "mcp";
        case PenaltyKind::l1: return "l1";
        case PenaltyKind::lhalf: return "lhalf";
    }
    return "unknown";
}

inline PenaltyKind parse_penalty_kind(std::string_view s)
{
    if (s == "kep") return PenaltyKind::kep;
    if (s == "mcp") return PenaltyKind::mcp;
    if (s == "l1" || s == "lasso" || s == "soft") return PenaltyKind::l1;
    if (s == "lhalf" || s == "half") return PenaltyKind::lhalf;
    throw domain_error("unknown penalty kind: " + std::string(s));
}

/// eta that ties KEP to a fixed lambda across alpha:
/// eta = lambda * alpha / (sqrt(2 alpha + 1) - 1) = (lambda / 2)(sqrt(1 + 2 alpha) + 1).
inline double nesting_eta(double lambda, double alpha)
{
    return 0.5 * lambda * (std::sqrt(1.0 + 2.0 * alpha) + 1.0);
}

/**
 * Hyperparameters of one penalty instance.
 *
 * For KEP and MCP, eta scales the penalty and alpha controls its concavity.
 * For L1 and LHALF, eta carries the usual lambda and alpha is ignored.
 * lambda is set only when eta was derived through nesting_eta().
 */
struct PenaltyParams
{
    double eta = 1.0;
    double alpha = 1.0;
    int q = 1;
    std::optional<double> lambda;

    static PenaltyParams from_lambda(double lambda, double alpha, int q = 1)
    {
        PenaltyParams p{nesting_eta(lambda, alpha), alpha, q, lambda};
        p.validate();
        return p;
    }

    /// MCP in the (lambda, gamma) convention of SparseNet: 1/alpha = lambda * gamma, eta = lambda.
    static PenaltyParams mcp_from_sparsenet(double lambda, double gamma)
    {
        PenaltyParams p{lambda, 1.0 / (lambda * gamma), 1, std::nullopt};
        p.validate();
        return p;
    }

    double eta_alpha() const { return eta * alpha; }

    void validate() const
    {
        if (!(std::isfinite(eta) && eta > 0)) throw domain_error("eta must be finite and > 0");
        if (!(std::isfinite(alpha) && alpha > 0)) throw domain_error("alpha must be finite and > 0");
        if (q != 1 && q != 2) throw domain_error("q must be 1 or 2");
        if (lambda) {
            if (!(std::isfinite(*lambda) && *lambda > 0)) throw domain_error("lambda must be finite and > 0");
            const double expect = nesting_eta(*lambda, alpha);
            if (std::abs(eta - expect) > 1e-12 * expect) {
                throw domain_error("eta inconsistent with lambda under the nesting parameterization");
            }
        }
    }
};

/// Strictly positive weights omega of the reweighted formulation.
class WeightVector
{
public:
    WeightVector() = default;
    explicit WeightVector(Eigen::VectorXd w) : w_(std::move(w))
    {
        for (Eigen::Index j = 0; j < w_.size(); ++j) {
            if (!(std::isfinite(w_[j]) && w_[j] > 0)) {
                throw domain_error("weights must be finite and strictly positive");
            }
        }
    }
    const Eigen::VectorXd& values() const { return w_; }
    Eigen::Index size() const { return w_.size(); }
    double operator[](Eigen::Index j) const { return w_[j]; }

private:
    Eigen::VectorXd w_;
};

namespace detail {

inline void require_finite(double x, const char* what)
{
    if (!std::isfinite(x)) throw domain_error(std::string(what) + " must be finite");
}

inline double pow_q(double a, int q) { return q == 1 ? a : a * a; }

/// (sqrt(2 alpha s + 1) - 1) / alpha without cancellation for small alpha.
inline double kep_core(double s, double alpha)
{
    return 2.0 * s / (std::sqrt(2.0 * alpha * s + 1.0) + 1.0);
}

} // namespace detail

/// Psi(|b|^q; eta, alpha) = (eta/alpha)(sqrt(2 alpha |b|^q + 1) - 1).
inline double kep_penalty(double b, const PenaltyParams& params)
{
    detail::require_finite(b, "b");
    const double s = detail::pow_q(std::abs(b), params.q);
    return params.eta * detail::kep_core(s, params.alpha);
}

/// Derivative with respect to |b| for q = 1: eta (1 + 2 alpha b)^{-1/2}.
inline double kep_penalty_derivative(double b, const PenaltyParams& params)
{
    detail::require_finite(b, "b");
    if (b < 0) throw domain_error("kep_penalty_derivative: b must be >= 0");
    if (params.q != 1) throw domain_error("kep_penalty_derivative: defined for q = 1");
    return params.eta / std::sqrt(1.0 + 2.0 * params.alpha * b);
}

/// -eta alpha (1 + 2 alpha b)^{-3/2}; minimum over b >= 0 is -eta alpha at b = 0.
inline double kep_penalty_second_derivative(double b, const PenaltyParams& params)
{
    detail::require_finite(b, "b");
    if (b < 0) throw domain_error("kep_penalty_second_derivative: b must be >= 0");
    const double base = 1.0 + 2.0 * params.alpha * b;
    return -params.eta * params.alpha / (base * std::sqrt(base));
}

/**
 * Phi(|b|^q; alpha), the KEP function normalized through (0,0) and (1,1).
 *
 * Evaluated as (sqrt(2a+1)+1)|b|^q / (sqrt(2a|b|^q+1)+1), which has no
 * cancellation. Below alpha = 1e-14 the l_q limit |b|^q is returned.
 */
inline double normalized_phi(double b, double alpha, int q = 1)
{
    detail::require_finite(b, "b");
    if (!(std::isfinite(alpha) && alpha > 0)) throw domain_error("alpha must be finite and > 0");
    const double s = detail::pow_q(std::abs(b), q);
    if (alpha < 1e-14) return s;
    return (std::sqrt(2.0 * alpha + 1.0) + 1.0) * s / (std::sqrt(2.0 * alpha * s + 1.0) + 1.0);
}

/// M(s) = s - alpha s^2 / 2 below 1/alpha, 1/(2 alpha) above.
inline double mcp_unit(double s, double alpha)
{
    return s >= 1.0 / alpha ? 0.5 / alpha : s - 0.5 * alpha * s * s;
}

/// eta * M(s).
inline double mcp_penalty(double s, const PenaltyParams& params)
{
    detail::require_finite(s, "s");
    if (s < 0) throw domain_error("mcp_penalty: s must be >= 0");
    return params.eta * mcp_unit(s, params.alpha);
}

/// K(s) = (1/alpha)(sqrt(2 alpha s + 1) - 1), so that Psi = eta K for q = 1.
inline double kep_unit(double s, double alpha) { return detail::kep_core(s, alpha); }

/// Penalty value at a magnitude s = |b| for any kind (q = 1 semantics).
inline double penalty_value(PenaltyKind kind, double s, const PenaltyParams& params)
{
    switch (kind) {
        case PenaltyKind::kep: return params.eta * detail::kep_core(detail::pow_q(s, params.q), params.alpha);
        case PenaltyKind::mcp: return params.eta * mcp_unit(s, params.alpha);
        case PenaltyKind::l1: return params.eta * s;
        case PenaltyKind::lhalf: return params.eta * std::sqrt(s);
    }
    return 0.0;
}

/// Q(omega | b, eta) = omega^T |b|^q + (1/(2 alpha)) sum (omega_j - eta)^2 / omega_j.
inline double conjugate_objective(const WeightVector& omega,
                                  const Eigen::Ref<const Eigen::VectorXd>& b,
                                  const PenaltyParams& params)
{
    detail::require(omega.size() == b.size(), "conjugate_objective: size mismatch");
    double total = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        const double w = omega[j];
        const double d = w - params.eta;
        total += w * detail::pow_q(std::abs(b[j]), params.q) + d * d / (2.0 * params.alpha * w);
    }
    return total;
}

/// Minimizer of Q: omega_j = eta (2 alpha |b_j|^q + 1)^{-1/2}, each in (0, eta].
inline WeightVector conjugate_weights(const Eigen::Ref<const Eigen::VectorXd>& b,
                                      const PenaltyParams& params)
{
    Eigen::VectorXd w(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        detail::require_finite(b[j], "b");
        const double s = detail::pow_q(std::abs(b[j]), params.q);
        w[j] = params.eta / std::sqrt(2.0 * params.alpha * s + 1.0);
    }
    return WeightVector(std::move(w));
}

} // namespace kep
