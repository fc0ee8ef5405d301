#pragma once
#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <optional>
#include <set>
#include <vector>
#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <kep/design.hpp>
#include <kep/error.hpp>
#include <kep/penalties.hpp>
#include <kep/prox.hpp>

namespace kep {

/// 1/2 ||y - X b||^2 + sum_j penalty(|b_j|) over active columns.
inline double objective(const StandardizedDesign& design,
                        const Eigen::Ref<const Eigen::VectorXd>& b,
                        const PenaltyParams& params,
                        PenaltyKind kind)
{
    detail::require(b.size() == design.p(), "objective: coefficient length mismatch");
    const Eigen::VectorXd r = design.y - design.X * b;
    double pen = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        if (design.active(j)) pen += penalty_value(kind, std::abs(b[j]), params);
    }
    return 0.5 * r.squaredNorm() + pen;
}

namespace detail {

/// One cyclic pass in ascending column order. update(j, z_j) returns the new
/// b_j, where z_j = x_j^T r + b_j is the partial-residual target (unit-norm
/// columns). The residual r = y - X b is kept current. Returns max |change|.
template <class Update>
double sweep(const StandardizedDesign& d, Eigen::VectorXd& b, Eigen::VectorXd& r, Update&& update)
{
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d.p(); ++j) {
        if (!d.active(j)) continue;
        const auto xj = d.X.col(j);
        const double zj = xj.dot(r) + b[j];
        const double nb = update(j, zj);
        const double delta = nb - b[j];
        if (delta != 0.0) {
            r.noalias() -= delta * xj;
            b[j] = nb;
            max_change = std::max(max_change, std::abs(delta));
        }
    }
    return max_change;
}

inline double penalty_sum(const StandardizedDesign& d, const Eigen::VectorXd& b,
                          const PenaltyParams& params, PenaltyKind kind)
{
    double pen = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        if (d.active(j)) pen += penalty_value(kind, std::abs(b[j]), params);
    }
    return pen;
}

inline Eigen::VectorXd prepare_init(const StandardizedDesign& d, const Eigen::Ref<const Eigen::VectorXd>& init)
{
    require(init.size() == d.p(), "initial coefficient length must equal number of columns");
    Eigen::VectorXd b = init;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        require_finite(b[j], "initial coefficient");
        if (!d.active(j)) b[j] = 0.0;
    }
    return b;
}

inline void require_convex_regime(const PenaltyParams& params, PenaltyKind kind)
{
    if ((kind == PenaltyKind::kep || kind == PenaltyKind::mcp) && !(params.eta_alpha() < 1.0)) {
        throw regime_error("coordinate descent on KEP/MCP requires eta * alpha < 1");
    }
}

inline void require_nondegenerate(const StandardizedDesign& d)
{
    d.check();
    require(d.p() >= 1, "design has no columns");
    require(d.excluded_columns().size() < static_cast<std::size_t>(d.p()), "design has no active columns");
}

} // namespace detail

/// Result of a single-(eta, alpha) coordinate descent solve.
struct CdResult
{
    Eigen::VectorXd coefficients;
    std::vector<double> objective_trace;    ///< entry 0 at init, then one per sweep
    int sweeps = 0;
    bool converged = false;
};

/**
 * Cyclic coordinate descent for one penalty instance, each coordinate set to
 * the exact univariate minimizer from the matching thresholding rule.
 * Stops once a whole sweep moves no coordinate by more than tol.
 */
inline CdResult cd_single(const StandardizedDesign& design,
                          const PenaltyParams& params,
                          PenaltyKind kind,
                          const Eigen::Ref<const Eigen::VectorXd>& init,
                          double tol = 1e-6,
                          int max_sweeps = 1000,
                          bool record_trace = true)
{
    params.validate();
    detail::require_convex_regime(params, kind);
    detail::require_nondegenerate(design);
    detail::require(tol > 0 && max_sweeps > 0, "cd_single: tol and max_sweeps must be positive");

    CdResult out;
    out.coefficients = detail::prepare_init(design, init);
    Eigen::VectorXd& b = out.coefficients;
    Eigen::VectorXd r = design.y - design.X * b;
    auto record = [&] {
        if (record_trace) out.objective_trace.push_back(0.5 * r.squaredNorm() + detail::penalty_sum(design, b, params, kind));
    };
    record();

    auto update = [&](Eigen::Index, double zj) { return threshold_estimate(zj, params, kind); };
    while (out.sweeps < max_sweeps) {
        const double change = detail::sweep(design, b, r, update);
        ++out.sweeps;
        record();
        if (change <= tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// Lambda grid (strictly increasing) and alpha grid (strictly decreasing;
/// the last entry is the most lasso-like).
struct PathGrid
{
    std::vector<double> lambdas;
    std::vector<double> alphas;

    std::size_t L() const { return lambdas.size(); }
    std::size_t K() const { return alphas.size(); }

    void validate() const
    {
        detail::require(!lambdas.empty() && !alphas.empty(), "grid: lambdas and alphas must be non-empty");
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            detail::require(std::isfinite(lambdas[i]) && lambdas[i] > 0, "grid: lambdas must be positive");
            if (i > 0) detail::require(lambdas[i] > lambdas[i - 1], "grid: lambdas must be strictly increasing");
        }
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            detail::require(std::isfinite(alphas[i]) && alphas[i] > 0, "grid: alphas must be positive");
            if (i > 0) detail::require(alphas[i] < alphas[i - 1], "grid: alphas must be strictly decreasing");
        }
    }
};

struct CellIndex
{
    std::size_t l = 0;
    std::size_t k = 0;
    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

enum class PathSolver
{
    coordinate_descent,
    lla
};

/// Penalty parameters of grid cell (lambda, alpha) for a kind. KEP uses
/// nesting_eta(); MCP, L1 and LHALF use eta = lambda.
inline PenaltyParams cell_params(PenaltyKind kind, double lambda, double alpha)
{
    if (kind == PenaltyKind::kep) return PenaltyParams::from_lambda(lambda, alpha);
    PenaltyParams p{lambda, alpha, 1, std::nullopt};
    p.validate();
    return p;
}

inline bool cell_admissible(PenaltyKind kind, const PenaltyParams& params)
{
    return !(kind == PenaltyKind::kep || kind == PenaltyKind::mcp) || params.eta_alpha() < 1.0;
}

struct PathOptions
{
    PenaltyKind kind = PenaltyKind::kep;
    PathSolver solver = PathSolver::coordinate_descent;
    double tol = 1e-6;
    int max_sweeps = 1000;
    bool record_traces = false;
    int lla_max_outer = 200;
};

struct PathCell
{
    Eigen::VectorXd coefficients;
    std::vector<double> objective_trace;
    PenaltyParams params;
    int sweeps = 0;
    bool converged = false;
};

/// Two-dimensional solution over a PathGrid.
struct PathSolution
{
    PathGrid grid;
    PenaltyKind kind = PenaltyKind::kep;
    std::vector<std::optional<PathCell>> cells;     ///< row-major, index l * K + k
    std::set<CellIndex> skipped_cells;              ///< eta_lk * alpha_k >= 1
    std::set<CellIndex> nonconverged_cells;         ///< hit max_sweeps; best iterate kept

    std::size_t index(std::size_t l, std::size_t k) const { return l * grid.K() + k; }
    const PathCell* cell(std::size_t l, std::size_t k) const
    {
        const auto& c = cells.at(index(l, k));
        return c ? &*c : nullptr;
    }
};

struct LlaResult
{
    Eigen::VectorXd coefficients;
    int outer_iterations = 0;
    int inner_sweeps = 0;
    bool converged = false;
    std::vector<Eigen::VectorXd> iterates;  ///< b^(1), b^(2), ... when requested
};

/**
 * Multi-stage local linear approximation for KEP: repeatedly solve the
 * weighted lasso with w_j = eta / sqrt(1 + 2 alpha |b_j|) at the current
 * iterate, by soft-thresholding coordinate descent, until the outer
 * iterates move by at most outer_tol.
 */
inline LlaResult lla_solve(const StandardizedDesign& design,
                           const PenaltyParams& params,
                           const Eigen::Ref<const Eigen::VectorXd>& init,
                           double inner_tol = 1e-9,
                           double outer_tol = 1e-6,
                           int max_outer = 200,
                           int max_inner_sweeps = 1000,
                           bool keep_iterates = false)
{
    params.validate();
    detail::require_convex_regime(params, PenaltyKind::kep);
    detail::require_nondegenerate(design);
    detail::require(inner_tol > 0 && outer_tol > 0 && max_outer > 0, "lla_solve: tolerances and max_outer must be positive");

    LlaResult out;
    Eigen::VectorXd b = detail::prepare_init(design, init);
    Eigen::VectorXd r = design.y - design.X * b;
    Eigen::VectorXd w(design.p());
    while (out.outer_iterations < max_outer) {
        const Eigen::VectorXd prev = b;
        for (Eigen::Index j = 0; j < b.size(); ++j) w[j] = kep_penalty_derivative(std::abs(prev[j]), params);
        auto update = [&](Eigen::Index j, double zj) { return soft_threshold(zj, w[j]); };
        for (int s = 0; s < max_inner_sweeps; ++s) {
            ++out.inner_sweeps;
            if (detail::sweep(design, b, r, update) <= inner_tol) break;
        }
        ++out.outer_iterations;
        if (keep_iterates) out.iterates.push_back(b);
        if ((b - prev).cwiseAbs().maxCoeff() <= outer_tol) {
            out.converged = true;
            break;
        }
    }
    out.coefficients = std::move(b);
    return out;
}

/// Solve one grid with warm starts. Outer loop over lambda from largest to
/// smallest, inner loop over alpha from the lasso end (alpha_K) upward; each
/// lambda row starts from the alpha_K solution of the previous row.
inline PathSolution cd_path(const StandardizedDesign& design, const PathGrid& grid, const PathOptions& opts)
{
    grid.validate();
    detail::require_nondegenerate(design);
    detail::require(opts.tol > 0 && opts.max_sweeps > 0, "cd_path: tol and max_sweeps must be positive");
    if (opts.solver == PathSolver::lla) {
        detail::require(opts.kind == PenaltyKind::kep, "cd_path: the LLA solver is defined for KEP");
    }

    PathSolution sol;
    sol.grid = grid;
    sol.kind = opts.kind;
    sol.cells.resize(grid.L() * grid.K());

    Eigen::VectorXd row_start = Eigen::VectorXd::Zero(design.p());
    for (std::size_t l = grid.L(); l-- > 0;) {
        Eigen::VectorXd b = row_start;
        for (std::size_t k = grid.K(); k-- > 0;) {
            const PenaltyParams params = cell_params(opts.kind, grid.lambdas[l], grid.alphas[k]);
            if (!cell_admissible(opts.kind, params)) {
                sol.skipped_cells.insert({l, k});
                continue;
            }
            PathCell cell;
            cell.params = params;
            if (opts.solver == PathSolver::coordinate_descent) {
                CdResult res = cd_single(design, params, opts.kind, b, opts.tol, opts.max_sweeps, opts.record_traces);
                cell.coefficients = std::move(res.coefficients);
                cell.objective_trace = std::move(res.objective_trace);
                cell.sweeps = res.sweeps;
                cell.converged = res.converged;
            } else {
                LlaResult res = lla_solve(design, params, b, std::min(1e-9, opts.tol), opts.tol,
                                          opts.lla_max_outer, opts.max_sweeps);
                cell.coefficients = std::move(res.coefficients);
                cell.sweeps = res.inner_sweeps;
                cell.converged = res.converged;
                if (opts.record_traces) cell.objective_trace.push_back(objective(design, cell.coefficients, params, opts.kind));
            }
            if (!cell.converged) sol.nonconverged_cells.insert({l, k});
            b = cell.coefficients;
            if (k + 1 == grid.K()) row_start = b;
            sol.cells[sol.index(l, k)] = std::move(cell);
        }
    }
    return sol;
}

inline PathSolution cd_path(const StandardizedDesign& design, const PathGrid& grid,
                            double tol = 1e-6, int max_sweeps = 1000)
{
    PathOptions opts;
    opts.tol = tol;
    opts.max_sweeps = max_sweeps;
    return cd_path(design, grid, opts);
}

/// max_j |x_j^T y|: the smallest lambda at which every soft-threshold
/// coordinate stays at zero from b = 0.
inline double lambda_max(const StandardizedDesign& design)
{
    return (design.X.transpose() * design.y).cwiseAbs().maxCoeff();
}

/// Largest alpha with nesting_eta(lambda, alpha) * alpha < 1, by bisection.
inline double alpha_cap(double lambda)
{
    auto f = [&](double a) { return nesting_eta(lambda, a) * a - 1.0; };
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) < 0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0 ? lo : hi) = mid;
    }
    return lo;
}

/**
 * Default grid: L lambdas log-uniform on [0.001 lambda_max, lambda_max] and
 * K alphas log-uniform from alpha_cap(lambda_min) down to 1e-4 (or lower if
 * the cap itself is that small). K = 1 gives the single lasso-end alpha.
 */
inline PathGrid default_grid(const StandardizedDesign& design, std::size_t L = 50, std::size_t K = 20)
{
    detail::require(L >= 1 && K >= 1, "default_grid: L and K must be >= 1");
    const double lmax = lambda_max(design);
    detail::require(lmax > 0, "default_grid: response is orthogonal to every column");
    PathGrid g;
    const double lmin = 1e-3 * lmax;
    for (std::size_t i = 0; i < L; ++i) {
        const double f = L == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(L - 1);
        g.lambdas.push_back(lmin * std::pow(lmax / lmin, f));
    }
    const double hi = 0.999 * alpha_cap(lmin);
    const double lo = std::min(1e-4, 0.1 * hi);
    if (K == 1) {
        g.alphas.push_back(lo);
    } else {
        for (std::size_t i = 0; i < K; ++i) {
            const double f = static_cast<double>(i) / static_cast<double>(K - 1);
            g.alphas.push_back(hi * std::pow(lo / hi, f));
        }
    }
    return g;
}

struct IrlsOptions
{
    double epsilon0 = 1.0;
    std::optional<Eigen::Index> sparsity_index;  ///< k; default ceil(p / 10)
    double tol = 1e-6;
    int max_iter = 1000;
    double inner_tol = 1e-10;       ///< q = 1 weighted-lasso sweeps
    int max_inner_sweeps = 10000;
};

struct IrlsResult
{
    Eigen::VectorXd coefficients;
    WeightVector weights;
    std::vector<double> epsilons;   ///< epsilon^(0), epsilon^(1), ...
    int iterations = 0;
    bool converged = false;
    bool epsilon_vanished = false;  ///< iterate became exactly k-sparse
};

/// (k+1)-th largest |b_j| (k is zero-based here, so r_{k+1} in one-based terms).
inline double order_statistic(const Eigen::Ref<const Eigen::VectorXd>& b, Eigen::Index k)
{
    detail::require(k >= 0 && k < b.size(), "order_statistic: index out of range");
    std::vector<double> mags(static_cast<std::size_t>(b.size()));
    for (Eigen::Index j = 0; j < b.size(); ++j) mags[static_cast<std::size_t>(j)] = std::abs(b[j]);
    auto nth = mags.begin() + k;
    std::nth_element(mags.begin(), nth, mags.end(), std::greater<>());
    return *nth;
}

/**
 * Iteratively reweighted l_q (q in {1, 2}) for
 *   1/2 ||y - X b||^2 + (lambda/2) sum_j [ |b_j|^q w_j + eps^2 w_j + 1/w_j ].
 * Alternates the b-update at fixed weights (weighted ridge for q = 2,
 * weighted lasso by coordinate descent for q = 1), the shrinking
 * eps <- min(eps, r_{k+1}(b)/p), and w_j = 1/sqrt(|b_j|^q + eps^2).
 */
inline IrlsResult irls_lq(const StandardizedDesign& design, double lambda, int q, const IrlsOptions& opts = {})
{
    detail::require_nondegenerate(design);
    if (!(std::isfinite(lambda) && lambda > 0)) throw domain_error("irls_lq: lambda must be > 0");
    if (q != 1 && q != 2) throw domain_error("irls_lq: q must be 1 or 2");
    if (!(opts.epsilon0 > 0)) throw domain_error("irls_lq: epsilon0 must be > 0");
    const Eigen::Index n = design.n();
    const Eigen::Index p = design.p();
    const Eigen::Index k = opts.sparsity_index.value_or((p + 9) / 10);
    detail::require(k >= 1 && k < p, "irls_lq: sparsity index must satisfy 1 <= k < p");

    IrlsResult out;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    double eps = opts.epsilon0;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(p, 1.0 / eps);
    out.epsilons.push_back(eps);

    Eigen::MatrixXd gram;
    Eigen::VectorXd xty;
    if (q == 2 && p <= n) {
        gram = design.X.transpose() * design.X;
        xty = design.X.transpose() * design.y;
    }
    Eigen::VectorXd r = design.y;

    auto solve_ridge = [&]() -> Eigen::VectorXd {
        if (p <= n) {
            Eigen::MatrixXd A = gram;
            A.diagonal() += lambda * w;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success) throw numerical_error("irls_lq: weighted ridge system is singular");
            return llt.solve(xty);
        }
        // (X^T X + lambda W) b = X^T y  <=>  b = W^{-1} X^T (X W^{-1} X^T + lambda I)^{-1} y
        const Eigen::VectorXd winv = w.cwiseInverse();
        const Eigen::MatrixXd XW = design.X * winv.asDiagonal();
        Eigen::MatrixXd A = XW * design.X.transpose();
        A.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) throw numerical_error("irls_lq: weighted ridge system is singular");
        return XW.transpose() * llt.solve(design.y);
    };

    while (out.iterations < opts.max_iter) {
        Eigen::VectorXd next;
        if (q == 2) {
            next = solve_ridge();
        } else {
            next = b;
            auto update = [&](Eigen::Index j, double zj) { return soft_threshold(zj, 0.5 * lambda * w[j]); };
            for (int s = 0; s < opts.max_inner_sweeps; ++s) {
                if (detail::sweep(design, next, r, update) <= opts.inner_tol) break;
            }
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!design.active(j)) next[j] = 0.0;
        }
        ++out.iterations;
        const double change = (next - b).cwiseAbs().maxCoeff();
        b = std::move(next);

        eps = std::min(eps, order_statistic(b, k) / static_cast<double>(p));
        out.epsilons.push_back(eps);
        if (eps == 0.0) {
            out.epsilon_vanished = true;
            out.converged = true;
            break;
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            w[j] = 1.0 / std::sqrt(detail::pow_q(std::abs(b[j]), q) + eps * eps);
        }
        if (change <= opts.tol) {
            out.converged = true;
            break;
        }
    }
    out.coefficients = std::move(b);
    out.weights = WeightVector(w);
    return out;
}

} // namespace kep
