#pragma once
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>
#include <Eigen/Core>
#include <kep/design.hpp>
#include <kep/rng.hpp>
#include <kep/solvers.hpp>

namespace kep {

struct CvResult
{
    PathGrid grid;
    std::vector<double> cv_error;       ///< l * K + k; NaN for skipped cells
    CellIndex best_cell;
    std::vector<int> fold_assignments;
    std::vector<std::string> warnings;

    double error(std::size_t l, std::size_t k) const { return cv_error.at(l * grid.K() + k); }
};

/// Seeded random fold labels in [0, folds); fold sizes differ by at most one.
inline std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed)
{
    detail::require(folds >= 2, "assign_folds: folds must be >= 2");
    detail::require(n >= static_cast<std::size_t>(folds), "assign_folds: need at least one row per fold");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(seed, 0xf01d);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(perm[i - 1], perm[j]);
    }
    std::vector<int> labels(n);
    for (std::size_t pos = 0; pos < n; ++pos) labels[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return labels;
}

/**
 * K-fold cross-validation of a path over `grid` on raw data (X, y).
 *
 * Each fold re-standardizes its held-in rows, fits the path, and scores the
 * held-out rows by mean squared error on the original scale. best_cell
 * minimizes the fold-averaged error over admissible cells; ties go to the
 * larger lambda, then the larger alpha.
 */
inline CvResult cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::Ref<const Eigen::VectorXd>& y,
                               const PathGrid& grid,
                               int folds,
                               std::uint64_t seed,
                               const PathOptions& opts = {})
{
    grid.validate();
    detail::require(X.rows() == y.size(), "cross_validate: X rows must match y length");
    const auto n = static_cast<std::size_t>(X.rows());

    CvResult out;
    out.grid = grid;
    out.fold_assignments = assign_folds(n, folds, seed);
    const std::size_t cells = grid.L() * grid.K();
    std::vector<double> sum(cells, 0.0);
    std::vector<bool> skipped(cells, false);

    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> in, held;
        for (std::size_t i = 0; i < n; ++i) (out.fold_assignments[i] == f ? held : in).push_back(static_cast<Eigen::Index>(i));
        detail::require(in.size() >= 2, "cross_validate: fold leaves fewer than two training rows");
        Eigen::MatrixXd Xin(static_cast<Eigen::Index>(in.size()), X.cols());
        Eigen::VectorXd yin(static_cast<Eigen::Index>(in.size()));
        for (std::size_t i = 0; i < in.size(); ++i) {
            Xin.row(static_cast<Eigen::Index>(i)) = X.row(in[i]);
            yin[static_cast<Eigen::Index>(i)] = y[in[i]];
        }
        Eigen::MatrixXd Xout(static_cast<Eigen::Index>(held.size()), X.cols());
        Eigen::VectorXd yout(static_cast<Eigen::Index>(held.size()));
        for (std::size_t i = 0; i < held.size(); ++i) {
            Xout.row(static_cast<Eigen::Index>(i)) = X.row(held[i]);
            yout[static_cast<Eigen::Index>(i)] = y[held[i]];
        }

        const StandardizedDesign d = standardize(Xin, yin, ConstantColumnPolicy::exclude);
        for (auto j : d.excluded_columns()) {
            out.warnings.push_back("fold " + std::to_string(f) + ": column " + std::to_string(j) +
                                   " constant on held-in rows; coefficient fixed at 0");
        }
        const PathSolution path = cd_path(d, grid, opts);
        for (std::size_t l = 0; l < grid.L(); ++l) {
            for (std::size_t k = 0; k < grid.K(); ++k) {
                const std::size_t idx = l * grid.K() + k;
                const PathCell* c = path.cell(l, k);
                if (!c) {
                    skipped[idx] = true;
                    continue;
                }
                const Eigen::VectorXd raw = d.to_original(c->coefficients);
                const double b0 = d.intercept(c->coefficients);
                const Eigen::VectorXd resid = (yout - Xout * raw).array() - b0;
                sum[idx] += resid.squaredNorm() / static_cast<double>(held.size());
            }
        }
    }

    out.cv_error.assign(cells, std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    // Parsimony order: largest lambda first, then largest alpha (k = 0).
    for (std::size_t l = grid.L(); l-- > 0;) {
        for (std::size_t k = 0; k < grid.K(); ++k) {
            const std::size_t idx = l * grid.K() + k;
            if (skipped[idx]) continue;
            const double e = sum[idx] / folds;
            out.cv_error[idx] = e;
            if (!found || e < best - 1e-12 * std::abs(best)) {
                best = e;
                out.best_cell = {l, k};
                found = true;
            }
        }
    }
    if (!found) throw precondition_error("cross_validate: every grid cell is skipped");
    return out;
}

} // namespace kep
