#pragma once
#include <cmath>
#include <string>
#include <vector>
#include <Eigen/Core>
#include <kep/error.hpp>

namespace kep {

/// Per-column record needed to map standardized coefficients back.
struct ColumnScaling
{
    double mean = 0.0;
    double norm = 1.0;
    bool excluded = false;  ///< constant column; forced to a zero coefficient
};

enum class ConstantColumnPolicy
{
    reject,     ///< throw precondition_error
    exclude     ///< zero the column, mark it excluded, keep going
};

/**
 * Response and design with every active column centered and scaled to unit
 * Euclidean length. y is centered; y_mean restores the intercept.
 */
struct StandardizedDesign
{
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    double y_mean = 0.0;
    std::vector<ColumnScaling> scaling;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }
    bool active(Eigen::Index j) const { return !scaling[static_cast<std::size_t>(j)].excluded; }

    std::vector<Eigen::Index> excluded_columns() const
    {
        std::vector<Eigen::Index> out;
        for (Eigen::Index j = 0; j < p(); ++j) {
            if (!active(j)) out.push_back(j);
        }
        return out;
    }

    /// Coefficients on the original column scale.
    Eigen::VectorXd to_original(const Eigen::Ref<const Eigen::VectorXd>& b) const
    {
        detail::require(b.size() == p(), "to_original: size mismatch");
        Eigen::VectorXd out(p());
        for (Eigen::Index j = 0; j < p(); ++j) {
            const auto& s = scaling[static_cast<std::size_t>(j)];
            out[j] = s.excluded ? 0.0 : b[j] / s.norm;
        }
        return out;
    }

    /// Intercept on the original scale for standardized coefficients b.
    double intercept(const Eigen::Ref<const Eigen::VectorXd>& b) const
    {
        const Eigen::VectorXd raw = to_original(b);
        double c = y_mean;
        for (Eigen::Index j = 0; j < p(); ++j) c -= scaling[static_cast<std::size_t>(j)].mean * raw[j];
        return c;
    }

    /// Throws unless every active column has |mean| <= tol and | ||x|| - 1 | <= tol.
    void check(double tol = 1e-10) const
    {
        detail::require(y.size() == n(), "design: y length must equal number of rows");
        detail::require(static_cast<Eigen::Index>(scaling.size()) == p(), "design: scaling record size mismatch");
        for (Eigen::Index j = 0; j < p(); ++j) {
            if (!active(j)) continue;
            const double mean = X.col(j).mean();
            const double norm = X.col(j).norm();
            if (!(std::abs(mean) <= tol && std::abs(norm - 1.0) <= tol)) {
                throw precondition_error("design column " + std::to_string(j) + " is not standardized");
            }
        }
    }

    /// Wrap a design that is already standardized. y is used as given.
    static StandardizedDesign from_standardized(Eigen::MatrixXd X, Eigen::VectorXd y)
    {
        StandardizedDesign d;
        d.scaling.assign(static_cast<std::size_t>(X.cols()), ColumnScaling{});
        d.X = std::move(X);
        d.y = std::move(y);
        d.check();
        return d;
    }
};

/// Center and scale columns to unit length; center y.
inline StandardizedDesign standardize(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                      const Eigen::Ref<const Eigen::VectorXd>& y,
                                      ConstantColumnPolicy policy = ConstantColumnPolicy::reject)
{
    detail::require(X.rows() == y.size(), "standardize: X rows must match y length");
    detail::require(X.rows() >= 2, "standardize: need at least two rows");
    StandardizedDesign d;
    d.X = X;
    d.y_mean = y.mean();
    d.y = y.array() - d.y_mean;
    d.scaling.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        auto& s = d.scaling[static_cast<std::size_t>(j)];
        s.mean = X.col(j).mean();
        d.X.col(j).array() -= s.mean;
        const double raw_scale = std::max(1.0, X.col(j).cwiseAbs().maxCoeff());
        s.norm = d.X.col(j).norm();
        if (!(s.norm > 1e-12 * raw_scale * std::sqrt(static_cast<double>(X.rows())))) {
            if (policy == ConstantColumnPolicy::reject) {
                throw precondition_error("column " + std::to_string(j) + " is constant (degenerate)");
            }
            s.excluded = true;
            s.norm = 0.0;
            d.X.col(j).setZero();
            continue;
        }
        d.X.col(j) /= s.norm;
    }
    return d;
}

} // namespace kep
