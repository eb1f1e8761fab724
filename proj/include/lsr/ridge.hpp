#pragma once

#include <lsr/error.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lsr {

/// Indices of the nonzero (unit) entries of a binary feature vector.
using SparseBinaryRow = std::vector<std::uint32_t>;

/// Linear map from a sparse binary feature to a stacked shape update
/// [dx0, dy0, dx1, dy1, ...].
struct GlobalLinearStage {
    Eigen::MatrixXd weights; // output_dim x feature_dim
    double mu = 0.0;

    std::size_t output_dim() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t feature_dim() const { return static_cast<std::size_t>(weights.cols()); }

    Eigen::VectorXd apply(const SparseBinaryRow& phi) const
    {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(weights.rows());
        for (auto d : phi) {
            out += weights.col(static_cast<Eigen::Index>(d));
        }
        return out;
    }
};

namespace detail {

inline void check_rows(std::span<const SparseBinaryRow> phi, std::size_t feature_dim)
{
    for (const auto& row : phi) {
        for (auto d : row) {
            if (d >= feature_dim) {
                throw DimensionMismatch("feature index out of range");
            }
        }
    }
}

// Cholesky with a rank check that only matters for the unregularized case.
inline Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& gram, double mu)
{
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem("normal equations are not positive definite");
    }
    if (mu == 0.0) {
        const double max_diag = gram.diagonal().maxCoeff();
        const Eigen::VectorXd l_diag = llt.matrixLLT().diagonal();
        if (!(l_diag.minCoeff() * l_diag.minCoeff() > 1e-12 * max_diag)) {
            throw SingularSystem("Gram matrix is rank-deficient and mu = 0");
        }
    }
    return llt;
}

} // namespace detail

/// Weighted ridge regression over binary features:
///   minimize sum_i v_i |y_i - W phi_i|^2 + mu |W|_F^2.
///
/// Rows with v_i = 0 are dropped before anything is accumulated, so the result
/// is bit-identical to solving on the survivors alone. The normal equations are
/// solved by Cholesky in primal form (feature_dim^2) or, when there are fewer
/// survivors than features and mu > 0, in the equivalent kernel form
/// W^T = Phi (Phi^T Phi + mu I)^-1 Y.
inline GlobalLinearStage train_global_regression(std::span<const SparseBinaryRow> phi, const Eigen::MatrixXd& targets,
                                                 std::span<const std::uint8_t> v, std::size_t feature_dim, double mu)
{
    if (phi.size() != static_cast<std::size_t>(targets.rows()) || phi.size() != v.size()) {
        throw DimensionMismatch("train_global_regression: features, targets and flags disagree in length");
    }
    if (!(mu >= 0.0)) {
        throw InvalidConfig("ridge weight mu must be >= 0");
    }
    if (feature_dim == 0) {
        throw DimensionMismatch("feature dimension must be positive");
    }
    detail::check_rows(phi, feature_dim);

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0) {
            keep.push_back(i);
        }
    }
    if (keep.empty()) {
        throw NoSurvivors("no sample has v = 1");
    }
    const auto out_dim = targets.cols();
    const auto n = static_cast<Eigen::Index>(keep.size());
    const auto dim = static_cast<Eigen::Index>(feature_dim);

    GlobalLinearStage stage;
    stage.mu = mu;
    stage.weights = Eigen::MatrixXd::Zero(out_dim, dim);

    if (mu > 0.0 && n < dim) {
        // Kernel form: K_ij counts the active features shared by samples i and j.
        std::vector<std::vector<Eigen::Index>> members(feature_dim);
        for (Eigen::Index k = 0; k < n; ++k) {
            for (auto d : phi[keep[static_cast<std::size_t>(k)]]) {
                members[d].push_back(k);
            }
        }
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
        for (const auto& m : members) {
            for (std::size_t a = 0; a < m.size(); ++a) {
                for (std::size_t b = 0; b < m.size(); ++b) {
                    gram(m[a], m[b]) += 1.0;
                }
            }
        }
        gram.diagonal().array() += mu;
        Eigen::MatrixXd y(n, out_dim);
        for (Eigen::Index k = 0; k < n; ++k) {
            y.row(k) = targets.row(static_cast<Eigen::Index>(keep[static_cast<std::size_t>(k)]));
        }
        const Eigen::MatrixXd alpha = detail::factor_spd(gram, mu).solve(y);
        for (std::size_t d = 0; d < feature_dim; ++d) {
            for (auto k : members[d]) {
                stage.weights.col(static_cast<Eigen::Index>(d)) += alpha.row(k).transpose();
            }
        }
        return stage;
    }

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, out_dim);
    for (auto i : keep) {
        const auto& row = phi[i];
        for (auto a : row) {
            for (auto b : row) {
                gram(a, b) += 1.0;
            }
            rhs.row(a) += targets.row(static_cast<Eigen::Index>(i));
        }
    }
    gram.diagonal().array() += mu;
    stage.weights = detail::factor_spd(gram, mu).solve(rhs).transpose();
    return stage;
}

/// sum_i v_i |y_i - W phi_i|^2 + mu |W|^2
inline double ridge_objective(const GlobalLinearStage& stage, std::span<const SparseBinaryRow> phi,
                              const Eigen::MatrixXd& targets, std::span<const std::uint8_t> v)
{
    double total = stage.mu * stage.weights.squaredNorm();
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (v[i] != 0) {
            total += (targets.row(static_cast<Eigen::Index>(i)).transpose() - stage.apply(phi[i])).squaredNorm();
        }
    }
    return total;
}

} // namespace lsr
