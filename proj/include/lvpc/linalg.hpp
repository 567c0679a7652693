#pragma once

#include <Eigen/Dense>
#include <string>

#include "lvpc/error.hpp"

namespace lvpc {

/// Weighted least squares with an intercept; coefficients are [c, b_1..b_k].
struct OlsResult {
    double intercept = 0;
    Eigen::VectorXd slopes;
    Eigen::VectorXd residuals;
};

/// Solves min sum_t w_t (y_t - c - X_t b)^2 by QR on the sqrt(w)-scaled system.
inline OlsResult weighted_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const std::string& context = "weighted_ols") {
    const Eigen::Index s = y.size(), k = X.cols();
    if (X.rows() != s || w.size() != s) throw std::invalid_argument(context + ": dimension mismatch");
    if (s < k + 1) throw InsufficientDataError(context + ": fewer rows than coefficients");
    Eigen::MatrixXd A(s, k + 1);
    A.col(0).setOnes();
    A.rightCols(k) = X;
    const Eigen::ArrayXd sw = w.array().sqrt();
    const Eigen::MatrixXd As = A.array().colwise() * sw;
    const Eigen::VectorXd ys = (y.array() * sw).matrix();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
    qr.setThreshold(1e-12);
    if (qr.rank() < k + 1) throw SingularMatrixError(context + ": rank-deficient design");
    const Eigen::VectorXd beta = qr.solve(ys);
    OlsResult out;
    out.intercept = beta(0);
    out.slopes = beta.tail(k);
    out.residuals = y - A * beta;
    return out;
}

/// Solves the symmetric system G x = b; throws when G is numerically singular.
inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const std::string& context) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const double scale = G.diagonal().cwiseAbs().maxCoeff();
    // rcond() misses exact rank deficiency; the pivoted diagonal catches it.
    const Eigen::VectorXd D = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || !(scale > 0) || ldlt.rcond() < 1e-13 || !(D.minCoeff() > 1e-13 * D.maxCoeff())) {
        throw SingularMatrixError(context + ": singular Gram matrix");
    }
    return ldlt.solve(b);
}

}  // namespace lvpc
