#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lvpc/design.hpp"
#include "lvpc/error.hpp"
#include "lvpc/linalg.hpp"
#include "lvpc/optim.hpp"

/// Latent Shock Regression.
///
/// The model regresses y_t on F lags of a latent series x~_t = X_t w:
///
///     y_t = c + sum_{tau=1..F} beta_tau x~_{t-tau} + e_t,
///
/// i.e. y = c + P (beta (x) w) with P = [L^1 X, ..., L^F X]. Conditional on w the
/// problem is OLS in beta and vice versa, so the estimator alternates the two exact
/// conditional least-squares steps until the parameters stop moving.
namespace lvpc::lsr {

struct LsrConfig {
    int F = 8;
    double tol = 1e-10;
    int max_fp_iters = 1000;
    bool include_ar_term = false;
    bool ma1 = false;
    optim::SimplexOptions ml_opts{};

    void validate() const {
        if (F < 1) throw std::invalid_argument("LsrConfig: F must be >= 1");
        if (!(tol > 0)) throw std::invalid_argument("LsrConfig: tol must be positive");
        if (max_fp_iters < 1) throw std::invalid_argument("LsrConfig: max_fp_iters must be >= 1");
    }
};

struct LsrFit {
    int n = 0;
    int F = 0;
    double c = 0;
    Eigen::VectorXd beta;   // time profile, carries the scale
    Eigen::VectorXd omega;  // unit norm, first nonzero entry positive
    std::optional<double> phi;    // coefficient on y_{t-1} when fitted with an AR term
    double rho = 0;
    std::optional<double> theta;  // MA(1) coefficient
    double xtilde_mean = 0;
    double last_residual = 0;     // e_t at the end of the sample (MA fits)
    int iterations = 0;
    bool converged = false;
    double objective = 0;
    std::vector<double> objective_trace;  // objective after each fixed-point sweep

    /// c, rho, omega (n-1 free + absorbed scale) and beta: 2 + n + F, plus AR/MA terms.
    int parameter_count() const { return 2 + n + F + (phi ? 1 : 0) + (theta ? 1 : 0); }

    /// beta (x) omega, flattened in design-column order.
    Eigen::VectorXd coefficients() const {
        Eigen::VectorXd k(n * F);
        for (int tau = 0; tau < F; ++tau) k.segment(tau * n, n) = beta(tau) * omega;
        return k;
    }
};

namespace detail {

inline Eigen::VectorXd kron(const Eigen::VectorXd& beta, const Eigen::VectorXd& omega) {
    const Eigen::Index n = omega.size();
    Eigen::VectorXd k(beta.size() * n);
    for (Eigen::Index tau = 0; tau < beta.size(); ++tau) k.segment(tau * n, n) = beta(tau) * omega;
    return k;
}

/// Puts (beta, omega) in canonical form: ||omega|| = 1, first nonzero entry positive.
inline void canonicalize(Eigen::VectorXd& beta, Eigen::VectorXd& omega) {
    const double nrm = omega.norm();
    if (!(nrm > 0)) return;
    omega /= nrm;
    beta *= nrm;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        if (std::abs(omega(i)) > 1e-12) {
            if (omega(i) < 0) {
                omega = -omega;
                beta = -beta;
            }
            break;
        }
    }
}

inline double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Sigma_y - 2 k' Sigma_Py + k' Sigma_P k with k = [beta (x) omega; extra].
/// Columns of the moments beyond the latent block are treated as zero-coefficient when `extra` is empty.
inline double lsr_objective(const WeightedMoments& m, const Eigen::VectorXd& beta, const Eigen::VectorXd& omega,
                            const Eigen::VectorXd& extra = Eigen::VectorXd()) {
    if (beta.size() * omega.size() != m.latent_cols) throw std::invalid_argument("lsr_objective: dimension mismatch");
    if (extra.size() != 0 && extra.size() != m.extra_cols()) throw std::invalid_argument("lsr_objective: extra mismatch");
    Eigen::VectorXd k = Eigen::VectorXd::Zero(m.Pbar.size());
    k.head(m.latent_cols) = detail::kron(beta, omega);
    if (extra.size()) k.tail(extra.size()) = extra;
    return m.Sigma_y - 2.0 * k.dot(m.Sigma_Py) + k.dot(m.Sigma_P * k);
}

namespace detail {

inline LsrFit fixed_point(const WeightedMoments& m, int n, int F, const LsrConfig& cfg, bool use_extra) {
    cfg.validate();
    if (n < 1 || static_cast<Eigen::Index>(n) * F != m.latent_cols) {
        throw std::invalid_argument("lsr_fit: moments do not match n*F latent columns");
    }
    const Eigen::Index k = use_extra ? m.extra_cols() : 0;
    if (use_extra && k < 1) throw std::invalid_argument("lsr_fit_ar: moments carry no extra (AR) column");
    const Eigen::Index nF = m.latent_cols;
    const Eigen::Index cols = nF + k;
    Eigen::MatrixXd S(cols, cols);
    S.topLeftCorner(nF, nF) = m.Sigma_P.topLeftCorner(nF, nF);
    Eigen::VectorXd Sy(cols);
    Sy.head(nF) = m.Sigma_Py.head(nF);
    if (k) {
        S.topRightCorner(nF, k) = m.Sigma_P.block(0, m.latent_cols, nF, k);
        S.bottomLeftCorner(k, nF) = m.Sigma_P.block(m.latent_cols, 0, k, nF);
        S.bottomRightCorner(k, k) = m.Sigma_P.block(m.latent_cols, m.latent_cols, k, k);
        Sy.tail(k) = m.Sigma_Py.segment(m.latent_cols, k);
    }

    LsrFit fit;
    fit.n = n;
    fit.F = F;
    Eigen::VectorXd omega = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(F);
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(k);

    for (int it = 1; it <= cfg.max_fp_iters; ++it) {
        const Eigen::VectorXd beta_prev = beta, omega_prev = omega, gamma_prev = gamma;

        // beta step: regressors P (I_F (x) omega) plus the extra block.
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(cols, F + k);
        for (int tau = 0; tau < F; ++tau) A.block(tau * n, tau, n, 1) = omega;
        if (k) A.bottomRightCorner(k, k).setIdentity();
        Eigen::VectorXd sol =
            solve_spd(A.transpose() * S * A, A.transpose() * Sy, "lsr beta step, iteration " + std::to_string(it));
        beta = sol.head(F);
        gamma = sol.tail(k);

        // omega step: regressors P (beta (x) I_n) plus the extra block.
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(cols, n + k);
        for (int tau = 0; tau < F; ++tau) B.block(tau * n, 0, n, n) = beta(tau) * Eigen::MatrixXd::Identity(n, n);
        if (k) B.bottomRightCorner(k, k).setIdentity();
        sol = solve_spd(B.transpose() * S * B, B.transpose() * Sy, "lsr omega step, iteration " + std::to_string(it));
        omega = sol.head(n);
        gamma = sol.tail(k);

        canonicalize(beta, omega);
        fit.objective_trace.push_back(lsr_objective(m, beta, omega, k ? Eigen::VectorXd(gamma) : Eigen::VectorXd()));
        fit.iterations = it;
        const double delta = std::max({max_abs_diff(beta, beta_prev), max_abs_diff(omega, omega_prev),
                                       max_abs_diff(gamma, gamma_prev)});
        if (it > 1 && delta < cfg.tol) {
            fit.converged = true;
            break;
        }
    }

    fit.beta = beta;
    fit.omega = omega;
    if (k) fit.phi = gamma(0);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(m.Pbar.size());
    coef.head(nF) = kron(beta, omega);
    if (k) coef.segment(nF, k) = gamma;
    fit.c = m.ybar - m.Pbar.dot(coef);
    fit.objective = fit.objective_trace.empty() ? m.Sigma_y : fit.objective_trace.back();
    return fit;
}

}  // namespace detail

/// Plain LSR by fixed-point iteration from omega_0 = n^(-1/2) * ones.
inline LsrFit lsr_fit(const WeightedMoments& m, int n, int F, const LsrConfig& cfg = {}) {
    return detail::fixed_point(m, n, F, cfg, false);
}

/// LSR with the dependent's first lag as an observed regressor outside the latent block.
/// The moments must come from a design built with ar_order >= 1.
inline LsrFit lsr_fit_ar(const WeightedMoments& m, int n, int F, const LsrConfig& cfg = {}) {
    return detail::fixed_point(m, n, F, cfg, true);
}

/// x~_t = X_t omega for every row.
inline Eigen::VectorXd latent_series(const Eigen::MatrixXd& X, const Eigen::VectorXd& omega) {
    if (X.cols() != omega.size()) throw std::invalid_argument("latent_series: row width mismatch");
    return X * omega;
}

/// Weighted lag-1 autocorrelation, clamped to [-0.999, 0.999]; zero for a constant series.
inline double estimate_rho(std::span<const double> xtilde, std::span<const double> weights) {
    if (xtilde.size() < 3) throw InsufficientDataError("estimate_rho: need at least 3 observations");
    if (weights.size() != xtilde.size()) throw std::invalid_argument("estimate_rho: weight length mismatch");
    double wsum = 0, mean = 0;
    for (std::size_t t = 0; t < xtilde.size(); ++t) {
        wsum += weights[t];
        mean += weights[t] * xtilde[t];
    }
    mean /= wsum;
    double num = 0, den = 0;
    for (std::size_t t = 0; t < xtilde.size(); ++t) {
        const double d = xtilde[t] - mean;
        den += weights[t] * d * d;
        if (t > 0) num += weights[t] * d * (xtilde[t - 1] - mean);
    }
    if (!(den > 1e-24 * wsum * std::max(1.0, mean * mean))) return 0.0;
    return std::clamp(num / den, -0.999, 0.999);
}

/// Sets rho and the latent mean from the aligned X rows (weighted by `weights`).
inline void attach_latent_dynamics(LsrFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
    const Eigen::VectorXd xt = latent_series(X, fit.omega);
    fit.xtilde_mean = weights.dot(xt) / weights.sum();
    fit.rho = xt.size() >= 3 ? estimate_rho(std::span<const double>(xt.data(), static_cast<std::size_t>(xt.size())),
                                            std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())))
                             : 0.0;
}

/// Conditional MA(1) residuals e_t = y_t - fitted_t - theta e_{t-1} with e_0 = 0 before the first row.
inline Eigen::VectorXd ma_residuals(const Eigen::VectorXd& y_minus_fit, double theta) {
    Eigen::VectorXd e(y_minus_fit.size());
    double prev = 0;
    for (Eigen::Index t = 0; t < e.size(); ++t) {
        e(t) = y_minus_fit(t) - theta * prev;
        prev = e(t);
    }
    return e;
}

/// LSR with MA(1) residuals, y_t = c + sum beta_tau x~_{t-tau} + e_t + theta e_{t-1}.
///
/// Starts from the moment-based fit and a Hannan-Rissanen theta on its residuals, then
/// minimizes the weighted conditional sum of squares with Nelder-Mead. theta outside
/// (-1, 1) is rejected (+inf).
inline LsrFit lsr_fit_ma(const LaggedDesign& design, const Eigen::VectorXd& weights, const LsrConfig& cfg) {
    cfg.validate();
    const int n = design.n, F = design.F;
    const Eigen::Index s = design.rows();
    const bool ar = cfg.include_ar_term;
    if (ar && design.extra.cols() < 1) throw std::invalid_argument("lsr_fit_ma: AR term needs a design with ar_order >= 1");
    if (s <= n + F + 3) throw InsufficientDataError("lsr_fit_ma: too few rows");
    const Eigen::VectorXd w = weights / weights.sum();

    LaggedDesign base = design;
    if (!ar) base.extra.resize(s, 0);
    const WeightedMoments m = weighted_moments(base, w);
    LsrFit init = ar ? lsr_fit_ar(m, n, F, cfg) : lsr_fit(m, n, F, cfg);

    const Eigen::VectorXd z = ar ? Eigen::VectorXd(design.extra.col(0)) : Eigen::VectorXd::Zero(s);
    const double phi0 = init.phi.value_or(0.0);
    const Eigen::VectorXd resid0 = design.y.array() - init.c - (design.P * init.coefficients()).array() - phi0 * z.array();
    double theta0 = 0;
    try {
        const auto hr = optim::hannan_rissanen(std::span<const double>(resid0.data(), static_cast<std::size_t>(s)), 0, 1);
        if (!hr.ma_fallback) theta0 = std::clamp(hr.ma(0), -0.95, 0.95);
    } catch (const Error&) {
        theta0 = 0;
    }

    // Parameter layout: [c, beta(F), omega(n), phi?, theta].
    const Eigen::Index np = 1 + F + n + (ar ? 1 : 0) + 1;
    Eigen::VectorXd x0(np);
    x0(0) = init.c;
    x0.segment(1, F) = init.beta;
    x0.segment(1 + F, n) = init.omega;
    if (ar) x0(1 + F + n) = phi0;
    x0(np - 1) = theta0;

    auto unpack_fitted = [&](const Eigen::VectorXd& x, Eigen::VectorXd& beta, Eigen::VectorXd& omega_u) {
        beta = x.segment(1, F);
        const Eigen::VectorXd om = x.segment(1 + F, n);
        const double nrm = om.norm();
        omega_u = om / nrm;
        Eigen::VectorXd fitted = Eigen::VectorXd::Constant(s, x(0));
        for (int tau = 0; tau < F; ++tau) fitted += beta(tau) * (design.P.middleCols(tau * n, n) * omega_u);
        if (ar) fitted += x(1 + F + n) * z;
        return fitted;
    };
    // CSS in units of var(y) so the simplex tolerances mean the same thing at any data scale.
    const double scale = 1.0 / std::max(m.Sigma_y, 1e-300);
    const auto objective = [&](const Eigen::VectorXd& x) {
        const double theta = x(np - 1);
        if (!(std::abs(theta) < 1.0)) return std::numeric_limits<double>::infinity();
        const double nrm2 = x.segment(1 + F, n).squaredNorm();
        if (!(nrm2 > 0)) return std::numeric_limits<double>::infinity();
        Eigen::VectorXd beta, omega_u;
        const Eigen::VectorXd fitted = unpack_fitted(x, beta, omega_u);
        const Eigen::VectorXd e = ma_residuals(design.y - fitted, theta);
        return scale * w.dot(e.cwiseProduct(e)) + (nrm2 - 1.0) * (nrm2 - 1.0);
    };

    const double ysd = std::sqrt(std::max(m.Sigma_y, 1e-300));
    std::vector<double> steps(static_cast<std::size_t>(np));
    auto group_max = [&](Eigen::Index off, Eigen::Index len) { return len ? x0.segment(off, len).cwiseAbs().maxCoeff() : 0.0; };
    const double bmax = group_max(1, F), omax = group_max(1 + F, n);
    steps[0] = std::max(0.1 * std::abs(x0(0)), 0.01 * ysd);
    for (int i = 0; i < F; ++i) steps[static_cast<std::size_t>(1 + i)] = std::max({0.1 * std::abs(x0(1 + i)), 0.01 * bmax, 1e-12});
    for (int i = 0; i < n; ++i) steps[static_cast<std::size_t>(1 + F + i)] = std::max(0.1 * std::abs(x0(1 + F + i)), 0.01 * omax);
    if (ar) steps[static_cast<std::size_t>(1 + F + n)] = std::max(0.1 * std::abs(phi0), 0.02);
    steps.back() = 0.05;

    const auto res = optim::nelder_mead(objective, x0, cfg.ml_opts, steps);

    LsrFit fit;
    fit.n = n;
    fit.F = F;
    Eigen::VectorXd beta, omega_u;
    const Eigen::VectorXd fitted = unpack_fitted(res.x_min, beta, omega_u);
    const double theta = res.x_min(np - 1);
    const Eigen::VectorXd e = ma_residuals(design.y - fitted, theta);
    detail::canonicalize(beta, omega_u);
    fit.c = res.x_min(0);
    fit.beta = beta;
    fit.omega = omega_u;
    if (ar) fit.phi = res.x_min(1 + F + n);
    fit.theta = theta;
    fit.last_residual = e(s - 1);
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    fit.objective = w.dot(e.cwiseProduct(e));
    fit.objective_trace = init.objective_trace;
    return fit;
}

namespace detail {

// Latent part of the horizon-h forecast: c + sum_tau beta_tau x^_{t+h-tau}.
inline double latent_forecast(const LsrFit& fit, std::span<const double> xtilde, int h) {
    const auto len = static_cast<long>(xtilde.size());
    const double xt = xtilde.back();
    double v = fit.c;
    for (int tau = 1; tau <= fit.F; ++tau) {
        double xhat;
        if (tau >= h) {
            const long idx = len - 1 + h - tau;
            if (idx < 0) throw InsufficientDataError("lsr_predict: latent history too short");
            xhat = xtilde[static_cast<std::size_t>(idx)];
        } else {
            const double r = std::pow(fit.rho, h - tau);
            xhat = r * xt + (1.0 - r) * fit.xtilde_mean;
        }
        v += fit.beta(tau - 1) * xhat;
    }
    return v;
}

inline void check_predict_args(const LsrFit& fit, std::span<const double> xtilde, std::span<const double> y, int f) {
    if (f < 1 || f > fit.F) throw std::invalid_argument("lsr_predict: horizon outside 1..F");
    if (xtilde.empty()) throw InsufficientDataError("lsr_predict: empty latent history");
    if (fit.phi && y.empty()) throw InsufficientDataError("lsr_predict: AR term needs y_t");
}

}  // namespace detail

/// Forecasts y_{t+1..t+f} given latent history ending at x~_t and dependent history ending at y_t.
///
/// Unobserved latent lags are extrapolated as rho^k x~_t + (1 - rho^k) E[x~]. With an AR
/// term, future lags of y are chained from earlier horizons; an MA(1) term adds
/// theta * e_t at horizon 1 only.
inline std::vector<double> lsr_predict_profile(const LsrFit& fit, std::span<const double> xtilde,
                                               std::span<const double> y, int f_max) {
    detail::check_predict_args(fit, xtilde, y, f_max);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(f_max));
    for (int h = 1; h <= f_max; ++h) {
        double v = detail::latent_forecast(fit, xtilde, h);
        if (fit.phi) v += *fit.phi * (h == 1 ? y.back() : out.back());
        if (fit.theta && h == 1) v += *fit.theta * fit.last_residual;
        out.push_back(v);
    }
    return out;
}

/// Single-horizon forecast. Without an AR term only the lags needed at horizon f must be observed.
inline double lsr_predict(const LsrFit& fit, std::span<const double> xtilde, std::span<const double> y, int f) {
    if (fit.phi) return lsr_predict_profile(fit, xtilde, y, f).back();
    detail::check_predict_args(fit, xtilde, y, f);
    double v = detail::latent_forecast(fit, xtilde, f);
    if (fit.theta && f == 1) v += *fit.theta * fit.last_residual;
    return v;
}

}  // namespace lvpc::lsr
