#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lvpc/design.hpp"
#include "lvpc/error.hpp"
#include "lvpc/linalg.hpp"
#include "lvpc/lsr.hpp"
#include "lvpc/optim.hpp"

namespace lvpc::bench {

enum class BenchKind { EWMA, AR, MA1, ARMA11, X, ARX, MAX, ARMAX };

inline const char* kind_name(BenchKind k) {
    switch (k) {
        case BenchKind::EWMA: return "EWMA";
        case BenchKind::AR: return "AR";
        case BenchKind::MA1: return "MA1";
        case BenchKind::ARMA11: return "ARMA11";
        case BenchKind::X: return "X";
        case BenchKind::ARX: return "ARX";
        case BenchKind::MAX: return "MAX";
        case BenchKind::ARMAX: return "ARMAX";
    }
    return "?";
}

inline bool is_direct(BenchKind k) {
    return k == BenchKind::X || k == BenchKind::ARX || k == BenchKind::MAX || k == BenchKind::ARMAX;
}
inline bool has_ma(BenchKind k) { return k == BenchKind::MA1 || k == BenchKind::ARMA11 || k == BenchKind::MAX || k == BenchKind::ARMAX; }

/// Fitted traditional or univariate model. Direct kinds hold one horizon.
struct BenchFit {
    BenchKind kind = BenchKind::EWMA;
    int horizon = 0;         // direct kinds only
    int ar_order = 0;
    double c = 0;
    Eigen::VectorXd beta;    // on x_{i,t}
    Eigen::VectorXd phi;     // on y_t, y_{t-1}, ... (direct) or y_{t-1}, ... (univariate)
    std::optional<double> theta;
    double last_residual = 0;
    bool converged = true;
    int iterations = 0;

    int coefficient_count() const {
        return 1 + static_cast<int>(beta.size()) + static_cast<int>(phi.size()) + (theta ? 1 : 0);
    }

    std::vector<std::pair<std::string, double>> coefficients() const {
        std::vector<std::pair<std::string, double>> out{{"c", c}};
        for (Eigen::Index i = 0; i < beta.size(); ++i) out.emplace_back("beta_" + std::to_string(i + 1), beta(i));
        for (Eigen::Index i = 0; i < phi.size(); ++i) out.emplace_back("phi_" + std::to_string(i + 1), phi(i));
        if (theta) out.emplace_back("theta", *theta);
        return out;
    }
};

namespace detail {

/// Refines (c, slopes, theta) of y = c + R b + e_t + theta e_{t-1} by weighted CSS.
inline BenchFit ma_refine(BenchFit fit, const Eigen::VectorXd& y, const Eigen::MatrixXd& R, const Eigen::VectorXd& w,
                          double theta0, const optim::SimplexOptions& opts) {
    const Eigen::Index k = R.cols();
    Eigen::VectorXd b0(k);
    b0.head(fit.beta.size()) = fit.beta;
    b0.tail(fit.phi.size()) = fit.phi;
    Eigen::VectorXd x0(k + 2);
    x0(0) = fit.c;
    x0.segment(1, k) = b0;
    x0(k + 1) = std::clamp(theta0, -0.95, 0.95);
    const Eigen::VectorXd wn = w / w.sum();
    auto residuals = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd base = y.array() - x(0) - (R * x.segment(1, k)).array();
        return lsr::ma_residuals(base, x(k + 1));
    };
    const double yvar = std::max((y.array() - y.mean()).square().mean(), 1e-300);
    auto objective = [&](const Eigen::VectorXd& x) {
        if (!(std::abs(x(k + 1)) < 1.0)) return std::numeric_limits<double>::infinity();
        const Eigen::VectorXd e = residuals(x);
        return wn.dot(e.cwiseProduct(e)) / yvar;
    };
    const double ysd = std::sqrt(yvar);
    std::vector<double> steps(static_cast<std::size_t>(k + 2));
    steps[0] = std::max(0.1 * std::abs(x0(0)), 0.01 * ysd);
    const double bmax = k ? b0.cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < k; ++i) steps[static_cast<std::size_t>(1 + i)] = std::max({0.1 * std::abs(b0(i)), 0.01 * bmax, 1e-12});
    steps.back() = 0.05;
    const auto res = optim::nelder_mead(objective, x0, opts, steps);
    fit.c = res.x_min(0);
    fit.beta = res.x_min.segment(1, fit.beta.size());
    fit.phi = res.x_min.segment(1 + fit.beta.size(), fit.phi.size());
    fit.theta = res.x_min(k + 1);
    const Eigen::VectorXd e = residuals(res.x_min);
    fit.last_residual = e.size() ? e(e.size() - 1) : 0.0;
    fit.converged = res.converged;
    fit.iterations = res.iterations;
    return fit;
}

inline double hr_theta(const Eigen::VectorXd& resid) {
    try {
        const auto hr = optim::hannan_rissanen(std::span<const double>(resid.data(), static_cast<std::size_t>(resid.size())), 0, 1);
        return hr.ma_fallback ? 0.0 : hr.ma(0);
    } catch (const Error&) {
        return 0.0;
    }
}

}  // namespace detail

/// Direct forecast regression for one horizon: y_{t+tau} = c + sum_i b_i x_{i,t} (+ AR lags of y at t) (+ MA(1)).
///
/// X and ARX are weighted OLS; MAX and ARMAX start from OLS plus a Hannan-Rissanen
/// theta on the OLS residuals and refine by Nelder-Mead on the weighted CSS.
inline BenchFit fit_direct(const DirectDesign& d, const Eigen::VectorXd& weights, BenchKind kind,
                           const optim::SimplexOptions& ml_opts = {}) {
    if (!is_direct(kind)) throw std::invalid_argument("fit_direct: not a direct kind");
    const bool ar = kind == BenchKind::ARX || kind == BenchKind::ARMAX;
    if (ar && d.ylags.cols() < 1) throw std::invalid_argument("fit_direct: AR kind needs a design with AR lags");
    const Eigen::Index n = d.X.cols(), p = ar ? d.ylags.cols() : 0;
    Eigen::MatrixXd R(d.rows(), n + p);
    R.leftCols(n) = d.X;
    if (p) R.rightCols(p) = d.ylags.leftCols(p);
    const auto ols = weighted_ols(R, d.y, weights, std::string("fit_direct ") + kind_name(kind));

    BenchFit fit;
    fit.kind = kind;
    fit.horizon = d.horizon;
    fit.ar_order = static_cast<int>(p);
    fit.c = ols.intercept;
    fit.beta = ols.slopes.head(n);
    fit.phi = ols.slopes.tail(p);
    if (has_ma(kind)) fit = detail::ma_refine(fit, d.y, R, weights, detail::hr_theta(ols.residuals), ml_opts);
    return fit;
}

/// Univariate benchmark on y_0..y_{s-1} with per-observation weights.
///
/// EWMA is the weighted mean; AR(p) is weighted OLS on p lags; MA(1) and ARMA(1,1)
/// use Hannan-Rissanen starting values refined by Nelder-Mead on the weighted CSS.
inline BenchFit fit_univariate(std::span<const double> y, const Eigen::VectorXd& weights, BenchKind kind, int p = 1,
                               const optim::SimplexOptions& ml_opts = {}) {
    const auto s = static_cast<Eigen::Index>(y.size());
    if (weights.size() != s) throw std::invalid_argument("fit_univariate: weight length mismatch");
    const Eigen::Map<const Eigen::VectorXd> Y(y.data(), s);
    BenchFit fit;
    fit.kind = kind;
    switch (kind) {
        case BenchKind::EWMA: {
            if (s < 1) throw InsufficientDataError("fit_univariate EWMA: empty series");
            fit.c = weights.dot(Y) / weights.sum();
            return fit;
        }
        case BenchKind::AR: {
            if (p < 1) throw std::invalid_argument("fit_univariate AR: order must be >= 1");
            if (s <= p + 2) throw InsufficientDataError("fit_univariate AR: series too short");
            const Eigen::Index rows = s - p;
            Eigen::MatrixXd X(rows, p);
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (int j = 1; j <= p; ++j) X(r, j - 1) = Y(p + r - j);
            }
            const auto ols = weighted_ols(X, Y.tail(rows), weights.tail(rows), "fit_univariate AR");
            fit.ar_order = p;
            fit.c = ols.intercept;
            fit.phi = ols.slopes;
            return fit;
        }
        case BenchKind::MA1: {
            if (s <= 3) throw InsufficientDataError("fit_univariate MA1: series too short");
            double c0 = Y.mean(), th0 = 0;
            try {
                const auto hr = optim::hannan_rissanen(y, 0, 1);
                c0 = hr.c;
                th0 = hr.ma_fallback ? 0.0 : hr.ma(0);
            } catch (const InsufficientDataError&) {
            }
            fit.c = c0;
            return detail::ma_refine(fit, Y, Eigen::MatrixXd(s, 0), weights, th0, ml_opts);
        }
        case BenchKind::ARMA11: {
            if (s <= 4) throw InsufficientDataError("fit_univariate ARMA11: series too short");
            const Eigen::Index rows = s - 1;
            double c0 = 0, phi0 = 0, th0 = 0;
            try {
                const auto hr = optim::hannan_rissanen(y, 1, 1);
                c0 = hr.c;
                phi0 = std::clamp(hr.ar(0), -0.99, 0.99);
                th0 = hr.ma_fallback ? 0.0 : hr.ma(0);
            } catch (const InsufficientDataError&) {
                c0 = Y.mean();
            }
            fit.ar_order = 1;
            fit.c = c0;
            fit.phi = Eigen::VectorXd::Constant(1, phi0);
            const Eigen::MatrixXd R = Y.head(rows);
            return detail::ma_refine(fit, Y.tail(rows), R, weights.tail(rows), th0, ml_opts);
        }
        default:
            throw std::invalid_argument("fit_univariate: not a univariate kind");
    }
}

/// Forecast of y_{t+f}.
///
/// Direct kinds apply the horizon-f fit to regressors x_t and y_t, y_{t-1}, ...; the
/// caller passes only data dated <= t. Univariate AR/ARMA forecasts iterate the
/// recursion; MA terms contribute theta * e_t at f = 1 and nothing beyond.
inline double bench_predict(const BenchFit& fit, std::span<const double> x_t, std::span<const double> y_history, int f) {
    if (f < 1) throw std::invalid_argument("bench_predict: horizon must be >= 1");
    if (is_direct(fit.kind)) {
        if (fit.horizon != f) throw std::invalid_argument("bench_predict: direct fit is for another horizon");
        if (static_cast<Eigen::Index>(x_t.size()) != fit.beta.size()) throw std::invalid_argument("bench_predict: regressor width");
        if (static_cast<Eigen::Index>(y_history.size()) < fit.phi.size()) throw InsufficientDataError("bench_predict: y history");
        double v = fit.c;
        for (Eigen::Index i = 0; i < fit.beta.size(); ++i) v += fit.beta(i) * x_t[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < fit.phi.size(); ++j) v += fit.phi(j) * y_history[y_history.size() - 1 - static_cast<std::size_t>(j)];
        if (fit.theta && f == 1) v += *fit.theta * fit.last_residual;
        return v;
    }
    switch (fit.kind) {
        case BenchKind::EWMA:
            return fit.c;
        case BenchKind::MA1:
            return f == 1 ? fit.c + fit.theta.value_or(0.0) * fit.last_residual : fit.c;
        case BenchKind::AR:
        case BenchKind::ARMA11: {
            const auto p = static_cast<std::size_t>(fit.phi.size());
            if (y_history.size() < p) throw InsufficientDataError("bench_predict: y history shorter than AR order");
            std::vector<double> path(y_history.end() - static_cast<std::ptrdiff_t>(p), y_history.end());
            double v = 0;
            for (int h = 1; h <= f; ++h) {
                v = fit.c;
                for (std::size_t j = 0; j < p; ++j) v += fit.phi(static_cast<Eigen::Index>(j)) * path[path.size() - 1 - j];
                if (h == 1 && fit.theta) v += *fit.theta * fit.last_residual;
                path.push_back(v);
            }
            return v;
        }
        default:
            throw std::invalid_argument("bench_predict: unsupported kind");
    }
}

}  // namespace lvpc::bench
