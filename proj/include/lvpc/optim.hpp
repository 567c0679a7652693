#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "lvpc/error.hpp"
#include "lvpc/linalg.hpp"

namespace lvpc::optim {

struct SimplexOptions {
    int max_iters = 10'000;
    double x_tol = 1e-8;
    double f_tol = 1e-10;
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    double initial_step = 0.1;

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("SimplexOptions: max_iters must be >= 1");
        if (!(reflection > 0) || !(expansion > 1) || !(contraction > 0 && contraction < 1) ||
            !(shrink > 0 && shrink < 1)) {
            throw std::invalid_argument("SimplexOptions: coefficient out of range");
        }
    }
};

struct OptimResult {
    Eigen::VectorXd x_min;
    double f_min = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Nelder-Mead downhill simplex.
///
/// The simplex is seeded deterministically at x0 and x0 + step_i e_i. Non-finite
/// objective values count as +inf. Stops when both the simplex diameter (max inf-norm
/// distance to the best vertex) is below x_tol and the spread of vertex values is
/// below f_tol, or after max_iters iterations (converged = false). The spread test
/// alone would stop a simplex that straddles a symmetric minimum.
inline OptimResult nelder_mead(const Objective& objective, const Eigen::VectorXd& x0, const SimplexOptions& opts,
                               std::span<const double> steps = {}) {
    opts.validate();
    const Eigen::Index n = x0.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto eval = [&](const Eigen::VectorXd& x) {
        const double v = objective(x);
        return std::isfinite(v) ? v : inf;
    };

    const double f0 = eval(x0);
    if (!std::isfinite(f0)) throw SeedError("nelder_mead: objective is not finite at the starting point");
    if (!steps.empty() && static_cast<Eigen::Index>(steps.size()) != n) {
        throw std::invalid_argument("nelder_mead: step vector length mismatch");
    }

    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> fv(static_cast<std::size_t>(n + 1), f0);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& p = pts[static_cast<std::size_t>(i + 1)];
        p(i) += steps.empty() ? opts.initial_step : steps[static_cast<std::size_t>(i)];
        fv[static_cast<std::size_t>(i + 1)] = eval(p);
    }

    std::vector<std::size_t> order(pts.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<Eigen::VectorXd> p2;
        std::vector<double> f2;
        p2.reserve(pts.size());
        f2.reserve(pts.size());
        for (auto k : order) {
            p2.push_back(std::move(pts[k]));
            f2.push_back(fv[k]);
        }
        pts = std::move(p2);
        fv = std::move(f2);
    };
    auto tolerances_met = [&] {
        double diam = 0;
        for (std::size_t k = 1; k < pts.size(); ++k) diam = std::max(diam, (pts[k] - pts[0]).cwiseAbs().maxCoeff());
        if (!(diam < opts.x_tol) || !std::isfinite(fv.back())) return false;
        return fv.back() - fv.front() < opts.f_tol;
    };

    OptimResult res;
    sort_simplex();
    int it = 0;
    bool done = n == 0 || tolerances_met();
    while (!done && it < opts.max_iters) {
        ++it;
        const std::size_t worst = pts.size() - 1;
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < worst; ++k) centroid += pts[k];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = centroid + opts.reflection * (centroid - pts[worst]);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            const Eigen::VectorXd xe = centroid + opts.expansion * (xr - centroid);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[worst - 1]) {
            pts[worst] = xr;
            fv[worst] = fr;
        } else {
            bool accepted = false;
            if (fr < fv[worst]) {
                const Eigen::VectorXd xc = centroid + opts.contraction * (xr - centroid);
                const double fc = eval(xc);
                if (fc <= fr) {
                    pts[worst] = xc;
                    fv[worst] = fc;
                    accepted = true;
                }
            } else {
                const Eigen::VectorXd xc = centroid + opts.contraction * (pts[worst] - centroid);
                const double fc = eval(xc);
                if (fc < fv[worst]) {
                    pts[worst] = xc;
                    fv[worst] = fc;
                    accepted = true;
                }
            }
            if (!accepted) {
                for (std::size_t k = 1; k < pts.size(); ++k) {
                    pts[k] = pts[0] + opts.shrink * (pts[k] - pts[0]);
                    fv[k] = eval(pts[k]);
                }
            }
        }
        sort_simplex();
        done = tolerances_met();
    }
    res.x_min = pts[0];
    res.f_min = fv[0];
    res.iterations = it;
    res.converged = done;
    return res;
}

/// Per-coordinate simplex steps scaled to the starting point: frac*|x0_i|, at least `floor`.
inline std::vector<double> relative_steps(const Eigen::VectorXd& x0, double frac, double floor) {
    std::vector<double> out(static_cast<std::size_t>(x0.size()));
    for (Eigen::Index i = 0; i < x0.size(); ++i) out[static_cast<std::size_t>(i)] = std::max(frac * std::abs(x0(i)), floor);
    return out;
}

/// Stage-2 estimates of an ARMA(p, q) with intercept.
struct ArmaInit {
    double c = 0;
    Eigen::VectorXd ar;
    Eigen::VectorXd ma;
    double sigma2 = 0;
    int long_ar_order = 0;
    bool ma_fallback = false;  // stage 2 was singular; MA terms set to zero
};

/// Long-AR order used by stage 1: floor(min(s/4, 10*log10(s))).
inline int hannan_rissanen_long_order(std::size_t s) {
    const double sd = static_cast<double>(s);
    return static_cast<int>(std::floor(std::min(sd / 4.0, 10.0 * std::log10(sd))));
}

/// Hannan-Rissanen two-stage initializer.
///
/// Stage 1 fits a long AR by least squares and keeps its residuals as innovation
/// proxies; stage 2 regresses y on its own p lags and q lagged proxies.
inline ArmaInit hannan_rissanen(std::span<const double> y, int p, int q) {
    if (p < 0 || q < 0) throw std::invalid_argument("hannan_rissanen: negative order");
    const auto s = static_cast<Eigen::Index>(y.size());
    const int m = std::max(hannan_rissanen_long_order(y.size()), std::max(p + q, 1));
    if (s <= p + q + m) throw InsufficientDataError("hannan_rissanen: series too short");

    ArmaInit out;
    out.long_ar_order = m;
    out.ar = Eigen::VectorXd::Zero(p);
    out.ma = Eigen::VectorXd::Zero(q);
    const Eigen::Map<const Eigen::VectorXd> Y(y.data(), s);
    const double mean = Y.mean();
    const double var = (Y.array() - mean).square().mean();
    if (!(var > 1e-300)) {
        out.c = mean;
        out.sigma2 = 0;
        return out;
    }

    // Stage 1: long autoregression.
    Eigen::VectorXd resid = Eigen::VectorXd::Zero(s);
    {
        const Eigen::Index rows = s - m;
        Eigen::MatrixXd X(rows, m);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (int j = 1; j <= m; ++j) X(r, j - 1) = Y(m + r - j);
        }
        const Eigen::VectorXd yy = Y.tail(rows);
        try {
            const auto fit = weighted_ols(X, yy, Eigen::VectorXd::Ones(rows), "hannan_rissanen stage 1");
            resid.tail(rows) = fit.residuals;
        } catch (const SingularMatrixError&) {
            resid.tail(rows) = (yy.array() - yy.mean()).matrix();
        }
    }

    // Stage 2: y on p own lags and q lagged proxies, rows where all proxies exist.
    const Eigen::Index start = m + std::max(p, q);
    const Eigen::Index rows = s - start;
    Eigen::MatrixXd X(rows, p + q);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index t = start + r;
        for (int j = 1; j <= p; ++j) X(r, j - 1) = Y(t - j);
        for (int j = 1; j <= q; ++j) X(r, p + j - 1) = resid(t - j);
    }
    const Eigen::VectorXd yy = Y.tail(rows);
    try {
        const auto fit = weighted_ols(X, yy, Eigen::VectorXd::Ones(rows), "hannan_rissanen stage 2");
        out.c = fit.intercept;
        out.ar = fit.slopes.head(p);
        out.ma = fit.slopes.tail(q);
        out.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(rows);
    } catch (const Error&) {
        out.ma_fallback = true;
        if (p > 0) {
            Eigen::MatrixXd Xa = X.leftCols(p);
            try {
                const auto fit = weighted_ols(Xa, yy, Eigen::VectorXd::Ones(rows), "hannan_rissanen fallback");
                out.c = fit.intercept;
                out.ar = fit.slopes;
                out.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(rows);
                return out;
            } catch (const Error&) {
            }
        }
        out.c = yy.mean();
        out.sigma2 = (yy.array() - out.c).square().mean();
    }
    return out;
}

}  // namespace lvpc::optim
