#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "lvpc/calendar.hpp"
#include "lvpc/data.hpp"
#include "lvpc/error.hpp"

namespace lvpc {

/// Regression design for the latent model.
///
/// Column block tau (1-based) of `P` holds lag tau of all n variables, so variable i
/// at lag tau sits in flat column (tau-1)*n + i. `extra` holds observed regressors
/// that stay outside the latent block (lags of the dependent).
struct LaggedDesign {
    Eigen::VectorXd y;
    Eigen::MatrixXd P;
    Eigen::MatrixXd extra;
    int n = 0;
    int F = 0;
    std::vector<Quarter> periods;

    Eigen::Index rows() const { return y.size(); }
};

/// Builds rows t with y_t, x_{i,t-tau} for tau = 1..F and y_{t-j} for j = 1..ar_order.
/// Rows lacking any of those are dropped.
inline LaggedDesign build_lagged_design(std::span<const QuarterlySeries> vars, const QuarterlySeries& dependent, int F,
                                        int ar_order = 0) {
    if (F < 1) throw std::invalid_argument("build_lagged_design: F must be >= 1");
    if (vars.empty()) throw std::invalid_argument("build_lagged_design: need at least one variable");
    if (ar_order < 0) throw std::invalid_argument("build_lagged_design: negative AR order");
    const int n = static_cast<int>(vars.size());

    std::vector<Quarter> usable;
    if (!dependent.empty()) {
        for (Quarter t = dependent.first; t <= dependent.last(); ++t) {
            bool ok = true;
            for (const auto& x : vars) ok = ok && x.contains(t - F) && x.contains(t - 1);
            for (int j = 1; j <= ar_order && ok; ++j) ok = dependent.contains(t - j);
            if (ok) usable.push_back(t);
        }
    }
    if (usable.empty()) throw InsufficientDataError("no usable rows for a lagged design with F=" + std::to_string(F));

    LaggedDesign d;
    d.n = n;
    d.F = F;
    d.periods = usable;
    const auto s = static_cast<Eigen::Index>(usable.size());
    d.y.resize(s);
    d.P.resize(s, n * F);
    d.extra.resize(s, ar_order);
    for (Eigen::Index r = 0; r < s; ++r) {
        const Quarter t = usable[static_cast<std::size_t>(r)];
        d.y(r) = dependent.at(t);
        for (int tau = 1; tau <= F; ++tau) {
            for (int i = 0; i < n; ++i) d.P(r, (tau - 1) * n + i) = vars[static_cast<std::size_t>(i)].at(t - tau);
        }
        for (int j = 1; j <= ar_order; ++j) d.extra(r, j - 1) = dependent.at(t - j);
    }
    return d;
}

/// Design for a direct forecast at horizon tau: y_{t+tau} on x_{i,t} and y_t..y_{t-p+1}.
struct DirectDesign {
    Eigen::VectorXd y;        // targets y_{t+tau}
    Eigen::MatrixXd X;        // regressors at t
    Eigen::MatrixXd ylags;    // y_t, y_{t-1}, ...
    int horizon = 1;
    std::vector<Quarter> periods;  // target periods t+tau

    Eigen::Index rows() const { return y.size(); }
};

inline DirectDesign build_direct_design(std::span<const QuarterlySeries> vars, const QuarterlySeries& dependent,
                                        int horizon, int ar_order = 0) {
    if (horizon < 1) throw std::invalid_argument("build_direct_design: horizon must be >= 1");
    const int n = static_cast<int>(vars.size());
    std::vector<Quarter> origins;
    if (!dependent.empty()) {
        for (Quarter t = dependent.first; t + horizon <= dependent.last(); ++t) {
            bool ok = true;
            for (const auto& x : vars) ok = ok && x.contains(t);
            for (int j = 0; j < ar_order && ok; ++j) ok = dependent.contains(t - j);
            if (ok) origins.push_back(t);
        }
    }
    if (origins.empty()) {
        throw InsufficientDataError("no usable rows for a direct design at horizon " + std::to_string(horizon));
    }
    DirectDesign d;
    d.horizon = horizon;
    const auto s = static_cast<Eigen::Index>(origins.size());
    d.y.resize(s);
    d.X.resize(s, n);
    d.ylags.resize(s, ar_order);
    for (Eigen::Index r = 0; r < s; ++r) {
        const Quarter t = origins[static_cast<std::size_t>(r)];
        d.periods.push_back(t + horizon);
        d.y(r) = dependent.at(t + horizon);
        for (int i = 0; i < n; ++i) d.X(r, i) = vars[static_cast<std::size_t>(i)].at(t);
        for (int j = 0; j < ar_order; ++j) d.ylags(r, j) = dependent.at(t - j);
    }
    return d;
}

/// Rows X_t of all variables over the quarters where every variable is observed.
struct AlignedRows {
    Eigen::MatrixXd X;
    std::vector<Quarter> periods;
};

inline AlignedRows align_rows(std::span<const QuarterlySeries> vars, Quarter up_to) {
    AlignedRows out;
    if (vars.empty()) return out;
    Quarter lo = vars[0].first, hi = vars[0].last();
    for (const auto& v : vars) {
        if (v.empty()) return out;
        lo = std::max(lo, v.first);
        hi = std::min(hi, v.last());
    }
    hi = std::min(hi, up_to);
    if (hi < lo) return out;
    const auto s = static_cast<Eigen::Index>(hi - lo + 1);
    out.X.resize(s, static_cast<Eigen::Index>(vars.size()));
    for (Eigen::Index r = 0; r < s; ++r) {
        const Quarter q = lo + static_cast<int>(r);
        out.periods.push_back(q);
        for (std::size_t i = 0; i < vars.size(); ++i) out.X(r, static_cast<Eigen::Index>(i)) = vars[i].at(q);
    }
    return out;
}

/// Exponential sample weights: raw weight 0.5^(age/half_life) with age = anchor - period
/// in 365.25-day years, normalized to sum to one.
inline Eigen::VectorXd exp_weights(std::span<const Date> periods, Date anchor, double half_life_years) {
    if (!(half_life_years > 0)) throw std::invalid_argument("exp_weights: half-life must be positive");
    Eigen::VectorXd w(static_cast<Eigen::Index>(periods.size()));
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (periods[i] > anchor) throw std::invalid_argument("exp_weights: period after anchor");
        w(static_cast<Eigen::Index>(i)) = std::pow(0.5, years_between(periods[i], anchor) / half_life_years);
    }
    const double total = w.sum();
    if (total > 0) w /= total;
    return w;
}

inline Eigen::VectorXd exp_weights(std::span<const Quarter> periods, Date anchor, double half_life_years) {
    std::vector<Date> ends;
    ends.reserve(periods.size());
    for (Quarter q : periods) ends.push_back(q.end_date());
    return exp_weights(std::span<const Date>(ends), anchor, half_life_years);
}

/// Exponentially weighted sample moments of (regressors, y).
///
/// The regressor set is [P | extra]; `latent_cols` = n*F marks where the latent block ends.
struct WeightedMoments {
    double ybar = 0;
    Eigen::RowVectorXd Pbar;
    Eigen::MatrixXd Sigma_P;
    Eigen::VectorXd Sigma_Py;
    double Sigma_y = 0;
    Eigen::VectorXd weights;
    Eigen::Index s = 0;
    Eigen::Index latent_cols = 0;
    double half_life = 0;

    Eigen::Index extra_cols() const { return Pbar.size() - latent_cols; }
};

inline WeightedMoments weighted_moments(const LaggedDesign& d, const Eigen::VectorXd& w, double half_life = 0) {
    if (w.size() != d.rows()) throw std::invalid_argument("weighted_moments: weight length mismatch");
    if ((w.array() <= 0).any()) throw std::invalid_argument("weighted_moments: weights must be positive");
    Eigen::MatrixXd R(d.rows(), d.P.cols() + d.extra.cols());
    R << d.P, d.extra;
    const Eigen::VectorXd wn = w / w.sum();

    WeightedMoments m;
    m.s = d.rows();
    m.latent_cols = d.P.cols();
    m.half_life = half_life;
    m.weights = wn;
    m.ybar = wn.dot(d.y);
    m.Pbar = wn.transpose() * R;
    const Eigen::MatrixXd Rc = R.rowwise() - m.Pbar;
    const Eigen::VectorXd yc = d.y.array() - m.ybar;
    const Eigen::MatrixXd WRc = Rc.array().colwise() * wn.array();
    m.Sigma_P = Rc.transpose() * WRc;
    m.Sigma_P = 0.5 * (m.Sigma_P + m.Sigma_P.transpose());
    m.Sigma_Py = WRc.transpose() * yc;
    m.Sigma_y = wn.dot(yc.cwiseProduct(yc));
    return m;
}

}  // namespace lvpc
