#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "lvpc/calendar.hpp"
#include "lvpc/data.hpp"
#include "lvpc/design.hpp"
#include "lvpc/lsr.hpp"

namespace testing_support {

using lvpc::Quarter;
using lvpc::QuarterlySeries;

struct LatentData {
    std::vector<QuarterlySeries> xs;
    QuarterlySeries y;
    Eigen::VectorXd beta;
    Eigen::VectorXd omega;
};

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> z;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = z(rng);
    return v;
}

/// y_t = c + sum_tau beta_tau (X_{t-tau} omega) + noise, with noise SD = noise_frac * SD(signal).
/// Observables are AR(1) with coefficient `persistence` so the latent series has some memory.
inline LatentData simulate_latent(std::mt19937_64& rng, int n, int F, int s, double noise_frac, double c = 0.5,
                                  double persistence = 0.5) {
    std::normal_distribution<double> z;
    LatentData d;
    d.beta = random_vector(rng, F);
    d.omega = random_vector(rng, n);
    d.omega /= d.omega.norm();
    const int T = s + F;
    const Quarter q0 = Quarter::of(1950, 1);
    Eigen::MatrixXd X(T, n);
    for (int i = 0; i < n; ++i) {
        double v = z(rng);
        for (int t = 0; t < T; ++t) {
            v = persistence * v + z(rng);
            X(t, i) = v;
        }
    }
    const Eigen::VectorXd xt = X * d.omega;
    Eigen::VectorXd signal = Eigen::VectorXd::Zero(s);
    for (int r = 0; r < s; ++r) {
        for (int tau = 1; tau <= F; ++tau) signal(r) += d.beta(tau - 1) * xt(F + r - tau);
    }
    const double sd = std::sqrt((signal.array() - signal.mean()).square().mean());
    std::vector<double> y(static_cast<std::size_t>(s));
    for (int r = 0; r < s; ++r) y[static_cast<std::size_t>(r)] = c + signal(r) + noise_frac * sd * z(rng);
    for (int i = 0; i < n; ++i) {
        std::vector<double> col(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) col[static_cast<std::size_t>(t)] = X(t, i);
        d.xs.push_back(QuarterlySeries::from(q0, std::move(col)));
    }
    d.y = QuarterlySeries::from(q0 + F, std::move(y));
    return d;
}

inline Eigen::VectorXd random_weights(std::mt19937_64& rng, Eigen::Index s) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Eigen::VectorXd w(s);
    for (Eigen::Index i = 0; i < s; ++i) w(i) = u(rng);
    return w;
}

/// Weighted OLS fitted values of y on all columns of A (plus intercept), by normal equations.
inline Eigen::VectorXd ols_fitted(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    Eigen::MatrixXd Z(A.rows(), A.cols() + 1);
    Z << Eigen::VectorXd::Ones(A.rows()), A;
    const Eigen::MatrixXd ZW = Z.transpose() * w.asDiagonal();
    const Eigen::VectorXd b = (ZW * Z).ldlt().solve(ZW * y);
    return Z * b;
}

/// LSR fitted values c + P (beta (x) omega) [+ extra * phi].
inline Eigen::VectorXd lsr_fitted(const lvpc::LaggedDesign& d, const lvpc::lsr::LsrFit& f) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(d.rows(), f.c) + d.P * f.coefficients();
    if (f.phi) v += *f.phi * d.extra.col(0);
    return v;
}

/// Copy of `store` in which everything released after `d` is replaced by `sentinel`, and
/// every period already known at `d` gains a sentinel revision released the next day.
inline lvpc::VintageStore poisoned_after(const lvpc::VintageStore& store, lvpc::Date d, double sentinel) {
    lvpc::VintageStore out;
    for (const auto& [id, s] : store.all()) {
        std::vector<lvpc::Observation> obs;
        std::vector<lvpc::Date> known;
        for (const auto& o : s.observations()) {
            if (o.release <= d) {
                obs.push_back(o);
                if (known.empty() || known.back() != o.period) known.push_back(o.period);
            } else {
                obs.push_back({o.period, o.release, sentinel});
            }
        }
        for (const auto& p : known) {
            const lvpc::Observation fake{p, d + std::chrono::days{1}, sentinel};
            bool clash = false;
            for (const auto& o : obs) clash = clash || (o.period == p && o.release == fake.release);
            if (!clash) obs.push_back(fake);
        }
        out.add(lvpc::VintageSeries(id, std::move(obs)));
    }
    return out;
}

inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd ac = a.array() - a.mean(), bc = b.array() - b.mean();
    return (ac * bc).sum() / std::sqrt(ac.square().sum() * bc.square().sum());
}

}  // namespace testing_support
