#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lvpc/methodology.hpp"
#include "lvpc/serialize.hpp"
#include "support.hpp"

using namespace lvpc;
using namespace lvpc::bench;

namespace {

std::vector<double> simulate_arma(std::mt19937_64& rng, int s, double c, double phi, double theta) {
    std::normal_distribution<double> z;
    std::vector<double> y;
    double prev_y = c / (1 - phi), prev_e = 0;
    for (int t = 0; t < s + 100; ++t) {
        const double e = z(rng);
        const double v = c + phi * prev_y + e + theta * prev_e;
        prev_y = v;
        prev_e = e;
        if (t >= 100) y.push_back(v);
    }
    return y;
}

Eigen::VectorXd ones(std::size_t n) { return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)); }

// Direct-regression data: y_{t+h} = c + b x_t + a y_t + e with AR(1) regressors.
struct DirectData {
    std::vector<QuarterlySeries> xs;
    QuarterlySeries y;
};

DirectData simulate_direct(std::mt19937_64& rng, int s, double c, const std::vector<double>& b, double a, double theta = 0) {
    std::normal_distribution<double> z;
    const auto n = b.size();
    std::vector<std::vector<double>> x(n, std::vector<double>(static_cast<std::size_t>(s)));
    for (auto& col : x) {
        double v = 0;
        for (auto& e : col) {
            v = 0.6 * v + z(rng);
            e = v;
        }
    }
    std::vector<double> y(static_cast<std::size_t>(s));
    double e_prev = 0;
    y[0] = c;
    for (std::size_t t = 1; t < y.size(); ++t) {
        const double e = z(rng);
        double v = c + a * y[t - 1] + e + theta * e_prev;
        for (std::size_t i = 0; i < n; ++i) v += b[i] * x[i][t - 1];
        y[t] = v;
        e_prev = e;
    }
    DirectData d;
    const Quarter q0 = Quarter::of(1960, 1);
    for (auto& col : x) d.xs.push_back(QuarterlySeries::from(q0, std::move(col)));
    d.y = QuarterlySeries::from(q0, std::move(y));
    return d;
}

}  // namespace

TEST(FitDirect, ScalarOlsClosedForm) {
    std::mt19937_64 rng(201);
    const auto d = simulate_direct(rng, 120, 0.3, {0.9}, 0.0);
    const auto design = build_direct_design(d.xs, d.y, 1);
    const Eigen::VectorXd w = testing_support::random_weights(rng, design.rows());
    const auto fit = fit_direct(design, w, BenchKind::X);
    const Eigen::VectorXd wn = w / w.sum();
    const double xbar = wn.dot(design.X.col(0)), ybar = wn.dot(design.y);
    const Eigen::ArrayXd dx = design.X.col(0).array() - xbar, dy = design.y.array() - ybar;
    const double slope = (wn.array() * dx * dy).sum() / (wn.array() * dx * dx).sum();
    EXPECT_NEAR(fit.beta(0), slope, 1e-10);
    EXPECT_NEAR(fit.c, ybar - slope * xbar, 1e-10);
    EXPECT_EQ(fit.coefficient_count(), 2);
    EXPECT_EQ(fit.horizon, 1);
}

TEST(FitDirect, ArxRecoversCoefficients) {
    std::mt19937_64 rng(202);
    int ok = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = simulate_direct(rng, 500, 0.2, {0.5, -0.4}, 0.5);
        const auto design = build_direct_design(d.xs, d.y, 1, 1);
        const auto fit = fit_direct(design, ones(static_cast<std::size_t>(design.rows())), BenchKind::ARX);
        // Standard errors around 0.04-0.05 at s = 500; three of them.
        ok += std::abs(fit.beta(0) - 0.5) < 0.15 && std::abs(fit.beta(1) + 0.4) < 0.15 && std::abs(fit.phi(0) - 0.5) < 0.1;
        EXPECT_EQ(fit.coefficient_count(), 1 + 2 + 1);
    }
    EXPECT_GE(ok, 19);
}

TEST(FitDirect, ArmaxZeroTheta) {
    std::mt19937_64 rng(203);
    int ok = 0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto d = simulate_direct(rng, 400, 0.2, {0.5}, 0.4);
        const auto design = build_direct_design(d.xs, d.y, 1, 1);
        const auto fit = fit_direct(design, ones(static_cast<std::size_t>(design.rows())), BenchKind::ARMAX);
        ASSERT_TRUE(fit.theta.has_value());
        ok += std::abs(*fit.theta) < 0.1;
        EXPECT_EQ(fit.coefficient_count(), 1 + 1 + 1 + 1);
    }
    EXPECT_GE(ok, 9);
}

TEST(FitDirect, MaxRecoversTheta) {
    std::mt19937_64 rng(204);
    int ok = 0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto d = simulate_direct(rng, 400, 0.2, {0.5}, 0.0, 0.5);
        const auto design = build_direct_design(d.xs, d.y, 1);
        const auto fit = fit_direct(design, ones(static_cast<std::size_t>(design.rows())), BenchKind::MAX);
        ok += *fit.theta > 0.35 && *fit.theta < 0.65;
    }
    EXPECT_GE(ok, 9);
}

TEST(FitDirect, Errors) {
    std::mt19937_64 rng(205);
    auto d = simulate_direct(rng, 50, 0.2, {0.5, 0.3}, 0.0);
    d.xs[1] = d.xs[0];
    const auto design = build_direct_design(d.xs, d.y, 2);
    EXPECT_THROW(fit_direct(design, ones(static_cast<std::size_t>(design.rows())), BenchKind::X), SingularMatrixError);
    EXPECT_THROW(fit_direct(design, ones(static_cast<std::size_t>(design.rows())), BenchKind::ARX), std::invalid_argument);
    EXPECT_THROW(fit_direct(design, ones(static_cast<std::size_t>(design.rows())), BenchKind::AR), std::invalid_argument);
}

TEST(FitDirect, FullProfileCoefficientCount) {
    std::mt19937_64 rng(206);
    const auto d = simulate_direct(rng, 200, 0.2, {0.5, 0.1, -0.2}, 0.3);
    const int F = 8;
    int x_total = 0, arx_total = 0;
    for (int h = 1; h <= F; ++h) {
        const auto dx = build_direct_design(d.xs, d.y, h);
        const auto da = build_direct_design(d.xs, d.y, h, 1);
        x_total += fit_direct(dx, ones(static_cast<std::size_t>(dx.rows())), BenchKind::X).coefficient_count();
        arx_total += fit_direct(da, ones(static_cast<std::size_t>(da.rows())), BenchKind::ARX).coefficient_count();
    }
    EXPECT_EQ(x_total, F * (1 + 3));
    EXPECT_EQ(arx_total, F * (1 + 3) + F);
}

TEST(FitUnivariate, EwmaConstant) {
    const std::vector<double> y(30, 1.75);
    const auto fit = fit_univariate(y, ones(30), BenchKind::EWMA);
    for (int f = 1; f <= 8; ++f) EXPECT_DOUBLE_EQ(bench_predict(fit, {}, y, f), 1.75);
    EXPECT_EQ(fit.coefficient_count(), 1);
}

TEST(FitUnivariate, EwmaIsWeightedMean) {
    const std::vector<double> y{1, 2, 3, 4};
    Eigen::VectorXd w(4);
    w << 1, 1, 2, 4;
    EXPECT_DOUBLE_EQ(fit_univariate(y, w, BenchKind::EWMA).c, (1 + 2 + 6 + 16) / 8.0);
}

TEST(FitUnivariate, Ar1Recovery) {
    std::mt19937_64 rng(207);
    int ok = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto y = simulate_arma(rng, 500, 0.5, 0.8, 0.0);
        ok += std::abs(fit_univariate(y, ones(500), BenchKind::AR, 1).phi(0) - 0.8) < 0.08;
    }
    EXPECT_GE(ok, 19);
}

TEST(FitUnivariate, Ma1Recovery) {
    std::mt19937_64 rng(208);
    int ok = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto y = simulate_arma(rng, 500, 0.5, 0.0, 0.5);
        const auto fit = fit_univariate(y, ones(500), BenchKind::MA1);
        ok += *fit.theta > 0.35 && *fit.theta < 0.65;
        EXPECT_EQ(fit.coefficient_count(), 2);
    }
    EXPECT_GE(ok, 19);
}

TEST(FitUnivariate, Arma11Fits) {
    std::mt19937_64 rng(209);
    const auto y = simulate_arma(rng, 600, 0.2, 0.6, 0.3);
    const auto fit = fit_univariate(y, ones(600), BenchKind::ARMA11);
    EXPECT_NEAR(fit.phi(0), 0.6, 0.15);
    EXPECT_NEAR(*fit.theta, 0.3, 0.15);
    EXPECT_EQ(fit.coefficient_count(), 3);
}

TEST(FitUnivariate, ShortSeries) {
    const std::vector<double> y{1, 2, 3};
    EXPECT_THROW(fit_univariate(y, ones(3), BenchKind::AR, 1), InsufficientDataError);
    EXPECT_THROW(fit_univariate(y, ones(3), BenchKind::MA1), InsufficientDataError);
    EXPECT_THROW(fit_univariate(y, ones(2), BenchKind::EWMA), std::invalid_argument);
    EXPECT_THROW(fit_univariate(y, ones(3), BenchKind::X), std::invalid_argument);
}

TEST(BenchPredict, ArClosedForm) {
    BenchFit fit;
    fit.kind = BenchKind::AR;
    fit.ar_order = 1;
    fit.c = 0.3;
    fit.phi = Eigen::VectorXd::Constant(1, 0.7);
    const std::vector<double> y{1.0, 2.0};
    for (int f = 1; f <= 8; ++f) {
        double geo = 0;
        for (int j = 0; j < f; ++j) geo += std::pow(0.7, j);
        EXPECT_NEAR(bench_predict(fit, {}, y, f), 0.3 * geo + std::pow(0.7, f) * 2.0, 1e-12);
    }
}

TEST(BenchPredict, MaOnlyAtFirstHorizon) {
    BenchFit fit;
    fit.kind = BenchKind::MA1;
    fit.c = 0.4;
    fit.theta = 0.5;
    fit.last_residual = 2.0;
    EXPECT_DOUBLE_EQ(bench_predict(fit, {}, {}, 1), 1.4);
    EXPECT_DOUBLE_EQ(bench_predict(fit, {}, {}, 2), 0.4);
    fit.kind = BenchKind::ARMA11;
    fit.ar_order = 1;
    fit.phi = Eigen::VectorXd::Constant(1, 0.5);
    const std::vector<double> y{1.0};
    EXPECT_DOUBLE_EQ(bench_predict(fit, {}, y, 1), 0.4 + 0.5 + 1.0);
    EXPECT_DOUBLE_EQ(bench_predict(fit, {}, y, 2), 0.4 + 0.5 * 1.9);
}

TEST(BenchPredict, DirectUsesOnlyTimeTInputs) {
    BenchFit fit;
    fit.kind = BenchKind::ARX;
    fit.horizon = 3;
    fit.ar_order = 2;
    fit.c = 1;
    fit.beta = Eigen::VectorXd::Constant(2, 0.5);
    fit.phi = Eigen::VectorXd(2);
    fit.phi << 0.25, 0.125;
    const std::vector<double> x{2.0, 4.0};
    const std::vector<double> y{100.0, 8.0, 16.0};  // y_{t-1} = 8, y_t = 16
    EXPECT_DOUBLE_EQ(bench_predict(fit, x, y, 3), 1 + 1 + 2 + 4 + 1);
    EXPECT_THROW(bench_predict(fit, x, y, 2), std::invalid_argument);
    EXPECT_THROW(bench_predict(fit, std::vector<double>{1.0}, y, 3), std::invalid_argument);
    EXPECT_THROW(bench_predict(fit, x, std::vector<double>{1.0}, 3), InsufficientDataError);
}

TEST(BenchProperties, ExactArReproducesOneStep) {
    // Noise-free AR(2): y_t = 0.1 + 0.5 y_{t-1} - 0.3 y_{t-2}, from a non-equilibrium start.
    std::vector<double> y{3.0, -2.0};
    for (int t = 2; t < 60; ++t) y.push_back(0.1 + 0.5 * y[y.size() - 1] - 0.3 * y[y.size() - 2]);
    std::vector<double> hist(y.begin(), y.end() - 1);
    const auto fit = fit_univariate(hist, ones(hist.size()), BenchKind::AR, 2);
    EXPECT_NEAR(bench_predict(fit, {}, hist, 1), y.back(), 1e-9);
}

TEST(BenchSerialize, RoundTrip) {
    BenchFit fit;
    fit.kind = BenchKind::ARMAX;
    fit.horizon = 4;
    fit.ar_order = 1;
    fit.c = 0.5;
    fit.beta = Eigen::VectorXd::Constant(2, 0.1);
    fit.phi = Eigen::VectorXd::Constant(1, 0.2);
    fit.theta = 0.3;
    const nlohmann::json j = fit;
    const auto g = j.get<BenchFit>();
    EXPECT_EQ(g.kind, fit.kind);
    EXPECT_EQ(g.horizon, 4);
    EXPECT_EQ(g.beta, fit.beta);
    EXPECT_EQ(g.phi, fit.phi);
    EXPECT_EQ(g.theta, fit.theta);
}

TEST(Methodologies, LabelsSlugsAndCounts) {
    EXPECT_EQ(parse_methodology("ARX(3)"), Methodology::ARX3);
    EXPECT_EQ(parse_methodology("LSR-ARMA11"), Methodology::LSR_ARMA11);
    EXPECT_THROW(parse_methodology("ARX(9)"), ConfigError);
    for (const auto& i : kMethodologies) {
        EXPECT_EQ(parse_methodology(i.label), i.id);
        EXPECT_EQ(slug(i.id).find_first_of("(),/ "), std::string::npos);
    }
    EXPECT_EQ(coefficient_count(Methodology::LSR, 3, 8), 2 + 3 + 8 + 1);
    EXPECT_EQ(coefficient_count(Methodology::LSR_AR0, 3, 8), 2 + 3 + 8);
    EXPECT_EQ(coefficient_count(Methodology::LSR_ARMA11, 3, 8), 2 + 3 + 8 + 2);
    EXPECT_EQ(coefficient_count(Methodology::ARX4, 3, 8), 1 + 3 + 4);
    EXPECT_EQ(coefficient_count(Methodology::MAX11, 3, 8), 1 + 3 + 1);
    EXPECT_EQ(coefficient_count(Methodology::AR3, 3, 8), 4);
    EXPECT_EQ(coefficient_count(Methodology::ARMA11, 3, 8), 3);
}
