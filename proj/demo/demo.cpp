// Fits LSR to one simulated sample and prints the estimates next to the truth.
#include <cstdio>
#include <random>

#include "lvpc/lvpc.hpp"

int main() {
    const int s = 300, n = 3, F = 4;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z(0.0, 1.0);

    Eigen::VectorXd omega(n), beta(F);
    omega << 0.6, -0.48, 0.64;
    beta << 0.2, 0.9, 0.5, -0.3;

    std::vector<lvpc::QuarterlySeries> xs(n);
    lvpc::QuarterlySeries y{lvpc::Quarter::of(1950, 1), {}};
    Eigen::MatrixXd X(s + F, n);
    for (int t = 0; t < s + F; ++t) {
        for (int i = 0; i < n; ++i) X(t, i) = z(rng);
    }
    const Eigen::VectorXd xt = X * omega;
    for (int t = 0; t < s + F; ++t) {
        double v = 0.5 + 0.2 * z(rng);
        for (int tau = 1; tau <= F && t - tau >= 0; ++tau) v += beta(tau - 1) * xt(t - tau);
        y.values.push_back(v);
        for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)].values.push_back(X(t, i));
    }
    for (auto& x : xs) x.first = y.first;

    const auto design = lvpc::build_lagged_design(xs, y, F);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(design.rows());
    const auto fit = lvpc::lsr::lsr_fit(lvpc::weighted_moments(design, w), n, F);

    std::printf("converged after %d sweeps, objective %.6f\n", fit.iterations, fit.objective);
    std::printf("intercept %.4f (true 0.5)\n", fit.c);
    for (int i = 0; i < n; ++i) std::printf("omega_%d %8.4f  true %8.4f\n", i + 1, fit.omega(i), omega(i));
    for (int k = 0; k < F; ++k) std::printf("beta_%d  %8.4f  true %8.4f\n", k + 1, fit.beta(k), beta(k));
}
