#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "lvpc/eval.hpp"

using namespace lvpc;
using namespace lvpc::eval;

namespace {

// Independent oracle: upper tail of F(d1, d2) by adaptive Simpson integration of the density.
double f_density(double x, double d1, double d2) {
    if (x <= 0) return 0;
    const double lb = std::lgamma(d1 / 2) + std::lgamma(d2 / 2) - std::lgamma((d1 + d2) / 2);
    const double l = 0.5 * (d1 * std::log(d1 * x) + d2 * std::log(d2) - (d1 + d2) * std::log(d1 * x + d2)) - std::log(x) - lb;
    return std::exp(l);
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb, double whole,
               double eps, int depth) {
    const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
    return simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

double f_upper_tail_oracle(double x, int d1, int d2) {
    auto f = [&](double t) { return f_density(t, d1, d2); };
    const double fa = f(0), fb = f(x), fm = f(x / 2);
    const double cdf = simpson(f, 0, x, fa, fm, fb, x / 6 * (fa + 4 * fm + fb), 1e-12, 50);
    return 1 - cdf;
}

ForecastProfile profile(const std::string& spec, const std::string& m, Date origin,
                        std::map<int, std::pair<double, std::optional<double>>> h) {
    ForecastProfile p;
    p.spec_id = spec;
    p.methodology = m;
    p.origin = origin;
    for (const auto& [k, v] : h) p.horizons[k] = {v.first, v.second, 40, true};
    return p;
}

Date day(int i) { return make_date(2000, 1, 1) + std::chrono::days{i * 45}; }

}  // namespace

TEST(Mspe, Examples) {
    EXPECT_DOUBLE_EQ(mspe(std::vector<double>{1, 1}, std::vector<double>{2, 0})->value, 1.0);
    EXPECT_DOUBLE_EQ(mspe(std::vector<double>{1, 2}, std::vector<double>{1, 2})->value, 0.0);
    EXPECT_FALSE(mspe(std::vector<double>{}, std::vector<double>{}).has_value());
    EXPECT_THROW(mspe(std::vector<double>{1}, std::vector<double>{}), std::invalid_argument);
}

TEST(Mspe, ProfilesSkipUnrealized) {
    std::vector<ForecastProfile> ps{profile("s", "m", day(0), {{1, {1.0, 3.0}}, {2, {0.0, std::nullopt}}}),
                                    profile("s", "m", day(1), {{1, {2.0, 2.0}}, {2, {1.0, 4.0}}})};
    const auto m1 = mspe(ps, 1);
    EXPECT_EQ(m1->n_obs, 2);
    EXPECT_DOUBLE_EQ(m1->value, 2.0);
    EXPECT_EQ(mspe(ps, 2)->n_obs, 1);
    EXPECT_FALSE(mspe(ps, 3).has_value());
}

TEST(Mspe, RandomRecomputation) {
    std::mt19937_64 rng(501);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> p(30), r(30);
        long double acc = 0;
        for (std::size_t i = 0; i < 30; ++i) {
            p[i] = z(rng);
            r[i] = z(rng);
            acc += static_cast<long double>(r[i] - p[i]) * (r[i] - p[i]);
        }
        EXPECT_NEAR(mspe(p, r)->value, static_cast<double>(acc / 30), 1e-14);
    }
}

TEST(RankTable, Examples) {
    const auto r = rank_table({{"a", 0.5, 10}, {"b", 0.2, 10}, {"c", 0.9, 10}});
    EXPECT_EQ(r[0].rank, 2);
    EXPECT_EQ(r[1].rank, 1);
    EXPECT_EQ(r[2].rank, 3);
    EXPECT_FALSE(r[0].tie);
    const auto t = rank_table({{"zeta", 0.5, 10}, {"alpha", 0.5, 10}, {"mid", 0.1, 10}});
    EXPECT_EQ(t[1].rank, 2);
    EXPECT_EQ(t[0].rank, 3);
    EXPECT_TRUE(t[0].tie && t[1].tie);
    EXPECT_FALSE(t[2].tie);
    EXPECT_THROW(rank_table({{"a", 0.5, 10}, {"b", 0.2, 11}}), AlignmentError);
    EXPECT_THROW(rank_table({{"a", 0.5, 10}, {"a", 0.2, 10}}), std::invalid_argument);
}

TEST(RankTableProperties, RanksArePermutations) {
    std::mt19937_64 rng(502);
    std::uniform_int_distribution<int> k(1, 8), v(0, 5);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<RankInput> in;
        const int n = k(rng);
        for (int i = 0; i < n; ++i) in.push_back({"m" + std::to_string(i), v(rng) / 4.0, 7});
        auto r = rank_table(in);
        std::vector<int> ranks;
        for (const auto& e : r) ranks.push_back(e.rank);
        std::sort(ranks.begin(), ranks.end());
        for (int i = 0; i < n; ++i) EXPECT_EQ(ranks[static_cast<std::size_t>(i)], i + 1);
        for (std::size_t a = 0; a < r.size(); ++a) {
            for (std::size_t b = 0; b < r.size(); ++b) {
                if (in[a].mspe < in[b].mspe) EXPECT_LT(r[a].rank, r[b].rank);
            }
        }
    }
}

TEST(FTest, Examples) {
    for (int n : {2, 5, 20, 60, 400}) {
        const auto t = f_test_mspe(0.7, 0.7, n);
        EXPECT_DOUBLE_EQ(t.f_stat, 1.0);
        EXPECT_NEAR(t.p_value, 0.5, 1e-12);
    }
    const auto t = f_test_mspe(1.0, 2.0, 20);
    EXPECT_DOUBLE_EQ(t.f_stat, 2.0);
    EXPECT_NEAR(t.p_value, f_upper_tail_oracle(2.0, 20, 20), 1e-6);
    EXPECT_THROW(f_test_mspe(1.0, 1.0, 1), PreconditionError);
    EXPECT_THROW(f_test_mspe(-1.0, 1.0, 5), DomainError);
    EXPECT_THROW(f_test_mspe(1.0, std::nan(""), 5), DomainError);
    const auto d = f_test_mspe(0.0, 1.0, 5);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.p_value, 0.0);
}

TEST(FTest, AgreesWithIntegrationOracle) {
    for (int n : {3, 8, 30, 60}) {
        for (double ratio : {0.5, 0.9, 1.3, 1.7, 3.0}) {
            EXPECT_NEAR(f_test_mspe(1.0, ratio, n).p_value, f_upper_tail_oracle(ratio, n, n), 1e-6) << n << " " << ratio;
        }
    }
}

TEST(PredictorEffect, Examples) {
    const std::vector<SpecMspe> all_have{{{"v", "a"}, 1.0}, {{"v"}, 3.0}};
    EXPECT_DOUBLE_EQ(*predictor_effect(all_have, "v", 2.0), 0.0);
    // v-specs median 0.8, all-specs median 1.0, benchmark 2.0.
    const std::vector<SpecMspe> fx{{{"v"}, 0.7}, {{"v"}, 0.8}, {{"v"}, 0.9}, {{"w"}, 1.1}, {{"w"}, 1.2}, {{"w"}, 1.3}, {{"u"}, 1.0}};
    EXPECT_NEAR(*predictor_effect(fx, "v", 2.0), -0.1, 1e-15);
    EXPECT_FALSE(predictor_effect(fx, "nope", 2.0).has_value());
    EXPECT_THROW(predictor_effect(fx, "v", 0.0), DomainError);
}

TEST(PredictorEffectProperties, BruteForceAndScaleInvariance) {
    std::mt19937_64 rng(503);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    std::bernoulli_distribution coin(0.4);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<SpecMspe> specs;
        const int n = 3 + rep % 9;
        for (int i = 0; i < n; ++i) {
            SpecMspe s;
            s.mspe = u(rng);
            s.variables.push_back(coin(rng) ? "v" : "w");
            specs.push_back(s);
        }
        specs[0].variables = {"v"};
        // Brute-force median: sort, then middle element(s).
        auto med = [](std::vector<double> x) {
            std::sort(x.begin(), x.end());
            const auto k = x.size();
            return k % 2 ? x[k / 2] : (x[k / 2 - 1] + x[k / 2]) / 2;
        };
        std::vector<double> all, with;
        for (const auto& s : specs) {
            all.push_back(s.mspe);
            if (s.variables[0] == "v") with.push_back(s.mspe);
        }
        const double bm = u(rng);
        const double expect = (med(with) - med(all)) / bm;
        EXPECT_NEAR(*predictor_effect(specs, "v", bm), expect, 1e-14);
        auto scaled = specs;
        for (auto& s : scaled) s.mspe *= 7.5;
        EXPECT_NEAR(*predictor_effect(scaled, "v", bm * 7.5), expect, 1e-12);
    }
}

TEST(Shares, BoundaryAndHandCount) {
    std::vector<ReportRow> one{{"s", "LSR", 8, 30, 0.9, 1}};
    one[0].improvement = 1.0 - 0.9 / 1.0;  // 0.09999999999999998 in binary
    EXPECT_DOUBLE_EQ(rank1_share(one, "LSR", 8), 1.0);
    EXPECT_DOUBLE_EQ(outperform_share(one, "LSR", 8, 0.10), 1.0);
    EXPECT_DOUBLE_EQ(rank1_share(one, "LSR", 7), 0.0);

    std::vector<ReportRow> rows;
    const int winners[10] = {1, 2, 1, 3, 1, 1, 2, 4, 1, 5};
    const double imps[10] = {0.3, 0.05, 0.1, -0.2, 0.15, 0.0, 0.11, -0.5, 0.2, 0.09};
    const double pv[10] = {0.1, 0.3, 0.25, 0.9, 0.2, 0.5, 0.26, 0.99, 0.01, 0.4};
    for (int i = 0; i < 10; ++i) {
        ReportRow r{"s" + std::to_string(i), "LSR", 6, 30, 1.0, winners[i]};
        r.improvement = imps[i];
        r.p_value = pv[i];
        rows.push_back(r);
    }
    EXPECT_DOUBLE_EQ(rank1_share(rows, "LSR", 6), 0.5);
    EXPECT_DOUBLE_EQ(outperform_share(rows, "LSR", 6, 0.10), 0.5);  // 0.3, 0.1, 0.15, 0.11, 0.2
    EXPECT_DOUBLE_EQ(significant_share(rows, "LSR", 6, 0.25), 0.4);  // 0.1, 0.25, 0.2, 0.01
    double prev = 1.0;
    for (double th = -1.0; th <= 1.0; th += 0.05) {
        const double s = outperform_share(rows, "LSR", 6, th);
        EXPECT_LE(s, prev);
        prev = s;
    }
}

namespace {

// Two specs; PC models ARX(1) and LSR; univariates EWMA and MA(1). Origins day(0..5) with
// base quarter index i, target value 10 + i + h.
EvalInput fixture() {
    EvalInput in;
    auto realized = [](int i, int h) -> std::optional<double> {
        if (i + h > 6) return std::nullopt;
        return 10.0 + i + h;
    };
    auto make = [&](const std::string& spec, const std::string& m, double bias, int first) {
        std::vector<ForecastProfile> out;
        for (int i = first; i < 6; ++i) {
            std::map<int, std::pair<double, std::optional<double>>> h;
            for (int k = 1; k <= 2; ++k) {
                const double err = bias * ((i + k) % 2 ? 1 : -1);
                h[k] = {10.0 + i + k + err, realized(i, k)};
            }
            out.push_back(profile(spec, m, day(i), h));
        }
        return out;
    };
    in.univariate["EWMA"] = make("univariate", "EWMA", 1.0, 0);
    in.univariate["MA(1)"] = make("univariate", "MA(1)", 0.5, 1);  // starts one origin later
    SpecForecasts a{"specA", {"X1", "X3"}, {}};
    a.by_methodology["ARX(1)"] = make("specA", "ARX(1)", 0.4, 0);
    a.by_methodology["LSR"] = make("specA", "LSR", 0.2, 0);
    SpecForecasts b{"specB", {"X2"}, {}};
    b.by_methodology["ARX(1)"] = make("specB", "ARX(1)", 0.1, 0);
    b.by_methodology["LSR"] = make("specB", "LSR", 0.6, 2);
    in.specs = {a, b};
    return in;
}

EvalConfig fixture_config() {
    EvalConfig c;
    c.horizons = 2;
    c.groups = {{"like", {"ARX(1)", "LSR"}}, {"mixed", {"LSR", "EWMA", "MA(1)"}}};
    c.univariates = {"EWMA", "MA(1)"};
    c.effect_methodologies = {"LSR"};
    return c;
}

const ReportRow& find(const std::vector<ReportRow>& rows, const std::string& spec, const std::string& m, int h) {
    for (const auto& r : rows) {
        if (r.spec_id == spec && r.methodology == m && r.horizon == h) return r;
    }
    throw std::runtime_error("row not found");
}

}  // namespace

TEST(Evaluate, FixtureRanksAndAlignment) {
    const auto out = evaluate(fixture(), fixture_config());
    const auto& like = out.groups.at("like");
    // specA: LSR bias 0.2 beats ARX bias 0.4. Realized origins at h = 1: i = 0..5; MA(1) from i = 1.
    const auto& a_lsr = find(like, "specA", "LSR", 1);
    EXPECT_EQ(a_lsr.rank, 1);
    EXPECT_EQ(find(like, "specA", "ARX(1)", 1).rank, 2);
    EXPECT_EQ(a_lsr.n_obs, 5);  // origin 0 dropped: no benchmark forecast yet
    EXPECT_NEAR(a_lsr.mspe, 0.04, 1e-12);
    EXPECT_NEAR(a_lsr.improvement, 1 - 0.04 / 0.25, 1e-12);
    EXPECT_NEAR(a_lsr.f_stat, 0.25 / 0.04, 1e-12);
    // specB: LSR starts at origin 2, so ARX is ranked on that shorter coverage too.
    const auto& b_arx = find(like, "specB", "ARX(1)", 1);
    EXPECT_EQ(b_arx.n_obs, 4);
    EXPECT_EQ(b_arx.rank, 1);
    // At h = 2 realized values stop at i = 4.
    EXPECT_EQ(find(like, "specA", "LSR", 2).n_obs, 4);

    const auto& mixed = out.groups.at("mixed");
    EXPECT_EQ(find(mixed, "specA", "LSR", 1).rank, 1);
    EXPECT_EQ(find(mixed, "specA", "MA(1)", 1).rank, 2);
    EXPECT_EQ(find(mixed, "specA", "EWMA", 1).rank, 3);
    EXPECT_EQ(find(mixed, "specB", "LSR", 1).rank, 2);

    // Pairwise rows: LSR against both univariates on its own coverage.
    EXPECT_EQ(find(out.pairwise, "specA", "LSR", 1).rank, 1);
    EXPECT_EQ(find(out.pairwise, "specB", "LSR", 1).rank, 2);

    const auto& s = out.summary;
    EXPECT_EQ(s.at("groups").at("like").at("LSR").at("median_rank").at(0).get<double>(), 1.5);
    EXPECT_EQ(s.at("groups").at("like").at("LSR").at("specs_ranked").at(0).get<int>(), 2);
    EXPECT_EQ(s.at("beats_all_univariate").at("LSR").at(0).get<double>(), 0.5);
    // Effects at h = 1: LSR MSPEs specA 0.04, specB 0.36; benchmark full-coverage MSPE 0.25.
    EXPECT_NEAR(s.at("predictor_effects").at("LSR").at("X1").at(0).get<double>(), (0.04 - 0.2) / 0.25, 1e-12);
    EXPECT_NEAR(s.at("predictor_effects").at("LSR").at("X2").at(0).get<double>(), (0.36 - 0.2) / 0.25, 1e-12);
    EXPECT_NEAR(s.at("benchmark_mspe").at(0).get<double>(), 0.25, 1e-12);
}

TEST(Evaluate, InconsistentRealizedValuesRaiseAlignmentError) {
    auto in = fixture();
    in.specs[0].by_methodology["LSR"][3].horizons[1].realized = 99.0;
    EXPECT_THROW(evaluate(in, fixture_config()), AlignmentError);
}

TEST(Evaluate, ConfigErrors) {
    auto c = fixture_config();
    c.benchmark = "LSR";
    EXPECT_THROW(evaluate(fixture(), c), ConfigError);
    c = fixture_config();
    c.groups.push_back({"bad", {"EWMA"}});
    EXPECT_THROW(evaluate(fixture(), c), ConfigError);
    c = fixture_config();
    c.groups.push_back({"missing", {"ARX(2)"}});
    EXPECT_THROW(evaluate(fixture(), c), ConfigError);
}

TEST(ReportCsv, Format) {
    std::vector<ReportRow> rows{{"s1", "ARMA(1,1)", 3, 20, 0.5, 2}};
    rows[0].f_stat = std::numeric_limits<double>::infinity();
    rows[0].p_value = 0;
    rows[0].improvement = 0.25;
    std::ostringstream out;
    write_report_csv(out, rows);
    EXPECT_EQ(out.str(),
              "spec_id,methodology,horizon,n_obs,mspe,rank,f_stat,p_value,improvement\n"
              "s1,\"ARMA(1,1)\",3,20,0.5,2,inf,0,0.25\n");
}
