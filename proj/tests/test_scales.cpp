#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "rowfinite/scales.hpp"

using namespace rowfinite;

TEST_CASE("weight families are >= 1 and non-decreasing") {
    std::vector<WeightFunction> fams = {
        WeightFunction::constant(2.0), WeightFunction::linear(), WeightFunction::exponential(0.7),
        WeightFunction::log(1.5), WeightFunction::loglog(1.0),
        WeightFunction::loglog_of(1.0, WeightFunction::exponential(1.0))};
    for (const auto& f : fams) {
        double prev = 0.0;
        for (double s : {0.0, 0.1, 1.0, 3.0, 10.0, 100.0, 1e4}) {
            const double v = f(s);
            CHECK(v >= 1.0);
            CHECK(v >= prev - 1e-15);
            prev = v;
        }
    }
}

TEST_CASE("weight parameter validation") {
    CHECK_THROWS_AS(WeightFunction::constant(0.5), ConfigError);
    CHECK_THROWS_AS(WeightFunction::exponential(-1.0), ConfigError);
    CHECK_THROWS_AS(WeightFunction::log(0.2), ConfigError);
}

TEST_CASE("shift ratio: constants and exponentials are exact") {
    auto c = shift_ratio_sup(WeightFunction::constant(5.0), 3.0);
    CHECK(c.value == 1.0);
    CHECK_FALSE(c.divergence_flag);

    const double r = 1.3;
    auto e = shift_ratio_sup(WeightFunction::exponential(1.0), r);
    REQUIRE(e.closed_form.has_value());
    CHECK(*e.closed_form == doctest::Approx(std::exp(r)).epsilon(1e-14));
    CHECK(e.value == doctest::Approx(std::exp(r)).epsilon(1e-12));
    CHECK(e.grid_value <= e.value * (1 + 1e-12));
}

TEST_CASE("shift ratio of the log family peaks at the origin") {
    // dense-grid oracle: (1+log(2+s))/(1+log(1+s)) is maximal at s=0
    double oracle = 0.0, arg = 0.0;
    for (int k = 0; k <= 2000000; ++k) {
        const double s = 1e4 * k / 2000000.0;
        const double v = (1 + std::log1p(1 + s)) / (1 + std::log1p(s));
        if (v > oracle) {
            oracle = v;
            arg = s;
        }
    }
    CHECK(arg == 0.0);
    CHECK(oracle == doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-12));

    auto res = shift_ratio_sup(WeightFunction::log(1.0), 1.0, 1e4);
    CHECK(res.value == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(res.argmax == 0.0);
    CHECK_FALSE(res.divergence_flag);
}

TEST_CASE("d_mu closed form") {
    CHECK(d_mu(1.0) == doctest::Approx(1.0 / std::exp(1.0)));
    CHECK(d_mu(2.0) == doctest::Approx(sq(2.0 / std::exp(1.0))));
    // sup_{tau>0} (log tau)^mu / tau realized numerically
    for (double mu : {1.0, 2.5}) {
        double best = 0;
        for (int k = 1; k < 400000; ++k) {
            const double tau = 1.0 + 0.01 * k;
            best = std::max(best, std::pow(std::log(tau), mu) / tau);
        }
        CHECK(best <= d_mu(mu) * (1 + 1e-10));
        CHECK(best >= d_mu(mu) * 0.999);
    }
}

TEST_CASE("double-log pair admissibility margin vs the analytic bound") {
    auto pair = loglog_pair(WeightFunction::exponential(1.0), 1.0);
    {
        auto res = admissibility_margin(pair, 0.5, 1.0);
        REQUIRE(res.analytic_bound.has_value());
        // sup equals e^{-e/2} (attained on the floor region); bound d_1/(e*0.5)
        CHECK(res.sup_value == doctest::Approx(std::exp(-std::exp(1.0) / 2)).epsilon(1e-6));
        CHECK(*res.analytic_bound ==
              doctest::Approx(d_mu(1.0) / (std::exp(1.0) * 0.5)).epsilon(1e-12));
        CHECK(res.sup_value <= *res.analytic_bound);
        CHECK_FALSE(res.divergence_flag);
    }
    // property: the measured margin never exceeds the analytic bound
    std::mt19937_64 rng(7);
    for (int k = 0; k < 10; ++k) {
        const double mu = 0.5 + 3.0 * (rng() >> 11) * 0x1.0p-53;
        const double alpha = 0.05 + 0.9 * (rng() >> 11) * 0x1.0p-53;
        auto res = admissibility_margin(pair, alpha, mu);
        REQUIRE(res.analytic_bound.has_value());
        CHECK(res.sup_value <= *res.analytic_bound * (1 + 1e-12));
    }
}

TEST_CASE("constant z margin is attained at the origin") {
    WeightPair pair{WeightFunction::exponential(1.0), WeightFunction::constant(4.0), {}};
    auto res = admissibility_margin(pair, 0.7, 2.0);
    CHECK(res.sup_value == doctest::Approx(std::pow(4.0, 2.0)).epsilon(1e-12));
    CHECK(res.argmax == 0.0);
    CHECK_FALSE(res.divergence_flag);
}

TEST_CASE("linear/linear pair with mu > alpha is flagged divergent") {
    WeightPair pair{WeightFunction::linear(), WeightFunction::linear(), {}};
    auto res = admissibility_margin(pair, 1.0, 2.0);
    CHECK(res.divergence_flag);
}

TEST_CASE("measured D for a constant z") {
    WeightPair pair{WeightFunction::exponential(1.0), WeightFunction::constant(3.0), {}};
    const double beta = 2.0, mu = 4.0;
    auto cert = measure_D(pair, beta, mu);
    // alpha * z0^mu * w(0)^{-alpha} peaks at alpha = beta (w(0) = 1)
    CHECK(cert.D == doctest::Approx(beta * std::pow(3.0, mu)).epsilon(1e-6));
    CHECK_FALSE(cert.divergence_flag);

    // a certified pair passes its own margin check at any alpha in range
    pair.certificate = cert;
    for (double alpha : {0.2, 0.9, 1.8}) {
        auto res = admissibility_margin(pair, alpha, mu);
        CHECK(res.passes);
    }
}

TEST_CASE("scale norm: direct evaluations") {
    auto zero_cfg = gen_lattice(1, 2, 1.0, 1.0);
    std::vector<double> zeros(zero_cfg.size(), 0.0);
    CHECK(scale_norm(zeros, 1, WeightFunction::exponential(1.0), 0.3, zero_cfg) == 0.0);

    auto single = gen_lattice(3, 0, 1.0, 1.0);  // one point at the origin
    std::vector<double> q{2.0, 0.0, 0.0};
    CHECK(scale_norm(q, 3, WeightFunction::exponential(1.0), 1.7, single) == doctest::Approx(2.0));

    // two points at |x| = 0, 1 with |q| = 1, e; w = e^s, alpha = 1
    Configuration two;
    two.dim = 1;
    two.radius = 1.0;
    two.box.lo = {0.0};
    two.box.hi = {1.0};
    two.coords = {0.0, 1.0};
    two.rebuild_index();
    std::vector<double> v{1.0, std::exp(1.0)};
    CHECK(scale_norm(v, 1, WeightFunction::exponential(1.0), 1.0, two) == doctest::Approx(1.0));

    CHECK_THROWS_AS(scale_norm(v, 2, WeightFunction::linear(), 1.0, two), ConfigError);
}

TEST_CASE("scale norm is monotone in alpha and is a norm") {
    auto cfg = gen_poisson(2, 1.0, Box::centered(2, 8.0), 1.0, 17);
    std::mt19937_64 rng(3);
    auto rnd = [&] { return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0; };
    const int nu = 2;
    std::vector<double> a(cfg.size() * nu), b(cfg.size() * nu);
    for (auto& x : a) x = rnd();
    for (auto& x : b) x = rnd();
    const auto w = WeightFunction::exponential(0.5);

    for (auto [lo, hi] : {std::pair{0.1, 0.4}, std::pair{0.3, 1.2}}) {
        CHECK(scale_norm(a, nu, w, hi, cfg) <= scale_norm(a, nu, w, lo, cfg) * (1 + 1e-12));
    }
    const double alpha = 0.6;
    const double na = scale_norm(a, nu, w, alpha, cfg);
    const double nb = scale_norm(b, nu, w, alpha, cfg);
    std::vector<double> apb(a.size()), a3(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        apb[i] = a[i] + b[i];
        a3[i] = -2.5 * a[i];
    }
    CHECK(scale_norm(apb, nu, w, alpha, cfg) <= na + nb + 1e-12);
    CHECK(scale_norm(a3, nu, w, alpha, cfg) == doctest::Approx(2.5 * na).epsilon(1e-12));
}

TEST_CASE("weight JSON round trip") {
    auto f = WeightFunction::loglog_of(2.0, WeightFunction::exponential(1.5));
    auto back = WeightFunction::from_json(f.to_json());
    for (double s : {0.0, 2.0, 50.0}) CHECK(back(s) == f(s));
    CHECK_THROWS_AS(WeightFunction::from_json(nlohmann::json{{"family", "mystery"}}), ConfigError);
}
