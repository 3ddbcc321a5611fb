#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rowfinite/harness.hpp"

using namespace rowfinite;

namespace {

ExperimentPlan self_align_plan() {
    ExperimentPlan plan;
    plan.geometry.kind = GeometrySource::Kind::Lattice;
    plan.geometry.dim = 1;
    plan.geometry.extent = 16;
    plan.geometry.radius = 1.0;
    plan.pair.w = WeightFunction::exponential(1.0);
    plan.pair.z = WeightFunction::constant(3.0);
    plan.model = ModelSpec::self_align(InfluenceSpec::rational_decay(1.0, 0.5),
                                       Normalization::PerCount, 1);
    plan.alpha = 0.1;
    plan.beta = 0.5;
    plan.T = 2.0;
    plan.stepping = FixedStep{1e-2};
    plan.n_records = 9;
    plan.ladder_radii = {4, 8, 16};
    plan.window_radius = 2.0;
    plan.initial.seed = 5;
    return plan;
}

}  // namespace

TEST_CASE("convergence study: stationary dynamics gives zero differences") {
    auto plan = self_align_plan();
    plan.initial.amplitude = 0.0;  // all spins equal (zero): F = 0
    auto rep = convergence_study(plan);
    for (const auto& s : rep.steps) CHECK(s.sup_difference == 0.0);
    CHECK(rep.monotone_decay);
}

TEST_CASE("convergence study: isolated window point is cutoff-independent") {
    auto plan = self_align_plan();
    plan.geometry.spacing = 3.0;  // spacing > radius: everyone is isolated
    plan.geometry.extent = 8;
    plan.ladder_radii = {4, 8, 16};
    auto rep = convergence_study(plan);
    for (const auto& s : rep.steps) CHECK(s.sup_difference == 0.0);
}

TEST_CASE("convergence study: alignment on the line decays along the ladder") {
    auto plan = self_align_plan();
    auto rep = convergence_study(plan);
    REQUIRE(rep.steps.size() == 2);
    CHECK(rep.last <= 1e-4);
    CHECK(rep.last < rep.first);
    CHECK(rep.first > 0);
}

TEST_CASE("convergence study validates its ladder") {
    auto plan = self_align_plan();
    plan.ladder_radii = {4, 8};
    CHECK_THROWS_AS(convergence_study(plan), ConfigError);
    plan.ladder_radii = {4, 8, 8};
    CHECK_THROWS_AS(convergence_study(plan), ConfigError);
    plan.ladder_radii = {4, 8, 16};
    plan.window_radius = 6.0;
    CHECK_THROWS_AS(convergence_study(plan), ConfigError);
}

TEST_CASE("identical runs are bitwise identical") {
    auto plan = self_align_plan();
    auto config = std::make_shared<const Configuration>(plan.geometry.generate());
    auto q0 = plan.initial.build(*config, 1, plan.pair.w);
    RecordSpec rec;
    rec.n_records = 5;
    auto t1 = integrate_cutoff(plan.model, config, std::nullopt, q0, 1.0, FixedStep{1e-2}, rec);
    auto t2 = integrate_cutoff(plan.model, config, std::nullopt, q0, 1.0, FixedStep{1e-2}, rec);
    CHECK(t1.states == t2.states);
}

TEST_CASE("uniqueness probe: refinement residual sits at the RK4 scale") {
    auto plan = self_align_plan();
    plan.stepping = FixedStep{1e-2};
    auto rep1 = uniqueness_probe(plan, 2);
    CHECK(rep1.pass);
    REQUIRE(rep1.delta.size() == 2);
    // delta grows with the window
    for (std::size_t t = 0; t < rep1.times.size(); ++t)
        CHECK(rep1.delta[0][t] <= rep1.delta[1][t] + 1e-18);

    // Richardson-style refinement: halving dt shrinks delta by roughly 2^4
    plan.stepping = FixedStep{5e-3};
    auto rep2 = uniqueness_probe(plan, 2);
    const double d1 = rep1.delta.back().back();
    const double d2 = rep2.delta.back().back();
    REQUIRE(d1 > 0);
    REQUIRE(d2 > 0);
    const double factor = d1 / d2;
    CHECK(factor >= 6.0);
    CHECK(factor <= 40.0);
}

TEST_CASE("medium-growth weights satisfy the linear-bound inequality") {
    // z(s) w(s)^{beta(k-1)} + w(s)^{beta(j-2)} <= K1 s + K2 for w = 1+s,
    // z = loglog, beta = 1/(j-2), j = 4, k = 2
    const auto w = WeightFunction::linear();
    const auto z = WeightFunction::loglog(3.0);
    const double beta = 0.5;
    const double K1 = 6.0, K2 = 6.0;
    for (int i = 0; i <= 4000; ++i) {
        const double s = std::pow(10.0, -3.0 + 9.0 * i / 4000.0);
        const double lhs = z(s) * std::pow(w(s), beta * 1.0) + std::pow(w(s), beta * 2.0);
        CHECK(lhs <= K1 * s + K2);
    }
}

TEST_CASE("scenario plans are internally consistent") {
    for (auto name : {ScenarioName::MinGrowth, ScenarioName::MaxGrowth,
                      ScenarioName::MediumGrowth, ScenarioName::Flocking}) {
        auto plan = scenario_plan(name);
        CHECK(plan.beta > plan.model.lyap_j() * plan.alpha);
        CHECK(plan.ladder_radii.size() >= 3);
        CHECK(plan.window_radius <= plan.ladder_radii.front());
        CHECK(scenario_from_string(scenario_to_string(name)) == name);
    }
    CHECK_THROWS_AS(scenario_from_string("bogus"), ConfigError);
}

TEST_CASE("scenario reports are deterministic byte for byte") {
    auto r1 = run_scenario(ScenarioName::MinGrowth, std::nullopt);
    auto r2 = run_scenario(ScenarioName::MinGrowth, std::nullopt);
    CHECK(r1.dump() == r2.dump());
    CHECK(r1.at("pass").get<bool>());
}

TEST_CASE("trajectory CSV layout") {
    auto plan = self_align_plan();
    auto config = std::make_shared<const Configuration>(plan.geometry.generate());
    auto q0 = plan.initial.build(*config, 1, plan.pair.w);
    RecordSpec rec;
    rec.n_records = 3;
    auto traj = integrate_cutoff(plan.model, config, std::nullopt, q0, 1.0, FixedStep{1e-2}, rec);
    std::ostringstream os;
    write_trajectory_csv(os, traj, *config);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,point_id,c0,L");
    std::size_t rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == config->size() * 3);
}

TEST_CASE("initial state respects the growth profile") {
    auto cfg = gen_lattice(1, 10, 1.0, 1.0);
    InitialState is;
    is.amplitude = 2.0;
    is.alpha = 0.3;
    is.seed = 9;
    const auto w = WeightFunction::exponential(1.0);
    auto q = is.build(cfg, 1, w);
    for (std::size_t i = 0; i < cfg.size(); ++i)
        CHECK(std::abs(q[i]) <= 2.0 * std::pow(w(cfg.radial[i]), 0.3));
    // ||q0||_alpha is O(amplitude)
    CHECK(scale_norm(q, 1, w, 0.3, cfg) <= 2.0);
}
