#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowcast/dynamics.hpp"
#include "flowcast/rng.hpp"

using namespace flowcast;

TEST_CASE("lorenz trajectory stays inside the attractor box") {
    const SystemSpec spec = SystemSpec::make(SystemName::Lorenz63);
    const auto tr = integrate_system(spec, std::vector<double>{1.0, 1.0, 1.0}, 100.0, 1e-3);
    for (std::size_t i = 0; i < tr.states.steps; ++i) {
        const auto row = tr.states.row(i);
        CHECK(row[0] >= -25.0);
        CHECK(row[0] <= 25.0);
        CHECK(row[1] >= -30.0);
        CHECK(row[1] <= 30.0);
        CHECK(row[2] >= 0.0);
        CHECK(row[2] <= 55.0);
    }
}

TEST_CASE("henon-heiles conserves energy at E = 1/8") {
    const SystemSpec spec = SystemSpec::make(SystemName::HenonHeiles);
    // fix (x, y, py) and solve px for the target energy
    std::vector<double> x0{0.0, 0.1, 0.0, 0.2};
    const double rest = spec.energy(x0);
    x0[2] = std::sqrt(2.0 * (0.125 - rest));
    REQUIRE(spec.energy(x0) == doctest::Approx(0.125).epsilon(1e-14));
    const auto tr = integrate_system(spec, x0, 100.0, 1e-3);
    for (std::size_t i = 0; i < tr.states.steps; i += 100)
        CHECK(std::fabs(spec.energy(tr.states.row(i)) - 0.125) <= 1e-6 * 0.125);
}

TEST_CASE("zero-length integration is rejected") {
    const SystemSpec spec = SystemSpec::make(SystemName::Lorenz63);
    CHECK_THROWS_AS(integrate_system(spec, std::vector<double>{1.0, 1.0, 1.0}, 0.0, 1e-3),
                    ConfigError);
}

TEST_CASE("largest lyapunov exponents against literature values") {
    SUBCASE("lorenz63 defaults") {
        const SystemSpec spec = SystemSpec::make(SystemName::Lorenz63);
        const auto est =
            estimate_lyapunov(spec, std::vector<double>{1.0, 1.0, 20.0}, 2000.0, 0.5);
        CHECK(est.converged);
        CHECK(est.lambda == doctest::Approx(0.906).epsilon(0.06));
    }
    SUBCASE("linear contraction has exponent -1") {
        OdeSystem decay;
        decay.dim = 1;
        decay.rhs = [](std::span<const double> x, std::span<double> dx) { dx[0] = -x[0]; };
        const auto est = estimate_lyapunov(decay, std::vector<double>{1.0}, 200.0, 0.25);
        CHECK(est.lambda == doctest::Approx(-1.0).epsilon(0.01));
    }
    SUBCASE("rossler defaults") {
        const SystemSpec spec = SystemSpec::make(SystemName::Rossler);
        const auto est =
            estimate_lyapunov(spec, std::vector<double>{1.0, 1.0, 1.0}, 3000.0, 1.0, 5e-3);
        CHECK(est.lambda == doctest::Approx(0.07).epsilon(0.3));
        CHECK(std::fabs(est.lambda - 0.07) <= 0.02);
    }
}

TEST_CASE("generate_benchmark honors the sampling plan") {
    const SystemSpec spec = SystemSpec::make(SystemName::Lorenz63);
    SamplingPlan plan;
    plan.lyapunov_exponent = 0.9;
    plan.points_per_lyapunov_time = 100;
    plan.n_trajectories = 3;
    plan.length = 120;
    plan.burn_in = 20.0;

    SUBCASE("dt normalization is exact") {
        CHECK(plan.dt() * plan.lyapunov_exponent * plan.points_per_lyapunov_time ==
              doctest::Approx(1.0).epsilon(1e-15));
        // 812 points at 100 per Lyapunov time span ~8.12 Lyapunov times
        SamplingPlan paper = plan;
        paper.length = 812;
        CHECK(paper.length * paper.dt() * paper.lyapunov_exponent ==
              doctest::Approx(8.12).epsilon(1e-12));
    }
    SUBCASE("shapes, determinism, and attractor confinement") {
        const auto a = generate_benchmark(spec, plan, 77);
        const auto b = generate_benchmark(spec, plan, 77);
        REQUIRE(a.size() == 3);
        for (std::size_t n = 0; n < 3; ++n) {
            CHECK(a[n].states.steps == 120);
            CHECK(a[n].dt == plan.dt());
            REQUIRE(a[n].states.data.size() == b[n].states.data.size());
            for (std::size_t i = 0; i < a[n].states.data.size(); ++i)
                CHECK(a[n].states.data[i] == b[n].states.data[i]);
            // dissipative system after burn-in: within 1.5x the empirical box
            for (std::size_t i = 0; i < a[n].states.steps; ++i) {
                const auto row = a[n].states.row(i);
                CHECK(std::fabs(row[0]) <= 1.5 * 20.0);
                CHECK(std::fabs(row[1]) <= 1.5 * 27.0);
                CHECK(row[2] >= 0.0);
                CHECK(row[2] <= 1.5 * 50.0);
            }
        }
        const auto c = generate_benchmark(spec, plan, 78);
        CHECK(a[0].states.data[0] != c[0].states.data[0]);
    }
    SUBCASE("minimal plan") {
        SamplingPlan tiny = plan;
        tiny.n_trajectories = 1;
        tiny.length = 2;
        const auto out = generate_benchmark(spec, tiny, 5);
        REQUIRE(out.size() == 1);
        CHECK(out[0].states.steps == 2);
    }
    SUBCASE("plan validation") {
        SamplingPlan bad = plan;
        bad.lyapunov_exponent = 0.0;
        CHECK_THROWS_AS(generate_benchmark(spec, bad, 1), ConfigError);
        bad = plan;
        bad.length = 1;
        CHECK_THROWS_AS(generate_benchmark(spec, bad, 1), ConfigError);
    }
}

TEST_CASE("henon-heiles benchmark draws stay below the escape energy") {
    const SystemSpec spec = SystemSpec::make(SystemName::HenonHeiles);
    SamplingPlan plan;
    plan.lyapunov_exponent = 0.1;
    plan.points_per_lyapunov_time = 50;
    plan.n_trajectories = 2;
    plan.length = 50;
    plan.burn_in = 5.0;
    const auto out = generate_benchmark(spec, plan, 12);
    REQUIRE(out.size() == 2);
    for (const auto& tr : out)
        for (std::size_t i = 0; i < tr.states.steps; ++i)
            CHECK(spec.energy(tr.states.row(i)) < 1.0 / 6.0);
}

TEST_CASE("aizawa and rossler produce bounded benchmark data") {
    for (const char* name : {"aizawa", "rossler"}) {
        const SystemSpec spec = SystemSpec::make(name);
        SamplingPlan plan;
        plan.lyapunov_exponent = name == std::string("aizawa") ? 0.5 : 0.07;
        plan.points_per_lyapunov_time = 50;
        plan.n_trajectories = 1;
        plan.length = 100;
        plan.burn_in = 30.0;
        const auto out = generate_benchmark(spec, plan, 3);
        for (std::size_t i = 0; i < out[0].states.steps; ++i) {
            double norm2 = 0.0;
            for (double v : out[0].states.row(i)) norm2 += v * v;
            CHECK(norm2 < 1e4);
        }
    }
}

TEST_CASE("unknown parameters are rejected") {
    CHECK_THROWS_AS(SystemSpec::make(SystemName::Lorenz63, {{"not_a_param", 1.0}}), ConfigError);
    CHECK_THROWS_AS(SystemSpec::make("no_such_system"), ConfigError);
}
