#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowcast/diagnostics.hpp"
#include "flowcast/rng.hpp"

using namespace flowcast;

namespace {

TransitionBank random_bank(std::size_t m, int d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x1(m * static_cast<std::size_t>(d));
    std::vector<double> x2(m * static_cast<std::size_t>(d));
    for (double& v : x1) v = rng.normal();
    for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = x1[i] + 0.3 * rng.normal();
    return TransitionBank(d, std::move(x1), std::move(x2), {});
}

}  // namespace

TEST_CASE("truncation bound report") {
    const TransitionBank bank = random_bank(128, 2, 9);
    BridgeSchedule sch{0.1, 0.3};
    SUBCASE("R = M leaves both sides at zero") {
        const auto report = check_truncation_bound(bank, sch, bank.size(), 64, 5);
        CHECK(report.pass);
        CHECK(report.max_violation <= 0.0 + 1e-12);
        CHECK(report.details.at("worst_probe").at("lhs").get<double>() == 0.0);
    }
    SUBCASE("R = 1 on a two-transition bank") {
        const TransitionBank two = random_bank(2, 2, 10);
        const auto report = check_truncation_bound(two, sch, 1, 200, 5);
        CHECK(report.pass);
    }
    SUBCASE("random banks and R values") {
        for (std::size_t r : {1ul, 16ul, 100ul}) {
            const auto report = check_truncation_bound(bank, sch, r, 200, 6);
            CHECK(report.pass);
        }
        CHECK_THROWS_AS(check_truncation_bound(bank, sch, 0, 10, 5), RangeError);
    }
}

TEST_CASE("lipschitz bound report") {
    const TransitionBank bank = random_bank(40, 2, 13);
    SUBCASE("holds on random banks") {
        const auto report = check_lipschitz_bound(bank, BridgeSchedule{0.15, 0.5}, 12, 20, 3);
        CHECK(report.pass);
        CHECK(report.probes == 12 * 20);
    }
    SUBCASE("single transition has zero forcing gradient") {
        const TransitionBank one = random_bank(1, 2, 14);
        const auto report = check_lipschitz_bound(one, BridgeSchedule{0.2, 0.4}, 6, 6, 3);
        CHECK(report.pass);
        // grad h = 0 when M = 1, so the worst lhs is numerically tiny
        CHECK(report.details.at("worst_probe").at("lhs").get<double>() <= 1e-10);
    }
    SUBCASE("halving sigma_min quadruples the leading bound term at t = 1/2") {
        // with sigma^2 t(1-t) << sigma_min^2 the bound scales as c^-4 ~ sigma_min^-4
        const double r1 = 1.0, rm = 1.0, sigma = 1e-6;
        auto bound_at_half = [&](double sm) {
            BridgeSchedule s{sm, sigma};
            const double c2 = s.c2(0.5);
            return 2.0 * rm * (r1 + std::fabs(s.g(0.5)) * rm) / c2;
        };
        // g(0.5) = 0, the leading term is 2 R1 Rm / c^2: quadruples per halving
        CHECK(bound_at_half(0.05) / bound_at_half(0.1) == doctest::Approx(4.0).epsilon(1e-6));
    }
}

TEST_CASE("duhamel report") {
    const TransitionBank bank = random_bank(64, 1, 17);
    SolverConfig config;
    config.scheme = Scheme::ForwardEuler;
    config.steps = 200;
    const auto report = check_duhamel(bank, BridgeSchedule{0.25, 0.6}, config, 3, 11);
    CHECK(report.pass);
    CHECK(report.details.at("phi_semigroup_max_err").get<double>() <= 1e-14);
    CHECK(report.details.at("beta_mass_max_err").get<double>() <= 1e-6);

    // phi(1/2, 0) = sqrt(1 + sigma^2/(4 sigma_min^2))
    BridgeSchedule s{0.2, 0.7};
    CHECK(s.phi(0.5, 0.0) ==
          doctest::Approx(std::sqrt(1.0 + 0.49 / (4.0 * 0.04))).epsilon(1e-14));
    CHECK(s.phi(1.0, 0.0) == 1.0);
}

TEST_CASE("equivariance report") {
    SUBCASE("random banks pass at 1e-12") {
        for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
            const TransitionBank bank = random_bank(48, 3, seed);
            const auto report = check_equivariance(bank, BridgeSchedule{0.12, 0.5}, 300, seed);
            CHECK(report.pass);
            CHECK(report.max_violation <= 1e-12);
            CHECK(report.details.at("label_identity_second_order").get<bool>());
        }
    }
    SUBCASE("reports are bit-reproducible under a fixed seed") {
        const TransitionBank bank = random_bank(32, 2, 31);
        const auto a = check_equivariance(bank, BridgeSchedule{0.15, 0.4}, 100, 7);
        const auto b = check_equivariance(bank, BridgeSchedule{0.15, 0.4}, 100, 7);
        CHECK(a.to_json().dump() == b.to_json().dump());
    }
}

TEST_CASE("cost model counts") {
    std::vector<CostRow> rows;
    const auto report = measure_cost({100, 500}, {32}, 3, 3, &rows);
    CHECK(report.pass);
    REQUIRE(rows.size() == 4);  // (dense, R=32) x two sizes
    CHECK(rows[0].bank_size == 100);
    CHECK(rows[0].top_r == 0);
    CHECK(rows[0].distance_ops == 100);
    CHECK(rows[0].term_ops == 100);
    CHECK(rows[1].distance_ops == 100);
    CHECK(rows[1].term_ops == 32);
    CHECK(rows[2].distance_ops == 500);
    CHECK(rows[2].term_ops == 500);
    CHECK(rows[3].distance_ops == 500);  // distances always span the bank
    CHECK(rows[3].term_ops == 32);
    for (const CostRow& r : rows) CHECK(r.ns_per_eval > 0.0);
}
