#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowcast/rng.hpp"
#include "flowcast/velocity_field.hpp"

using namespace flowcast;

namespace {

TransitionBank random_bank(std::size_t m, int d, Rng& rng, double spread = 1.0) {
    std::vector<double> x1(m * static_cast<std::size_t>(d));
    std::vector<double> x2(m * static_cast<std::size_t>(d));
    for (double& v : x1) v = spread * rng.normal();
    for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = x1[i] + 0.3 * spread * rng.normal();
    return TransitionBank(d, std::move(x1), std::move(x2), {});
}

double norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double max_label_norm(const TransitionBank& bank, const BridgeSchedule& s, double t) {
    double best = 0.0;
    const double gt = s.g(t);
    for (std::size_t j = 0; j < bank.size(); ++j) {
        double acc = 0.0;
        for (int i = 0; i < bank.dim(); ++i) {
            const double m = (1.0 - t) * bank.x1(j)[i] + t * bank.x2(j)[i];
            const double y = (bank.x2(j)[i] - bank.x1(j)[i]) - gt * m;
            acc += y * y;
        }
        best = std::max(best, std::sqrt(acc));
    }
    return best;
}

}  // namespace

TEST_CASE("bridge mean endpoints and interior") {
    TransitionBank bank(2, {1.0, 2.0}, {3.0, 6.0}, {});
    CHECK(bridge_mean(bank, 0, 0.0) == std::vector<double>{1.0, 2.0});
    CHECK(bridge_mean(bank, 0, 1.0) == std::vector<double>{3.0, 6.0});
    const auto mid = bridge_mean(bank, 0, 0.25);
    CHECK(mid[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(mid[1] == doctest::Approx(3.0).epsilon(1e-15));

    TransitionBank b1(1, {0.0}, {1.0}, {});
    CHECK(bridge_mean(b1, 0, 0.0)[0] == 0.0);
    CHECK(bridge_mean(b1, 0, 0.5)[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(bridge_mean(b1, 1, 0.5), IndexError);
}

TEST_CASE("responsibilities: single component, dominance, symmetry") {
    BridgeSchedule sch{0.1, 0.0};

    TransitionBank single(1, {2.0}, {3.0}, {});
    std::vector<double> a1(1);
    responsibilities(0.3, std::vector<double>{9.0}, single, sch, a1);
    CHECK(a1[0] == 1.0);

    // transitions (0->1) and (10->11) at t=0.5, z=0.5: distances 0 and 100,
    // c^2 = 0.01, so the second weight is e^{-5000} which underflows to 0
    TransitionBank two(1, {0.0, 10.0}, {1.0, 11.0}, {});
    std::vector<double> a2(2);
    responsibilities(0.5, std::vector<double>{0.5}, two, sch, a2);
    CHECK(a2[0] == 1.0);
    CHECK(a2[1] == 0.0);

    // equidistant probe: exact symmetry
    responsibilities(0.5, std::vector<double>{5.5}, two, sch, a2);
    CHECK(a2[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(a2[1] == doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(responsibilities(
                        0.5, std::vector<double>{std::nan("")}, two, sch, a2),
                    NonFiniteInput);
}

TEST_CASE("weight simplex holds for extreme inputs (property)") {
    Rng rng(2024);
    BridgeSchedule sch{0.05, 0.3};
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t m = 1 + rng.next_u64() % 40;
        const int d = 1 + static_cast<int>(rng.next_u64() % 4);
        TransitionBank bank = random_bank(m, d, rng);
        std::vector<double> z(static_cast<std::size_t>(d));
        const double magnitude = std::pow(10.0, rng.uniform(0.0, 6.0));
        for (double& v : z) v = magnitude * rng.normal();
        const double t = rng.uniform(0.0, 1.0);
        std::vector<double> alpha(m);
        responsibilities(t, z, bank, sch, alpha);
        double sum = 0.0;
        for (double a : alpha) {
            CHECK(a >= 0.0);
            sum += a;
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
    // squared distances near 1e300 must not overflow the softmax
    TransitionBank far(1, {0.0}, {1.0}, {});
    std::vector<double> alpha(1);
    responsibilities(0.5, std::vector<double>{1e150}, far, sch, alpha);
    CHECK(alpha[0] == 1.0);
}

TEST_CASE("dense velocity closed form") {
    SUBCASE("single transition with sigma = 0 is the constant increment") {
        TransitionBank bank(2, {1.0, -2.0}, {2.5, 0.5}, {});
        BridgeSchedule sch{0.2, 0.0};
        for (double t : {0.0, 0.3, 0.7, 1.0}) {
            auto ev = velocity_dense(t, std::vector<double>{5.0, 5.0}, bank, PathFamily{sch});
            CHECK(ev.v[0] == doctest::Approx(1.5).epsilon(1e-15));
            CHECK(ev.v[1] == doctest::Approx(2.5).epsilon(1e-15));
        }
    }
    SUBCASE("linear term vanishes at t = 1/2") {
        Rng rng(3);
        TransitionBank bank = random_bank(12, 2, rng);
        BridgeSchedule sch{0.15, 0.8};
        CHECK(sch.g(0.5) == 0.0);
        // v at t=0.5 must equal the pure weight average of increments
        std::vector<double> z{0.4, -0.2};
        auto ev = velocity_dense(0.5, z, bank, PathFamily{sch}, true);
        std::vector<double> expect(2, 0.0);
        for (std::size_t j = 0; j < bank.size(); ++j)
            for (int i = 0; i < 2; ++i)
                expect[static_cast<std::size_t>(i)] +=
                    ev.weights[j] * (bank.x2(j)[i] - bank.x1(j)[i]);
        CHECK(ev.v[0] == doctest::Approx(expect[0]).epsilon(1e-12));
        CHECK(ev.v[1] == doctest::Approx(expect[1]).epsilon(1e-12));
    }
    SUBCASE("two-transition dominance example") {
        // (0->1) and (10->13): at z=0.5, t=0.5 the first weight is 1 up to
        // e^{-5000}, so v equals the dominant increment exactly
        TransitionBank bank(1, {0.0, 10.0}, {1.0, 13.0}, {});
        BridgeSchedule sch{0.1, 0.0};
        auto ev = velocity_dense(0.5, std::vector<double>{0.5}, bank, PathFamily{sch});
        CHECK(ev.v[0] == 1.0);
        CHECK(ev.kept_mass == 1.0);
    }
}

TEST_CASE("rectified flow family") {
    TransitionBank bank(1, {0.0, 0.0}, {2.0, -4.0}, {});
    RectifiedFlowPath rf{0.0};
    SUBCASE("plain field points at the samples") {
        // M=2 endpoints 2 and -4; probe close to t*x2 of the first
        const double t = 0.5;
        auto ev = velocity_dense(t, std::vector<double>{1.0}, bank, PathFamily{rf}, true);
        // z = t*2 exactly: first weight dominates; v ~ (2 - 1)/(1 - 0.5) = 2
        CHECK(ev.weights[0] > 0.999);
        CHECK(ev.v[0] == doctest::Approx(2.0).epsilon(1e-6));
    }
    SUBCASE("t = 1 is outside the domain") {
        CHECK_THROWS_AS(velocity_dense(1.0, std::vector<double>{0.0}, bank, PathFamily{rf}),
                        TimeDomainError);
    }
    SUBCASE("jacobian and score reject the family") {
        std::vector<double> jac(1);
        CHECK_THROWS_AS(velocity_jacobian(0.5, std::vector<double>{0.0}, bank,
                                          bridge_of(PathFamily{rf}), jac),
                        UnsupportedFamily);
    }
}

TEST_CASE("top-R truncation") {
    Rng rng(17);
    TransitionBank bank = random_bank(64, 3, rng);
    BridgeSchedule sch{0.1, 0.4};
    const PathFamily fam{sch};

    SUBCASE("R = M reproduces the dense evaluation bit-exactly") {
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> z{rng.normal(), rng.normal(), rng.normal()};
            const double t = rng.uniform(0.0, 1.0);
            auto dense = velocity_dense(t, z, bank, fam);
            auto full = velocity_topR(t, z, bank, fam, bank.size());
            for (int i = 0; i < 3; ++i) CHECK(dense.v[i] == full.v[i]);
            CHECK(full.kept_mass == 1.0);
        }
    }
    SUBCASE("R = 1 on a dominant-weight bank keeps almost all mass") {
        TransitionBank two(1, {0.0, 10.0}, {1.0, 11.0}, {});
        BridgeSchedule tight{0.1, 0.0};
        auto ev = velocity_topR(0.5, std::vector<double>{0.5}, two, PathFamily{tight}, 1);
        CHECK(ev.v[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ev.kept_mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ev.indices == std::vector<std::size_t>{0});
    }
    SUBCASE("truncation error bound holds on random probes (property)") {
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> z{2.0 * rng.normal(), 2.0 * rng.normal(), 2.0 * rng.normal()};
            const double t = rng.uniform(0.0, 1.0);
            const std::size_t r = 1 + rng.next_u64() % bank.size();
            auto dense = velocity_dense(t, z, bank, fam);
            auto trunc = velocity_topR(t, z, bank, fam, r);
            std::vector<double> diff(3);
            for (int i = 0; i < 3; ++i) diff[static_cast<std::size_t>(i)] = dense.v[i] - trunc.v[i];
            const double bound = 2.0 * max_label_norm(bank, sch, t) * (1.0 - trunc.kept_mass);
            CHECK(norm(diff) <= bound + 1e-10);
        }
    }
    SUBCASE("ties break toward the lower index") {
        // two transitions with identical means; probe equidistant
        TransitionBank twin(1, {1.0, 1.0}, {2.0, 2.0}, {});
        auto ev = velocity_topR(0.0, std::vector<double>{0.0}, twin, fam, 1);
        CHECK(ev.indices == std::vector<std::size_t>{0});
    }
    SUBCASE("R out of range") {
        CHECK_THROWS_AS(velocity_topR(0.5, std::vector<double>{0, 0, 0}, bank, fam, 0),
                        RangeError);
        CHECK_THROWS_AS(
            velocity_topR(0.5, std::vector<double>{0, 0, 0}, bank, fam, bank.size() + 1),
            RangeError);
    }
}

TEST_CASE("analytic jacobian") {
    SUBCASE("M = 1: gradient is g(t) I") {
        TransitionBank bank(2, {0.5, -1.0}, {1.0, 2.0}, {});
        BridgeSchedule sch{0.3, 0.7};
        std::vector<double> jac(4);
        velocity_jacobian(0.2, std::vector<double>{0.0, 0.0}, bank, sch, jac);
        const double g = sch.g(0.2);
        CHECK(jac[0] == doctest::Approx(g).epsilon(1e-14));
        CHECK(jac[3] == doctest::Approx(g).epsilon(1e-14));
        CHECK(jac[1] == 0.0);
        CHECK(jac[2] == 0.0);
    }
    SUBCASE("matches central finite differences (property)") {
        Rng rng(29);
        for (int rep = 0; rep < 25; ++rep) {
            const std::size_t m = 2 + rng.next_u64() % 30;
            const int d = 1 + static_cast<int>(rng.next_u64() % 4);
            TransitionBank bank = random_bank(m, d, rng);
            BridgeSchedule sch{0.25, 0.5};
            const PathFamily fam{sch};
            std::vector<double> z(static_cast<std::size_t>(d));
            for (double& v : z) v = 1.2 * rng.normal();
            const double t = rng.uniform(0.05, 0.95);

            std::vector<double> jac(static_cast<std::size_t>(d * d));
            velocity_jacobian(t, z, bank, sch, jac);

            const double h = 1e-5 * (1.0 + norm(z));
            std::vector<double> fd(static_cast<std::size_t>(d * d));
            for (int c = 0; c < d; ++c) {
                std::vector<double> zp = z, zm = z;
                zp[static_cast<std::size_t>(c)] += h;
                zm[static_cast<std::size_t>(c)] -= h;
                auto vp = velocity_dense(t, zp, bank, fam);
                auto vm = velocity_dense(t, zm, bank, fam);
                for (int r = 0; r < d; ++r)
                    fd[static_cast<std::size_t>(r * d + c)] = (vp.v[r] - vm.v[r]) / (2.0 * h);
            }
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < jac.size(); ++i) {
                num += (jac[i] - fd[i]) * (jac[i] - fd[i]);
                den += jac[i] * jac[i];
            }
            CHECK(std::sqrt(num) <= 1e-4 * std::max(1.0, std::sqrt(den)));
        }
    }
}

TEST_CASE("score identity and convex-hull property") {
    Rng rng(31);
    TransitionBank bank = random_bank(25, 3, rng);
    BridgeSchedule sch{0.2, 0.6};
    const PathFamily fam{sch};

    SUBCASE("score at the single-transition mode is zero") {
        TransitionBank single(1, {1.0}, {2.0}, {});
        const auto m = bridge_mean(single, 0, 0.4);
        const auto s = score(0.4, m, single, sch);
        CHECK(s[0] == 0.0);
    }
    SUBCASE("velocity = weighted increments - (sigma^2 (1-2t)/2) score, 100 draws") {
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> z{2.0 * rng.normal(), 2.0 * rng.normal(), 2.0 * rng.normal()};
            const double t = rng.uniform(0.0, 1.0);
            const auto ev = velocity_dense(t, z, bank, fam, true);
            const auto sc = score(t, z, bank, sch);
            for (int i = 0; i < 3; ++i) {
                double mix = 0.0;
                for (std::size_t j = 0; j < bank.size(); ++j)
                    mix += ev.weights[j] * (bank.x2(j)[i] - bank.x1(j)[i]);
                const double rhs = mix - 0.5 * sch.sigma * sch.sigma * (1.0 - 2.0 * t) * sc[i];
                CHECK(ev.v[i] == doctest::Approx(rhs).epsilon(1e-10));
            }
        }
    }
    SUBCASE("sigma = 0 drops the score term") {
        BridgeSchedule flat{0.2, 0.0};
        std::vector<double> z{0.1, -0.4, 0.2};
        const auto ev = velocity_dense(0.3, z, bank, PathFamily{flat}, true);
        double mix = 0.0;
        for (std::size_t j = 0; j < bank.size(); ++j)
            mix += ev.weights[j] * (bank.x2(j)[0] - bank.x1(j)[0]);
        CHECK(ev.v[0] == doctest::Approx(mix).epsilon(1e-14));
    }
    SUBCASE("forcing stays in the convex hull (1-D exact, norm bound in 3-D)") {
        TransitionBank line(1, {0.0, 1.0, -2.0}, {1.0, 3.0, -1.5}, {});
        BridgeSchedule s1{0.3, 0.5};
        for (int rep = 0; rep < 40; ++rep) {
            const double t = rng.uniform(0.0, 1.0);
            std::vector<double> z{3.0 * rng.normal()};
            const auto ev = velocity_dense(t, z, line, PathFamily{s1});
            const double h = ev.v[0] - s1.g(t) * z[0];
            double lo = 1e300, hi = -1e300;
            for (std::size_t j = 0; j < line.size(); ++j) {
                const double m = (1.0 - t) * line.x1(j)[0] + t * line.x2(j)[0];
                const double y = (line.x2(j)[0] - line.x1(j)[0]) - s1.g(t) * m;
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
            CHECK(h >= lo - 1e-12);
            CHECK(h <= hi + 1e-12);
        }
        for (int rep = 0; rep < 40; ++rep) {
            const double t = rng.uniform(0.0, 1.0);
            std::vector<double> z{3.0 * rng.normal(), 3.0 * rng.normal(), 3.0 * rng.normal()};
            const auto ev = velocity_dense(t, z, bank, fam);
            std::vector<double> h(3);
            for (int i = 0; i < 3; ++i) h[static_cast<std::size_t>(i)] = ev.v[i] - sch.g(t) * z[i];
            CHECK(norm(h) <= max_label_norm(bank, sch, t) + 1e-12);
        }
    }
}

TEST_CASE("lipschitz bound dominates the jacobian on a probe grid (property)") {
    Rng rng(37);
    TransitionBank bank = random_bank(20, 2, rng);
    BridgeSchedule sch{0.15, 0.5};
    double r1 = 0.0;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        double acc = 0.0;
        for (int i = 0; i < 2; ++i)
            acc += (bank.x2(j)[i] - bank.x1(j)[i]) * (bank.x2(j)[i] - bank.x1(j)[i]);
        r1 = std::max(r1, std::sqrt(acc));
    }
    for (int ti = 0; ti <= 10; ++ti) {
        const double t = ti / 10.0;
        double rm = 0.0;
        for (std::size_t j = 0; j < bank.size(); ++j) rm = std::max(rm, norm(bridge_mean(bank, j, t)));
        const double bound = 2.0 * rm * (r1 + std::fabs(sch.g(t)) * rm) / sch.c2(t);
        for (int zi = 0; zi < 8; ++zi) {
            std::vector<double> z{2.0 * rng.normal(), 2.0 * rng.normal()};
            std::vector<double> jac(4);
            velocity_jacobian(t, z, bank, sch, jac);
            jac[0] -= sch.g(t);
            jac[3] -= sch.g(t);
            // Frobenius norm dominates the operator norm, so this is a valid check
            double fro = 0.0;
            for (double v : jac) fro += v * v;
            // ||grad h||_op <= ||grad h||_F <= sqrt(2) * op; use op <= fro here
            CHECK(std::sqrt(fro) <= std::sqrt(2.0) * bound + 1e-9);
        }
    }
}

TEST_CASE("kernel equivariance and intrinsic labels (property)") {
    Rng rng(41);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t m = 2 + rng.next_u64() % 20;
        TransitionBank bank = random_bank(m, 2, rng);
        BridgeSchedule sch{0.2, 0.7};
        const double t = (rep == 0) ? 0.0 : rng.uniform(0.0, 1.0);
        const double phi = sch.phi(t, 0.0);

        // probe near the intrinsic cloud
        const std::size_t jc = rng.next_u64() % m;
        std::vector<double> y(2);
        for (int i = 0; i < 2; ++i) {
            const double mt = (1.0 - t) * bank.x1(jc)[i] + t * bank.x2(jc)[i];
            y[static_cast<std::size_t>(i)] = mt / phi + sch.sigma_min * rng.normal();
        }
        std::vector<double> z{phi * y[0], phi * y[1]};
        std::vector<double> alpha(m);
        responsibilities(t, z, bank, sch, alpha);

        // independent Nystrom weights on intrinsic means with bandwidth c_0
        std::vector<double> logits(m);
        double best = 1e300;
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int i = 0; i < 2; ++i) {
                const double mt = ((1.0 - t) * bank.x1(j)[i] + t * bank.x2(j)[i]) / phi;
                acc += (y[static_cast<std::size_t>(i)] - mt) * (y[static_cast<std::size_t>(i)] - mt);
            }
            logits[j] = acc;
            best = std::min(best, acc);
        }
        double total = 0.0;
        std::vector<double> w(m);
        for (std::size_t j = 0; j < m; ++j) {
            w[j] = std::exp(-(logits[j] - best) / (2.0 * sch.sigma_min * sch.sigma_min));
            total += w[j];
        }
        for (std::size_t j = 0; j < m; ++j) {
            w[j] /= total;
            CHECK(std::fabs(alpha[j] - w[j]) <= 1e-12);
        }

        // intrinsic label identity by central differences, O(h^2)
        if (t > 0.01 && t < 0.99) {
            const double g = sch.g(t);
            auto intrinsic = [&](double tt, int i) {
                return ((1.0 - tt) * bank.x1(jc)[i] + tt * bank.x2(jc)[i]) / sch.phi(tt, 0.0);
            };
            for (int i = 0; i < 2; ++i) {
                const double mt = (1.0 - t) * bank.x1(jc)[i] + t * bank.x2(jc)[i];
                const double label = ((bank.x2(jc)[i] - bank.x1(jc)[i]) - g * mt) / phi;
                const double h1 = 1e-3, h2 = 5e-4;
                const double e1 =
                    std::fabs((intrinsic(t + h1, i) - intrinsic(t - h1, i)) / (2 * h1) - label);
                const double e2 =
                    std::fabs((intrinsic(t + h2, i) - intrinsic(t - h2, i)) / (2 * h2) - label);
                CHECK((e2 < 1e-11 || e1 / e2 > 3.0));
                CHECK(e1 <= 5e-3);  // h^2 * curvature scale
            }
        }
    }
}
