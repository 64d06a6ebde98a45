#include "flowcast/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "flowcast/rng.hpp"
#include "flowcast/velocity_field.hpp"

namespace flowcast {

nlohmann::json DiagnosticReport::to_json() const {
    return {{"name", name},          {"probes", probes}, {"max_violation", max_violation},
            {"bound", bound},        {"tolerance", tolerance},
            {"pass", pass},          {"details", details}};
}

std::string DiagnosticReport::summary_line() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-22s %s  probes=%zu  max_violation=%.3e (limit %.3e)",
                  name.c_str(), pass ? "PASS" : "FAIL", probes, max_violation, bound + tolerance);
    return buf;
}

namespace {

// Probe times: both endpoints first, then uniform draws from [0.05, 0.95].
double probe_time(std::size_t index, Rng& rng) {
    if (index == 0) return 0.0;
    if (index == 1) return 1.0;
    return rng.uniform(0.05, 0.95);
}

// Probe states: uniform over the bank bounding box inflated by 50%.
std::vector<double> probe_state(const TransitionBank& bank, Rng& rng) {
    const int d = bank.dim();
    std::vector<double> z(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const double lo = bank.box_lo()[static_cast<std::size_t>(i)];
        const double hi = bank.box_hi()[static_cast<std::size_t>(i)];
        const double pad = 0.25 * std::max(hi - lo, 1e-12);
        z[static_cast<std::size_t>(i)] = rng.uniform(lo - pad, hi + pad);
    }
    return z;
}

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

// Largest ||y_j(t)|| over the bank; the constant C of the truncation bound.
double max_label_norm(const TransitionBank& bank, const BridgeSchedule& schedule, double t) {
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const double gt = schedule.g(t);
    const double omt = 1.0 - t;
    double best = 0.0;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        const auto a = bank.x1(j);
        const auto b = bank.x2(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double m = omt * a[i] + t * b[i];
            const double y = (b[i] - a[i]) - gt * m;
            acc += y * y;
        }
        best = std::max(best, acc);
    }
    return std::sqrt(best);
}

// Spectral norm of a d x d matrix by power iteration on A^T A.
double operator_norm(std::span<const double> a, std::size_t d, Rng& rng) {
    std::vector<double> v(d), av(d), w(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = rng.normal();
    double nv = norm2(v);
    if (nv == 0.0) {
        v[0] = 1.0;
        nv = 1.0;
    }
    for (double& x : v) x /= nv;
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
        for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += a[r * d + c] * v[c];
            av[r] = acc;
        }
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < d; ++r) acc += a[r * d + c] * av[r];
            w[c] = acc;
        }
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        const double next = nw;  // estimate of lambda_max(A^T A)
        for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / nw;
        if (std::fabs(next - lambda) <= 1e-10 * std::max(1.0, next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(lambda);
}

}  // namespace

DiagnosticReport check_truncation_bound(const TransitionBank& bank, const BridgeSchedule& schedule,
                                        std::size_t R, std::size_t n_probes, std::uint64_t seed) {
    if (R < 1 || R > bank.size())
        throw RangeError("check_truncation_bound: R must satisfy 1 <= R <= M");
    Rng rng(derive_seed(seed, 0xD1A6, 1));
    const PathFamily family{schedule};
    DiagnosticReport report;
    report.name = "truncation_bound";
    report.probes = n_probes;
    report.bound = 0.0;
    report.tolerance = 1e-10;
    report.max_violation = -1e300;
    nlohmann::json worst;
    for (std::size_t p = 0; p < n_probes; ++p) {
        const double t = probe_time(p, rng);
        const std::vector<double> z = probe_state(bank, rng);
        const VelocityEval dense = velocity_dense(t, z, bank, family);
        const VelocityEval trunc = velocity_topR(t, z, bank, family, R);
        double diff2 = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double diff = dense.v[i] - trunc.v[i];
            diff2 += diff * diff;
        }
        const double lhs = std::sqrt(diff2);
        const double rhs = 2.0 * max_label_norm(bank, schedule, t) * (1.0 - trunc.kept_mass);
        const double violation = lhs - rhs;
        if (violation > report.max_violation) {
            report.max_violation = violation;
            worst = {{"t", t}, {"lhs", lhs}, {"rhs", rhs}, {"kept_mass", trunc.kept_mass}};
        }
    }
    report.pass = report.max_violation <= report.bound + report.tolerance;
    report.details = {{"R", R}, {"worst_probe", worst}};
    return report;
}

DiagnosticReport check_lipschitz_bound(const TransitionBank& bank, const BridgeSchedule& schedule,
                                       std::size_t n_times, std::size_t n_z_probes,
                                       std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x11B5, 2));
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    DiagnosticReport report;
    report.name = "lipschitz_bound";
    report.probes = n_times * n_z_probes;
    report.bound = 0.0;
    report.max_violation = -1e300;
    nlohmann::json worst;

    // R_1 is t-independent.
    double r1 = 0.0;
    for (std::size_t j = 0; j < bank.size(); ++j) {
        const auto a = bank.x1(j);
        const auto b = bank.x2(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += (b[i] - a[i]) * (b[i] - a[i]);
        r1 = std::max(r1, acc);
    }
    r1 = std::sqrt(r1);

    std::vector<double> jac(d * d);
    double tol = 0.0;
    for (std::size_t ti = 0; ti < n_times; ++ti) {
        const double t = probe_time(ti, rng);
        const double gt = schedule.g(t);
        const double c2 = schedule.c2(t);
        double rm = 0.0;
        for (std::size_t j = 0; j < bank.size(); ++j)
            rm = std::max(rm, norm2(bridge_mean(bank, j, t)));
        const double rhs = 2.0 * rm * (r1 + std::fabs(gt) * rm) / c2;
        tol = std::max(tol, 1e-9 * (1.0 + rhs));
        for (std::size_t zi = 0; zi < n_z_probes; ++zi) {
            const std::vector<double> z = probe_state(bank, rng);
            velocity_jacobian(t, z, bank, schedule, jac);
            for (std::size_t i = 0; i < d; ++i) jac[i * d + i] -= gt;  // grad h = grad v - G_t
            const double lhs = operator_norm(jac, d, rng);
            const double violation = lhs - rhs;
            if (violation > report.max_violation) {
                report.max_violation = violation;
                worst = {{"t", t}, {"lhs", lhs}, {"rhs", rhs}};
            }
        }
    }
    report.tolerance = tol;
    report.pass = report.max_violation <= report.bound + report.tolerance;
    report.details = {{"R1", r1}, {"worst_probe", worst}};
    return report;
}

DiagnosticReport check_duhamel(const TransitionBank& bank, const BridgeSchedule& schedule,
                               const SolverConfig& config, std::size_t n_probes,
                               std::uint64_t seed) {
    DiagnosticReport report;
    report.name = "duhamel";
    report.bound = 0.0;
    report.tolerance = 0.0;  // violations below are in units of each tolerance
    report.max_violation = -1e300;
    nlohmann::json details;

    // (a) fundamental-matrix semigroup identity on a grid.
    double phi_err = 0.0;
    const int grid = 21;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double t = static_cast<double>(i) / (grid - 1);
            const double s = static_cast<double>(j) / (grid - 1);
            phi_err = std::max(phi_err,
                               std::fabs(schedule.phi(t, s) * schedule.phi(s, 0.0) -
                                         schedule.phi(t, 0.0)));
        }
    }
    report.max_violation = std::max(report.max_violation, phi_err / 1e-14 - 1.0);
    details["phi_semigroup_max_err"] = phi_err;

    // (b) sigma = 0 replay: total beta mass equals 1.
    Rng rng(derive_seed(seed, 0xD0A1, 3));
    BridgeSchedule replay_schedule = schedule;
    replay_schedule.sigma = 0.0;
    SolverConfig replay_config = config;
    replay_config.scheme = Scheme::ForwardEuler;
    replay_config.steps = 1000;
    double beta_err = 0.0;
    const std::size_t n_origin = std::min<std::size_t>(std::max<std::size_t>(n_probes, 1), 5);
    for (std::size_t p = 0; p < n_origin; ++p) {
        const std::vector<double> x = probe_state(bank, rng);
        const ReplayDiagnostics rd = replay_diagnostics(x, bank, replay_schedule, replay_config, rng);
        double mass = 0.0;
        for (double b : rd.beta) mass += b;
        beta_err = std::max(beta_err, std::fabs(mass - 1.0));
    }
    report.max_violation = std::max(report.max_violation, beta_err / 1e-6 - 1.0);
    details["beta_mass_max_err"] = beta_err;

    // (c) Euler residual convergence order: halving dt halves the residual.
    SolverConfig sweep = config;
    sweep.scheme = Scheme::ForwardEuler;
    std::vector<double> residuals;
    const std::vector<double> origin = probe_state(bank, rng);
    for (int steps : {100, 200, 400}) {
        sweep.steps = steps;
        Rng r2(derive_seed(seed, 0x0DE, 4));  // same Z_0 draw for each L
        residuals.push_back(replay_diagnostics(origin, bank, schedule, sweep, r2).duhamel_residual);
    }
    details["euler_residuals_L_100_200_400"] = residuals;
    for (int k = 0; k < 2; ++k) {
        const double ratio = residuals[static_cast<std::size_t>(k)] /
                             std::max(residuals[static_cast<std::size_t>(k) + 1], 1e-300);
        details["ratio_" + std::to_string(k)] = ratio;
        // ratio must sit in [1.7, 2.3]; express as violation in tolerance units
        const double excess = std::max(1.7 - ratio, ratio - 2.3);
        report.max_violation = std::max(report.max_violation, excess / 0.3);
    }

    report.probes = grid * grid + n_origin + 3;
    report.pass = report.max_violation <= report.bound + report.tolerance;
    report.details = details;
    report.details["units"] = "violations normalized by each sub-check tolerance";
    return report;
}

DiagnosticReport check_equivariance(const TransitionBank& bank, const BridgeSchedule& schedule,
                                    std::size_t n_probes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xE9A1, 5));
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const std::size_t m = bank.size();
    const double c0 = schedule.sigma_min;  // intrinsic bandwidth: c_tilde == c_0

    DiagnosticReport report;
    report.name = "kernel_equivariance";
    report.probes = n_probes;
    report.bound = 0.0;
    report.tolerance = 1e-12;
    report.max_violation = -1e300;
    nlohmann::json worst;

    std::vector<double> alpha(m), w_hat(m), y(d), z(d), mtilde(m * d), logits(m);
    double label_err_h = 0.0, label_err_h2 = 0.0;
    for (std::size_t p = 0; p < n_probes; ++p) {
        const double t = probe_time(p, rng);
        const double phi = schedule.phi(t, 0.0);

        // intrinsic means at this t
        for (std::size_t j = 0; j < m; ++j) {
            const auto a = bank.x1(j);
            const auto b = bank.x2(j);
            for (std::size_t i = 0; i < d; ++i)
                mtilde[j * d + i] = ((1.0 - t) * a[i] + t * b[i]) / phi;
        }

        // probe y around the intrinsic cloud, where the sampler operates
        const std::size_t jc = static_cast<std::size_t>(rng.next_u64() % m);
        const double radius = rng.uniform(0.0, 3.0) * c0;
        for (std::size_t i = 0; i < d; ++i) y[i] = mtilde[jc * d + i] + radius * rng.normal();

        // left side: bridge responsibilities at the transported point
        for (std::size_t i = 0; i < d; ++i) z[i] = phi * y[i];
        responsibilities(t, z, bank, schedule, alpha);

        // right side: Nystrom weights on the intrinsic cloud, bandwidth c_0,
        // computed independently of the responsibilities routine
        double best = 1e300;
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = y[i] - mtilde[j * d + i];
                acc += diff * diff;
            }
            logits[j] = acc;
            best = std::min(best, acc);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            w_hat[j] = std::exp(-(logits[j] - best) / (2.0 * c0 * c0));
            total += w_hat[j];
        }
        for (std::size_t j = 0; j < m; ++j) w_hat[j] /= total;

        double violation = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            violation = std::max(violation, std::fabs(alpha[j] - w_hat[j]));
        if (violation > report.max_violation) {
            report.max_violation = violation;
            worst = {{"t", t}, {"weight_gap", violation}};
        }

        // intrinsic label identity: y_j(t)/phi(t,0) vs central difference of
        // m_tilde, at steps h and h/2 (second-order check)
        if (t >= 0.01 && t <= 0.99) {
            const std::size_t j = jc;
            auto mt = [&](double tt) {
                std::vector<double> out(d);
                const auto a = bank.x1(j);
                const auto b = bank.x2(j);
                const double ph = schedule.phi(tt, 0.0);
                for (std::size_t i = 0; i < d; ++i) out[i] = ((1.0 - tt) * a[i] + tt * b[i]) / ph;
                return out;
            };
            const double gt = schedule.g(t);
            const auto a = bank.x1(j);
            const auto b = bank.x2(j);
            for (double h : {1e-3, 5e-4}) {
                const auto plus = mt(t + h);
                const auto minus = mt(t - h);
                double err = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double mean = (1.0 - t) * a[i] + t * b[i];
                    const double label = ((b[i] - a[i]) - gt * mean) / phi;
                    err = std::max(err, std::fabs((plus[i] - minus[i]) / (2.0 * h) - label));
                }
                (h == 1e-3 ? label_err_h : label_err_h2) = std::max(
                    (h == 1e-3 ? label_err_h : label_err_h2), err);
            }
        }
    }

    report.details = {{"worst_probe", worst},
                      {"label_central_diff_err_h1e-3", label_err_h},
                      {"label_central_diff_err_h5e-4", label_err_h2}};
    // O(h^2) convergence: the halved step must cut the error by ~4 unless both
    // are already at the rounding floor.
    const bool label_ok =
        label_err_h2 < 1e-11 || (label_err_h / std::max(label_err_h2, 1e-300) > 3.0);
    report.details["label_identity_second_order"] = label_ok;
    report.pass = report.max_violation <= report.bound + report.tolerance && label_ok;
    return report;
}

DiagnosticReport measure_cost(const std::vector<std::size_t>& bank_sizes,
                              const std::vector<std::size_t>& r_values, int dim,
                              std::uint64_t seed, std::vector<CostRow>* rows_out) {
    DiagnosticReport report;
    report.name = "cost_model";
    report.bound = 0.0;
    report.tolerance = 0.0;
    report.max_violation = 0.0;
    nlohmann::json rows = nlohmann::json::array();

    Rng rng(derive_seed(seed, 0xC057, 6));
    bool counts_ok = true;
    for (std::size_t msize : bank_sizes) {
        // synthetic bank
        std::vector<double> x1(msize * static_cast<std::size_t>(dim));
        std::vector<double> x2(msize * static_cast<std::size_t>(dim));
        for (double& v : x1) v = rng.normal();
        for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = x1[i] + 0.1 * rng.normal();
        TransitionBank bank(dim, std::move(x1), std::move(x2), {});
        const BridgeSchedule schedule = default_schedule(bank);
        const PathFamily family{schedule};

        std::vector<std::size_t> variants = {0};  // dense
        for (std::size_t r : r_values)
            if (r >= 1 && r <= msize) variants.push_back(r);

        for (std::size_t r : variants) {
            VelocityWorkspace ws;
            std::vector<double> z(static_cast<std::size_t>(dim));
            std::vector<double> v(static_cast<std::size_t>(dim));
            for (double& c : z) c = rng.normal();
            // warm-up then timed evaluations
            eval_velocity(0.37, z, bank, family, r, v, ws);
            ws.dist_ops = 0;
            ws.term_ops = 0;
            const int reps = std::max<int>(4, static_cast<int>(200000 / (msize + 1)));
            const auto start = std::chrono::steady_clock::now();
            for (int k = 0; k < reps; ++k) eval_velocity(0.37, z, bank, family, r, v, ws);
            const auto stop = std::chrono::steady_clock::now();
            const double ns =
                std::chrono::duration<double, std::nano>(stop - start).count() / reps;

            CostRow row;
            row.bank_size = msize;
            row.top_r = r;
            row.distance_ops = ws.dist_ops / static_cast<std::uint64_t>(reps);
            row.term_ops = ws.term_ops / static_cast<std::uint64_t>(reps);
            row.ns_per_eval = ns;
            if (rows_out) rows_out->push_back(row);

            const std::uint64_t expect_terms = (r == 0) ? msize : r;
            if (row.distance_ops != msize || row.term_ops != expect_terms) {
                counts_ok = false;
                report.max_violation = 1.0;
            }
            rows.push_back({{"M", msize},
                            {"R", r},
                            {"distance_ops", row.distance_ops},
                            {"term_ops", row.term_ops},
                            {"ns_per_eval", row.ns_per_eval}});
            ++report.probes;
        }
    }
    report.pass = counts_ok;
    report.details = {{"rows", rows},
                      {"note", "pass criterion is the exact operation counts; timings are "
                               "informational"}};
    return report;
}

}  // namespace flowcast
