#include "flowcast/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "flowcast/rng.hpp"

namespace flowcast {

SystemName system_from_string(const std::string& name) {
    if (name == "lorenz63") return SystemName::Lorenz63;
    if (name == "rossler") return SystemName::Rossler;
    if (name == "aizawa") return SystemName::Aizawa;
    if (name == "henonheiles") return SystemName::HenonHeiles;
    throw ConfigError("unknown system '" + name + "' (lorenz63, rossler, aizawa, henonheiles)");
}

std::string to_string(SystemName name) {
    switch (name) {
        case SystemName::Lorenz63: return "lorenz63";
        case SystemName::Rossler: return "rossler";
        case SystemName::Aizawa: return "aizawa";
        case SystemName::HenonHeiles: return "henonheiles";
    }
    return "?";
}

namespace {

std::map<std::string, double> default_params(SystemName name) {
    switch (name) {
        case SystemName::Lorenz63: return {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
        case SystemName::Rossler: return {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}};
        case SystemName::Aizawa:
            return {{"a", 0.95}, {"b", 0.7}, {"c", 0.6}, {"d", 3.5}, {"e", 0.25}, {"f", 0.1}};
        case SystemName::HenonHeiles: return {};
    }
    return {};
}

}  // namespace

SystemSpec SystemSpec::make(SystemName name, const std::map<std::string, double>& overrides) {
    SystemSpec spec;
    spec.name = name;
    spec.params = default_params(name);
    for (const auto& [key, value] : overrides) {
        if (spec.params.find(key) == spec.params.end())
            throw ConfigError("system " + to_string(name) + " has no parameter '" + key + "'");
        if (!std::isfinite(value)) throw ConfigError("parameter '" + key + "' must be finite");
        spec.params[key] = value;
    }
    return spec;
}

SystemSpec SystemSpec::make(const std::string& name, const std::map<std::string, double>& overrides) {
    return make(system_from_string(name), overrides);
}

int SystemSpec::dim() const { return name == SystemName::HenonHeiles ? 4 : 3; }

OdeSystem SystemSpec::system() const {
    OdeSystem sys;
    sys.dim = dim();
    switch (name) {
        case SystemName::Lorenz63: {
            const double s = params.at("sigma"), r = params.at("rho"), b = params.at("beta");
            sys.rhs = [s, r, b](std::span<const double> x, std::span<double> dx) {
                dx[0] = s * (x[1] - x[0]);
                dx[1] = x[0] * (r - x[2]) - x[1];
                dx[2] = x[0] * x[1] - b * x[2];
            };
            break;
        }
        case SystemName::Rossler: {
            const double a = params.at("a"), b = params.at("b"), c = params.at("c");
            sys.rhs = [a, b, c](std::span<const double> x, std::span<double> dx) {
                dx[0] = -x[1] - x[2];
                dx[1] = x[0] + a * x[1];
                dx[2] = b + x[2] * (x[0] - c);
            };
            break;
        }
        case SystemName::Aizawa: {
            const double a = params.at("a"), b = params.at("b"), c = params.at("c");
            const double d = params.at("d"), e = params.at("e"), f = params.at("f");
            sys.rhs = [a, b, c, d, e, f](std::span<const double> x, std::span<double> dx) {
                dx[0] = (x[2] - b) * x[0] - d * x[1];
                dx[1] = d * x[0] + (x[2] - b) * x[1];
                dx[2] = c + a * x[2] - x[2] * x[2] * x[2] / 3.0 -
                        (x[0] * x[0] + x[1] * x[1]) * (1.0 + e * x[2]) +
                        f * x[2] * x[0] * x[0] * x[0];
            };
            break;
        }
        case SystemName::HenonHeiles: {
            // state (x, y, px, py); H = (px^2+py^2)/2 + (x^2+y^2)/2 + x^2 y - y^3/3
            sys.rhs = [](std::span<const double> x, std::span<double> dx) {
                dx[0] = x[2];
                dx[1] = x[3];
                dx[2] = -x[0] - 2.0 * x[0] * x[1];
                dx[3] = -x[1] - x[0] * x[0] + x[1] * x[1];
            };
            break;
        }
    }
    return sys;
}

double SystemSpec::energy(std::span<const double> state) const {
    if (name != SystemName::HenonHeiles)
        throw ConfigError("energy is defined for the Henon-Heiles system only");
    const double x = state[0], y = state[1], px = state[2], py = state[3];
    return 0.5 * (px * px + py * py) + 0.5 * (x * x + y * y) + x * x * y - y * y * y / 3.0;
}

std::vector<std::pair<double, double>> SystemSpec::default_ic_box() const {
    switch (name) {
        case SystemName::Lorenz63: return {{-10.0, 10.0}, {-15.0, 15.0}, {10.0, 30.0}};
        case SystemName::Rossler: return {{-5.0, 5.0}, {-5.0, 5.0}, {0.0, 2.0}};
        case SystemName::Aizawa: return {{-0.5, 0.5}, {-0.5, 0.5}, {-0.2, 0.6}};
        // Small displacements and momenta keep the energy inside the bounded
        // region (E < 1/6); draws that escape anyway are retried.
        case SystemName::HenonHeiles: return {{-0.25, 0.25}, {-0.25, 0.25}, {-0.25, 0.25}, {-0.25, 0.25}};
    }
    return {};
}

void SamplingPlan::validate() const {
    if (!(lyapunov_exponent > 0.0) || !std::isfinite(lyapunov_exponent))
        throw ConfigError("SamplingPlan: lyapunov_exponent must be positive");
    if (points_per_lyapunov_time < 1)
        throw ConfigError("SamplingPlan: points_per_lyapunov_time must be >= 1");
    if (n_trajectories < 1) throw ConfigError("SamplingPlan: n_trajectories must be >= 1");
    if (length < 2) throw ConfigError("SamplingPlan: length must be >= 2");
    if (burn_in < 0.0) throw ConfigError("SamplingPlan: burn_in must be nonnegative");
}

namespace {

constexpr double kDivergenceRadius = 1e6;

void rk4_step(const OdeSystem& sys, std::vector<double>& x, double dt, std::vector<double>& k1,
              std::vector<double>& k2, std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
    const std::size_t d = x.size();
    sys.rhs(x, k1);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    sys.rhs(tmp, k2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    sys.rhs(tmp, k3);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + dt * k3[i];
    sys.rhs(tmp, k4);
    for (std::size_t i = 0; i < d; ++i)
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

bool diverged(const std::vector<double>& x) {
    double norm2 = 0.0;
    for (double v : x) norm2 += v * v;
    return !(norm2 <= kDivergenceRadius * kDivergenceRadius);
}

struct Rk4Scratch {
    std::vector<double> k1, k2, k3, k4, tmp;
    explicit Rk4Scratch(std::size_t d) : k1(d), k2(d), k3(d), k4(d), tmp(d) {}
};

// Advances x by `time` in steps of at most dt. Throws on divergence.
void advance(const OdeSystem& sys, std::vector<double>& x, double time, double dt,
             Rk4Scratch& s) {
    const long n = std::lround(std::ceil(time / dt - 1e-9));
    for (long i = 0; i < n; ++i) {
        rk4_step(sys, x, dt, s.k1, s.k2, s.k3, s.k4, s.tmp);
        if (diverged(x)) throw DivergedTrajectory("trajectory diverged (|x| > 1e6)");
    }
}

}  // namespace

Trajectory integrate_system(const SystemSpec& spec, std::span<const double> x0, double total_time,
                            double dt_internal) {
    if (static_cast<int>(x0.size()) != spec.dim())
        throw DimensionMismatch("integrate_system: initial state has wrong dimension");
    if (!(dt_internal > 0.0)) throw ConfigError("integrate_system: dt_internal must be positive");
    const long n_steps = std::lround(std::ceil(total_time / dt_internal - 1e-9));
    if (n_steps < 1)
        throw ConfigError("integrate_system: total_time too short for a 2-state trajectory");

    const OdeSystem sys = spec.system();
    std::vector<double> x(x0.begin(), x0.end());
    Rk4Scratch scratch(x.size());

    Trajectory tr;
    tr.id = to_string(spec.name);
    tr.dt = dt_internal;
    tr.states = StateSeries(static_cast<std::size_t>(n_steps) + 1, spec.dim());
    std::copy(x.begin(), x.end(), tr.states.row(0).begin());
    for (long i = 0; i < n_steps; ++i) {
        rk4_step(sys, x, dt_internal, scratch.k1, scratch.k2, scratch.k3, scratch.k4, scratch.tmp);
        if (diverged(x)) throw DivergedTrajectory("integrate_system: trajectory diverged");
        std::copy(x.begin(), x.end(), tr.states.row(static_cast<std::size_t>(i) + 1).begin());
    }
    return tr;
}

LyapunovEstimate estimate_lyapunov(const OdeSystem& system, std::span<const double> x0,
                                   double time_horizon, double renorm_interval,
                                   double dt_internal) {
    const std::size_t d = static_cast<std::size_t>(system.dim);
    if (x0.size() != d) throw DimensionMismatch("estimate_lyapunov: wrong state dimension");
    const double delta0 = 1e-8;

    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> y(x0.begin(), x0.end());
    y[0] += delta0;
    Rk4Scratch sx(d), sy(d);

    const long n_intervals = std::lround(std::floor(time_horizon / renorm_interval));
    std::vector<double> log_stretch;
    log_stretch.reserve(static_cast<std::size_t>(n_intervals));
    for (long k = 0; k < n_intervals; ++k) {
        advance(system, x, renorm_interval, dt_internal, sx);
        advance(system, y, renorm_interval, dt_internal, sy);
        double sep2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) sep2 += (y[i] - x[i]) * (y[i] - x[i]);
        const double sep = std::sqrt(sep2);
        if (!(sep > 0.0)) throw DivergedTrajectory("estimate_lyapunov: separation collapsed to 0");
        log_stretch.push_back(std::log(sep / delta0) / renorm_interval);
        // rescale the separation back to delta0 along its current direction
        for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + (y[i] - x[i]) * (delta0 / sep);
    }
    if (log_stretch.empty()) throw ConfigError("estimate_lyapunov: horizon shorter than interval");

    // Discard the first tenth as transient, then average.
    const std::size_t skip = log_stretch.size() / 10;
    double full = 0.0;
    for (std::size_t i = skip; i < log_stretch.size(); ++i) full += log_stretch[i];
    full /= static_cast<double>(log_stretch.size() - skip);

    const std::size_t q_start = log_stretch.size() - (log_stretch.size() - skip) / 4;
    double tail = 0.0;
    for (std::size_t i = q_start; i < log_stretch.size(); ++i) tail += log_stretch[i];
    tail /= static_cast<double>(log_stretch.size() - q_start);

    LyapunovEstimate est;
    est.lambda = full;
    est.converged = std::fabs(tail - full) < 0.05 * std::max(std::fabs(full), 1e-12);
    return est;
}

LyapunovEstimate estimate_lyapunov(const SystemSpec& spec, std::span<const double> x0,
                                   double time_horizon, double renorm_interval,
                                   double dt_internal) {
    return estimate_lyapunov(spec.system(), x0, time_horizon, renorm_interval, dt_internal);
}

std::vector<Trajectory> generate_benchmark(const SystemSpec& spec, const SamplingPlan& plan,
                                           std::uint64_t seed) {
    plan.validate();
    auto box = plan.initial_condition_box.empty() ? spec.default_ic_box()
                                                  : plan.initial_condition_box;
    if (static_cast<int>(box.size()) != spec.dim())
        throw DimensionMismatch("generate_benchmark: initial-condition box has wrong dimension");

    const double dt = plan.dt();
    const double dt_internal = dt / 10.0;  // fine integration, then downsample
    const int substeps = 10;
    const OdeSystem sys = spec.system();
    const std::size_t d = static_cast<std::size_t>(spec.dim());

    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(plan.n_trajectories));
    for (int n = 0; n < plan.n_trajectories; ++n) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n), 0));
        bool done = false;
        for (int attempt = 0; attempt < 10 && !done; ++attempt) {
            std::vector<double> x(d);
            for (std::size_t i = 0; i < d; ++i) x[i] = rng.uniform(box[i].first, box[i].second);
            // Henon-Heiles: motion is bounded only below the escape energy.
            if (spec.name == SystemName::HenonHeiles && spec.energy(x) >= 1.0 / 6.0) continue;
            try {
                Rk4Scratch scratch(d);
                if (plan.burn_in > 0.0) advance(sys, x, plan.burn_in, dt_internal, scratch);
                Trajectory tr;
                char idbuf[64];
                std::snprintf(idbuf, sizeof idbuf, "%s_%03d", to_string(spec.name).c_str(), n);
                tr.id = idbuf;
                tr.dt = dt;
                tr.states = StateSeries(static_cast<std::size_t>(plan.length), spec.dim());
                std::copy(x.begin(), x.end(), tr.states.row(0).begin());
                for (int k = 1; k < plan.length; ++k) {
                    for (int s = 0; s < substeps; ++s) {
                        rk4_step(sys, x, dt_internal, scratch.k1, scratch.k2, scratch.k3,
                                 scratch.k4, scratch.tmp);
                        if (diverged(x)) throw DivergedTrajectory("diverged while recording");
                    }
                    std::copy(x.begin(), x.end(), tr.states.row(static_cast<std::size_t>(k)).begin());
                }
                out.push_back(std::move(tr));
                done = true;
            } catch (const DivergedTrajectory&) {
                // try the next initial condition draw
            }
        }
        if (!done)
            throw DivergedTrajectory("generate_benchmark: 10 initial conditions diverged for " +
                                     to_string(spec.name));
    }
    return out;
}

}  // namespace flowcast
