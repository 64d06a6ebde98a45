#include "flowcast/sampler.hpp"

#include <cmath>
#include <cstring>

#include "flowcast/parallel.hpp"

namespace flowcast {

Scheme scheme_from_string(const std::string& name) {
    if (name == "euler") return Scheme::ForwardEuler;
    if (name == "rk4") return Scheme::RK4;
    if (name == "integrating_factor") return Scheme::IntegratingFactor;
    if (name == "etd1") return Scheme::ExponentialEulerETD1;
    if (name == "euler_maruyama") return Scheme::EulerMaruyamaSDE;
    throw ConfigError("unknown scheme '" + name +
                      "' (euler, rk4, integrating_factor, etd1, euler_maruyama)");
}

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::ForwardEuler: return "euler";
        case Scheme::RK4: return "rk4";
        case Scheme::IntegratingFactor: return "integrating_factor";
        case Scheme::ExponentialEulerETD1: return "etd1";
        case Scheme::EulerMaruyamaSDE: return "euler_maruyama";
    }
    return "?";
}

void SolverConfig::validate(const PathFamily& family) const {
    if (steps < 1) throw ConfigError("SolverConfig: steps must be >= 1");
    if (!(sde_diffusion >= 0.0) || !std::isfinite(sde_diffusion))
        throw ConfigError("SolverConfig: sde_diffusion must be nonnegative and finite");
    if ((scheme == Scheme::IntegratingFactor || scheme == Scheme::ExponentialEulerETD1) &&
        !is_bridge(family))
        throw ConfigError("SolverConfig: exponential schemes require the Gaussian-bridge family");
    std::visit([](const auto& f) { f.validate(); }, family);
}

namespace {

void check_finite_state(std::span<const double> z, std::size_t step, double g_abs) {
    for (double v : z)
        if (!std::isfinite(v))
            throw NumericalBlowup(step, g_abs,
                                  "integration produced a non-finite state at step " +
                                      std::to_string(step) + " (|g(t)| = " + std::to_string(g_abs) +
                                      ")");
}

// One deterministic integration pass over the grid t_l = l/L, in place.
void integrate(std::vector<double>& z, const TransitionBank& bank, const PathFamily& family,
               const SolverConfig& config, Rng& rng, VelocityWorkspace& ws,
               StepObserver* observer) {
    const std::size_t d = z.size();
    const int L = config.steps;
    const bool bridge = is_bridge(family);
    const BridgeSchedule* sched = bridge ? &std::get<BridgeSchedule>(family) : nullptr;

    std::vector<double> v(d), h(d), stage(d), k1(d), k2(d), k3(d), k4(d);
    auto g_at = [&](double t) { return bridge ? sched->g(t) : 0.0; };
    auto report_stage = [&](std::size_t step, double weight, double s,
                            std::span<const double> state, std::span<const double> vel) {
        if (!observer) return;
        const double gs = g_at(s);
        for (std::size_t i = 0; i < d; ++i) h[i] = vel[i] - gs * state[i];
        observer->on_stage(step, weight, s, h);
    };

    for (int l = 0; l < L; ++l) {
        const double t = static_cast<double>(l) / L;
        const double t_next = static_cast<double>(l + 1) / L;
        const double dt = t_next - t;
        if (observer) observer->before_step(static_cast<std::size_t>(l), t, z);

        switch (config.scheme) {
            case Scheme::ForwardEuler: {
                eval_velocity(t, z, bank, family, config.top_r, v, ws);
                report_stage(l, 1.0, t, z, v);
                for (std::size_t i = 0; i < d; ++i) z[i] += dt * v[i];
                break;
            }
            case Scheme::RK4: {
                eval_velocity(t, z, bank, family, config.top_r, k1, ws);
                report_stage(l, 1.0 / 6.0, t, z, k1);
                const double tm = t + 0.5 * dt;
                for (std::size_t i = 0; i < d; ++i) stage[i] = z[i] + 0.5 * dt * k1[i];
                eval_velocity(tm, stage, bank, family, config.top_r, k2, ws);
                report_stage(l, 1.0 / 3.0, tm, stage, k2);
                for (std::size_t i = 0; i < d; ++i) stage[i] = z[i] + 0.5 * dt * k2[i];
                eval_velocity(tm, stage, bank, family, config.top_r, k3, ws);
                report_stage(l, 1.0 / 3.0, tm, stage, k3);
                for (std::size_t i = 0; i < d; ++i) stage[i] = z[i] + dt * k3[i];
                eval_velocity(t_next, stage, bank, family, config.top_r, k4, ws);
                report_stage(l, 1.0 / 6.0, t_next, stage, k4);
                for (std::size_t i = 0; i < d; ++i)
                    z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                break;
            }
            case Scheme::IntegratingFactor: {
                eval_forcing(t, z, bank, *sched, config.top_r, v, ws);
                if (observer) observer->on_stage(l, 1.0, t, v);
                const double factor = sched->phi(t_next, t);
                for (std::size_t i = 0; i < d; ++i) z[i] = factor * (z[i] + dt * v[i]);
                break;
            }
            case Scheme::ExponentialEulerETD1: {
                eval_forcing(t, z, bank, *sched, config.top_r, v, ws);
                if (observer) observer->on_stage(l, 1.0, t, v);
                const double gt = sched->g(t);
                if (std::fabs(gt) < 1e-12) {
                    // continuous extension: (e^{g dt}-1)/g -> dt
                    for (std::size_t i = 0; i < d; ++i) z[i] += dt * v[i];
                } else {
                    const double em = std::expm1(gt * dt);
                    const double phi1 = em / gt;
                    for (std::size_t i = 0; i < d; ++i) z[i] = (1.0 + em) * z[i] + phi1 * v[i];
                }
                break;
            }
            case Scheme::EulerMaruyamaSDE: {
                eval_velocity(t, z, bank, family, config.top_r, v, ws);
                report_stage(l, 1.0, t, z, v);
                const double noise = config.sde_diffusion * std::sqrt(dt);
                for (std::size_t i = 0; i < d; ++i) z[i] += dt * v[i] + noise * rng.normal();
                break;
            }
        }
        check_finite_state(z, static_cast<std::size_t>(l), std::fabs(g_at(t)));
    }
}

std::vector<double> initial_state(std::span<const double> x_tau, const PathFamily& family,
                                  const SolverConfig& config, Rng& rng, int bank_dim) {
    std::vector<double> z(bank_dim, 0.0);
    if (is_bridge(family)) {
        if (static_cast<int>(x_tau.size()) != bank_dim)
            throw DimensionMismatch("one_step: conditioning state dimension does not match bank");
        const double s = std::get<BridgeSchedule>(family).sigma_min;
        for (int i = 0; i < bank_dim; ++i)
            z[i] = x_tau[i] + (config.resample_initial_noise ? s * rng.normal() : 0.0);
    } else {
        // Rectified flow transports the standard Gaussian base; the
        // conditioning state plays no role for this family.
        for (int i = 0; i < bank_dim; ++i) z[i] = rng.normal();
    }
    return z;
}

}  // namespace

std::vector<double> one_step(std::span<const double> x_tau, const TransitionBank& bank,
                             const PathFamily& family, const SolverConfig& config, Rng& rng,
                             VelocityWorkspace* ws, StepObserver* observer) {
    config.validate(family);
    if (config.top_r > bank.size())
        throw RangeError("one_step: top_r exceeds the bank size");
    for (double v : x_tau)
        if (!std::isfinite(v)) throw NonFiniteInput("one_step: non-finite conditioning state");
    VelocityWorkspace local;
    VelocityWorkspace& workspace = ws ? *ws : local;
    std::vector<double> z = initial_state(x_tau, family, config, rng, bank.dim());
    integrate(z, bank, family, config, rng, workspace, observer);
    return z;
}

StateSeries rollout(std::span<const double> x_tau, std::size_t horizon, const TransitionBank& bank,
                    const PathFamily& family, const SolverConfig& config,
                    std::uint64_t sample_index, VelocityWorkspace* ws) {
    if (horizon < 1) throw ConfigError("rollout: horizon must be >= 1");
    StateSeries out(horizon, bank.dim());
    std::vector<double> x(x_tau.begin(), x_tau.end());
    for (std::size_t k = 0; k < horizon; ++k) {
        Rng rng(derive_seed(config.seed, sample_index, k));
        try {
            x = one_step(x, bank, family, config, rng, ws);
        } catch (const NumericalBlowup& e) {
            throw NumericalBlowup(k, e.g_magnitude,
                                  "rollout: blowup at forecast step " + std::to_string(k) + ": " +
                                      e.what());
        }
        std::copy(x.begin(), x.end(), out.row(k).begin());
    }
    return out;
}

std::size_t ForecastEnsemble::ok_count() const {
    std::size_t n = 0;
    for (std::uint8_t f : ok) n += f;
    return n;
}

StateSeries ForecastEnsemble::mean() const {
    StateSeries out(horizon, dim);
    const std::size_t n = ok_count();
    if (n == 0) return out;
    for (std::size_t s = 0; s < samples; ++s) {
        if (!ok[s]) continue;
        for (std::size_t k = 0; k < horizon; ++k) {
            const auto row = state(s, k);
            auto acc = out.row(k);
            for (int i = 0; i < dim; ++i) acc[i] += row[i];
        }
    }
    for (double& v : out.data) v /= static_cast<double>(n);
    return out;
}

ForecastEnsemble ensemble(std::span<const double> x_tau, std::size_t horizon,
                          std::size_t n_samples, const TransitionBank& bank,
                          const PathFamily& family, const SolverConfig& config, unsigned workers) {
    if (n_samples < 1) throw ConfigError("ensemble: sample count must be >= 1");
    config.validate(family);
    ForecastEnsemble out;
    out.samples = n_samples;
    out.horizon = horizon;
    out.dim = bank.dim();
    out.origin.assign(x_tau.begin(), x_tau.end());
    out.config = config;
    out.data.assign(n_samples * horizon * static_cast<std::size_t>(bank.dim()), 0.0);
    out.ok.assign(n_samples, 0);
    std::vector<SampleFailure> failures(n_samples);

    parallel_for(
        n_samples,
        [&](std::size_t s) {
            VelocityWorkspace ws;
            try {
                StateSeries path = rollout(x_tau, horizon, bank, family, config, s, &ws);
                std::copy(path.data.begin(), path.data.end(),
                          out.data.begin() + s * horizon * static_cast<std::size_t>(bank.dim()));
                out.ok[s] = 1;
            } catch (const NumericalBlowup& e) {
                failures[s] = {s, e.step, e.g_magnitude, e.what()};
            }
        },
        workers);

    for (std::size_t s = 0; s < n_samples; ++s)
        if (!out.ok[s]) out.failures.push_back(failures[s]);
    if (out.ok_count() == 0)
        throw Error("ensemble: every sample diverged (" + out.failures.front().message + ")");
    return out;
}

namespace {

class ReplayObserver : public StepObserver {
  public:
    ReplayObserver(const TransitionBank& bank, const BridgeSchedule& schedule, int steps)
        : bank_(bank), schedule_(schedule), dt_(1.0 / steps) {
        beta_.assign(bank.size(), 0.0);
        quad_.assign(bank.dim(), 0.0);
        alpha_.resize(bank.size());
    }

    void before_step(std::size_t, double t, std::span<const double> state) override {
        // beta accumulates the dense left-endpoint weights.
        responsibilities(t, state, bank_, schedule_, alpha_, &ws_);
        for (std::size_t j = 0; j < beta_.size(); ++j) beta_[j] += dt_ * alpha_[j];
    }

    void on_stage(std::size_t, double weight, double s, std::span<const double> forcing) override {
        const double f = dt_ * weight * schedule_.phi(1.0, s);
        for (std::size_t i = 0; i < quad_.size(); ++i) quad_[i] += f * forcing[i];
    }

    const std::vector<double>& beta() const { return beta_; }
    const std::vector<double>& quadrature() const { return quad_; }

  private:
    const TransitionBank& bank_;
    const BridgeSchedule& schedule_;
    double dt_;
    std::vector<double> beta_, quad_, alpha_;
    VelocityWorkspace ws_;
};

}  // namespace

ReplayDiagnostics replay_diagnostics(std::span<const double> x_tau, const TransitionBank& bank,
                                     const BridgeSchedule& schedule, const SolverConfig& config,
                                     Rng& rng) {
    PathFamily family{schedule};
    config.validate(family);
    ReplayObserver observer(bank, schedule, config.steps);

    VelocityWorkspace ws;
    std::vector<double> z0 = initial_state(x_tau, family, config, rng, bank.dim());
    std::vector<double> z = z0;
    integrate(z, bank, family, config, rng, ws, &observer);

    ReplayDiagnostics out;
    out.beta = observer.beta();
    out.z0 = z0;
    out.z1 = z;
    const double phi10 = schedule.phi(1.0, 0.0);
    double acc = 0.0;
    for (int i = 0; i < bank.dim(); ++i) {
        const double r = z[i] - phi10 * z0[i] - observer.quadrature()[i];
        acc += r * r;
    }
    out.duhamel_residual = std::sqrt(acc);
    return out;
}

}  // namespace flowcast
