#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowcast/bridge.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/types.hpp"
#include "flowcast/velocity_field.hpp"

namespace flowcast {

enum class Scheme {
    ForwardEuler,
    RK4,
    IntegratingFactor,     // Z <- phi(t+dt, t) (Z + dt h)           (bridge only)
    ExponentialEulerETD1,  // Z <- e^{g dt} Z + (e^{g dt}-1)/g h     (bridge only)
    EulerMaruyamaSDE,      // Z <- Z + dt v + sde_diffusion sqrt(dt) xi
};

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme scheme);

struct SolverConfig {
    Scheme scheme = Scheme::ForwardEuler;
    int steps = 100;             // L; uniform grid t_l = l/L
    double sde_diffusion = 0.0;  // Sigma(t) = const * I, SDE scheme only
    std::size_t top_r = 0;       // 0 = dense evaluation
    std::uint64_t seed = 0;
    // Eq.-style per-step re-noising Z_0 ~ N(x_tau, sigma_min^2 I). When false,
    // each step starts deterministically from the previous output.
    bool resample_initial_noise = true;

    void validate(const PathFamily& family) const;
};

// Receives the per-step forcing evaluations of one integration pass. Stage
// weights sum to 1 within each step; ForwardEuler reports a single stage at
// the left endpoint, RK4 its four stages with Simpson weights.
class StepObserver {
  public:
    virtual ~StepObserver() = default;
    virtual void before_step(std::size_t step, double t, std::span<const double> state) = 0;
    virtual void on_stage(std::size_t step, double weight, double s,
                          std::span<const double> forcing) = 0;
};

// Integrates dZ/dt = v(t,Z) from t=0 to t=1 starting at
// Z_0 ~ N(x_tau, sigma_min^2 I) (bridge) or Z_0 ~ N(0, I) (rectified flow) and
// returns Z_1, the one-step forecast. Throws NumericalBlowup with the step
// index and |g(t)| if the state leaves the finite range.
std::vector<double> one_step(std::span<const double> x_tau, const TransitionBank& bank,
                             const PathFamily& family, const SolverConfig& config, Rng& rng,
                             VelocityWorkspace* ws = nullptr, StepObserver* observer = nullptr);

// Sequential composition of one_step over `horizon` forecast steps. The RNG
// stream of forecast step k is seeded by derive_seed(config.seed,
// sample_index, k), so rollouts are reproducible independent of scheduling.
StateSeries rollout(std::span<const double> x_tau, std::size_t horizon, const TransitionBank& bank,
                    const PathFamily& family, const SolverConfig& config,
                    std::uint64_t sample_index = 0, VelocityWorkspace* ws = nullptr);

struct SampleFailure {
    std::size_t sample = 0;
    std::size_t forecast_step = 0;
    double g_magnitude = 0.0;
    std::string message;
};

struct ForecastEnsemble {
    std::size_t samples = 0;
    std::size_t horizon = 0;
    int dim = 0;
    std::vector<double> origin;
    SolverConfig config;
    std::vector<double> data;      // samples * horizon * dim; failed samples zeroed
    std::vector<std::uint8_t> ok;  // per-sample success flag
    std::vector<SampleFailure> failures;

    std::span<const double> state(std::size_t sample, std::size_t step) const {
        const std::size_t d = static_cast<std::size_t>(dim);
        return {data.data() + (sample * horizon + step) * d, d};
    }
    std::size_t ok_count() const;
    // Mean trajectory over successful samples.
    StateSeries mean() const;
};

// S independent rollouts on up to `workers` threads. Per-sample failures are
// recorded; the call throws only if every sample fails.
ForecastEnsemble ensemble(std::span<const double> x_tau, std::size_t horizon,
                          std::size_t n_samples, const TransitionBank& bank,
                          const PathFamily& family, const SolverConfig& config,
                          unsigned workers = 0);

struct ReplayDiagnostics {
    std::vector<double> beta;  // time-accumulated dense weights, length M
    double duhamel_residual = 0.0;
    std::vector<double> z0, z1;
};

// Runs one integration pass recording beta_j = sum_l dt alpha_j(t_l, Z_l) and
// the defect of the variation-of-constants identity
//   Z_1 = phi(1,0) Z_0 + sum_l dt sum_stages w phi(1,s) h(s, Z)
// evaluated with the stored per-step forcing values.
ReplayDiagnostics replay_diagnostics(std::span<const double> x_tau, const TransitionBank& bank,
                                     const BridgeSchedule& schedule, const SolverConfig& config,
                                     Rng& rng);

}  // namespace flowcast
