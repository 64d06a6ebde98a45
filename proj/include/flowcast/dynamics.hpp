#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowcast/types.hpp"

namespace flowcast {

// Right-hand side of an autonomous ODE, dx/dt = f(x).
struct OdeSystem {
    int dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> rhs;
};

enum class SystemName { Lorenz63, Rossler, Aizawa, HenonHeiles };

SystemName system_from_string(const std::string& name);
std::string to_string(SystemName name);

// A named benchmark system with overridable parameters (standard literature
// forms and defaults).
struct SystemSpec {
    SystemName name = SystemName::Lorenz63;
    std::map<std::string, double> params;  // filled with defaults on creation

    static SystemSpec make(SystemName name,
                           const std::map<std::string, double>& overrides = {});
    static SystemSpec make(const std::string& name,
                           const std::map<std::string, double>& overrides = {});

    int dim() const;
    OdeSystem system() const;

    // Hamiltonian of the Henon-Heiles system (throws for other systems).
    double energy(std::span<const double> state) const;

    // Default initial-condition box, one (lo,hi) interval per dimension.
    std::vector<std::pair<double, double>> default_ic_box() const;
};

struct SamplingPlan {
    double lyapunov_exponent = 0.0;       // lambda > 0
    int points_per_lyapunov_time = 100;   // sampling density
    int n_trajectories = 20;
    int length = 812;                     // recorded points per trajectory
    double burn_in = 50.0;                // time units discarded before recording
    std::vector<std::pair<double, double>> initial_condition_box;

    double dt() const { return 1.0 / (lyapunov_exponent * points_per_lyapunov_time); }
    void validate() const;
};

// Fixed-step RK4 integration recording every internal step; errors out with
// DivergedTrajectory once the state norm exceeds 1e6.
Trajectory integrate_system(const SystemSpec& spec, std::span<const double> x0, double total_time,
                            double dt_internal);

struct LyapunovEstimate {
    double lambda = 0.0;
    bool converged = false;
};

// Largest Lyapunov exponent via two-trajectory Benettin renormalization:
// average log stretch of an infinitesimal separation per unit time, declared
// converged when the last-quarter running average agrees with the full
// average within 5%.
LyapunovEstimate estimate_lyapunov(const OdeSystem& system, std::span<const double> x0,
                                   double time_horizon, double renorm_interval,
                                   double dt_internal = 1e-3);
LyapunovEstimate estimate_lyapunov(const SystemSpec& spec, std::span<const double> x0,
                                   double time_horizon, double renorm_interval,
                                   double dt_internal = 1e-3);

// n_trajectories trajectories of exactly plan.length points at
// dt = 1/(lambda * points_per_lyapunov_time). Initial conditions are drawn
// uniformly from the box, burned in onto the attractor, and retried (up to 10
// draws) on divergence. Internal integration step is dt/10.
std::vector<Trajectory> generate_benchmark(const SystemSpec& spec, const SamplingPlan& plan,
                                           std::uint64_t seed);

}  // namespace flowcast
