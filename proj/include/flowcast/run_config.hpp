#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace flowcast {

// Resolved settings for one CLI run. Every field has a default; a fully
// defaulted config runs the Lorenz-63 demo end to end. JSON config files and
// command-line flags override individual keys. The resolved config is echoed
// into the output directory of every command. Worker count is intentionally
// not part of the config: outputs are byte-identical for any scheduling.
struct RunConfig {
    // data generation
    std::string system = "lorenz63";
    std::map<std::string, double> params;  // system parameter overrides
    int n_trajectories = 20;
    int length = 812;
    int points_per_lyapunov_time = 100;
    double burn_in = 50.0;
    double lyapunov_exponent = 0.0;  // 0 = estimate with the Benettin routine
    double lyap_horizon = 1000.0;
    double lyap_renorm = 0.5;

    // forecasting protocol
    int condition_points = 312;
    int horizon = 500;
    int samples = 1;
    std::string scheme = "euler";
    int steps = 100;
    std::size_t top_r = 0;  // 0 = dense
    double sde_diffusion = 0.0;
    bool resample_initial_noise = true;
    double sigma_min = -1.0;  // < 0: auto (0.02 * bank scale)
    double sigma = -1.0;      // < 0: auto (0.10 * bank scale)
    std::string bank_scope = "conditioning";  // or "full"

    // metrics
    double epsilon = 20.0;  // VPT threshold on per-step sMAPE
    bool attractor_metrics = true;
    int bins_per_dim = 50;

    // grid search
    std::vector<double> grid_sigma_min_factors = {0.005, 0.01, 0.02, 0.05, 0.1};
    std::vector<double> grid_sigma_factors = {0.0, 0.05, 0.1, 0.2, 0.4};
    double holdout_fraction = 0.1;
    int holdout_cap = 200;
    std::string tuning_file;  // gridsearch.json to take (sigma_min, sigma) from

    // ablation
    std::vector<int> ablate_steps = {30, 50, 100};
    std::vector<std::string> ablate_schemes = {"euler", "rk4", "etd1"};
    std::vector<std::size_t> ablate_top_r = {0, 256};

    // diagnostics
    int diag_probes = 500;
    std::string diag_only;  // empty = all suites
    std::string bank_file;  // explicit bank JSON for diagnose

    // common
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    std::string data_dir;  // trajectory CSV directory; defaults to out_dir

    void apply_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static RunConfig from_file(const std::string& path);
};

}  // namespace flowcast
