#include "flowcast/run_config.hpp"

#include <fstream>

#include "flowcast/errors.hpp"

namespace flowcast {

namespace {

template <typename T>
void pick(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::apply_json(const nlohmann::json& j) {
    pick(j, "system", system);
    if (j.contains("params")) params = j.at("params").get<std::map<std::string, double>>();
    pick(j, "n_trajectories", n_trajectories);
    pick(j, "length", length);
    pick(j, "points_per_lyapunov_time", points_per_lyapunov_time);
    pick(j, "burn_in", burn_in);
    pick(j, "lyapunov_exponent", lyapunov_exponent);
    pick(j, "lyap_horizon", lyap_horizon);
    pick(j, "lyap_renorm", lyap_renorm);
    pick(j, "condition_points", condition_points);
    pick(j, "horizon", horizon);
    pick(j, "samples", samples);
    pick(j, "scheme", scheme);
    pick(j, "steps", steps);
    pick(j, "top_r", top_r);
    pick(j, "sde_diffusion", sde_diffusion);
    pick(j, "resample_initial_noise", resample_initial_noise);
    pick(j, "sigma_min", sigma_min);
    pick(j, "sigma", sigma);
    pick(j, "bank_scope", bank_scope);
    pick(j, "epsilon", epsilon);
    pick(j, "attractor_metrics", attractor_metrics);
    pick(j, "bins_per_dim", bins_per_dim);
    pick(j, "grid_sigma_min_factors", grid_sigma_min_factors);
    pick(j, "grid_sigma_factors", grid_sigma_factors);
    pick(j, "holdout_fraction", holdout_fraction);
    pick(j, "holdout_cap", holdout_cap);
    pick(j, "tuning_file", tuning_file);
    pick(j, "ablate_steps", ablate_steps);
    pick(j, "ablate_schemes", ablate_schemes);
    pick(j, "ablate_top_r", ablate_top_r);
    pick(j, "diag_probes", diag_probes);
    pick(j, "diag_only", diag_only);
    pick(j, "bank_file", bank_file);
    pick(j, "seed", seed);
    pick(j, "out_dir", out_dir);
    pick(j, "data_dir", data_dir);
}

nlohmann::json RunConfig::to_json() const {
    return {{"system", system},
            {"params", params},
            {"n_trajectories", n_trajectories},
            {"length", length},
            {"points_per_lyapunov_time", points_per_lyapunov_time},
            {"burn_in", burn_in},
            {"lyapunov_exponent", lyapunov_exponent},
            {"lyap_horizon", lyap_horizon},
            {"lyap_renorm", lyap_renorm},
            {"condition_points", condition_points},
            {"horizon", horizon},
            {"samples", samples},
            {"scheme", scheme},
            {"steps", steps},
            {"top_r", top_r},
            {"sde_diffusion", sde_diffusion},
            {"resample_initial_noise", resample_initial_noise},
            {"sigma_min", sigma_min},
            {"sigma", sigma},
            {"bank_scope", bank_scope},
            {"epsilon", epsilon},
            {"attractor_metrics", attractor_metrics},
            {"bins_per_dim", bins_per_dim},
            {"grid_sigma_min_factors", grid_sigma_min_factors},
            {"grid_sigma_factors", grid_sigma_factors},
            {"holdout_fraction", holdout_fraction},
            {"holdout_cap", holdout_cap},
            {"tuning_file", tuning_file},
            {"ablate_steps", ablate_steps},
            {"ablate_schemes", ablate_schemes},
            {"ablate_top_r", ablate_top_r},
            {"diag_probes", diag_probes},
            {"diag_only", diag_only},
            {"bank_file", bank_file},
            {"seed", seed},
            {"out_dir", out_dir},
            {"data_dir", data_dir}};
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config: '" + path + "': " + e.what());
    }
    RunConfig cfg;
    cfg.apply_json(j);
    return cfg;
}

}  // namespace flowcast
