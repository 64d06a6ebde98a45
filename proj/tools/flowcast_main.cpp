#include <iostream>

#include <CLI11.hpp>

#include "flowcast/commands.hpp"
#include "flowcast/errors.hpp"

using flowcast::RunConfig;

namespace {

// Flags shared by every subcommand; each one overrides the config-file key of
// the same name.
void add_common(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file (flags override its keys)");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--data", cfg.data_dir, "trajectory CSV directory (default: --out)");
    cmd->add_option("--system", cfg.system, "benchmark system name");
    cmd->add_option("--sigma-min", cfg.sigma_min, "bridge sigma_min (<0 = auto from bank scale)");
    cmd->add_option("--sigma", cfg.sigma, "bridge sigma (<0 = auto from bank scale)");
    cmd->add_option("--scheme", cfg.scheme,
                    "euler | rk4 | integrating_factor | etd1 | euler_maruyama");
    cmd->add_option("--steps", cfg.steps, "ODE steps per unit interval");
    cmd->add_option("--top-r", cfg.top_r, "top-R truncation (0 = dense)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free flow-matching forecaster over a transition memory bank"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    CLI::App* generate = app.add_subcommand("generate", "integrate benchmark trajectories");
    generate->add_option("--n", cfg.n_trajectories, "number of trajectories");
    generate->add_option("--length", cfg.length, "points per trajectory");
    generate->add_option("--ppl", cfg.points_per_lyapunov_time, "points per Lyapunov time");
    generate->add_option("--burn-in", cfg.burn_in, "burn-in time before recording");
    generate->add_option("--lambda", cfg.lyapunov_exponent,
                         "Lyapunov exponent (0 = estimate)");
    add_common(generate, cfg, config_path);

    CLI::App* forecast = app.add_subcommand("forecast", "forecast and evaluate");
    forecast->add_option("--condition", cfg.condition_points, "conditioning points per trajectory");
    forecast->add_option("--horizon", cfg.horizon, "forecast steps");
    forecast->add_option("--samples", cfg.samples, "ensemble size");
    forecast->add_option("--epsilon", cfg.epsilon, "VPT sMAPE threshold");
    forecast->add_option("--bank-scope", cfg.bank_scope, "conditioning | full");
    forecast->add_option("--tuning", cfg.tuning_file, "gridsearch.json with tuned bandwidths");
    forecast->add_option("--ppl", cfg.points_per_lyapunov_time, "points per Lyapunov time");
    forecast->add_flag("!--no-init-noise", cfg.resample_initial_noise,
                       "chain steps deterministically instead of re-noising Z0");
    forecast->add_option("--sde-diffusion", cfg.sde_diffusion, "SDE diffusion magnitude");
    add_common(forecast, cfg, config_path);

    CLI::App* gridsearch = app.add_subcommand("gridsearch", "tune (sigma_min, sigma)");
    gridsearch->add_option("--condition", cfg.condition_points, "conditioning points");
    gridsearch->add_option("--bank-scope", cfg.bank_scope, "conditioning | full");
    gridsearch->add_option("--holdout-cap", cfg.holdout_cap, "max held-out transitions");
    add_common(gridsearch, cfg, config_path);

    CLI::App* ablate = app.add_subcommand("ablate", "steps x scheme x truncation table");
    ablate->add_option("--condition", cfg.condition_points, "conditioning points");
    ablate->add_option("--horizon", cfg.horizon, "forecast steps");
    ablate->add_option("--tuning", cfg.tuning_file, "gridsearch.json with tuned bandwidths");
    ablate->add_option("--ppl", cfg.points_per_lyapunov_time, "points per Lyapunov time");
    add_common(ablate, cfg, config_path);

    CLI::App* diagnose = app.add_subcommand("diagnose", "run the verification suites");
    diagnose->add_option("--only", cfg.diag_only,
                         "truncation | lipschitz | duhamel | equivariance | cost");
    diagnose->add_option("--probes", cfg.diag_probes, "probe count");
    diagnose->add_option("--bank", cfg.bank_file, "bank JSON file");
    add_common(diagnose, cfg, config_path);

    CLI11_PARSE(app, argc, argv);

    try {
        // config file first, then re-parse so explicit flags win
        if (!config_path.empty()) {
            RunConfig from_file = RunConfig::from_file(config_path);
            std::swap(cfg, from_file);
            app.clear();
            (void)app.parse(argc, argv);
        }
        if (generate->parsed()) return flowcast::cmd_generate(cfg);
        if (forecast->parsed()) return flowcast::cmd_forecast(cfg);
        if (gridsearch->parsed()) return flowcast::cmd_gridsearch(cfg);
        if (ablate->parsed()) return flowcast::cmd_ablate(cfg);
        if (diagnose->parsed()) return flowcast::cmd_diagnose(cfg);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const flowcast::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
