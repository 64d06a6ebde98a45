#include "flowcast/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>

#include "flowcast/diagnostics.hpp"
#include "flowcast/dynamics.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/parallel.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/sampler.hpp"
#include "flowcast/transition_bank.hpp"
#include "flowcast/velocity_field.hpp"

namespace fs = std::filesystem;

namespace flowcast {

namespace {

void write_json(const nlohmann::json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(1, '\t') << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

void echo_config(const RunConfig& cfg, const fs::path& dir, const std::string& command) {
    write_json(cfg.to_json(), dir / ("config_" + command + ".json"));
}

char hex_digit(std::uint64_t v) { return "0123456789abcdef"[v & 0xF]; }

std::string hash_string(std::uint64_t h) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = hex_digit(h);
        h >>= 4;
    }
    return s;
}

std::vector<Trajectory> load_trajectories(const RunConfig& cfg) {
    const fs::path dir = cfg.data_dir.empty() ? fs::path(cfg.out_dir) : fs::path(cfg.data_dir);
    if (!fs::exists(dir)) throw IoError("data directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        nlohmann::json j;
        in >> j;
        for (const auto& f : j.at("files")) files.emplace_back(dir / f.get<std::string>());
    } else {
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw IoError("no trajectory CSV files under '" + dir.string() + "'");
    std::vector<Trajectory> out;
    out.reserve(files.size());
    for (const fs::path& f : files) out.push_back(read_trajectory_csv(f));
    return out;
}

// Bank built from the conditioning windows only (the protocol default) or
// from entire trajectories.
TransitionBank build_bank(const std::vector<Trajectory>& trajectories, const RunConfig& cfg) {
    if (cfg.bank_scope != "conditioning" && cfg.bank_scope != "full")
        throw ConfigError("bank_scope must be 'conditioning' or 'full'");
    if (cfg.bank_scope == "full") return extract_transitions(trajectories);
    std::vector<Trajectory> windows;
    windows.reserve(trajectories.size());
    for (const Trajectory& tr : trajectories) {
        if (tr.states.steps < static_cast<std::size_t>(cfg.condition_points))
            throw ConfigError("trajectory '" + tr.id + "' shorter than condition_points");
        Trajectory w;
        w.id = tr.id;
        w.dt = tr.dt;
        w.states = StateSeries(static_cast<std::size_t>(cfg.condition_points), tr.states.dim);
        std::copy(tr.states.data.begin(),
                  tr.states.data.begin() +
                      static_cast<std::ptrdiff_t>(w.states.data.size()),
                  w.states.data.begin());
        windows.push_back(std::move(w));
    }
    return extract_transitions(windows);
}

BridgeSchedule resolve_schedule(const RunConfig& cfg, const TransitionBank& bank) {
    BridgeSchedule s = default_schedule(bank);
    if (!cfg.tuning_file.empty()) {
        std::ifstream in(cfg.tuning_file);
        if (!in) throw IoError("cannot open tuning file '" + cfg.tuning_file + "'");
        nlohmann::json j;
        in >> j;
        s.sigma_min = j.at("best").at("sigma_min").get<double>();
        s.sigma = j.at("best").at("sigma").get<double>();
    }
    if (cfg.sigma_min >= 0.0) s.sigma_min = cfg.sigma_min;
    if (cfg.sigma >= 0.0) s.sigma = cfg.sigma;
    s.validate();
    return s;
}

SolverConfig resolve_solver(const RunConfig& cfg) {
    SolverConfig solver;
    solver.scheme = scheme_from_string(cfg.scheme);
    solver.steps = cfg.steps;
    solver.sde_diffusion = cfg.sde_diffusion;
    solver.top_r = cfg.top_r;
    solver.seed = cfg.seed;
    solver.resample_initial_noise = cfg.resample_initial_noise;
    return solver;
}

double mean_of(std::span<const double> v, std::size_t limit = 0) {
    const std::size_t n = limit == 0 ? v.size() : std::min(limit, v.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[i];
    return acc / static_cast<double>(n);
}

struct TrajectoryResult {
    std::string id;
    ForecastEnsemble ens;
    StateSeries point_forecast;
    MetricReport metrics;
    bool failed = false;
    std::string failure;
};

nlohmann::json ensemble_to_json(const ForecastEnsemble& ens, const std::string& trajectory_id,
                                const RunConfig& cfg, std::uint64_t bank_hash) {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t s = 0; s < ens.samples; ++s) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t k = 0; k < ens.horizon; ++k) {
            const auto row = ens.state(s, k);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        samples.push_back(std::move(rows));
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const SampleFailure& f : ens.failures)
        failures.push_back({{"sample", f.sample},
                            {"forecast_step", f.forecast_step},
                            {"g_magnitude", f.g_magnitude},
                            {"message", f.message}});
    std::vector<int> ok(ens.ok.begin(), ens.ok.end());
    return {{"meta",
             {{"trajectory", trajectory_id},
              {"bank_hash", hash_string(bank_hash)},
              {"config", cfg.to_json()}}},
            {"origin", ens.origin},
            {"ok", ok},
            {"failures", failures},
            {"samples", std::move(samples)}};
}

// One forecast+evaluate pass shared by cmd_forecast and cmd_ablate.
std::vector<TrajectoryResult> run_forecasts(const std::vector<Trajectory>& trajectories,
                                            const TransitionBank& bank,
                                            const BridgeSchedule& schedule,
                                            const SolverConfig& solver, const RunConfig& cfg) {
    if (cfg.horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (cfg.samples < 1) throw ConfigError("sample count must be >= 1");
    if (cfg.condition_points < 1) throw ConfigError("condition_points must be >= 1");
    const std::size_t n = trajectories.size();
    const std::size_t horizon = static_cast<std::size_t>(cfg.horizon);
    const std::size_t cond = static_cast<std::size_t>(cfg.condition_points);
    for (const Trajectory& tr : trajectories)
        if (tr.states.steps < cond + horizon)
            throw ConfigError("trajectory '" + tr.id + "' has fewer than condition_points + "
                              "horizon states");

    std::vector<TrajectoryResult> results(n);
    const PathFamily family{schedule};
    parallel_for(n, [&](std::size_t i) {
        const Trajectory& tr = trajectories[i];
        TrajectoryResult& res = results[i];
        res.id = tr.id;
        SolverConfig traj_solver = solver;
        traj_solver.seed = derive_seed(solver.seed, i, 0xFC57);

        StateSeries truth(horizon, tr.states.dim);
        for (std::size_t k = 0; k < horizon; ++k) {
            const auto row = tr.states.row(cond + k);
            std::copy(row.begin(), row.end(), truth.row(k).begin());
        }

        try {
            res.ens = ensemble(tr.states.row(cond - 1), horizon,
                               static_cast<std::size_t>(cfg.samples), bank, family, traj_solver,
                               /*workers=*/1);
            res.point_forecast = res.ens.mean();
        } catch (const Error& e) {
            // every sample diverged: score as the worst case, never silently drop
            res.failed = true;
            res.failure = e.what();
            res.point_forecast = StateSeries(horizon, tr.states.dim);
            res.metrics.smape_per_step.assign(horizon, 200.0);
            res.metrics.vpt = 0.0;
            res.metrics.settings = {{"failed", true}, {"reason", res.failure}};
            return;
        }

        res.metrics.smape_per_step = smape(truth, res.point_forecast);
        res.metrics.vpt = vpt_from_smape(res.metrics.smape_per_step, cfg.epsilon,
                                         cfg.points_per_lyapunov_time);
        if (cfg.samples > 1) res.metrics.crps_per_step = crps_series(res.ens, truth);
        if (cfg.attractor_metrics && horizon >= 100) {
            try {
                const auto grid_t = default_radius_grid(truth);
                const auto grid_p = default_radius_grid(res.point_forecast);
                CorrDimReport cd;
                cd.truth = correlation_dimension(truth, grid_t);
                cd.predicted = correlation_dimension(res.point_forecast, grid_p);
                cd.rmse = std::fabs(cd.predicted - cd.truth);
                res.metrics.corr_dim = cd;
            } catch (const Error&) {
                // scaling region too thin on this horizon; omitted from the report
            }
            res.metrics.kl = kl_divergence(truth, res.point_forecast, cfg.bins_per_dim);
        }
        res.metrics.settings = {{"epsilon", cfg.epsilon},
                                {"points_per_lyapunov_time", cfg.points_per_lyapunov_time},
                                {"smape_multivariate", "mean over state dimensions per step"},
                                {"crps_estimator", "all-pairs including i=j"},
                                {"corr_dim", "full-state pairs, no delay embedding"},
                                {"kl", "per-dimension histograms, add-one smoothing"},
                                {"bins_per_dim", cfg.bins_per_dim},
                                {"scheme", to_string(traj_solver.scheme)},
                                {"steps", traj_solver.steps},
                                {"top_r", traj_solver.top_r},
                                {"sigma_min", schedule.sigma_min},
                                {"sigma", schedule.sigma},
                                {"seed", traj_solver.seed}};
    });
    return results;
}

}  // namespace

int cmd_generate(const RunConfig& cfg) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir, "generate");

    const SystemSpec spec = SystemSpec::make(cfg.system, cfg.params);
    double lambda = cfg.lyapunov_exponent;
    bool lambda_converged = true;
    if (!(lambda > 0.0)) {
        const auto box = spec.default_ic_box();
        std::vector<double> x0;
        for (const auto& [lo, hi] : box) x0.push_back(0.5 * (lo + hi));
        // nudge off symmetric points that can sit on invariant subspaces
        x0[0] += 0.01 * (box[0].second - box[0].first) + 0.01;
        const LyapunovEstimate est =
            estimate_lyapunov(spec, x0, cfg.lyap_horizon, cfg.lyap_renorm);
        lambda = est.lambda;
        lambda_converged = est.converged;
        if (!(lambda > 0.0))
            throw ConfigError("estimated Lyapunov exponent is not positive; pass "
                              "lyapunov_exponent explicitly");
    }

    SamplingPlan plan;
    plan.lyapunov_exponent = lambda;
    plan.points_per_lyapunov_time = cfg.points_per_lyapunov_time;
    plan.n_trajectories = cfg.n_trajectories;
    plan.length = cfg.length;
    plan.burn_in = cfg.burn_in;

    const std::vector<Trajectory> trajectories = generate_benchmark(spec, plan, cfg.seed);
    nlohmann::json files = nlohmann::json::array();
    for (const Trajectory& tr : trajectories) {
        const std::string name = tr.id + ".csv";
        write_trajectory_csv(tr, dir / name);
        files.push_back(name);
    }
    nlohmann::json manifest = {{"system", cfg.system},
                               {"params", spec.params},
                               {"lambda", lambda},
                               {"lambda_converged", lambda_converged},
                               {"points_per_lyapunov_time", cfg.points_per_lyapunov_time},
                               {"dt", plan.dt()},
                               {"dt_internal", plan.dt() / 10.0},
                               {"integrator", "rk4 fixed step"},
                               {"n_trajectories", cfg.n_trajectories},
                               {"length", cfg.length},
                               {"seed", cfg.seed},
                               {"files", files},
                               {"config", cfg.to_json()}};
    write_json(manifest, dir / "manifest.json");
    std::cout << "generate: wrote " << trajectories.size() << " trajectories (lambda=" << lambda
              << ", dt=" << plan.dt() << ") to " << dir.string() << "\n";
    return 0;
}

int cmd_forecast(const RunConfig& cfg) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir, "forecast");

    const std::vector<Trajectory> trajectories = load_trajectories(cfg);
    const TransitionBank bank = build_bank(trajectories, cfg);
    const BridgeSchedule schedule = resolve_schedule(cfg, bank);
    const SolverConfig solver = resolve_solver(cfg);

    const std::vector<TrajectoryResult> results =
        run_forecasts(trajectories, bank, schedule, solver, cfg);

    // serialized file writes, in trajectory order
    const std::uint64_t bank_hash = bank.content_hash();
    double mean_vpt = 0.0, mean_smape_tau = 0.0, mean_smape_all = 0.0, mean_crps1 = 0.0;
    std::size_t n_failed = 0;
    nlohmann::json per_traj = nlohmann::json::array();
    std::ofstream plot(dir / "plot.csv");
    plot << "trajectory,step,quantity,value,sample\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const TrajectoryResult& res = results[i];
        char name[64];
        std::snprintf(name, sizeof name, "ensemble_%03zu.json", i);
        if (!res.failed)
            write_json(ensemble_to_json(res.ens, res.id, cfg, bank_hash), dir / name);
        std::snprintf(name, sizeof name, "metrics_%03zu.json", i);
        write_json(res.metrics.to_json(), dir / name);

        const double vpt_i = res.metrics.vpt;
        const double smape_tau =
            mean_of(res.metrics.smape_per_step,
                    static_cast<std::size_t>(cfg.points_per_lyapunov_time));
        const double smape_all = mean_of(res.metrics.smape_per_step);
        mean_vpt += vpt_i;
        mean_smape_tau += smape_tau;
        mean_smape_all += smape_all;
        if (res.metrics.crps_per_step && !res.metrics.crps_per_step->empty())
            mean_crps1 += res.metrics.crps_per_step->front();
        if (res.failed) ++n_failed;
        per_traj.push_back({{"trajectory", res.id},
                            {"vpt", vpt_i},
                            {"smape_first_lyapunov_time", smape_tau},
                            {"smape_mean", smape_all},
                            {"failed", res.failed}});

        for (std::size_t k = 0; k < res.metrics.smape_per_step.size(); ++k)
            plot << res.id << ',' << k << ",smape," << res.metrics.smape_per_step[k] << ",-\n";
        if (res.metrics.crps_per_step)
            for (std::size_t k = 0; k < res.metrics.crps_per_step->size(); ++k)
                plot << res.id << ',' << k << ",crps," << (*res.metrics.crps_per_step)[k]
                     << ",-\n";
    }
    const double n = static_cast<double>(results.size());
    nlohmann::json summary = {{"config", cfg.to_json()},
                              {"bank_hash", hash_string(bank_hash)},
                              {"bank_size", bank.size()},
                              {"bank_scope", cfg.bank_scope},
                              {"m_count_convention", "sum_over_trajectories(T_n - 1)"},
                              {"sigma_min", schedule.sigma_min},
                              {"sigma", schedule.sigma},
                              {"mean_vpt", mean_vpt / n},
                              {"mean_smape_first_lyapunov_time", mean_smape_tau / n},
                              {"mean_smape", mean_smape_all / n},
                              {"failed_trajectories", n_failed},
                              {"per_trajectory", per_traj}};
    if (cfg.samples > 1) summary["mean_crps_step1"] = mean_crps1 / n;
    write_json(summary, dir / "summary.json");
    std::cout << "forecast: mean VPT " << mean_vpt / n << ", mean sMAPE(first tau) "
              << mean_smape_tau / n << ", outputs in " << dir.string() << "\n";
    return n_failed > 0 ? 1 : 0;
}

int cmd_gridsearch(const RunConfig& cfg) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir, "gridsearch");

    const std::vector<Trajectory> trajectories = load_trajectories(cfg);
    const TransitionBank bank = build_bank(trajectories, cfg);
    if (bank.size() < 2) throw ConfigError("gridsearch: bank needs at least 2 transitions");
    if (cfg.grid_sigma_min_factors.empty() || cfg.grid_sigma_factors.empty())
        throw ConfigError("gridsearch: empty grid");

    // deterministic held-out split
    std::vector<std::size_t> idx(bank.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5917, 7));
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[shuffle_rng.next_u64() % i]);
    std::size_t n_holdout = static_cast<std::size_t>(
        std::max(1.0, std::floor(cfg.holdout_fraction * static_cast<double>(bank.size()))));
    n_holdout = std::min({n_holdout, static_cast<std::size_t>(cfg.holdout_cap), bank.size() - 1});
    std::vector<std::size_t> holdout(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_holdout));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_holdout), idx.end());
    std::sort(holdout.begin(), holdout.end());
    std::sort(train.begin(), train.end());

    const std::size_t d = static_cast<std::size_t>(bank.dim());
    std::vector<double> x1, x2;
    for (std::size_t j : train) {
        const auto a = bank.x1(j);
        const auto b = bank.x2(j);
        x1.insert(x1.end(), a.begin(), a.end());
        x2.insert(x2.end(), b.begin(), b.end());
    }
    const TransitionBank train_bank(bank.dim(), std::move(x1), std::move(x2), {});

    struct Cell {
        double sigma_min, sigma, mean_error;
        std::size_t blowups;
    };
    std::vector<Cell> cells;
    for (double fmin : cfg.grid_sigma_min_factors)
        for (double fsig : cfg.grid_sigma_factors)
            cells.push_back({fmin * bank.mean_scale(), fsig * bank.mean_scale(), 0.0, 0});

    const SolverConfig base = resolve_solver(cfg);
    parallel_for(cells.size(), [&](std::size_t c) {
        Cell& cell = cells[c];
        BridgeSchedule schedule{cell.sigma_min, cell.sigma};
        const PathFamily family{schedule};
        SolverConfig solver = base;
        VelocityWorkspace ws;
        double total = 0.0;
        for (std::size_t p = 0; p < holdout.size(); ++p) {
            const std::size_t j = holdout[p];
            // the same noise stream per probe across cells keeps the sweep fair
            Rng rng(derive_seed(cfg.seed, 0x09D3, p));
            try {
                const std::vector<double> pred =
                    one_step(bank.x1(j), train_bank, family, solver, rng, &ws);
                double err2 = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double diff = pred[i] - bank.x2(j)[i];
                    err2 += diff * diff;
                }
                total += std::sqrt(err2);
            } catch (const NumericalBlowup&) {
                ++cell.blowups;
                total += 1e12;  // dominates the mean: diverging cells never win
            }
        }
        cell.mean_error = total / static_cast<double>(holdout.size());
    });

    std::size_t best = 0;
    for (std::size_t c = 1; c < cells.size(); ++c)
        if (cells[c].mean_error < cells[best].mean_error) best = c;

    nlohmann::json table = nlohmann::json::array();
    for (const Cell& cell : cells)
        table.push_back({{"sigma_min", cell.sigma_min},
                         {"sigma", cell.sigma},
                         {"mean_one_step_error", cell.mean_error},
                         {"blowups", cell.blowups}});
    const nlohmann::json out = {{"config", cfg.to_json()},
                                {"bank_hash", hash_string(bank.content_hash())},
                                {"holdout_size", holdout.size()},
                                {"train_size", train.size()},
                                {"mean_scale", bank.mean_scale()},
                                {"table", table},
                                {"best",
                                 {{"sigma_min", cells[best].sigma_min},
                                  {"sigma", cells[best].sigma},
                                  {"mean_one_step_error", cells[best].mean_error}}}};
    write_json(out, dir / "gridsearch.json");
    std::cout << "gridsearch: best sigma_min=" << cells[best].sigma_min
              << " sigma=" << cells[best].sigma << " (error " << cells[best].mean_error << ") over "
              << cells.size() << " cells\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir, "ablate");

    const std::vector<Trajectory> trajectories = load_trajectories(cfg);
    const TransitionBank bank = build_bank(trajectories, cfg);
    const BridgeSchedule schedule = resolve_schedule(cfg, bank);

    nlohmann::json table = nlohmann::json::array();
    std::ofstream csv(dir / "ablate.csv");
    csv << "scheme,steps,top_r,mean_smape,mean_smape_first_lyapunov_time,mean_vpt,failures\n";
    int failures_total = 0;
    for (const std::string& scheme_name : cfg.ablate_schemes) {
        for (int steps : cfg.ablate_steps) {
            for (std::size_t r : cfg.ablate_top_r) {
                RunConfig cell_cfg = cfg;
                cell_cfg.scheme = scheme_name;
                cell_cfg.steps = steps;
                cell_cfg.top_r = r > bank.size() ? bank.size() : r;
                cell_cfg.attractor_metrics = false;
                const SolverConfig solver = resolve_solver(cell_cfg);
                const std::vector<TrajectoryResult> results =
                    run_forecasts(trajectories, bank, schedule, solver, cell_cfg);
                double smape_all = 0.0, smape_tau = 0.0, vpt_mean = 0.0;
                int failed = 0;
                for (const TrajectoryResult& res : results) {
                    smape_all += mean_of(res.metrics.smape_per_step);
                    smape_tau += mean_of(res.metrics.smape_per_step,
                                         static_cast<std::size_t>(cfg.points_per_lyapunov_time));
                    vpt_mean += res.metrics.vpt;
                    failed += res.failed ? 1 : 0;
                }
                const double n = static_cast<double>(results.size());
                smape_all /= n;
                smape_tau /= n;
                vpt_mean /= n;
                failures_total += failed;
                table.push_back({{"scheme", scheme_name},
                                 {"steps", steps},
                                 {"top_r", cell_cfg.top_r},
                                 {"mean_smape", smape_all},
                                 {"mean_smape_first_lyapunov_time", smape_tau},
                                 {"mean_vpt", vpt_mean},
                                 {"failures", failed}});
                csv << scheme_name << ',' << steps << ',' << cell_cfg.top_r << ',' << smape_all
                    << ',' << smape_tau << ',' << vpt_mean << ',' << failed << '\n';
                std::cout << "ablate: " << scheme_name << " L=" << steps
                          << " R=" << (r == 0 ? std::string("dense") : std::to_string(r))
                          << "  mean sMAPE " << smape_all << "  VPT " << vpt_mean << "\n";
            }
        }
    }
    write_json({{"config", cfg.to_json()},
                {"sigma_min", schedule.sigma_min},
                {"sigma", schedule.sigma},
                {"bank_hash", hash_string(bank.content_hash())},
                {"failed_samples_score_as_smape_200", true},
                {"table", table}},
               dir / "ablate.json");
    return failures_total > 0 ? 1 : 0;
}

int cmd_diagnose(const RunConfig& cfg) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir, "diagnose");

    // bank: explicit file > data directory > small built-in benchmark bank
    std::unique_ptr<TransitionBank> bank;
    if (!cfg.bank_file.empty()) {
        bank = std::make_unique<TransitionBank>(load_bank(cfg.bank_file));
    } else {
        bool have_data = false;
        const fs::path data(cfg.data_dir.empty() ? cfg.out_dir : cfg.data_dir);
        if (fs::exists(data))
            for (const auto& entry : fs::directory_iterator(data))
                if (entry.path().extension() == ".csv") have_data = true;
        if (have_data) {
            bank = std::make_unique<TransitionBank>(extract_transitions(load_trajectories(cfg)));
        } else {
            SystemSpec spec = SystemSpec::make(cfg.system, cfg.params);
            const LyapunovEstimate est =
                estimate_lyapunov(spec, std::vector<double>{1.0, 1.0, 20.0}, 300.0, 0.5);
            SamplingPlan plan;
            plan.lyapunov_exponent = est.lambda;
            plan.points_per_lyapunov_time = cfg.points_per_lyapunov_time;
            plan.n_trajectories = 2;
            plan.length = 300;
            const auto trajectories = generate_benchmark(spec, plan, cfg.seed);
            bank = std::make_unique<TransitionBank>(extract_transitions(trajectories));
        }
    }

    BridgeSchedule schedule = default_schedule(*bank);
    if (cfg.sigma_min >= 0.0) schedule.sigma_min = cfg.sigma_min;
    if (cfg.sigma >= 0.0) schedule.sigma = cfg.sigma;
    schedule.validate();

    const std::size_t probes = static_cast<std::size_t>(std::max(cfg.diag_probes, 8));
    auto wanted = [&](const char* name) {
        return cfg.diag_only.empty() || cfg.diag_only == name;
    };

    std::vector<DiagnosticReport> reports;
    if (wanted("truncation")) {
        const std::size_t r = std::min<std::size_t>(cfg.top_r ? cfg.top_r : 256, bank->size());
        reports.push_back(check_truncation_bound(*bank, schedule, r, probes, cfg.seed));
    }
    if (wanted("lipschitz"))
        reports.push_back(check_lipschitz_bound(*bank, schedule, 12, 20, cfg.seed));
    if (wanted("duhamel"))
        reports.push_back(check_duhamel(*bank, schedule, resolve_solver(cfg), 3, cfg.seed));
    if (wanted("equivariance"))
        reports.push_back(check_equivariance(*bank, schedule, probes, cfg.seed));
    if (wanted("cost")) {
        std::vector<std::size_t> sizes = {500, 1000, 5000};
        std::vector<std::size_t> rs = {256};
        reports.push_back(measure_cost(sizes, rs, bank->dim(), cfg.seed));
    }
    if (reports.empty())
        throw ConfigError("diagnose: unknown suite '" + cfg.diag_only +
                          "' (truncation, lipschitz, duhamel, equivariance, cost)");

    nlohmann::json out = nlohmann::json::array();
    bool all_pass = true;
    for (const DiagnosticReport& r : reports) {
        out.push_back(r.to_json());
        all_pass = all_pass && r.pass;
        std::cout << r.summary_line() << "\n";
    }
    write_json({{"config", cfg.to_json()},
                {"bank_hash", hash_string(bank->content_hash())},
                {"sigma_min", schedule.sigma_min},
                {"sigma", schedule.sigma},
                {"reports", out}},
               dir / "diagnostics.json");
    return all_pass ? 0 : 1;
}

}  // namespace flowcast
