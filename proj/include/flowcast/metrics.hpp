#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "flowcast/types.hpp"

namespace flowcast {

// Per-step symmetric mean absolute percentage error in [0, 200]:
// 100 * mean over dimensions of |y - yhat| / ((|y| + |yhat|)/2), with the
// 0/0 coordinate convention contributing 0.
std::vector<double> smape(const StateSeries& truth, const StateSeries& forecast);

// Valid prediction time in Lyapunov-time units: the number of leading steps
// whose sMAPE stays below epsilon, divided by lyapunov_time_points.
double vpt(const StateSeries& truth, const StateSeries& forecast, double epsilon,
           int lyapunov_time_points);
double vpt_from_smape(std::span<const double> smape_per_step, double epsilon,
                      int lyapunov_time_points);

// Empirical CRPS of a sample set against a scalar observation,
//   (1/S) sum_i |x_i - y| - (1/(2 S^2)) sum_ij |x_i - x_j|,
// with the all-pairs (i = j included) second term.
double crps(std::span<const double> samples, double y);

// Per-step CRPS of an ensemble forecast, averaged over state dimensions.
// Failed samples are excluded.
struct ForecastEnsemble;  // sampler.hpp
std::vector<double> crps_series(const ForecastEnsemble& ensemble, const StateSeries& truth);

// Grassberger-Procaccia correlation dimension: least-squares slope of
// log C(r) against log r over the radii whose pair fraction C(r) falls inside
// [fit_lo, fit_hi]. The default window sits at small radii where the
// pair-count scaling is free of boundary saturation; wider windows (e.g.
// C up to 0.5) bias the slope of bounded manifolds visibly downward.
// Throws InsufficientScaling with fewer than 3 usable radii.
double correlation_dimension(const StateSeries& points, std::span<const double> r_grid,
                             double fit_lo = 0.002, double fit_hi = 0.05);

// Log-spaced default radius grid spanning the cloud's pairwise extent.
std::vector<double> default_radius_grid(const StateSeries& points, int n_radii = 32);

// Average over dimensions of KL(P||Q) between per-dimension marginal
// histograms on the union range, with add-one (Laplace) smoothing.
double kl_divergence(const StateSeries& truth_points, const StateSeries& pred_points,
                     int bins_per_dim);

struct CorrDimReport {
    double predicted = 0.0;
    double truth = 0.0;
    double rmse = 0.0;
};

struct MetricReport {
    std::vector<double> smape_per_step;
    double vpt = 0.0;
    std::optional<std::vector<double>> crps_per_step;
    std::optional<CorrDimReport> corr_dim;
    std::optional<double> kl;
    nlohmann::json settings;  // every knob needed to re-run bit-identically

    nlohmann::json to_json() const;
};

}  // namespace flowcast
