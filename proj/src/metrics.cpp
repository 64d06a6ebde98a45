#include "flowcast/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "flowcast/sampler.hpp"

namespace flowcast {

namespace {

void require_same_shape(const StateSeries& a, const StateSeries& b, const char* where) {
    if (a.steps != b.steps || a.dim != b.dim)
        throw DimensionMismatch(std::string(where) + ": series shapes differ");
}

}  // namespace

std::vector<double> smape(const StateSeries& truth, const StateSeries& forecast) {
    require_same_shape(truth, forecast, "smape");
    std::vector<double> out(truth.steps, 0.0);
    for (std::size_t t = 0; t < truth.steps; ++t) {
        const auto y = truth.row(t);
        const auto yh = forecast.row(t);
        double acc = 0.0;
        for (int i = 0; i < truth.dim; ++i) {
            const double denom = 0.5 * (std::fabs(y[i]) + std::fabs(yh[i]));
            if (denom > 0.0) acc += std::fabs(y[i] - yh[i]) / denom;
            // denom == 0 means y = yhat = 0: contributes 0 by convention
        }
        out[t] = 100.0 * acc / truth.dim;
    }
    return out;
}

double vpt_from_smape(std::span<const double> smape_per_step, double epsilon,
                      int lyapunov_time_points) {
    if (!(epsilon > 0.0)) throw ConfigError("vpt: epsilon must be positive");
    if (lyapunov_time_points < 1) throw ConfigError("vpt: lyapunov_time_points must be >= 1");
    std::size_t valid = 0;
    while (valid < smape_per_step.size() && smape_per_step[valid] < epsilon) ++valid;
    return static_cast<double>(valid) / lyapunov_time_points;
}

double vpt(const StateSeries& truth, const StateSeries& forecast, double epsilon,
           int lyapunov_time_points) {
    return vpt_from_smape(smape(truth, forecast), epsilon, lyapunov_time_points);
}

double crps(std::span<const double> samples, double y) {
    const std::size_t s = samples.size();
    if (s == 0) throw NoData("crps: empty sample set");
    double first = 0.0;
    for (double x : samples) first += std::fabs(x - y);
    first /= static_cast<double>(s);
    double second = 0.0;
    for (double a : samples)
        for (double b : samples) second += std::fabs(a - b);
    second /= 2.0 * static_cast<double>(s) * static_cast<double>(s);
    return first - second;
}

std::vector<double> crps_series(const ForecastEnsemble& ens, const StateSeries& truth) {
    if (truth.steps != ens.horizon || truth.dim != ens.dim)
        throw DimensionMismatch("crps_series: truth shape does not match ensemble");
    std::vector<double> out(ens.horizon, 0.0);
    std::vector<double> values;
    values.reserve(ens.samples);
    for (std::size_t t = 0; t < ens.horizon; ++t) {
        double acc = 0.0;
        for (int i = 0; i < ens.dim; ++i) {
            values.clear();
            for (std::size_t s = 0; s < ens.samples; ++s)
                if (ens.ok[s]) values.push_back(ens.state(s, t)[i]);
            acc += crps(values, truth.row(t)[i]);
        }
        out[t] = acc / ens.dim;
    }
    return out;
}

std::vector<double> default_radius_grid(const StateSeries& points, int n_radii) {
    if (points.steps < 2) throw NoData("default_radius_grid: need at least 2 points");
    // Span from a small fraction of the extent up to the full extent.
    double max2 = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, points.steps / 256);
    for (std::size_t i = 0; i < points.steps; i += stride) {
        for (std::size_t j = i + 1; j < points.steps; j += stride) {
            double d2 = 0.0;
            const auto a = points.row(i), b = points.row(j);
            for (int k = 0; k < points.dim; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
            max2 = std::max(max2, d2);
        }
    }
    const double rmax = std::sqrt(max2);
    if (!(rmax > 0.0)) throw InsufficientScaling("default_radius_grid: degenerate point cloud");
    const double rmin = rmax * 1e-3;
    std::vector<double> grid(static_cast<std::size_t>(n_radii));
    const double step = std::log(rmax / rmin) / (n_radii - 1);
    for (int i = 0; i < n_radii; ++i) grid[static_cast<std::size_t>(i)] = rmin * std::exp(step * i);
    return grid;
}

double correlation_dimension(const StateSeries& points, std::span<const double> r_grid,
                             double fit_lo, double fit_hi) {
    if (points.steps < 100) throw NoData("correlation_dimension: need at least 100 points");
    if (r_grid.size() < 3) throw ConfigError("correlation_dimension: radius grid too small");

    // All pairwise distances (i < j), sorted once; C(r) follows by bisection.
    const std::size_t n = points.steps;
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = points.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto b = points.row(j);
            double d2 = 0.0;
            for (int k = 0; k < points.dim; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
            dist.push_back(std::sqrt(d2));
        }
    }
    std::sort(dist.begin(), dist.end());
    const double total = static_cast<double>(dist.size());

    std::vector<double> log_r, log_c;
    for (double r : r_grid) {
        const auto it = std::lower_bound(dist.begin(), dist.end(), r);
        const double c = static_cast<double>(it - dist.begin()) / total;
        if (c >= fit_lo && c <= fit_hi && c > 0.0 && r > 0.0) {
            log_r.push_back(std::log(r));
            log_c.push_back(std::log(c));
        }
    }
    if (log_r.size() < 3)
        throw InsufficientScaling("correlation_dimension: fewer than 3 radii in the scaling region");

    // Least-squares slope of log C against log r.
    const double m = static_cast<double>(log_r.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < log_r.size(); ++i) {
        sx += log_r[i];
        sy += log_c[i];
        sxx += log_r[i] * log_r[i];
        sxy += log_r[i] * log_c[i];
    }
    const double denom = m * sxx - sx * sx;
    if (!(std::fabs(denom) > 0.0))
        throw InsufficientScaling("correlation_dimension: degenerate radius spread");
    return (m * sxy - sx * sy) / denom;
}

double kl_divergence(const StateSeries& truth_points, const StateSeries& pred_points,
                     int bins_per_dim) {
    if (truth_points.steps == 0 || pred_points.steps == 0)
        throw NoData("kl_divergence: empty point cloud");
    if (truth_points.dim != pred_points.dim)
        throw DimensionMismatch("kl_divergence: clouds have different dimensions");
    if (bins_per_dim < 1) throw ConfigError("kl_divergence: bins_per_dim must be >= 1");

    double total = 0.0;
    for (int k = 0; k < truth_points.dim; ++k) {
        double lo = truth_points.row(0)[k], hi = lo;
        for (std::size_t i = 0; i < truth_points.steps; ++i) {
            lo = std::min(lo, truth_points.row(i)[k]);
            hi = std::max(hi, truth_points.row(i)[k]);
        }
        for (std::size_t i = 0; i < pred_points.steps; ++i) {
            lo = std::min(lo, pred_points.row(i)[k]);
            hi = std::max(hi, pred_points.row(i)[k]);
        }
        const double width = hi - lo;
        std::vector<double> p(static_cast<std::size_t>(bins_per_dim), 1.0);  // add-one smoothing
        std::vector<double> q(static_cast<std::size_t>(bins_per_dim), 1.0);
        auto bin_of = [&](double v) {
            if (width <= 0.0) return 0;
            int b = static_cast<int>((v - lo) / width * bins_per_dim);
            return std::clamp(b, 0, bins_per_dim - 1);
        };
        for (std::size_t i = 0; i < truth_points.steps; ++i)
            p[static_cast<std::size_t>(bin_of(truth_points.row(i)[k]))] += 1.0;
        for (std::size_t i = 0; i < pred_points.steps; ++i)
            q[static_cast<std::size_t>(bin_of(pred_points.row(i)[k]))] += 1.0;
        double psum = 0.0, qsum = 0.0;
        for (int b = 0; b < bins_per_dim; ++b) {
            psum += p[static_cast<std::size_t>(b)];
            qsum += q[static_cast<std::size_t>(b)];
        }
        double kl = 0.0;
        for (int b = 0; b < bins_per_dim; ++b) {
            const double pb = p[static_cast<std::size_t>(b)] / psum;
            const double qb = q[static_cast<std::size_t>(b)] / qsum;
            kl += pb * std::log(pb / qb);
        }
        total += kl;
    }
    return total / truth_points.dim;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["smape_per_step"] = smape_per_step;
    j["vpt"] = vpt;
    if (crps_per_step) j["crps_per_step"] = *crps_per_step;
    if (corr_dim)
        j["corr_dim"] = {{"predicted", corr_dim->predicted},
                         {"truth", corr_dim->truth},
                         {"rmse", corr_dim->rmse}};
    if (kl) j["kl"] = *kl;
    j["settings"] = settings;
    return j;
}

}  // namespace flowcast
