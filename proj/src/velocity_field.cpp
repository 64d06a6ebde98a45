#include "flowcast/velocity_field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowcast {

namespace {

void require_finite(std::span<const double> z) {
    for (double v : z)
        if (!std::isfinite(v)) throw NonFiniteInput("velocity field: non-finite state input");
}

void require_dim(std::span<const double> z, const TransitionBank& bank) {
    if (static_cast<int>(z.size()) != bank.dim())
        throw DimensionMismatch("velocity field: state dimension does not match bank");
}

VelocityWorkspace& scratch(VelocityWorkspace* ws) {
    thread_local VelocityWorkspace local;
    return ws ? *ws : local;
}

// Squared distances from z to the bridge means m_t^(j) = (1-t)x1 + t x2.
void bridge_dist2(double t, std::span<const double> z, const TransitionBank& bank,
                  std::vector<double>& dist2) {
    const std::size_t m = bank.size();
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const double* x1 = bank.x1_flat().data();
    const double* x2 = bank.x2_flat().data();
    const double omt = 1.0 - t;
    dist2.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double* a = x1 + j * d;
        const double* b = x2 + j * d;
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = z[i] - (omt * a[i] + t * b[i]);
            acc += diff * diff;
        }
        dist2[j] = acc;
    }
}

// Squared distances from z to the rectified-flow means t * x2^(j).
void rf_dist2(double t, std::span<const double> z, const TransitionBank& bank,
              std::vector<double>& dist2) {
    const std::size_t m = bank.size();
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const double* x2 = bank.x2_flat().data();
    dist2.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double* b = x2 + j * d;
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = z[i] - t * b[i];
            acc += diff * diff;
        }
        dist2[j] = acc;
    }
}

// exp(-(dist2 - min_dist2)/(2 bw2)) for every j. Max-subtraction keeps the
// largest term at exactly 1, so the normalizer never over/underflows.
void softmax_terms(const std::vector<double>& dist2, double bw2, std::vector<double>& expw) {
    const std::size_t m = dist2.size();
    const double dmin = *std::min_element(dist2.begin(), dist2.end());
    const double inv = 1.0 / (2.0 * bw2);
    expw.resize(m);
    for (std::size_t j = 0; j < m; ++j) expw[j] = std::exp(-(dist2[j] - dmin) * inv);
}

// Indices of the R smallest squared distances (= largest weights), ties broken
// by lower index, returned sorted ascending so summation order matches the
// dense path.
void select_topR(const std::vector<double>& dist2, std::size_t R, std::vector<std::size_t>& order) {
    const std::size_t m = dist2.size();
    order.resize(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto closer = [&dist2](std::size_t a, std::size_t b) {
        return dist2[a] < dist2[b] || (dist2[a] == dist2[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + (R - 1), order.end(), closer);
    order.resize(R);
    std::sort(order.begin(), order.end());
}

double check_time_bridge(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw TimeDomainError("bridge velocity: t must lie in [0,1]");
    return t;
}

double check_time_rf(double t) {
    if (!(t >= 0.0 && t < 1.0))
        throw TimeDomainError("rectified-flow velocity: t must lie in [0,1)");
    return t;
}

}  // namespace

std::vector<double> bridge_mean(const TransitionBank& bank, std::size_t j, double t) {
    if (j >= bank.size()) throw IndexError("bridge_mean: transition index out of range");
    check_time_bridge(t);
    const auto a = bank.x1(j);
    const auto b = bank.x2(j);
    std::vector<double> m(a.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (1.0 - t) * a[i] + t * b[i];
    return m;
}

void responsibilities(double t, std::span<const double> z, const TransitionBank& bank,
                      const BridgeSchedule& schedule, std::span<double> alpha_out,
                      VelocityWorkspace* ws) {
    require_finite(z);
    require_dim(z, bank);
    check_time_bridge(t);
    if (alpha_out.size() != bank.size())
        throw DimensionMismatch("responsibilities: output span has wrong length");
    VelocityWorkspace& w = scratch(ws);
    bridge_dist2(t, z, bank, w.dist2);
    w.dist_ops += bank.size();
    softmax_terms(w.dist2, schedule.c2(t), w.expw);
    double total = 0.0;
    for (double e : w.expw) total += e;
    for (std::size_t j = 0; j < bank.size(); ++j) alpha_out[j] = w.expw[j] / total;
}

namespace {

// Core weighted combination shared by the dense and truncated evaluators.
// Accumulates over `idx` (ascending) with weights expw[j]/denom.
void combine_bridge(double t, std::span<const double> z, const TransitionBank& bank,
                    const BridgeSchedule& schedule, const std::vector<double>& expw,
                    const std::size_t* idx, std::size_t count, double denom,
                    std::span<double> v_out) {
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const double* x1 = bank.x1_flat().data();
    const double* x2 = bank.x2_flat().data();
    const double gt = schedule.g(t);
    const double omt = 1.0 - t;
    for (std::size_t i = 0; i < d; ++i) v_out[i] = gt * z[i];
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t j = idx ? idx[k] : k;
        const double wj = expw[j] / denom;
        const double* a = x1 + j * d;
        const double* b = x2 + j * d;
        for (std::size_t i = 0; i < d; ++i) {
            const double mean = omt * a[i] + t * b[i];
            const double xdot = b[i] - a[i];
            v_out[i] += wj * (xdot - gt * mean);
        }
    }
}

void combine_rf(double t, std::span<const double> z, const TransitionBank& bank,
                const RectifiedFlowPath& rf, const std::vector<double>& expw,
                const std::size_t* idx, std::size_t count, double denom,
                std::span<double> v_out) {
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const double* x2 = bank.x2_flat().data();
    const double shrink = 1.0 - rf.sigma_min_rf;
    const double inv_sigma_t = 1.0 / rf.sigma_t(t);
    std::fill(v_out.begin(), v_out.end(), 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t j = idx ? idx[k] : k;
        const double wj = expw[j] / denom;
        const double* b = x2 + j * d;
        for (std::size_t i = 0; i < d; ++i) v_out[i] += wj * (b[i] - shrink * z[i]) * inv_sigma_t;
    }
}

}  // namespace

VelocityEval velocity_dense(double t, std::span<const double> z, const TransitionBank& bank,
                            const PathFamily& family, bool want_weights, VelocityWorkspace* ws) {
    require_finite(z);
    require_dim(z, bank);
    VelocityWorkspace& w = scratch(ws);
    const std::size_t m = bank.size();
    VelocityEval out;
    out.v.assign(z.size(), 0.0);
    out.kept_mass = 1.0;
    if (is_bridge(family)) {
        const BridgeSchedule& schedule = std::get<BridgeSchedule>(family);
        check_time_bridge(t);
        bridge_dist2(t, z, bank, w.dist2);
        softmax_terms(w.dist2, schedule.c2(t), w.expw);
        double total = 0.0;
        for (double e : w.expw) total += e;
        w.dist_ops += m;
        w.term_ops += m;
        combine_bridge(t, z, bank, schedule, w.expw, nullptr, m, total, out.v);
        if (want_weights) {
            out.weights.resize(m);
            for (std::size_t j = 0; j < m; ++j) out.weights[j] = w.expw[j] / total;
        }
    } else {
        const RectifiedFlowPath& rf = std::get<RectifiedFlowPath>(family);
        check_time_rf(t);
        rf_dist2(t, z, bank, w.dist2);
        const double st = rf.sigma_t(t);
        softmax_terms(w.dist2, st * st, w.expw);
        double total = 0.0;
        for (double e : w.expw) total += e;
        w.dist_ops += m;
        w.term_ops += m;
        combine_rf(t, z, bank, rf, w.expw, nullptr, m, total, out.v);
        if (want_weights) {
            out.weights.resize(m);
            for (std::size_t j = 0; j < m; ++j) out.weights[j] = w.expw[j] / total;
        }
    }
    return out;
}

VelocityEval velocity_topR(double t, std::span<const double> z, const TransitionBank& bank,
                           const PathFamily& family, std::size_t R, bool want_weights,
                           VelocityWorkspace* ws) {
    require_finite(z);
    require_dim(z, bank);
    const std::size_t m = bank.size();
    if (R < 1 || R > m) throw RangeError("velocity_topR: R must satisfy 1 <= R <= M");
    VelocityWorkspace& w = scratch(ws);
    VelocityEval out;
    out.v.assign(z.size(), 0.0);

    double bw2 = 0.0;
    if (is_bridge(family)) {
        check_time_bridge(t);
        bridge_dist2(t, z, bank, w.dist2);
        bw2 = std::get<BridgeSchedule>(family).c2(t);
    } else {
        check_time_rf(t);
        rf_dist2(t, z, bank, w.dist2);
        const double st = std::get<RectifiedFlowPath>(family).sigma_t(t);
        bw2 = st * st;
    }
    softmax_terms(w.dist2, bw2, w.expw);
    select_topR(w.dist2, R, w.order);
    w.dist_ops += m;
    w.term_ops += R;

    double retained = 0.0;
    for (std::size_t j : w.order) retained += w.expw[j];
    double total = 0.0;
    for (double e : w.expw) total += e;
    out.kept_mass = retained / total;

    if (is_bridge(family)) {
        combine_bridge(t, z, bank, std::get<BridgeSchedule>(family), w.expw, w.order.data(), R,
                       retained, out.v);
    } else {
        combine_rf(t, z, bank, std::get<RectifiedFlowPath>(family), w.expw, w.order.data(), R,
                   retained, out.v);
    }
    out.indices = w.order;
    if (want_weights) {
        out.weights.resize(R);
        for (std::size_t k = 0; k < R; ++k) out.weights[k] = w.expw[w.order[k]] / retained;
    }
    return out;
}

void velocity_jacobian(double t, std::span<const double> z, const TransitionBank& bank,
                       const BridgeSchedule& schedule, std::span<double> jac_out,
                       VelocityWorkspace* ws) {
    require_finite(z);
    require_dim(z, bank);
    check_time_bridge(t);
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    if (jac_out.size() != d * d)
        throw DimensionMismatch("velocity_jacobian: output span must hold d*d entries");
    VelocityWorkspace& w = scratch(ws);
    const std::size_t m = bank.size();
    bridge_dist2(t, z, bank, w.dist2);
    const double c2 = schedule.c2(t);
    softmax_terms(w.dist2, c2, w.expw);
    double total = 0.0;
    for (double e : w.expw) total += e;

    const double* x1 = bank.x1_flat().data();
    const double* x2 = bank.x2_flat().data();
    const double gt = schedule.g(t);
    const double omt = 1.0 - t;

    // Posterior mean of the bridge means.
    std::vector<double> mbar(d, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double wj = w.expw[j] / total;
        const double* a = x1 + j * d;
        const double* b = x2 + j * d;
        for (std::size_t i = 0; i < d; ++i) mbar[i] += wj * (omt * a[i] + t * b[i]);
    }

    // grad v = g I + (1/c^2) sum_j alpha_j y_j (m_j - mbar)^T  (Jacobian of the
    // weights: grad alpha_j = (alpha_j/c^2)(m_j - mbar)).
    std::fill(jac_out.begin(), jac_out.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) jac_out[i * d + i] = gt;
    const double invc2 = 1.0 / c2;
    std::vector<double> yj(d), mj(d);
    for (std::size_t j = 0; j < m; ++j) {
        const double wj = w.expw[j] / total;
        if (wj == 0.0) continue;
        const double* a = x1 + j * d;
        const double* b = x2 + j * d;
        for (std::size_t i = 0; i < d; ++i) {
            mj[i] = omt * a[i] + t * b[i];
            yj[i] = (b[i] - a[i]) - gt * mj[i];
        }
        const double f = wj * invc2;
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) jac_out[r * d + c] += f * yj[r] * (mj[c] - mbar[c]);
    }
}

std::vector<double> score(double t, std::span<const double> z, const TransitionBank& bank,
                          const BridgeSchedule& schedule, VelocityWorkspace* ws) {
    require_finite(z);
    require_dim(z, bank);
    check_time_bridge(t);
    VelocityWorkspace& w = scratch(ws);
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    const std::size_t m = bank.size();
    bridge_dist2(t, z, bank, w.dist2);
    const double c2 = schedule.c2(t);
    softmax_terms(w.dist2, c2, w.expw);
    double total = 0.0;
    for (double e : w.expw) total += e;

    const double* x1 = bank.x1_flat().data();
    const double* x2 = bank.x2_flat().data();
    const double omt = 1.0 - t;
    std::vector<double> s(d, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double wj = w.expw[j] / total;
        const double* a = x1 + j * d;
        const double* b = x2 + j * d;
        for (std::size_t i = 0; i < d; ++i) s[i] += wj * (omt * a[i] + t * b[i]);
    }
    for (std::size_t i = 0; i < d; ++i) s[i] = (s[i] - z[i]) / c2;
    return s;
}

void eval_velocity(double t, std::span<const double> z, const TransitionBank& bank,
                   const PathFamily& family, std::size_t top_r, std::span<double> v_out,
                   VelocityWorkspace& ws) {
    const std::size_t m = bank.size();
    if (top_r == 0 || top_r >= m) {
        // Dense path.
        if (is_bridge(family)) {
            const BridgeSchedule& schedule = std::get<BridgeSchedule>(family);
            check_time_bridge(t);
            bridge_dist2(t, z, bank, ws.dist2);
            softmax_terms(ws.dist2, schedule.c2(t), ws.expw);
            double total = 0.0;
            for (double e : ws.expw) total += e;
            ws.dist_ops += m;
            ws.term_ops += m;
            combine_bridge(t, z, bank, schedule, ws.expw, nullptr, m, total, v_out);
        } else {
            const RectifiedFlowPath& rf = std::get<RectifiedFlowPath>(family);
            check_time_rf(t);
            rf_dist2(t, z, bank, ws.dist2);
            const double st = rf.sigma_t(t);
            softmax_terms(ws.dist2, st * st, ws.expw);
            double total = 0.0;
            for (double e : ws.expw) total += e;
            ws.dist_ops += m;
            ws.term_ops += m;
            combine_rf(t, z, bank, rf, ws.expw, nullptr, m, total, v_out);
        }
        return;
    }
    // Truncated path: distances to all M means, exponentials only for the
    // retained R. The retained weights match velocity_topR bit-exactly because
    // the max-subtraction reference (the global minimum distance) is always in
    // the retained set.
    double bw2 = 0.0;
    if (is_bridge(family)) {
        check_time_bridge(t);
        bridge_dist2(t, z, bank, ws.dist2);
        bw2 = std::get<BridgeSchedule>(family).c2(t);
    } else {
        check_time_rf(t);
        rf_dist2(t, z, bank, ws.dist2);
        const double st = std::get<RectifiedFlowPath>(family).sigma_t(t);
        bw2 = st * st;
    }
    select_topR(ws.dist2, top_r, ws.order);
    ws.dist_ops += m;
    ws.term_ops += top_r;
    double dmin = ws.dist2[ws.order.front()];
    for (std::size_t j : ws.order) dmin = std::min(dmin, ws.dist2[j]);
    const double inv = 1.0 / (2.0 * bw2);
    ws.expw.resize(m);
    double retained = 0.0;
    for (std::size_t j : ws.order) {
        ws.expw[j] = std::exp(-(ws.dist2[j] - dmin) * inv);
        retained += ws.expw[j];
    }
    if (is_bridge(family)) {
        combine_bridge(t, z, bank, std::get<BridgeSchedule>(family), ws.expw, ws.order.data(),
                       top_r, retained, v_out);
    } else {
        combine_rf(t, z, bank, std::get<RectifiedFlowPath>(family), ws.expw, ws.order.data(),
                   top_r, retained, v_out);
    }
}

void eval_forcing(double t, std::span<const double> z, const TransitionBank& bank,
                  const BridgeSchedule& schedule, std::size_t top_r, std::span<double> h_out,
                  VelocityWorkspace& ws) {
    eval_velocity(t, z, bank, PathFamily{schedule}, top_r, h_out, ws);
    const double gt = schedule.g(t);
    for (std::size_t i = 0; i < h_out.size(); ++i) h_out[i] -= gt * z[i];
}

BridgeSchedule default_schedule(const TransitionBank& bank) {
    BridgeSchedule s;
    s.sigma_min = 0.02 * bank.mean_scale();
    s.sigma = 0.1 * bank.mean_scale();
    return s;
}

}  // namespace flowcast
