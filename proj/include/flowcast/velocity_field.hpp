#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowcast/bridge.hpp"
#include "flowcast/types.hpp"

namespace flowcast {

// One evaluation of the empirical velocity field at (t, z).
//
// `weights` (when requested) is the simplex vector over the bank, dense or
// renormalized over the retained indices for the truncated variant, in which
// case `indices` lists the retained transitions in ascending order.
// `kept_mass` is the pre-renormalization weight mass of the retained set
// (exactly 1 for a dense evaluation), so truncation-error bounds stated in
// terms of discarded mass can be checked directly.
struct VelocityEval {
    std::vector<double> v;
    std::vector<double> weights;
    std::vector<std::size_t> indices;
    double kept_mass = 1.0;
};

// Scratch buffers reused across evaluations. One instance per thread; the
// functions below never share state through anything else.
struct VelocityWorkspace {
    std::vector<double> dist2;       // squared distances to bridge means
    std::vector<double> expw;        // unnormalized softmax terms
    std::vector<std::size_t> order;  // top-R selection scratch
    // operation counters for the cost model (distance rows / weighted terms)
    std::uint64_t dist_ops = 0;
    std::uint64_t term_ops = 0;
};

// Bridge mean m_t^(j) = (1-t) x1_j + t x2_j.
std::vector<double> bridge_mean(const TransitionBank& bank, std::size_t j, double t);

// Softmax responsibilities alpha_j(t,z) over all M transitions, computed with
// max-subtraction so squared distances up to 1e300 neither overflow nor
// underflow the normalization. alpha_out must have length M.
void responsibilities(double t, std::span<const double> z, const TransitionBank& bank,
                      const BridgeSchedule& schedule, std::span<double> alpha_out,
                      VelocityWorkspace* ws = nullptr);

// Dense closed-form velocity:
//   bridge:         v = g(t) z + sum_j alpha_j (xdot_j - g(t) m_t^(j))
//   rectified flow: v = sum_j w_j (x2_j - (1-s) z) / (1 - (1-s) t), s = sigma_min_rf
VelocityEval velocity_dense(double t, std::span<const double> z, const TransitionBank& bank,
                            const PathFamily& family, bool want_weights = false,
                            VelocityWorkspace* ws = nullptr);

// Top-R truncation: keeps the R transitions with the largest weights
// (ties broken by lower index), renormalizes, and reports the retained mass.
// R = M reproduces velocity_dense bit-exactly (same summation order).
VelocityEval velocity_topR(double t, std::span<const double> z, const TransitionBank& bank,
                           const PathFamily& family, std::size_t R, bool want_weights = false,
                           VelocityWorkspace* ws = nullptr);

// Analytic Jacobian of the bridge velocity field,
//   grad v = g(t) I + (1/c_t^2) sum_j alpha_j y_j (m_t^(j) - mbar)^T,
// written row-major into jac_out (d*d). Bridge family only.
void velocity_jacobian(double t, std::span<const double> z, const TransitionBank& bank,
                       const BridgeSchedule& schedule, std::span<double> jac_out,
                       VelocityWorkspace* ws = nullptr);

// Empirical score s(t,z) = sum_j alpha_j (m_t^(j) - z) / c_t^2, the gradient of
// the log mixture density. Satisfies
//   v(t,z) = sum_j alpha_j xdot_j - (sigma^2 (1-2t)/2) s(t,z).
std::vector<double> score(double t, std::span<const double> z, const TransitionBank& bank,
                          const BridgeSchedule& schedule, VelocityWorkspace* ws = nullptr);

// Fast path used by the sampler: velocity only, optional truncation
// (top_r = 0 means dense), no allocation beyond the workspace.
void eval_velocity(double t, std::span<const double> z, const TransitionBank& bank,
                   const PathFamily& family, std::size_t top_r, std::span<double> v_out,
                   VelocityWorkspace& ws);

// Same but returns the forcing h(t,z) = v - g(t) z of the bridge field.
void eval_forcing(double t, std::span<const double> z, const TransitionBank& bank,
                  const BridgeSchedule& schedule, std::size_t top_r, std::span<double> h_out,
                  VelocityWorkspace& ws);

// Default data-scaled bandwidths: sigma_min = 0.02 mean(scale),
// sigma = 0.1 mean(scale).
BridgeSchedule default_schedule(const TransitionBank& bank);

}  // namespace flowcast
