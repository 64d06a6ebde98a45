#pragma once

#include <cmath>
#include <variant>

#include "flowcast/errors.hpp"

namespace flowcast {

// Scalar schedule of the Gaussian bridge path
//   Z_t = (1-t) X1 + t X2 + c_t xi,   c_t^2 = sigma_min^2 + sigma^2 t(1-t),
// together with the derived drift coefficient g(t) and fundamental-matrix
// factor phi(t,s) = c_t/c_s of the linear part.
struct BridgeSchedule {
    double sigma_min = 0.02;  // > 0; variance floor at the endpoints
    double sigma = 0.1;       // >= 0; mid-bridge spread

    double c2(double t) const { return sigma_min * sigma_min + sigma * sigma * t * (1.0 - t); }
    double c(double t) const { return std::sqrt(c2(t)); }

    // g(t) = sigma^2 (1-2t) / (2 c_t^2); the linear term is G_t = g(t) I.
    double g(double t) const { return sigma * sigma * (1.0 - 2.0 * t) / (2.0 * c2(t)); }

    double phi(double t, double s) const { return std::sqrt(c2(t) / c2(s)); }

    void validate() const {
        if (!(sigma_min > 0.0) || !std::isfinite(sigma_min))
            throw ConfigError("BridgeSchedule: sigma_min must be positive and finite");
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw ConfigError("BridgeSchedule: sigma must be nonnegative and finite");
    }
};

// Empirical rectified-flow path over the x2 endpoints of the bank, transported
// from a standard Gaussian base. sigma_min_rf = 0 gives the plain
// (x2 - z)/(1-t) field; sigma_min_rf > 0 the regularized variant with
// sigma_t = 1 - (1 - sigma_min_rf) t. Defined for t in [0,1) only. Kept for
// cross-checking the path-family algebra; forecasting uses the bridge.
struct RectifiedFlowPath {
    double sigma_min_rf = 0.0;  // >= 0

    double sigma_t(double t) const { return 1.0 - (1.0 - sigma_min_rf) * t; }

    void validate() const {
        if (!(sigma_min_rf >= 0.0) || !std::isfinite(sigma_min_rf))
            throw ConfigError("RectifiedFlowPath: sigma_min_rf must be nonnegative and finite");
    }
};

using PathFamily = std::variant<BridgeSchedule, RectifiedFlowPath>;

inline bool is_bridge(const PathFamily& family) {
    return std::holds_alternative<BridgeSchedule>(family);
}

inline const BridgeSchedule& bridge_of(const PathFamily& family) {
    if (!is_bridge(family))
        throw UnsupportedFamily("operation requires the Gaussian-bridge path family");
    return std::get<BridgeSchedule>(family);
}

}  // namespace flowcast
