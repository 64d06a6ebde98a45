#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowcast/errors.hpp"

namespace flowcast {

// Dense row-major (steps x dim) array of states. The workhorse container for
// trajectories, forecasts and point clouds.
struct StateSeries {
    std::size_t steps = 0;
    int dim = 0;
    std::vector<double> data;  // steps * dim

    StateSeries() = default;
    StateSeries(std::size_t steps_, int dim_)
        : steps(steps_), dim(dim_), data(steps_ * static_cast<std::size_t>(dim_), 0.0) {}

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    std::span<double> row(std::size_t i) {
        return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

// One observed realization sampled at a fixed interval dt (system time units).
struct Trajectory {
    std::string id;
    double dt = 0.0;
    StateSeries states;

    // Enforces T >= 2, d >= 1, dt > 0 and finite entries.
    void validate() const;
};

struct TransitionSource {
    std::string trajectory_id;
    std::size_t step = 0;  // index tau of the pair (x_tau, x_tau+1)
};

struct Transition {
    std::vector<double> x1;
    std::vector<double> x2;
    TransitionSource source;
};

// The memory bank of one-step transitions: the whole "model". Immutable after
// construction and safe to share read-only between threads.
//
// Endpoints are stored as flat row-major arrays so the velocity-field inner
// loop streams them contiguously.
class TransitionBank {
  public:
    TransitionBank(int dim, std::vector<double> x1, std::vector<double> x2,
                   std::vector<TransitionSource> sources);

    int dim() const { return dim_; }
    std::size_t size() const { return size_; }

    std::span<const double> x1(std::size_t j) const {
        return {x1_.data() + j * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    std::span<const double> x2(std::size_t j) const {
        return {x2_.data() + j * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    const std::vector<double>& x1_flat() const { return x1_; }
    const std::vector<double>& x2_flat() const { return x2_; }
    const std::vector<TransitionSource>& sources() const { return sources_; }

    // Per-dimension standard deviation over all stored endpoint states
    // (2M rows). Constant coordinates are recorded as 0 and flagged.
    const std::vector<double>& scale() const { return scale_; }
    bool has_constant_dim() const { return has_constant_dim_; }

    // Mean of the nonzero scale entries; falls back to 1 if every coordinate
    // is constant. This is the length unit for default bandwidths.
    double mean_scale() const { return mean_scale_; }

    // Component-wise bounding box over all stored states.
    const std::vector<double>& box_lo() const { return box_lo_; }
    const std::vector<double>& box_hi() const { return box_hi_; }

    // FNV-1a over the numeric payload; identifies the bank in run metadata.
    std::uint64_t content_hash() const;

  private:
    int dim_ = 0;
    std::size_t size_ = 0;
    std::vector<double> x1_, x2_;  // M * d each
    std::vector<TransitionSource> sources_;
    std::vector<double> scale_;
    std::vector<double> box_lo_, box_hi_;
    double mean_scale_ = 1.0;
    bool has_constant_dim_ = false;
};

}  // namespace flowcast
