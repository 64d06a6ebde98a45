#include "flowcast/types.hpp"

#include <cmath>
#include <cstring>

namespace flowcast {

void Trajectory::validate() const {
    if (states.steps < 2) throw ConfigError("Trajectory '" + id + "': needs at least 2 states");
    if (states.dim < 1) throw ConfigError("Trajectory '" + id + "': dimension must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ConfigError("Trajectory '" + id + "': dt must be positive and finite");
    if (states.data.size() != states.steps * static_cast<std::size_t>(states.dim))
        throw DimensionMismatch("Trajectory '" + id + "': ragged state storage");
    for (double v : states.data)
        if (!std::isfinite(v)) throw NonFiniteInput("Trajectory '" + id + "': non-finite state entry");
}

TransitionBank::TransitionBank(int dim, std::vector<double> x1, std::vector<double> x2,
                               std::vector<TransitionSource> sources)
    : dim_(dim), x1_(std::move(x1)), x2_(std::move(x2)), sources_(std::move(sources)) {
    if (dim_ < 1) throw DimensionMismatch("TransitionBank: dimension must be >= 1");
    const std::size_t d = static_cast<std::size_t>(dim_);
    if (x1_.size() != x2_.size() || x1_.size() % d != 0)
        throw DimensionMismatch("TransitionBank: endpoint storage size mismatch");
    size_ = x1_.size() / d;
    if (size_ == 0) throw NoData("TransitionBank: empty transition set");
    if (!sources_.empty() && sources_.size() != size_)
        throw DimensionMismatch("TransitionBank: source annotation count mismatch");
    for (double v : x1_)
        if (!std::isfinite(v)) throw NonFiniteInput("TransitionBank: non-finite x1 entry");
    for (double v : x2_)
        if (!std::isfinite(v)) throw NonFiniteInput("TransitionBank: non-finite x2 entry");

    // Scale and bounding box over the 2M stored states.
    scale_.assign(d, 0.0);
    box_lo_.assign(d, 0.0);
    box_hi_.assign(d, 0.0);
    const double n = 2.0 * static_cast<double>(size_);
    for (std::size_t i = 0; i < d; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < size_; ++j) mean += x1_[j * d + i] + x2_[j * d + i];
        mean /= n;
        double var = 0.0;
        double lo = x1_[i], hi = x1_[i];
        for (std::size_t j = 0; j < size_; ++j) {
            for (const double v : {x1_[j * d + i], x2_[j * d + i]}) {
                var += (v - mean) * (v - mean);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        scale_[i] = std::sqrt(var / n);
        box_lo_[i] = lo;
        box_hi_[i] = hi;
    }

    double sum = 0.0;
    int nonzero = 0;
    for (double s : scale_) {
        if (s > 0.0) {
            sum += s;
            ++nonzero;
        } else {
            has_constant_dim_ = true;
        }
    }
    mean_scale_ = nonzero > 0 ? sum / nonzero : 1.0;
}

std::uint64_t TransitionBank::content_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto absorb = [&h](const void* p, std::size_t len) {
        const unsigned char* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ull;
        }
    };
    const std::uint64_t d64 = static_cast<std::uint64_t>(dim_);
    const std::uint64_t m64 = static_cast<std::uint64_t>(size_);
    absorb(&d64, sizeof d64);
    absorb(&m64, sizeof m64);
    absorb(x1_.data(), x1_.size() * sizeof(double));
    absorb(x2_.data(), x2_.size() * sizeof(double));
    return h;
}

}  // namespace flowcast
