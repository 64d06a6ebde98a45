#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "flowcast/types.hpp"

namespace flowcast {

// Flattens consecutive state pairs of every trajectory into one bank, in
// trajectory order then step order, so M = sum_n (T_n - 1).
TransitionBank extract_transitions(std::span<const Trajectory> trajectories);

// JSON bank file: {version, d, M, x1: [[...]], x2: [[...]], sources: [...]}.
// Finite values round-trip bit-exactly.
void save_bank(const TransitionBank& bank, const std::filesystem::path& path);
TransitionBank load_bank(const std::filesystem::path& path);

// Trajectory CSV: header "t,x0,...,x{d-1}", one file per trajectory, full
// precision. dt is recovered from the first time difference on load; the
// trajectory id defaults to the file stem.
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace flowcast
