#pragma once

#include "flowcast/run_config.hpp"

namespace flowcast {

// CLI entry points. Each command writes its outputs (plus the resolved config
// as config_<command>.json) into cfg.out_dir and returns a process exit code:
// 0 on success, 1 if any requested unit failed.
int cmd_generate(const RunConfig& cfg);
int cmd_forecast(const RunConfig& cfg);
int cmd_gridsearch(const RunConfig& cfg);
int cmd_ablate(const RunConfig& cfg);
int cmd_diagnose(const RunConfig& cfg);

}  // namespace flowcast
