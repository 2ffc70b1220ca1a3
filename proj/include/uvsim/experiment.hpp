// experiment.hpp: subcommand orchestration and report emission.
//
// Each subcommand loads the model, dataset, and error profiles named by the
// config, runs its experiment, writes report.json (plus sweep.csv or
// tuned.csv where applicable) into config.output_dir, and returns the full
// report document. Reports embed the config (minus fields that cannot
// affect results), so identical config+seed reproduce byte-identical
// reports at any worker count.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "uvsim/config.hpp"

namespace uvsim {

// "golden", "sweep", "tune", "select", "variation", "compare".
const std::vector<std::string>& experiment_commands();

nlohmann::ordered_json run_experiment(const std::string& command,
                                      const Config& config);

}  // namespace uvsim
