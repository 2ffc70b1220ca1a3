// config.hpp: experiment configuration, its JSON form, and CLI overrides.
//
// One JSON document configures every subcommand. Each field is also
// overridable on the command line by its dotted path, e.g.
// --voltage.r_min 0.7  or  --array.zero_skip=true.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "uvsim/dataflow.hpp"
#include "uvsim/energy.hpp"

namespace uvsim {

struct Config {
  // model / dataset
  std::string model = "data/mnist/model.json";
  std::string images = "data/mnist/t2048-images-idx3-ubyte";
  std::string labels = "data/mnist/t2048-labels-idx1-ubyte";
  // array
  int n = 64;
  bool zero_skip = false;
  int batch = 256;
  // policy
  std::string policy = "tedrop";
  int ted_R = 1;
  // voltage
  std::vector<double> grid;  // rails, strictly descending; default 1.00..0.65/0.05
  double r = 1.0;            // flat ratio for single runs
  double r_min = 0.65;
  double p_total = 0.05;
  std::vector<double> p_total_grid;  // budgets for tune/select; default log-spaced
  double sweep_step = 0.01;          // analytic TED curve resolution
  // profiles
  std::string profiles_source = "builtin";  // "builtin" or a profile file path
  double layer_spread = 10.0;
  // energy
  double e_mac_nominal = 1.0;
  double razor_overhead = 0.0335;
  double zero_skip_cost = 0.0;
  uint64_t ted_m = 0;  // MACs per cycle for the analytic TED curve; 0 = n*n
  // variation
  int chips = 50;
  double sigma = 0.05;
  bool variation_accuracy = false;  // also simulate accuracy per chip
  // select
  double max_accuracy_loss = 0.01;
  // splits
  int validation = 256;
  int test = 1536;
  // run control
  uint64_t seed = 1;
  int workers = 0;  // 0 = hardware concurrency; excluded from report echo
  std::string output_dir = "out";
};

Config default_config();

// Builds a Config from a JSON document, starting from defaults. Unknown
// keys are rejected (config_error) so typos cannot silently revert fields.
Config config_from_json(const nlohmann::ordered_json& j);

// Serializes a Config. include_runtime=false omits workers and output_dir,
// the form embedded in reports (neither affects results).
nlohmann::ordered_json config_to_json(const Config& config,
                                      bool include_runtime);

// Applies one dotted-path override, e.g. ("voltage.r_min", "0.7"). Values
// parse as JSON when possible, else as strings.
void apply_override(nlohmann::ordered_json& j, const std::string& key,
                    const std::string& value);

void validate(const Config& config);

ArrayConfig array_config(const Config& config);
EnergyParams energy_params(const Config& config);

}  // namespace uvsim
