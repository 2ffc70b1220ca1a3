#include "uvsim/config.hpp"

#include <algorithm>
#include <set>

#include "uvsim/errors.hpp"
#include "uvsim/policies.hpp"

namespace uvsim {

namespace {

using ojson = nlohmann::ordered_json;

template <typename T>
void take(const ojson& section, const char* key, T& out,
          std::set<std::string>& seen, const std::string& where) {
  seen.insert(key);
  if (!section.contains(key)) return;
  try {
    section.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config: bad value for " + where + "." + key + ": " +
                       e.what());
  }
}

void reject_unknown(const ojson& section, const std::set<std::string>& seen,
                    const std::string& where) {
  for (const auto& item : section.items())
    if (!seen.count(item.key()))
      throw config_error("config: unknown key '" + where + "." + item.key() +
                         "'");
}

}  // namespace

Config default_config() {
  Config c;
  c.grid = default_rail_grid();
  c.p_total_grid = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0};
  return c;
}

Config config_from_json(const ojson& j) {
  Config c = default_config();
  std::set<std::string> top;

  top.insert("model");
  if (j.contains("model")) j.at("model").get_to(c.model);

  if (j.contains("dataset")) {
    const auto& s = j.at("dataset");
    std::set<std::string> seen;
    take(s, "images", c.images, seen, "dataset");
    take(s, "labels", c.labels, seen, "dataset");
    reject_unknown(s, seen, "dataset");
  }
  top.insert("dataset");

  if (j.contains("array")) {
    const auto& s = j.at("array");
    std::set<std::string> seen;
    take(s, "n", c.n, seen, "array");
    take(s, "zero_skip", c.zero_skip, seen, "array");
    take(s, "batch", c.batch, seen, "array");
    reject_unknown(s, seen, "array");
  }
  top.insert("array");

  if (j.contains("policy")) {
    const auto& s = j.at("policy");
    std::set<std::string> seen;
    take(s, "kind", c.policy, seen, "policy");
    take(s, "R", c.ted_R, seen, "policy");
    reject_unknown(s, seen, "policy");
  }
  top.insert("policy");

  if (j.contains("voltage")) {
    const auto& s = j.at("voltage");
    std::set<std::string> seen;
    take(s, "grid", c.grid, seen, "voltage");
    take(s, "r", c.r, seen, "voltage");
    take(s, "r_min", c.r_min, seen, "voltage");
    take(s, "p_total", c.p_total, seen, "voltage");
    take(s, "p_total_grid", c.p_total_grid, seen, "voltage");
    take(s, "sweep_step", c.sweep_step, seen, "voltage");
    reject_unknown(s, seen, "voltage");
  }
  top.insert("voltage");

  if (j.contains("profiles")) {
    const auto& s = j.at("profiles");
    std::set<std::string> seen;
    take(s, "source", c.profiles_source, seen, "profiles");
    take(s, "layer_spread", c.layer_spread, seen, "profiles");
    reject_unknown(s, seen, "profiles");
  }
  top.insert("profiles");

  if (j.contains("energy")) {
    const auto& s = j.at("energy");
    std::set<std::string> seen;
    take(s, "e_mac_nominal", c.e_mac_nominal, seen, "energy");
    take(s, "razor_overhead", c.razor_overhead, seen, "energy");
    take(s, "zero_skip_cost", c.zero_skip_cost, seen, "energy");
    take(s, "ted_m", c.ted_m, seen, "energy");
    reject_unknown(s, seen, "energy");
  }
  top.insert("energy");

  if (j.contains("variation")) {
    const auto& s = j.at("variation");
    std::set<std::string> seen;
    take(s, "chips", c.chips, seen, "variation");
    take(s, "sigma", c.sigma, seen, "variation");
    take(s, "accuracy", c.variation_accuracy, seen, "variation");
    reject_unknown(s, seen, "variation");
  }
  top.insert("variation");

  if (j.contains("select")) {
    const auto& s = j.at("select");
    std::set<std::string> seen;
    take(s, "max_accuracy_loss", c.max_accuracy_loss, seen, "select");
    reject_unknown(s, seen, "select");
  }
  top.insert("select");

  if (j.contains("splits")) {
    const auto& s = j.at("splits");
    std::set<std::string> seen;
    take(s, "validation", c.validation, seen, "splits");
    take(s, "test", c.test, seen, "splits");
    reject_unknown(s, seen, "splits");
  }
  top.insert("splits");

  top.insert("seed");
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  top.insert("workers");
  if (j.contains("workers")) j.at("workers").get_to(c.workers);
  top.insert("output_dir");
  if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);

  for (const auto& item : j.items())
    if (!top.count(item.key()))
      throw config_error("config: unknown key '" + item.key() + "'");

  validate(c);
  return c;
}

ojson config_to_json(const Config& c, bool include_runtime) {
  ojson j;
  j["model"] = c.model;
  j["dataset"] = {{"images", c.images}, {"labels", c.labels}};
  j["array"] = {{"n", c.n}, {"zero_skip", c.zero_skip}, {"batch", c.batch}};
  j["policy"] = {{"kind", c.policy}, {"R", c.ted_R}};
  j["voltage"] = {{"grid", c.grid},
                  {"r", c.r},
                  {"r_min", c.r_min},
                  {"p_total", c.p_total},
                  {"p_total_grid", c.p_total_grid},
                  {"sweep_step", c.sweep_step}};
  j["profiles"] = {{"source", c.profiles_source},
                   {"layer_spread", c.layer_spread}};
  j["energy"] = {{"e_mac_nominal", c.e_mac_nominal},
                 {"razor_overhead", c.razor_overhead},
                 {"zero_skip_cost", c.zero_skip_cost},
                 {"ted_m", c.ted_m}};
  j["variation"] = {{"chips", c.chips},
                    {"sigma", c.sigma},
                    {"accuracy", c.variation_accuracy}};
  j["select"] = {{"max_accuracy_loss", c.max_accuracy_loss}};
  j["splits"] = {{"validation", c.validation}, {"test", c.test}};
  j["seed"] = c.seed;
  if (include_runtime) {
    j["workers"] = c.workers;
    j["output_dir"] = c.output_dir;
  }
  return j;
}

void apply_override(ojson& j, const std::string& key, const std::string& value) {
  if (key.empty()) throw config_error("override: empty key");
  std::string pointer = "/";
  for (char ch : key) pointer += ch == '.' ? '/' : ch;
  ojson parsed;
  try {
    parsed = ojson::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;  // not valid JSON: treat as a string (e.g. file paths)
  }
  try {
    j[ojson::json_pointer(pointer)] = parsed;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("override: cannot set '" + key + "': " + e.what());
  }
}

void validate(const Config& c) {
  policy_kind_from_string(c.policy);  // throws on unknown
  if (c.n < 1) throw config_error("config: array.n must be >= 1");
  if (c.batch < 1) throw config_error("config: array.batch must be >= 1");
  if (c.ted_R < 1) throw config_error("config: policy.R must be >= 1");
  if (c.grid.empty()) throw config_error("config: voltage.grid is empty");
  for (size_t i = 0; i < c.grid.size(); ++i) {
    if (!(c.grid[i] > 0.0 && c.grid[i] <= 1.0))
      throw config_error("config: voltage.grid entries must lie in (0, 1]");
    if (i > 0 && !(c.grid[i] < c.grid[i - 1]))
      throw config_error("config: voltage.grid must be strictly descending");
  }
  if (!(c.r > 0.0 && c.r <= 1.0))
    throw config_error("config: voltage.r must lie in (0, 1]");
  if (std::find(c.grid.begin(), c.grid.end(), c.r_min) == c.grid.end())
    throw config_error("config: voltage.r_min must be a grid entry");
  if (c.p_total < 0.0) throw config_error("config: voltage.p_total must be >= 0");
  if (c.p_total_grid.empty())
    throw config_error("config: voltage.p_total_grid is empty");
  for (double b : c.p_total_grid)
    if (b < 0.0) throw config_error("config: p_total_grid entries must be >= 0");
  if (!(c.sweep_step > 0.0))
    throw config_error("config: voltage.sweep_step must be positive");
  if (!(c.layer_spread >= 1.0))
    throw config_error("config: profiles.layer_spread must be >= 1");
  EnergyParams e{c.e_mac_nominal, c.razor_overhead, c.zero_skip_cost};
  validate(e);
  if (c.chips < 1) throw config_error("config: variation.chips must be >= 1");
  if (c.sigma < 0.0) throw config_error("config: variation.sigma must be >= 0");
  if (c.max_accuracy_loss < 0.0)
    throw config_error("config: select.max_accuracy_loss must be >= 0");
  if (c.validation < 0 || c.test < 1)
    throw config_error("config: splits must be non-negative (test >= 1)");
}

ArrayConfig array_config(const Config& c) {
  ArrayConfig a;
  a.n = c.n;
  a.zero_skip = c.zero_skip;
  a.policy.kind = policy_kind_from_string(c.policy);
  a.policy.ted_recovery_cycles = c.ted_R;
  return a;
}

EnergyParams energy_params(const Config& c) {
  return EnergyParams{c.e_mac_nominal, c.razor_overhead, c.zero_skip_cost};
}

}  // namespace uvsim
