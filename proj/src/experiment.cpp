#include "uvsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "uvsim/errors.hpp"
#include "uvsim/model.hpp"
#include "uvsim/prf.hpp"
#include "uvsim/simulator.hpp"
#include "uvsim/tuner.hpp"

namespace uvsim {

namespace {

using ojson = nlohmann::ordered_json;

std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Everything a subcommand needs, loaded and validated once up front.
struct Context {
  Config config;
  Model model;
  Dataset data;
  Splits splits;
  std::vector<VoltageErrorProfile> profiles;  // per-layer chip truth
  RunSettings settings;
};

Context load_context(const Config& config) {
  Context ctx;
  ctx.config = config;
  ctx.model = load_model(config.model);
  ctx.data = load_dataset(config.images, config.labels);
  ctx.splits =
      derive_splits(ctx.data.count, config.validation, config.test, config.seed);
  const int L = ctx.model.num_layers();
  if (config.profiles_source == "builtin") {
    ctx.profiles = layer_profiles(default_profile(), L, config.layer_spread);
  } else {
    ctx.profiles = load_profiles(config.profiles_source, L);
  }
  ctx.settings.array = array_config(config);
  ctx.settings.energy = energy_params(config);
  ctx.settings.seed = config.seed;
  ctx.settings.workers = config.workers;
  ctx.settings.batch = config.batch;
  return ctx;
}

ojson stats_json(const Context& ctx, const NetworkRun& run, int l) {
  const LayerStats& s = run.layers[l];
  ojson j;
  j["layer"] = s.layer;
  j["name"] = ctx.model.layers[l].name;
  j["r"] = s.r;
  j["p"] = s.p;
  j["executed"] = s.executed;
  j["errored"] = s.errored;
  j["dropped"] = s.dropped;
  j["skipped_zero"] = s.skipped_zero;
  j["padded"] = s.padded;
  j["error_cycles"] = s.error_cycles;
  j["recovery_cycles"] = s.recovery_cycles;
  j["cycles"] = s.cycles;
  j["energy"] = run.layer_energy[l];
  j["baseline_energy"] = run.layer_baseline[l];
  return j;
}

ojson run_json(const Context& ctx, const std::string& label, PolicyKind policy,
               bool zero_skip, const std::vector<double>& rs,
               const std::vector<double>& ps, const NetworkRun& run) {
  ojson j;
  j["label"] = label;
  j["policy"] = to_string(policy);
  j["zero_skip"] = zero_skip;
  j["r_per_layer"] = rs;
  j["p_per_layer"] = ps;
  ojson layers = ojson::array();
  for (int l = 0; l < ctx.model.num_layers(); ++l)
    layers.push_back(stats_json(ctx, run, l));
  j["layers"] = std::move(layers);
  j["images"] = run.total;
  j["correct"] = run.correct;
  j["accuracy"] = run.accuracy;
  j["total_cycles"] = run.total_cycles;
  j["total_energy"] = run.total_energy;
  j["baseline_energy"] = run.baseline_energy;
  j["savings"] = run.savings;
  return j;
}

std::vector<double> profile_probs(const Context& ctx,
                                  const std::vector<double>& rs) {
  std::vector<double> ps(rs.size());
  for (size_t l = 0; l < rs.size(); ++l)
    ps[l] = ctx.profiles[l].error_prob(rs[l]);
  return ps;
}

NetworkRun run_with(const Context& ctx, std::span<const int> indices,
                    PolicyKind policy, bool zero_skip,
                    const std::vector<double>& rs,
                    const std::vector<double>& ps) {
  RunSettings s = ctx.settings;
  s.array.policy.kind = policy;
  s.array.zero_skip = zero_skip;
  return run_network(ctx.model, ctx.data, indices, s, rs, ps);
}

// ---------------------------------------------------------------------
// Characterization and tuning building blocks shared by tune/select/compare.

std::vector<VoltageErrorProfile> characterize(const Context& ctx,
                                              bool zero_skip) {
  if (ctx.splits.validation.empty())
    throw config_error("characterization needs a non-empty validation split");
  const int L = ctx.model.num_layers();
  // Measurement always deploys the drop design: its executed MACs are plain
  // Bernoulli trials, so errors/executed is an unbiased rate estimate
  // (golden would sample nothing; TEP hides silent errors).
  auto measure = [&](double r) {
    std::vector<double> rs(L, r);
    NetworkRun run = run_with(ctx, ctx.splits.validation, PolicyKind::kTEDrop,
                              zero_skip, rs, profile_probs(ctx, rs));
    std::vector<std::pair<uint64_t, uint64_t>> out(L);
    for (int l = 0; l < L; ++l)
      out[l] = {run.layers[l].errored, run.layers[l].executed};
    return out;
  };
  return characterize_profiles(ctx.config.grid, L, measure);
}

std::vector<TunedLayer> tune_with(const Context& ctx, double p_total,
                                  const std::vector<VoltageErrorProfile>& prof) {
  TunerInput input;
  input.p_total = p_total;
  input.r_min = ctx.config.r_min;
  input.r_grid = ctx.config.grid;
  input.profiles = prof;
  return tune_per_layer(input);
}

std::vector<double> tuned_rs(const std::vector<TunedLayer>& tuned) {
  std::vector<double> rs(tuned.size());
  for (const TunedLayer& t : tuned) rs[t.layer] = t.r_star;
  return rs;
}

std::string tuned_csv(const std::vector<TunedLayer>& tuned, double p_total,
                      double r_min) {
  std::string out =
      "# p_total=" + sig6(p_total) + " r_min=" + sig6(r_min) + "\n";
  out += "layer,r_star,p\n";
  for (const TunedLayer& t : tuned)
    out += std::to_string(t.layer) + "," + sig6(t.r_star) + "," + sig6(t.p) +
           "\n";
  return out;
}

ojson tuned_json(const std::vector<TunedLayer>& tuned) {
  ojson rows = ojson::array();
  for (const TunedLayer& t : tuned)
    rows.push_back({{"layer", t.layer}, {"r_star", t.r_star}, {"p", t.p}});
  return rows;
}

// Array energy of the tuned drop design relative to the unprotected nominal
// baseline, by slot counting: every non-padding MAC slot runs at its
// layer's voltage. Zero-skip is deliberately ignored here (used where only
// the voltage assignment matters, e.g. across chip samples).
double analytic_savings(const Context& ctx, const std::vector<double>& rs) {
  double run = 0.0, base = 0.0;
  for (int l = 0; l < ctx.model.num_layers(); ++l) {
    const double slots =
        static_cast<double>(ctx.model.layers[l].weights.rows) *
        ctx.model.layers[l].weights.cols;
    run += slots * (1.0 + ctx.config.razor_overhead) * rs[l] * rs[l];
    base += slots;
  }
  return 1.0 - run / base;
}

// ---------------------------------------------------------------------
// Subcommands.

void cmd_golden(const Context& ctx, ojson& report) {
  const int L = ctx.model.num_layers();
  std::vector<double> rs(L, ctx.config.r), ps(L, 0.0);
  NetworkRun run =
      run_with(ctx, ctx.splits.test, PolicyKind::kGolden, ctx.config.zero_skip,
               rs, ps);
  report["runs"] = ojson::array({run_json(ctx, "golden", PolicyKind::kGolden,
                                          ctx.config.zero_skip, rs, ps, run)});
}

void cmd_sweep(const Context& ctx, ojson& report, std::string& sweep_csv) {
  const int L = ctx.model.num_layers();
  sweep_csv = "policy,r,p,accuracy,energy,savings\n";
  ojson runs = ojson::array();
  for (PolicyKind policy : {PolicyKind::kGolden, PolicyKind::kTEP,
                            PolicyKind::kTED, PolicyKind::kTEDrop}) {
    for (double r : ctx.config.grid) {
      std::vector<double> rs(L, r);
      std::vector<double> ps = policy == PolicyKind::kGolden
                                   ? std::vector<double>(L, 0.0)
                                   : profile_probs(ctx, rs);
      NetworkRun run =
          run_with(ctx, ctx.splits.test, policy, ctx.config.zero_skip, rs, ps);
      uint64_t errors = 0, executed = 0;
      for (const LayerStats& s : run.layers) {
        errors += s.errored;
        executed += s.executed;
      }
      const double p_measured =
          executed == 0 ? 0.0 : static_cast<double>(errors) / executed;
      sweep_csv += std::string(to_string(policy)) + "," + sig6(r) + "," +
                   sig6(p_measured) + "," + sig6(run.accuracy) + "," +
                   sig6(run.total_energy) + "," + sig6(run.savings) + "\n";
      std::string label =
          std::string(to_string(policy)) + " r=" + sig6(r);
      runs.push_back(run_json(ctx, label, policy, ctx.config.zero_skip, rs, ps, run));
    }
  }
  report["runs"] = std::move(runs);

  // Analytic global-TED curve on a fine grid (steady state, m MACs/cycle).
  const uint64_t m = ctx.config.ted_m
                         ? ctx.config.ted_m
                         : static_cast<uint64_t>(ctx.config.n) * ctx.config.n;
  const VoltageErrorProfile base_profile =
      ctx.config.profiles_source == "builtin" ? default_profile()
                                              : ctx.profiles.front();
  const double lo = *std::min_element(ctx.config.grid.begin(),
                                      ctx.config.grid.end());
  std::vector<double> fine;
  for (int i = 0;; ++i) {
    const double r = lo + i * ctx.config.sweep_step;
    if (r > 1.0 + 1e-12) break;
    fine.push_back(std::min(r, 1.0));
  }
  ojson curve = ojson::array();
  for (double r : fine) {
    const double p = base_profile.error_prob(r);
    const double rel = ted_relative_energy(p, r, m, ctx.config.ted_R,
                                           energy_params(ctx.config));
    curve.push_back(
        {{"r", r}, {"p", p}, {"relative_energy", rel}, {"savings", 1.0 - rel}});
  }
  report["ted_curve"] = {{"m", m},
                         {"R", ctx.config.ted_R},
                         {"profile",
                          ctx.config.profiles_source == "builtin"
                              ? "builtin-base"
                              : "layer0"},
                         {"rows", std::move(curve)}};
}

void cmd_tune(const Context& ctx, ojson& report,
              std::vector<std::pair<std::string, std::string>>& files) {
  const PolicyKind deploy = array_config(ctx.config).policy.kind;
  auto measured = characterize(ctx, ctx.config.zero_skip);
  ojson measured_json = ojson::array();
  for (const auto& prof : measured) {
    ojson rows = ojson::array();
    for (const ProfilePoint& row : prof.rows())
      rows.push_back({{"r", row.r}, {"p", row.p}});
    measured_json.push_back(std::move(rows));
  }
  report["measured_profiles"] = std::move(measured_json);

  ojson runs = ojson::array();
  const auto& budgets = ctx.config.p_total_grid;
  for (size_t bi = 0; bi < budgets.size(); ++bi) {
    const double budget = budgets[bi];
    auto tuned = tune_with(ctx, budget, measured);
    const auto rs = tuned_rs(tuned);
    NetworkRun run = run_with(ctx, ctx.splits.test, deploy,
                              ctx.config.zero_skip, rs, profile_probs(ctx, rs));
    ojson entry = run_json(ctx, "tuned p_total=" + sig6(budget), deploy,
                           ctx.config.zero_skip, rs, profile_probs(ctx, rs),
                           run);
    entry["p_total"] = budget;
    entry["tuned"] = tuned_json(tuned);
    runs.push_back(std::move(entry));

    const std::string name = budgets.size() == 1
                                 ? "tuned.csv"
                                 : "tuned_" + std::to_string(bi) + ".csv";
    files.emplace_back(name, tuned_csv(tuned, budget, ctx.config.r_min));
  }
  report["runs"] = std::move(runs);
}

void cmd_select(const Context& ctx, ojson& report,
                std::vector<std::pair<std::string, std::string>>& files) {
  if (ctx.splits.validation.empty())
    throw config_error("select needs a non-empty validation split");
  const int L = ctx.model.num_layers();
  const PolicyKind deploy = array_config(ctx.config).policy.kind;

  std::vector<double> nominal_rs(L, 1.0), zero_ps(L, 0.0);
  NetworkRun golden_val = run_with(ctx, ctx.splits.validation,
                                   PolicyKind::kGolden, ctx.config.zero_skip,
                                   nominal_rs, zero_ps);
  report["golden_validation_accuracy"] = golden_val.accuracy;

  auto measured = characterize(ctx, ctx.config.zero_skip);

  ojson candidates = ojson::array();
  int best = -1;
  double best_energy = 0.0;
  std::vector<std::vector<TunedLayer>> all_tuned;
  std::vector<NetworkRun> val_runs;
  for (double budget : ctx.config.p_total_grid) {
    auto tuned = tune_with(ctx, budget, measured);
    const auto rs = tuned_rs(tuned);
    NetworkRun val = run_with(ctx, ctx.splits.validation, deploy,
                              ctx.config.zero_skip, rs, profile_probs(ctx, rs));
    const double loss = golden_val.accuracy - val.accuracy;
    const bool eligible = loss < ctx.config.max_accuracy_loss;
    ojson entry;
    entry["p_total"] = budget;
    entry["tuned"] = tuned_json(tuned);
    entry["validation_accuracy"] = val.accuracy;
    entry["accuracy_loss"] = loss;
    entry["energy"] = val.total_energy;
    entry["savings"] = val.savings;
    entry["eligible"] = eligible;
    candidates.push_back(std::move(entry));
    all_tuned.push_back(std::move(tuned));
    val_runs.push_back(std::move(val));
    if (eligible) {
      const int idx = static_cast<int>(all_tuned.size()) - 1;
      if (best < 0 || val_runs[idx].total_energy < best_energy) {
        best = idx;
        best_energy = val_runs[idx].total_energy;
      }
    }
  }
  report["candidates"] = std::move(candidates);

  if (best < 0) {
    // Nothing met the accuracy bar: report the nominal design honestly.
    report["selected"] = nullptr;
    NetworkRun test = run_with(ctx, ctx.splits.test, PolicyKind::kGolden,
                               ctx.config.zero_skip, nominal_rs, zero_ps);
    report["runs"] = ojson::array(
        {run_json(ctx, "no eligible design; nominal", PolicyKind::kGolden,
                  ctx.config.zero_skip, nominal_rs, zero_ps, test)});
    return;
  }

  const auto& tuned = all_tuned[best];
  const auto rs = tuned_rs(tuned);
  const double budget = ctx.config.p_total_grid[best];
  NetworkRun test = run_with(ctx, ctx.splits.test, deploy,
                             ctx.config.zero_skip, rs, profile_probs(ctx, rs));
  ojson sel;
  sel["p_total"] = budget;
  sel["tuned"] = tuned_json(tuned);
  sel["validation_accuracy"] = val_runs[best].accuracy;
  report["selected"] = std::move(sel);
  report["runs"] = ojson::array(
      {run_json(ctx, "selected p_total=" + sig6(budget), deploy,
                ctx.config.zero_skip, rs, profile_probs(ctx, rs), test)});
  files.emplace_back("tuned.csv", tuned_csv(tuned, budget, ctx.config.r_min));
}

void cmd_variation(const Context& ctx, ojson& report) {
  const int L = ctx.model.num_layers();
  const PolicyKind deploy = array_config(ctx.config).policy.kind;

  auto nominal_tuned = tune_with(ctx, ctx.config.p_total, ctx.profiles);
  const auto nominal_rs = tuned_rs(nominal_tuned);
  const double nominal_savings = analytic_savings(ctx, nominal_rs);
  report["nominal"] = {{"tuned", tuned_json(nominal_tuned)},
                       {"savings", nominal_savings}};

  ojson chips = ojson::array();
  double sum = 0.0, sum_sq = 0.0;
  for (int chip = 0; chip < ctx.config.chips; ++chip) {
    const uint64_t chip_seed = hash_tuple(ctx.config.seed, chip);
    const ChipSample sample = draw_chip_sample(chip_seed, ctx.config.sigma);
    std::vector<VoltageErrorProfile> shifted;
    shifted.reserve(L);
    for (const auto& prof : ctx.profiles)
      shifted.push_back(
          apply_process_variation(prof, ctx.config.sigma, chip_seed));
    // Each chip re-tunes itself through its online characterization; the
    // study idealizes that as tuning on the chip's true shifted curves.
    auto tuned = tune_with(ctx, ctx.config.p_total, shifted);
    const auto rs = tuned_rs(tuned);
    const double chip_savings = analytic_savings(ctx, rs);
    sum += chip_savings;
    sum_sq += chip_savings * chip_savings;
    ojson entry;
    entry["chip"] = chip;
    entry["factor"] = sample.factor;
    entry["tuned"] = tuned_json(tuned);
    entry["savings"] = chip_savings;
    if (ctx.config.variation_accuracy) {
      std::vector<double> ps(L);
      for (int l = 0; l < L; ++l) ps[l] = shifted[l].error_prob(rs[l]);
      NetworkRun run =
          run_with(ctx, ctx.splits.test, deploy, ctx.config.zero_skip, rs, ps);
      entry["accuracy"] = run.accuracy;
    }
    chips.push_back(std::move(entry));
  }
  const double mean = sum / ctx.config.chips;
  const double var = std::max(0.0, sum_sq / ctx.config.chips - mean * mean);
  report["chips"] = std::move(chips);
  report["mean_savings"] = mean;
  report["stddev_savings"] = std::sqrt(var);
  report["mean_minus_nominal"] = mean - nominal_savings;
}

void cmd_compare(const Context& ctx, ojson& report) {
  const int L = ctx.model.num_layers();
  const PolicyKind deploy = array_config(ctx.config).policy.kind;
  std::vector<double> nominal_rs(L, 1.0), zero_ps(L, 0.0);

  // One design point for the whole comparison: the per-layer voltages are a
  // property of the deployed chip, so the skip arm reuses them rather than
  // re-tuning with gating enabled. Selection mirrors `select`: lowest-energy
  // budget meeting the validation accuracy bar, measured without skipping.
  auto select_dynamic = [&]() -> std::pair<std::vector<double>, ojson> {
    Context local = ctx;
    local.config.zero_skip = false;
    NetworkRun golden_val =
        run_with(local, ctx.splits.validation, PolicyKind::kGolden, false,
                 nominal_rs, zero_ps);
    auto measured = characterize(local, false);
    bool found = false;
    double best_energy = 0.0;
    std::vector<double> best_rs(L, 1.0);
    ojson best_tuned = ojson::array();
    for (double budget : ctx.config.p_total_grid) {
      auto tuned = tune_with(local, budget, measured);
      const auto rs = tuned_rs(tuned);
      NetworkRun val = run_with(local, ctx.splits.validation, deploy, false,
                                rs, profile_probs(local, rs));
      const double loss = golden_val.accuracy - val.accuracy;
      if (loss < ctx.config.max_accuracy_loss &&
          (!found || val.total_energy < best_energy)) {
        found = true;
        best_energy = val.total_energy;
        best_rs = rs;
        best_tuned = tuned_json(tuned);
      }
    }
    return {best_rs, best_tuned};
  };

  ojson runs = ojson::array();
  auto eval_arm = [&](const std::string& label, PolicyKind policy,
                      bool zero_skip, const std::vector<double>& rs) {
    std::vector<double> ps = policy == PolicyKind::kGolden
                                 ? zero_ps
                                 : profile_probs(ctx, rs);
    NetworkRun run = run_with(ctx, ctx.splits.test, policy, zero_skip, rs, ps);
    runs.push_back(run_json(ctx, label, policy, zero_skip, rs, ps, run));
    return run;
  };

  auto [rs_t, tuned] = select_dynamic();
  NetworkRun base = eval_arm("base", PolicyKind::kGolden, false, nominal_rs);
  NetworkRun thvolt = eval_arm("tedrop-dynamic", deploy, false, rs_t);
  NetworkRun zskip = eval_arm("zero-skip", PolicyKind::kGolden, true, nominal_rs);
  NetworkRun both = eval_arm("zero-skip+tedrop-dynamic", deploy, true, rs_t);

  report["runs"] = std::move(runs);
  report["tuned"] = std::move(tuned);
  const double s_ba = savings(thvolt.total_energy, base.total_energy);
  const double s_dc = savings(both.total_energy, zskip.total_energy);
  const double s_da = savings(both.total_energy, base.total_energy);
  report["synergy"] = {{"savings_dynamic_vs_base", s_ba},
                       {"savings_combined_vs_zero_skip", s_dc},
                       {"savings_combined_vs_base", s_da},
                       {"difference", s_dc - s_ba}};
}

}  // namespace

const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> commands = {
      "golden", "sweep", "tune", "select", "variation", "compare"};
  return commands;
}

ojson run_experiment(const std::string& command, const Config& config) {
  validate(config);
  if (std::find(experiment_commands().begin(), experiment_commands().end(),
                command) == experiment_commands().end())
    throw config_error("unknown command '" + command + "'");

  Context ctx = load_context(config);
  ojson report;
  report["command"] = command;
  report["baseline"] = "unprotected-nominal";
  report["seed"] = config.seed;
  report["model"] = {{"name", ctx.model.name},
                     {"layers", ctx.model.num_layers()}};
  report["config"] = config_to_json(config, false);

  std::string sweep_csv;
  std::vector<std::pair<std::string, std::string>> files;
  if (command == "golden") {
    cmd_golden(ctx, report);
  } else if (command == "sweep") {
    cmd_sweep(ctx, report, sweep_csv);
  } else if (command == "tune") {
    cmd_tune(ctx, report, files);
  } else if (command == "select") {
    cmd_select(ctx, report, files);
  } else if (command == "variation") {
    cmd_variation(ctx, report);
  } else {
    cmd_compare(ctx, report);
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec)
    throw data_error("cannot create output directory '" + config.output_dir +
                     "': " + ec.message());
  auto write_file = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(config.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << content;
  };
  write_file("report.json", report.dump(2) + "\n");
  if (!sweep_csv.empty()) write_file("sweep.csv", sweep_csv);
  for (const auto& [name, content] : files) write_file(name, content);
  return report;
}

}  // namespace uvsim
