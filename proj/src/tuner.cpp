#include "uvsim/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uvsim/errors.hpp"

namespace uvsim {

void validate(const TunerInput& input) {
  if (input.p_total < 0.0) throw config_error("tuner: p_total must be >= 0");
  if (input.r_grid.empty()) throw config_error("tuner: empty voltage grid");
  for (size_t i = 1; i < input.r_grid.size(); ++i)
    if (!(input.r_grid[i] < input.r_grid[i - 1]))
      throw config_error("tuner: voltage grid must be strictly descending");
  if (std::find(input.r_grid.begin(), input.r_grid.end(), input.r_min) ==
      input.r_grid.end())
    throw config_error("tuner: r_min must be a grid entry");
  if (input.profiles.empty()) throw config_error("tuner: no layer profiles");
}

std::vector<TunedLayer> tune_per_layer(const TunerInput& input) {
  validate(input);
  const int L = static_cast<int>(input.profiles.size());

  // Ascending p_i(r_min), stable in layer index, so low-error layers get
  // first pick and cannot strand budget that high-error layers need.
  std::vector<int> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> p_at_rmin(L);
  for (int i = 0; i < L; ++i)
    p_at_rmin[i] = input.profiles[i].error_prob(input.r_min);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return p_at_rmin[a] < p_at_rmin[b];
  });

  std::vector<TunedLayer> tuned(L);
  double p_remain = input.p_total;
  for (int step = 0; step < L; ++step) {
    const int layer = order[step];
    const VoltageErrorProfile& profile = input.profiles[layer];
    const double p_target = p_remain / (L - step);

    // Rails ascending (grid is descending): deepest underscaling that fits.
    bool found = false;
    double r_star = 1.0, p_used = 0.0;
    for (auto it = input.r_grid.rbegin(); it != input.r_grid.rend(); ++it) {
      const double r = *it;
      if (r < input.r_min) continue;
      const double p_here = profile.error_prob(r);
      if (p_here <= p_target) {
        r_star = r;
        p_used = p_here;
        found = true;
        break;
      }
    }
    TunedLayer& out = tuned[layer];
    out.layer = layer;
    if (found) {
      out.r_star = r_star;
      out.p = p_used;
      p_remain -= p_used;
    } else {
      out.r_star = 1.0;
      out.p = profile.error_prob(1.0);
      // No rail fits: run at nominal and consume no budget.
    }
  }
  return tuned;
}

ErrorCounters track_errors(std::span<const ChainTrace> traces, int n) {
  if (n < 1) throw config_error("track_errors: n must be >= 1");
  ErrorCounters counters;
  counters.per_column.assign(n, 0);
  for (const ChainTrace& trace : traces) {
    const int column = trace.row % n;
    for (const MacEvent& event : trace.events)
      if (event.errored) ++counters.per_column[column];
  }
  for (uint64_t c : counters.per_column) counters.layer_total += c;
  counters.batch_total = counters.layer_total;
  return counters;
}

ErrorCounters counters_from_stats(const LayerStats& stats) {
  ErrorCounters counters;
  counters.per_column = stats.column_errors;
  for (uint64_t c : counters.per_column) counters.layer_total += c;
  counters.batch_total = counters.layer_total;
  require_invariant(counters.layer_total == stats.errored,
                    "counters_from_stats: column reduction disagrees with "
                    "flat error count");
  return counters;
}

std::vector<VoltageErrorProfile> characterize_profiles(
    const std::vector<double>& r_grid, int num_layers,
    const MeasureFn& measure) {
  if (num_layers < 1)
    throw config_error("characterize_profiles: need at least one layer");
  if (r_grid.empty()) throw config_error("characterize_profiles: empty grid");
  if (!measure) throw config_error("characterize_profiles: no measure callback");

  std::vector<double> grid = r_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // measured[layer][row] with rows ascending in r.
  std::vector<std::vector<ProfilePoint>> measured(
      num_layers, std::vector<ProfilePoint>(grid.size()));
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    const double r = grid[gi];
    auto counts = measure(r);
    if (static_cast<int>(counts.size()) != num_layers)
      throw data_error("characterize_profiles: measurement returned " +
                       std::to_string(counts.size()) + " layers, expected " +
                       std::to_string(num_layers));
    for (int layer = 0; layer < num_layers; ++layer) {
      const auto [errors, executed] = counts[layer];
      double p_hat =
          executed == 0
              ? 0.0
              : static_cast<double>(errors) / static_cast<double>(executed);
      measured[layer][gi] = {r, std::min(p_hat, 1.0)};
    }
  }

  std::vector<VoltageErrorProfile> out;
  out.reserve(num_layers);
  for (int layer = 0; layer < num_layers; ++layer) {
    auto& rows = measured[layer];
    // Monotone correction: sampling noise can make a lower voltage look
    // cleaner; running maxima as r decreases restore non-increasing p.
    for (size_t gi = rows.size(); gi-- > 1;)
      rows[gi - 1].p = std::max(rows[gi - 1].p, rows[gi].p);
    out.emplace_back(rows);
  }
  return out;
}

}  // namespace uvsim
