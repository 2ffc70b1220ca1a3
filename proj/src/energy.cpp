#include "uvsim/energy.hpp"

#include "uvsim/errors.hpp"

namespace uvsim {

void validate(const EnergyParams& params) {
  if (params.e_mac_nominal < 0.0 || params.razor_overhead < 0.0 ||
      params.zero_skip_cost < 0.0)
    throw config_error("energy parameters must be non-negative");
}

double mac_energy(double r, const EnergyParams& params) {
  if (!(r > 0.0)) throw config_error("mac_energy: r must be positive");
  return params.e_mac_nominal * (1.0 + params.razor_overhead) * r * r;
}

double unprotected_mac_energy(double r, const EnergyParams& params) {
  if (!(r > 0.0)) throw config_error("mac_energy: r must be positive");
  return params.e_mac_nominal * r * r;
}

double layer_energy(const LayerStats& stats, double r,
                    const EnergyParams& params, const PolicyConfig& policy) {
  validate(params);
  const double per_mac = policy.kind == PolicyKind::kGolden
                             ? unprotected_mac_energy(r, params)
                             : mac_energy(r, params);
  double energy =
      static_cast<double>(stats.executed + stats.dropped) * per_mac +
      static_cast<double>(stats.skipped_zero) * params.zero_skip_cost * per_mac;
  if (policy.kind == PolicyKind::kTED) {
    const double array_macs = static_cast<double>(stats.n) * stats.n;
    energy += static_cast<double>(stats.recovery_cycles) * array_macs * per_mac;
  }
  return energy;
}

double baseline_layer_energy(const LayerStats& stats,
                             const EnergyParams& params) {
  return static_cast<double>(stats.executed + stats.dropped +
                             stats.skipped_zero) *
         params.e_mac_nominal;
}

double savings(double run_energy, double baseline_energy) {
  if (!(baseline_energy > 0.0))
    throw config_error("savings: baseline energy must be positive");
  return 1.0 - run_energy / baseline_energy;
}

double ted_relative_energy(double p, double r, uint64_t m, int recovery,
                           const EnergyParams& params) {
  if (recovery < 1) throw config_error("ted_relative_energy: recovery must be >= 1");
  if (!(r > 0.0)) throw config_error("ted_relative_energy: r must be positive");
  const double g = global_error_rate(p, m);
  const double speculative = (1.0 + params.razor_overhead) * r * r;
  return speculative * (1.0 + static_cast<double>(recovery) * g);
}

std::vector<double> ted_energy_curve(const VoltageErrorProfile& profile,
                                     const std::vector<double>& r_grid,
                                     uint64_t m, int recovery,
                                     const EnergyParams& params) {
  std::vector<double> out;
  out.reserve(r_grid.size());
  for (double r : r_grid)
    out.push_back(
        ted_relative_energy(profile.error_prob(r), r, m, recovery, params));
  return out;
}

std::vector<double> default_sweep_grid() {
  std::vector<double> grid;
  grid.reserve(36);
  for (int i = 65; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

std::vector<double> default_rail_grid() {
  std::vector<double> grid;
  grid.reserve(8);
  for (int i = 100; i >= 65; i -= 5) grid.push_back(i / 100.0);
  return grid;
}

}  // namespace uvsim
