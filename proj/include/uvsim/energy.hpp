// energy.hpp: energy accounting under voltage underscaling.
//
// Dynamic energy scales as r^2 at fixed frequency. Speculative designs
// (TEP, TED, TE-Drop) carry the checker-flip-flop overhead; the unprotected
// baseline and golden reference do not. Only array MACs are accounted:
// reported savings are array-relative.
#pragma once

#include <cstdint>
#include <vector>

#include "uvsim/dataflow.hpp"
#include "uvsim/errmodel.hpp"
#include "uvsim/policies.hpp"

namespace uvsim {

struct EnergyParams {
  double e_mac_nominal = 1.0;     // energy units per executed MAC at r = 1
  double razor_overhead = 0.0335; // checker instrumentation, speculative designs
  double zero_skip_cost = 0.0;    // fraction of a MAC burned by a skipped slot
};

void validate(const EnergyParams& params);

// Per-MAC energy of a speculative design at ratio r:
// e_mac_nominal * (1 + razor_overhead) * r^2. Throws config_error on r <= 0.
double mac_energy(double r, const EnergyParams& params);

// Per-MAC energy of the unprotected design (no checker overhead).
double unprotected_mac_energy(double r, const EnergyParams& params);

// Energy of one simulated layer run. Executed and dropped slots burn a full
// MAC each (a stolen cycle re-computes its predecessor); skipped slots burn
// zero_skip_cost of one; TED recovery stalls re-drive the whole n*n array.
// Golden runs are priced as the unprotected design.
double layer_energy(const LayerStats& stats, double r,
                    const EnergyParams& params, const PolicyConfig& policy);

// What the unprotected baseline at nominal voltage spends on the same
// workload: every non-padding slot executes at e_mac_nominal.
double baseline_layer_energy(const LayerStats& stats,
                             const EnergyParams& params);

// Fractional savings of a run against a baseline: 1 - run/baseline.
double savings(double run_energy, double baseline_energy);

// Analytic global-TED energy relative to the unprotected nominal baseline,
// steady state: each array cycle drives m MACs and stalls R recovery
// cycles with probability 1-(1-p)^m.
// relative = (1 + razor) * r^2 * (1 + R * global_error_rate(p, m)).
double ted_relative_energy(double p, double r, uint64_t m, int recovery,
                           const EnergyParams& params);

// ted_relative_energy evaluated along a grid against a profile.
std::vector<double> ted_energy_curve(const VoltageErrorProfile& profile,
                                     const std::vector<double>& r_grid,
                                     uint64_t m, int recovery,
                                     const EnergyParams& params);

// Default analysis grid for voltage sweeps: 0.65 to 1.00 in steps of 0.01,
// ascending. Fine enough to resolve the TED optimum just above the knee.
std::vector<double> default_sweep_grid();

// Default voltage rails for the tuner: 1.00 down to 0.65 in steps of 0.05.
std::vector<double> default_rail_grid();

}  // namespace uvsim
