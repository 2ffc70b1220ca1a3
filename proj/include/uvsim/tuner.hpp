// tuner.hpp: per-layer voltage assignment under a total error budget,
// the column-reduction error-tracking model, and recovery of per-layer
// error profiles from simulation.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "uvsim/dataflow.hpp"
#include "uvsim/errmodel.hpp"

namespace uvsim {

struct TunerInput {
  double p_total = 0.0;  // total per-MAC error budget across layers
  double r_min = 0.65;   // lowest rail the tuner may choose
  std::vector<double> r_grid;  // candidate rails, strictly descending
  std::vector<VoltageErrorProfile> profiles;  // one per layer
};

void validate(const TunerInput& input);

struct TunedLayer {
  int layer = 0;
  double r_star = 1.0;
  double p = 0.0;  // the layer's error probability at r_star
};

// Greedy water-filling: visit layers in ascending order of p_i(r_min); give
// each visit a target of p_remain divided by the layers still unvisited;
// pick the smallest rail >= r_min whose error probability fits the target
// (deepest underscaling that fits). A layer that cannot fit any rail runs
// at nominal voltage and consumes no budget, leaving it to later layers.
// Output is ordered by layer index.
std::vector<TunedLayer> tune_per_layer(const TunerInput& input);

// Output of the distributed error-tracking reduction tree.
struct ErrorCounters {
  std::vector<uint64_t> per_column;  // adder per array column
  uint64_t layer_total = 0;          // row reduction over columns
  uint64_t batch_total = 0;          // accumulated across batches
};

// Tallies detected errors from chain traces of one layer run; chains map
// to array column (row mod n).
ErrorCounters track_errors(std::span<const ChainTrace> traces, int n);

// The same reduction from a simulated layer's statistics.
ErrorCounters counters_from_stats(const LayerStats& stats);

// Measurement callback: run the simulator with every layer at flat ratio r
// and report (detected errors, executed MACs) per layer.
using MeasureFn =
    std::function<std::vector<std::pair<uint64_t, uint64_t>>(double r)>;

// Estimates one profile per layer by measuring error rates across r_grid,
// then enforcing monotonicity by running maxima as r decreases.
std::vector<VoltageErrorProfile> characterize_profiles(
    const std::vector<double>& r_grid, int num_layers, const MeasureFn& measure);

}  // namespace uvsim
