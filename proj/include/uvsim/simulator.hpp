// simulator.hpp: whole-network runs over a dataset selection, with energy
// accounting and top-1 accuracy.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uvsim/dataflow.hpp"
#include "uvsim/energy.hpp"
#include "uvsim/model.hpp"

namespace uvsim {

struct RunSettings {
  ArrayConfig array;
  EnergyParams energy;
  uint64_t seed = 1;
  int workers = 0;
  int batch = 256;
};

struct NetworkRun {
  std::vector<LayerStats> layers;      // aggregated across batches
  std::vector<double> layer_energy;    // run energy per layer
  std::vector<double> layer_baseline;  // unprotected-nominal energy per layer
  double total_energy = 0.0;
  double baseline_energy = 0.0;
  double savings = 0.0;  // vs the unprotected nominal baseline
  uint64_t total_cycles = 0;
  uint64_t correct = 0;
  uint64_t total = 0;
  double accuracy = 0.0;
};

// Runs the model over the selected images in batches. r_per_layer and
// p_per_layer give each layer's voltage ratio and per-MAC error
// probability. Accuracy is top-1 over the final layer's raw accumulators
// (ties resolved to the lowest class index).
NetworkRun run_network(const Model& model, const Dataset& data,
                       std::span<const int> indices, const RunSettings& settings,
                       std::span<const double> r_per_layer,
                       std::span<const double> p_per_layer);

// Convenience: every layer at the same flat (r, p).
NetworkRun run_network_flat(const Model& model, const Dataset& data,
                            std::span<const int> indices,
                            const RunSettings& settings, double r, double p);

}  // namespace uvsim
