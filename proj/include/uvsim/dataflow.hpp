// dataflow.hpp: weight-stationary systolic-array execution model.
//
// A layer multiply Y = W·A + b is tiled into n×n weight blocks. Each output
// element y_ij is produced by an accumulation chain of length n (positions
// k = 0..n-1); blocks sharing an output row accumulate into the same 24-bit
// register. The staggered hardware schedule only affects cycle counts, so
// values are simulated chain-by-chain and time is accounted with the
// blocks·(2n + B) formula plus any TED recovery stalls.
//
// Determinism: every stochastic decision is keyed on global coordinates
// (layer, block, output row, global image index, position), so any worker
// partition reproduces the sequential result bit-exactly.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uvsim/errmodel.hpp"
#include "uvsim/policies.hpp"
#include "uvsim/qarith.hpp"

namespace uvsim {

struct ArrayConfig {
  int n = 256;             // array dimension (n×n MACs)
  bool zero_skip = false;  // skip MACs with zero weight or activation
  PolicyConfig policy;
};

void validate(const ArrayConfig& config);

// One weight tile: rows [row0, row0+rows) of W against positions
// [k0, k0+ks) of the input dimension. `accumulate` marks tiles that add
// onto partials left by an earlier tile of the same output rows.
struct Tile {
  int block_id = 0;  // linear id, row-tile major
  int row0 = 0, rows = 0;
  int k0 = 0, ks = 0;
  bool accumulate = false;
};

struct BlockPlan {
  int row_tiles = 0, col_tiles = 0;
  std::vector<Tile> tiles;  // row_tiles * col_tiles entries, ti-major
};

// Tiles an out_dim×in_dim weight matrix onto an n×n array.
// Ragged edges are padded inside the simulator, not materialized here.
BlockPlan plan_blocks(int out_dim, int in_dim, int batch, int n);

// Total array cycles: blocks·(2n + batch) + recovery stalls.
uint64_t cycle_count(int n, int batch, int blocks, uint64_t recovery_cycles);

struct MacEvent {
  int k = 0;
  MacEventKind kind = MacEventKind::kExecuted;
  bool errored = false;  // meaningful only for kExecuted
};

// Full event record of one (i, j) chain; events.size() == n always
// (padding positions appear as SkippedZero).
struct ChainTrace {
  int row = 0;
  uint64_t col = 0;
  std::vector<MacEvent> events;
  Acc24 final{};
};

// Simulates one accumulation chain of nominal length config.n.
// weights_row/activations_col supply the valid positions (equal lengths,
// at most n); the tail is padding. `sample` decides mis-timing per
// position; pass {} for the coordinate-PRF sampler at probability p.
// TEP treats the chain in isolation: the stale register contents are the
// block-start zeros.
std::pair<Acc24, ChainTrace> simulate_chain(
    std::span<const int8_t> weights_row, std::span<const int8_t> activations_col,
    Acc24 init, const ArrayConfig& config, double p, const ErrorCoords& coords,
    const std::function<bool(int)>& sample = {});

struct LayerStats {
  int layer = 0;
  double r = 1.0;  // voltage ratio this layer ran at
  double p = 0.0;  // per-MAC error probability at that ratio
  int n = 0;
  uint64_t batch = 0;
  uint64_t blocks = 0;
  uint64_t executed = 0;
  uint64_t errored = 0;       // detected errors (TEP counts non-silent only)
  uint64_t dropped = 0;
  uint64_t skipped_zero = 0;  // genuine Zero-Skip events (padding excluded)
  uint64_t padded = 0;
  uint64_t error_cycles = 0;     // distinct (block, cycle) pairs with >=1 error
  uint64_t recovery_cycles = 0;  // R · error_cycles under TED, else 0
  uint64_t cycles = 0;
  std::vector<uint64_t> column_errors;  // detector sums per array column, size n

  void merge(const LayerStats& other);
};

// Weights plus everything needed to produce the next activation tensor.
// bias entries are pre-scaled to the accumulator scale
// (weights.scale · input activation scale) and already wrapped to 24 bits.
struct LayerDef {
  std::string name;
  QTensor weights;  // out_dim × in_dim
  std::vector<int32_t> bias;
  double out_scale = 1.0;  // next layer's activation scale (relu layers)
  bool relu = true;        // false on the final layer: raw accumulators out
};

struct LayerResult {
  QTensor activations;           // out_dim × B, empty when !relu
  std::vector<int32_t> raw_acc;  // out_dim × B final accumulators
  LayerStats stats;
};

// Executes one layer over a batch: all blocks, all chains, bias, and (for
// relu layers) requantization. `image_ids` (one per batch column) key the
// error sampling, so an image draws the same errors regardless of how the
// run is batched. `workers` threads partition the output rows; any count
// gives bit-identical results.
LayerResult run_layer(const LayerDef& layer, const QTensor& acts,
                      const ArrayConfig& config, double r, double p,
                      uint64_t seed, int layer_index,
                      std::span<const uint64_t> image_ids, int workers);

}  // namespace uvsim
