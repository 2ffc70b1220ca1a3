#include "uvsim/dataflow.hpp"

#include <algorithm>
#include <thread>

#include "uvsim/errors.hpp"
#include "uvsim/prf.hpp"

namespace uvsim {

void validate(const ArrayConfig& config) {
  if (config.n < 1) throw config_error("array dimension n must be >= 1");
  validate(config.policy);
}

BlockPlan plan_blocks(int out_dim, int in_dim, int batch, int n) {
  if (out_dim < 1 || in_dim < 1 || batch < 1 || n < 1)
    throw config_error("plan_blocks: all dimensions must be >= 1");
  BlockPlan plan;
  plan.row_tiles = (out_dim + n - 1) / n;
  plan.col_tiles = (in_dim + n - 1) / n;
  plan.tiles.reserve(static_cast<size_t>(plan.row_tiles) * plan.col_tiles);
  for (int ti = 0; ti < plan.row_tiles; ++ti) {
    for (int tk = 0; tk < plan.col_tiles; ++tk) {
      Tile tile;
      tile.block_id = ti * plan.col_tiles + tk;
      tile.row0 = ti * n;
      tile.rows = std::min(n, out_dim - tile.row0);
      tile.k0 = tk * n;
      tile.ks = std::min(n, in_dim - tile.k0);
      tile.accumulate = tk > 0;
      plan.tiles.push_back(tile);
    }
  }
  return plan;
}

uint64_t cycle_count(int n, int batch, int blocks, uint64_t recovery_cycles) {
  if (n < 0 || batch < 0 || blocks < 0)
    throw config_error("cycle_count: counts must be non-negative");
  return static_cast<uint64_t>(blocks) *
             (2 * static_cast<uint64_t>(n) + static_cast<uint64_t>(batch)) +
         recovery_cycles;
}

std::pair<Acc24, ChainTrace> simulate_chain(
    std::span<const int8_t> weights_row, std::span<const int8_t> activations_col,
    Acc24 init, const ArrayConfig& config, double p, const ErrorCoords& coords,
    const std::function<bool(int)>& sample) {
  validate(config);
  if (weights_row.size() != activations_col.size())
    throw data_error("simulate_chain: weight/activation length mismatch");
  if (static_cast<int>(weights_row.size()) > config.n)
    throw data_error("simulate_chain: chain longer than array dimension");
  if (!(p >= 0.0 && p <= 1.0))
    throw config_error("simulate_chain: p must lie in [0, 1]");

  const int n = config.n;
  const int valid = static_cast<int>(weights_row.size());
  auto err_at = [&](int k) {
    if (sample) return sample(k);
    ErrorCoords c = coords;
    c.k = static_cast<uint32_t>(k);
    return sample_error(p, c);
  };

  ChainTrace trace;
  trace.row = static_cast<int>(coords.row);
  trace.col = coords.col;
  trace.events.reserve(n);

  Acc24 acc = init;
  bool pending_drop = false;
  for (int k = 0; k < n; ++k) {
    const bool is_pad = k >= valid;
    const int8_t w = is_pad ? int8_t{0} : weights_row[k];
    const int8_t a = is_pad ? int8_t{0} : activations_col[k];
    if (is_pad || (config.zero_skip && (w == 0 || a == 0))) {
      // A skipped slot still occupies its cycle; a pending steal lands on
      // the no-op harmlessly and does not cascade.
      pending_drop = false;
      trace.events.push_back({k, MacEventKind::kSkippedZero, false});
      continue;
    }
    switch (config.policy.kind) {
      case PolicyKind::kGolden:
        acc = step_golden(acc, w, a);
        trace.events.push_back({k, MacEventKind::kExecuted, false});
        break;
      case PolicyKind::kTEP: {
        // An isolated chain sees block-start registers: stale contents 0.
        ErrorCoords c = coords;
        c.k = static_cast<uint32_t>(k);
        TepResult step = step_tep(acc, w, a, err_at(k), Acc24{0}, c);
        acc = step.acc;
        trace.events.push_back({k, MacEventKind::kExecuted, step.flagged});
        break;
      }
      case PolicyKind::kTED:
        // Recovery restores the golden value; only the flag is recorded.
        acc = mac_step(acc, w, a);
        trace.events.push_back({k, MacEventKind::kExecuted, err_at(k)});
        break;
      case PolicyKind::kTEDrop: {
        if (pending_drop) {
          pending_drop = false;
          trace.events.push_back({k, MacEventKind::kDropped, false});
          break;
        }
        TeDropResult step = step_tedrop(acc, w, a, false, err_at(k));
        acc = step.acc;
        pending_drop = step.errored;
        trace.events.push_back({k, MacEventKind::kExecuted, step.errored});
        break;
      }
    }
  }
  trace.final = acc;
  return {acc, trace};
}

void LayerStats::merge(const LayerStats& other) {
  require_invariant(layer == other.layer && n == other.n,
                    "LayerStats::merge: incompatible stats");
  batch += other.batch;
  blocks += other.blocks;
  executed += other.executed;
  errored += other.errored;
  dropped += other.dropped;
  skipped_zero += other.skipped_zero;
  padded += other.padded;
  error_cycles += other.error_cycles;
  recovery_cycles += other.recovery_cycles;
  cycles += other.cycles;
  require_invariant(column_errors.size() == other.column_errors.size(),
                    "LayerStats::merge: column width mismatch");
  for (size_t i = 0; i < column_errors.size(); ++i)
    column_errors[i] += other.column_errors[i];
}

namespace {

// Per-worker accumulation; merged deterministically after join.
struct WorkerScratch {
  uint64_t executed = 0, errored = 0, dropped = 0, skipped_zero = 0, padded = 0;
  std::vector<uint64_t> column_errors;
  std::vector<uint64_t> ted_cycles;  // packed (block_id << 24) | cycle, dups ok
  std::exception_ptr failure;
};

constexpr uint64_t kGolden64 = 0x9e3779b97f4a7c15ull;

// Executes output rows [row_begin, row_end) of one layer for one batch.
// Loop order is k-outer / j-inner so activation reads stay contiguous; the
// physical TEP register at array cell (k, column i) is then a scalar that
// trails the j loop, holding the last value actually latched there.
template <PolicyKind P>
void run_rows(const LayerDef& layer, const QTensor& acts,
              const ArrayConfig& config, const BlockPlan& plan, double p,
              uint64_t seed, int layer_index,
              std::span<const uint64_t> image_ids, int row_begin, int row_end,
              double acc_scale, int32_t* raw_acc, int8_t* out_act,
              WorkerScratch& scratch) {
  const int n = config.n;
  const int B = acts.cols;
  const int in_dim = acts.rows;
  const bool zero_skip = config.zero_skip;

  std::vector<int32_t> acc(B);
  std::vector<uint8_t> pend(P == PolicyKind::kTEDrop ? B : 0);
  std::vector<uint64_t> err_prefix(p > 0.0 ? B : 0);

  for (int i = row_begin; i < row_end; ++i) {
    const int ti = i / n;
    const int i_local = i - ti * n;
    // Bias enters the chain once, in the first tile's initial accumulator.
    const int32_t bias = wrap24(layer.bias[static_cast<size_t>(i)]);
    for (int j = 0; j < B; ++j) acc[j] = bias;
    uint64_t row_errors = 0;

    for (int tk = 0; tk < plan.col_tiles; ++tk) {
      const Tile& tile = plan.tiles[static_cast<size_t>(ti) * plan.col_tiles + tk];
      const int8_t* wrow =
          &layer.weights.data[static_cast<size_t>(i) * in_dim + tile.k0];

      if (p > 0.0) {
        // Prefix hash per chain: folds (seed, stream, layer, block, i, j);
        // each MAC then folds only its position k. Identical, by
        // construction, to hashing the full coordinate tuple.
        uint64_t base = mix64(seed + kGolden64);
        base = hash_fold(base, static_cast<uint64_t>(Stream::kErrorDecision));
        base = hash_fold(base, static_cast<uint64_t>(layer_index));
        base = hash_fold(base, static_cast<uint64_t>(tile.block_id));
        base = hash_fold(base, static_cast<uint64_t>(i));
        for (int j = 0; j < B; ++j)
          err_prefix[j] = hash_fold(base, image_ids[j]);
      }
      if (P == PolicyKind::kTEDrop) std::fill(pend.begin(), pend.end(), 0);

      for (int k = 0; k < tile.ks; ++k) {
        const int8_t w = wrow[k];
        if (zero_skip && w == 0) {
          // Whole array row idles this cycle slot for every chain.
          scratch.skipped_zero += static_cast<uint64_t>(B);
          if (P == PolicyKind::kTEDrop) std::fill(pend.begin(), pend.end(), 0);
          continue;
        }
        const int8_t* arow =
            &acts.data[static_cast<size_t>(tile.k0 + k) * B];
        int32_t latched = 0;  // TEP register content, block start = 0
        for (int j = 0; j < B; ++j) {
          const int8_t a = arow[j];
          if (zero_skip && a == 0) {
            ++scratch.skipped_zero;
            if (P == PolicyKind::kTEDrop) pend[j] = 0;
            continue;
          }
          if constexpr (P == PolicyKind::kGolden) {
            acc[j] = mac_step(Acc24{acc[j]}, w, a).value;
            ++scratch.executed;
          } else if constexpr (P == PolicyKind::kTEP) {
            const bool err =
                p > 0.0 && bernoulli(hash_fold(err_prefix[j], k), p);
            ErrorCoords coords{seed,
                               static_cast<uint32_t>(layer_index),
                               static_cast<uint32_t>(tile.block_id),
                               static_cast<uint32_t>(i),
                               image_ids[j],
                               static_cast<uint32_t>(k)};
            TepResult step =
                step_tep(Acc24{acc[j]}, w, a, err, Acc24{latched}, coords);
            acc[j] = step.acc.value;
            latched = step.acc.value;
            ++scratch.executed;
            if (step.flagged) {
              ++scratch.errored;
              ++row_errors;
            }
          } else if constexpr (P == PolicyKind::kTED) {
            const bool err =
                p > 0.0 && bernoulli(hash_fold(err_prefix[j], k), p);
            acc[j] = mac_step(Acc24{acc[j]}, w, a).value;
            ++scratch.executed;
            if (err) {
              ++scratch.errored;
              ++row_errors;
              const uint64_t cycle = static_cast<uint64_t>(i_local) + j + k;
              require_invariant(cycle < (1u << 24),
                                "run_rows: cycle index overflows packing");
              scratch.ted_cycles.push_back(
                  (static_cast<uint64_t>(tile.block_id) << 24) | cycle);
            }
          } else {  // TE-Drop
            if (pend[j]) {
              pend[j] = 0;
              ++scratch.dropped;
              continue;
            }
            const bool err =
                p > 0.0 && bernoulli(hash_fold(err_prefix[j], k), p);
            TeDropResult step = step_tedrop(Acc24{acc[j]}, w, a, false, err);
            acc[j] = step.acc.value;
            pend[j] = step.errored ? 1 : 0;
            ++scratch.executed;
            if (step.errored) {
              ++scratch.errored;
              ++row_errors;
            }
          }
        }
      }
      scratch.padded += static_cast<uint64_t>(n - tile.ks) * B;
      // A drop pending at tile end is absorbed by the padding slot or the
      // post-chain pipeline bubble; nothing carries into the next tile.
    }

    scratch.column_errors[i_local] += row_errors;
    for (int j = 0; j < B; ++j) {
      raw_acc[static_cast<size_t>(i) * B + j] = acc[j];
      if (out_act)
        out_act[static_cast<size_t>(i) * B + j] =
            relu_requantize(Acc24{acc[j]}, layer.out_scale, acc_scale);
    }
  }
}

template <PolicyKind P>
void run_rows_policy(const LayerDef& layer, const QTensor& acts,
                     const ArrayConfig& config, const BlockPlan& plan,
                     double p, uint64_t seed, int layer_index,
                     std::span<const uint64_t> image_ids, int row_begin,
                     int row_end, double acc_scale, int32_t* raw_acc,
                     int8_t* out_act, WorkerScratch& scratch) {
  try {
    run_rows<P>(layer, acts, config, plan, p, seed, layer_index, image_ids,
                row_begin, row_end, acc_scale, raw_acc, out_act, scratch);
  } catch (...) {
    scratch.failure = std::current_exception();
  }
}

using RowRunner = void (*)(const LayerDef&, const QTensor&, const ArrayConfig&,
                           const BlockPlan&, double, uint64_t, int,
                           std::span<const uint64_t>, int, int, double,
                           int32_t*, int8_t*, WorkerScratch&);

RowRunner select_runner(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kGolden: return &run_rows_policy<PolicyKind::kGolden>;
    case PolicyKind::kTEP: return &run_rows_policy<PolicyKind::kTEP>;
    case PolicyKind::kTED: return &run_rows_policy<PolicyKind::kTED>;
    case PolicyKind::kTEDrop: return &run_rows_policy<PolicyKind::kTEDrop>;
  }
  throw invariant_error("select_runner: unknown policy");
}

}  // namespace

LayerResult run_layer(const LayerDef& layer, const QTensor& acts,
                      const ArrayConfig& config, double r, double p,
                      uint64_t seed, int layer_index,
                      std::span<const uint64_t> image_ids, int workers) {
  validate(config);
  const int out_dim = layer.weights.rows;
  const int in_dim = layer.weights.cols;
  const int B = acts.cols;
  if (acts.rows != in_dim)
    throw data_error("run_layer: activation rows " + std::to_string(acts.rows) +
                     " do not match layer input dim " + std::to_string(in_dim));
  if (static_cast<int>(layer.bias.size()) != out_dim)
    throw data_error("run_layer: bias length does not match output dim");
  if (B < 1) throw data_error("run_layer: empty batch");
  if (static_cast<int>(image_ids.size()) != B)
    throw data_error("run_layer: image_ids size does not match batch");
  if (!(r > 0.0 && r <= 1.0))
    throw config_error("run_layer: voltage ratio must lie in (0, 1]");
  if (!(p >= 0.0 && p <= 1.0))
    throw config_error("run_layer: error probability must lie in [0, 1]");

  const BlockPlan plan = plan_blocks(out_dim, in_dim, B, config.n);
  const double acc_scale = layer.weights.scale * acts.scale;

  LayerResult result;
  result.raw_acc.assign(static_cast<size_t>(out_dim) * B, 0);
  if (layer.relu) result.activations = QTensor::zeros(out_dim, B, layer.out_scale);
  int8_t* out_act = layer.relu ? result.activations.data.data() : nullptr;

  int thread_count = workers;
  if (thread_count <= 0)
    thread_count = static_cast<int>(std::thread::hardware_concurrency());
  thread_count = std::clamp(thread_count, 1, out_dim);

  std::vector<WorkerScratch> scratch(thread_count);
  for (auto& s : scratch) s.column_errors.assign(config.n, 0);

  RowRunner runner = select_runner(config.policy.kind);
  const int rows_per = (out_dim + thread_count - 1) / thread_count;
  if (thread_count == 1) {
    runner(layer, acts, config, plan, p, seed, layer_index, image_ids, 0,
           out_dim, acc_scale, result.raw_acc.data(), out_act, scratch[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) {
      const int lo = t * rows_per;
      const int hi = std::min(out_dim, lo + rows_per);
      if (lo >= hi) break;
      pool.emplace_back(runner, std::cref(layer), std::cref(acts),
                        std::cref(config), std::cref(plan), p, seed,
                        layer_index, image_ids, lo, hi, acc_scale,
                        result.raw_acc.data(), out_act, std::ref(scratch[t]));
    }
    for (auto& th : pool) th.join();
  }
  for (auto& s : scratch)
    if (s.failure) std::rethrow_exception(s.failure);

  LayerStats& stats = result.stats;
  stats.layer = layer_index;
  stats.r = r;
  stats.p = p;
  stats.n = config.n;
  stats.batch = static_cast<uint64_t>(B);
  stats.blocks = plan.tiles.size();
  stats.column_errors.assign(config.n, 0);
  std::vector<uint64_t> ted_cycles;
  for (const auto& s : scratch) {
    stats.executed += s.executed;
    stats.errored += s.errored;
    stats.dropped += s.dropped;
    stats.skipped_zero += s.skipped_zero;
    stats.padded += s.padded;
    for (int c = 0; c < config.n; ++c) stats.column_errors[c] += s.column_errors[c];
    ted_cycles.insert(ted_cycles.end(), s.ted_cycles.begin(), s.ted_cycles.end());
  }
  if (config.policy.kind == PolicyKind::kTED) {
    std::sort(ted_cycles.begin(), ted_cycles.end());
    ted_cycles.erase(std::unique(ted_cycles.begin(), ted_cycles.end()),
                     ted_cycles.end());
    stats.error_cycles = ted_cycles.size();
    stats.recovery_cycles = ted_recovery_cycles(
        stats.error_cycles, config.policy.ted_recovery_cycles);
  }
  stats.cycles = cycle_count(config.n, B, static_cast<int>(plan.tiles.size()),
                             stats.recovery_cycles);

  // Each real output row owns col_tiles chains of n slots per image;
  // ragged row tiles leave array columns idle, which never appear in stats.
  const uint64_t slots = static_cast<uint64_t>(out_dim) * B *
                         static_cast<uint64_t>(plan.col_tiles) * config.n;
  require_invariant(stats.executed + stats.dropped + stats.skipped_zero +
                            stats.padded ==
                        slots,
                    "run_layer: event conservation violated");
  return result;
}

}  // namespace uvsim
