// errmodel.hpp: voltage-to-error-probability profiles, deterministic
// coordinate-keyed error sampling, the stale-bit corruption model, and
// process variation across chip samples.
//
// A profile maps the voltage underscaling ratio r to the probability p that
// one executed MAC mis-times in one cycle. Profiles are monotone: lowering
// voltage never reduces the error rate. Error injection is a pure function
// of (seed, layer, block, row, column, position), so any parallel schedule
// reproduces the sequential run bit-exactly.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvsim/qarith.hpp"

namespace uvsim {

struct ProfilePoint {
  double r = 0.0;  // voltage underscaling ratio, > 0
  double p = 0.0;  // per-MAC error probability in [0, 1]
};

// Piecewise table of (r, p) rows, r strictly ascending, p non-increasing.
// Queries between rows interpolate log-linearly in p (linear in r, linear
// in log p); queries outside the table clamp to the end rows. r may exceed
// 1 in tables produced by apply_process_variation (the curve of a slow chip
// shifted right); base profiles normally live in (0, 1].
class VoltageErrorProfile {
 public:
  // Validates shape and monotonicity; throws data_error on violation.
  explicit VoltageErrorProfile(std::vector<ProfilePoint> rows);

  const std::vector<ProfilePoint>& rows() const { return rows_; }

  // Per-MAC error probability at ratio r. Within a zero tail (the upper
  // bracketing row has p = 0), the result is exactly 0 all the way down to
  // the boundary of the highest nonzero row: log-linear interpolation
  // cannot reach 0, and voltages above the last failing point are clean.
  double error_prob(double r) const;

  // Returns a copy with every p multiplied by `factor`, capped at 1.
  // Used to synthesize per-layer profile spread.
  VoltageErrorProfile scaled(double factor) const;

 private:
  std::vector<ProfilePoint> rows_;
};

// Free-function form of the profile query.
double error_prob(const VoltageErrorProfile& profile, double r);

// Probability that at least one of m independent per-MAC errors (each of
// probability p) fires: 1 - (1-p)^m, computed stably via expm1/log1p.
double global_error_rate(double p, uint64_t m);

// Coordinates identifying one MAC operation across the whole experiment.
// `col` is the global image index (not the index within a batch), so error
// patterns never repeat across batches.
struct ErrorCoords {
  uint64_t seed = 0;
  uint32_t layer = 0;
  uint32_t block = 0;
  uint32_t row = 0;   // output row i within the layer
  uint64_t col = 0;   // global image index j
  uint32_t k = 0;     // position along the accumulation chain
};

// Deterministic Bernoulli(p) draw for the MAC at `coords`.
bool sample_error(double p, const ErrorCoords& coords);

// Splices two accumulator registers at bit `cut` in [0, 24): bits [0, cut)
// from `correct` (low bits settle first in a ripple-carry adder), bits
// [cut, 24) from `previous` (stale register contents). cut=0 returns
// `previous` unchanged.
Acc24 splice24(Acc24 correct, Acc24 previous, int cut);

// Erroneous register value for a mis-timed MAC: splice of the correct new
// value and the stale previous value at a cut drawn uniformly from {0..23}
// via the coordinate PRF. May equal `correct` (a silent error: the checker
// sees no mismatch); callers that model detection must compare and treat
// that case as no error.
Acc24 corrupt(Acc24 correct, Acc24 previous, const ErrorCoords& coords);

// One fabricated chip instance: a global multiplicative delay factor.
// factor > 1 means a slow chip (errors start at higher voltage).
struct ChipSample {
  double factor = 1.0;
  uint64_t seed = 0;
};

// Draws the delay factor f ~ Normal(1, sigma) for chip `chip_seed`,
// clamped to a small positive floor.
ChipSample draw_chip_sample(uint64_t chip_seed, double sigma);

// Profile of the chip drawn from `chip_seed`: p'(r) = p(r / f), realized by
// scaling every table row's r by f. sigma = 0 returns the input unchanged.
VoltageErrorProfile apply_process_variation(const VoltageErrorProfile& profile,
                                            double sigma, uint64_t chip_seed);

// Built-in default profile: clean at r >= 0.95, anchored at
// (0.90, 1e-5) and (0.85, 1e-4), logistic growth below that saturating at
// p_max = 0.2 around r = 0.65.
VoltageErrorProfile default_profile();

// Parameters of the default profile's logistic segment
// p(r) = p_max / (1 + exp(steepness * (r - r0))), chosen so the curve
// passes exactly through both anchor points.
double default_profile_steepness();
double default_profile_r0();
inline constexpr double kDefaultProfilePMax = 0.2;

// Synthesizes per-layer profiles from a base curve: layer i gets
// p scaled by spread^(i/(L-1) - 0.5), so the deepest layer's rate exceeds
// the first layer's by exactly `spread`. spread = 1 replicates the base.
std::vector<VoltageErrorProfile> layer_profiles(const VoltageErrorProfile& base,
                                                int num_layers, double spread);

// Loads per-layer profiles from a text table: one `layer_id,r,p` row per
// line, layer_id `*` meaning every layer not covered by specific rows.
// Lines starting with '#' and blank lines are ignored. Rows for each layer
// must already be sorted by r ascending. Throws data_error on parse or
// validation failure, including layers left without any profile.
std::vector<VoltageErrorProfile> load_profiles(const std::string& path,
                                               int num_layers);

}  // namespace uvsim
