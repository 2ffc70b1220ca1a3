// policies.hpp: the four recovery-policy semantics applied to one
// accumulation-chain step.
//
//   Golden  - error-free execution (the unprotected reference).
//   TEP     - timing errors propagate: the register keeps a splice of the
//             half-settled new value and its stale previous content.
//   TED     - every detected error stalls the whole array for R cycles and
//             re-executes, so values stay golden; only time and energy pay.
//   TEDrop  - a mis-timed MAC steals its successor's cycle to finish
//             correctly; the successor's update is dropped (bypassed).
//
// Step functions are pure; all chain state is carried by the caller.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "uvsim/errmodel.hpp"
#include "uvsim/qarith.hpp"

namespace uvsim {

enum class PolicyKind { kGolden, kTEP, kTED, kTEDrop };

const char* to_string(PolicyKind kind);

// Parses "golden" | "tep" | "ted" | "tedrop" (case-sensitive).
// Throws config_error on anything else.
PolicyKind policy_kind_from_string(std::string_view name);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kGolden;
  // TED stall length per error cycle: 1 idealized, 5 realistic.
  int ted_recovery_cycles = 1;
};

// Throws config_error when the combination is invalid (R < 1 under TED).
void validate(const PolicyConfig& policy);

// What happened in one chain position's cycle slot.
enum class MacEventKind : uint8_t {
  kExecuted,     // MAC performed (possibly mis-timed)
  kSkippedZero,  // w=0 or a=0 under Zero-Skip, or tile padding
  kDropped,      // update bypassed because the predecessor stole this cycle
};

const char* to_string(MacEventKind kind);

// Golden step: plain MAC, never errs.
inline Acc24 step_golden(Acc24 acc, int8_t w, int8_t a) {
  return mac_step(acc, w, a);
}

struct TepResult {
  Acc24 acc;
  bool flagged = false;  // detector saw a mismatch (error was not silent)
};

// TEP step. `prev_latched` is what this physical register held last cycle:
// the previous batch column's partial sum at the same chain position
// (zero at block start). On a sampled error the register captures a splice
// of the correct update and that stale value; if the splice happens to equal
// the correct value the error is silent and the step reports no flag.
TepResult step_tep(Acc24 acc, int8_t w, int8_t a, bool error_sampled,
                   Acc24 prev_latched, const ErrorCoords& coords);

struct TeDropResult {
  Acc24 acc;
  MacEventKind kind = MacEventKind::kExecuted;
  bool errored = false;
};

// TE-Drop step for position k. If the predecessor position errored, this
// position's cycle was stolen: the accumulator passes through unchanged
// (Dropped) and the position is not error-eligible. Otherwise the MAC
// executes and completes with the correct value even when it errors (the
// stolen next cycle finishes the update); only the error flag is recorded.
TeDropResult step_tedrop(Acc24 acc, int8_t w, int8_t a,
                         bool predecessor_errored, bool error_sample);

// Total stall cycles charged by global TED: R per distinct array cycle in
// which at least one executed MAC erred.
uint64_t ted_recovery_cycles(uint64_t error_cycle_count, int recovery_per_event);

}  // namespace uvsim
