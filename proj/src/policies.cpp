#include "uvsim/policies.hpp"

#include "uvsim/errors.hpp"

namespace uvsim {

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kGolden: return "golden";
    case PolicyKind::kTEP: return "tep";
    case PolicyKind::kTED: return "ted";
    case PolicyKind::kTEDrop: return "tedrop";
  }
  throw invariant_error("to_string: unknown PolicyKind");
}

PolicyKind policy_kind_from_string(std::string_view name) {
  if (name == "golden") return PolicyKind::kGolden;
  if (name == "tep") return PolicyKind::kTEP;
  if (name == "ted") return PolicyKind::kTED;
  if (name == "tedrop") return PolicyKind::kTEDrop;
  throw config_error("unknown policy '" + std::string(name) +
                     "' (expected golden|tep|ted|tedrop)");
}

void validate(const PolicyConfig& policy) {
  if (policy.kind == PolicyKind::kTED && policy.ted_recovery_cycles < 1)
    throw config_error("TED requires ted_recovery_cycles >= 1");
}

const char* to_string(MacEventKind kind) {
  switch (kind) {
    case MacEventKind::kExecuted: return "executed";
    case MacEventKind::kSkippedZero: return "skipped_zero";
    case MacEventKind::kDropped: return "dropped";
  }
  throw invariant_error("to_string: unknown MacEventKind");
}

TepResult step_tep(Acc24 acc, int8_t w, int8_t a, bool error_sampled,
                   Acc24 prev_latched, const ErrorCoords& coords) {
  Acc24 correct = mac_step(acc, w, a);
  if (!error_sampled) return {correct, false};
  Acc24 seen = corrupt(correct, prev_latched, coords);
  return {seen, seen != correct};
}

TeDropResult step_tedrop(Acc24 acc, int8_t w, int8_t a,
                         bool predecessor_errored, bool error_sample) {
  if (predecessor_errored) return {acc, MacEventKind::kDropped, false};
  return {mac_step(acc, w, a), MacEventKind::kExecuted, error_sample};
}

uint64_t ted_recovery_cycles(uint64_t error_cycle_count, int recovery_per_event) {
  if (recovery_per_event < 1)
    throw config_error("ted_recovery_cycles: recovery per event must be >= 1");
  return error_cycle_count * static_cast<uint64_t>(recovery_per_event);
}

}  // namespace uvsim
