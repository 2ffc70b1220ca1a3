#include "uvsim/policies.hpp"

#include "doctest.h"
#include "uvsim/errors.hpp"
#include "uvsim/prf.hpp"

using namespace uvsim;

TEST_CASE("policy names round-trip; unknown names are rejected") {
  for (PolicyKind kind : {PolicyKind::kGolden, PolicyKind::kTEP,
                          PolicyKind::kTED, PolicyKind::kTEDrop})
    CHECK(policy_kind_from_string(to_string(kind)) == kind);
  CHECK_THROWS_AS(policy_kind_from_string("thundervolt"), config_error);
  CHECK_THROWS_AS(policy_kind_from_string("TED"), config_error);
}

TEST_CASE("policy validation rejects TED without recovery cycles") {
  PolicyConfig bad{PolicyKind::kTED, 0};
  CHECK_THROWS_AS(validate(bad), config_error);
  // The same R is legal when TED is not in use.
  PolicyConfig fine{PolicyKind::kGolden, 0};
  CHECK_NOTHROW(validate(fine));
  CHECK_NOTHROW(validate(PolicyConfig{PolicyKind::kTED, 5}));
}

TEST_CASE("golden step is a plain MAC") {
  CHECK(step_golden(Acc24{100}, 3, -4) == Acc24{88});
  CHECK(step_golden(Acc24{kAccMax}, 1, 1) == Acc24{kAccMin});
}

TEST_CASE("TEP without a sampled error is exact and unflagged") {
  const ErrorCoords coords{.seed = 1};
  const TepResult r = step_tep(Acc24{10}, 2, 3, false, Acc24{-999}, coords);
  CHECK(r.acc == Acc24{16});
  CHECK_FALSE(r.flagged);
}

TEST_CASE("TEP corruption splices toward the stale register") {
  // Scan coordinates until the splice actually differs; with these operands
  // (correct = 16, stale = -1) most cuts flip high bits, so this terminates
  // immediately in practice.
  bool saw_flagged = false, saw_silent = false;
  for (uint64_t col = 0; col < 64 && !(saw_flagged && saw_silent); ++col) {
    const ErrorCoords coords{.seed = 3, .layer = 0, .block = 0, .row = 0,
                             .col = col, .k = 0};
    const Acc24 correct = mac_step(Acc24{10}, 2, 3);
    const TepResult r = step_tep(Acc24{10}, 2, 3, true, Acc24{-1}, coords);
    if (r.acc == correct) {
      // Splice equals the correct value: silent, must not be flagged.
      CHECK_FALSE(r.flagged);
      saw_silent = true;
    } else {
      CHECK(r.flagged);
      CHECK(r.acc == corrupt(correct, Acc24{-1}, coords));
      saw_flagged = true;
    }
  }
  CHECK(saw_flagged);
  // A stale register equal to the correct value is always silent.
  const ErrorCoords coords{.seed = 3};
  const Acc24 correct = mac_step(Acc24{10}, 2, 3);
  const TepResult silent = step_tep(Acc24{10}, 2, 3, true, correct, coords);
  CHECK(silent.acc == correct);
  CHECK_FALSE(silent.flagged);
}

TEST_CASE("TE-Drop executes correctly or drops, never corrupts") {
  // Normal execution: exact value, error flag passed through.
  TeDropResult r = step_tedrop(Acc24{10}, 2, 3, false, true);
  CHECK(r.acc == Acc24{16});
  CHECK(r.kind == MacEventKind::kExecuted);
  CHECK(r.errored);

  r = step_tedrop(Acc24{10}, 2, 3, false, false);
  CHECK(r.acc == Acc24{16});
  CHECK_FALSE(r.errored);

  // Predecessor stole this cycle: accumulator passes through unchanged and
  // the position cannot itself err (its MAC never executed).
  r = step_tedrop(Acc24{10}, 2, 3, true, true);
  CHECK(r.acc == Acc24{10});
  CHECK(r.kind == MacEventKind::kDropped);
  CHECK_FALSE(r.errored);
}

TEST_CASE("TED recovery cost is R per distinct error cycle") {
  CHECK(ted_recovery_cycles(0, 1) == 0);
  CHECK(ted_recovery_cycles(7, 1) == 7);
  CHECK(ted_recovery_cycles(7, 5) == 35);
  CHECK_THROWS_AS(ted_recovery_cycles(1, 0), config_error);
}
