// errors.hpp: exception taxonomy shared by library and CLI.
//
// Each class maps to a distinct process exit code so scripted callers can
// tell "your config is wrong" from "your input files are bad" from "the
// simulator caught itself in an inconsistent state".
#pragma once

#include <stdexcept>
#include <string>

namespace uvsim {

// Invalid or contradictory configuration (bad policy name, empty voltage
// grid, recovery cycles < 1, ...). Exit code 1.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input data (truncated IDX file, manifest that
// does not match tensor shapes, unparseable profile CSV, ...). Exit code 2.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Internal invariant violation; always a bug in the simulator itself.
// Exit code 3.
class invariant_error : public std::logic_error {
 public:
  explicit invariant_error(const std::string& what) : std::logic_error(what) {}
};

// Throws invariant_error when `cond` is false. Used for cheap internal
// consistency checks that must never fire on any user input.
inline void require_invariant(bool cond, const char* msg) {
  if (!cond) throw invariant_error(msg);
}

}  // namespace uvsim
