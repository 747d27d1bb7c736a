#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uavheal {

enum class ErrorCode {
  Domain,
  Infeasible,
  Unsupported,
  DegenerateInput,
  DisconnectedVrg,
  NonConvergence,
  TrainingDiverged,
  GenerationInfeasible,
  StoreMiss,
  StoreFormat,
  ScheduleInvalid,
  ProtocolCorruption,
  NoBreakingSet,
  HealFailed,
  ContractViolation,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, const char* what) {
  if (!condition) throw Error(ErrorCode::ContractViolation, what);
}

}  // namespace uavheal
