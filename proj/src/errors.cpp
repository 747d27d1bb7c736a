#include "uavheal/errors.hpp"

namespace uavheal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Domain: return "domain error";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::DegenerateInput: return "degenerate input";
    case ErrorCode::DisconnectedVrg: return "disconnected virtual graph";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::TrainingDiverged: return "training diverged";
    case ErrorCode::GenerationInfeasible: return "generation infeasible";
    case ErrorCode::StoreMiss: return "store miss";
    case ErrorCode::StoreFormat: return "store format";
    case ErrorCode::ScheduleInvalid: return "schedule invalid";
    case ErrorCode::ProtocolCorruption: return "protocol corruption";
    case ErrorCode::NoBreakingSet: return "no breaking set found";
    case ErrorCode::HealFailed: return "heal failed";
    case ErrorCode::ContractViolation: return "contract violation";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "io error";
  }
  return "unknown";
}

}  // namespace uavheal
