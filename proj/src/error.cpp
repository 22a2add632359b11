#include "cemppc/error.hpp"

namespace cemppc {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Instability: return "instability";
    case ErrorKind::NonStabilizable: return "non-stabilizable";
    case ErrorKind::UnsupportedDimension: return "unsupported-dimension";
    case ErrorKind::UnboundedSet: return "unbounded-set";
    case ErrorKind::SamplingFailure: return "sampling-failure";
    case ErrorKind::InvalidHorizon: return "invalid-horizon";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::RoaMembershipUnknown: return "roa-membership-unknown";
    case ErrorKind::InvalidBudget: return "invalid-budget";
    case ErrorKind::MissingGain: return "missing-gain";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::SoundnessViolation: return "soundness-violation";
    }
    return "unknown";
}

} // namespace cemppc
