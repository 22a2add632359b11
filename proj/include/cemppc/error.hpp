#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cemppc {

enum class ErrorKind {
    InvalidInput,
    Domain,
    Instability,
    NonStabilizable,
    UnsupportedDimension,
    UnboundedSet,
    SamplingFailure,
    InvalidHorizon,
    SolverFailure,
    Divergence,
    RoaMembershipUnknown,
    InvalidBudget,
    MissingGain,
    Config,
    Io,
    SoundnessViolation,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace cemppc
