#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace parsons {

enum class ErrorCode {
    // code-model
    EmptySolution,
    // solution-forge
    NoCode,
    ProviderUnavailable,
    NoVerifiedSolution,
    // exec-harness
    RunnerMissing,
    MalformedTest,
    // puzzle-engine
    UnknownBlock,
    PositionOutOfRange,
    PuzzleAlreadySolved,
    TooFewAttempts,
    NothingToAdapt,
    NotSolved,
    // telemetry
    MalformedLog,
    // analytics
    NonFiniteValue,
    EmptySample,
    URangeViolation,
    MissingCondition,
    // scaffold-service
    VerificationFailed,
    ParseError,
    DuplicateSession,
    UnknownSession,
    UnknownProblem,
    WrongCondition,
    NoActivePuzzle,
    Unauthorized,
    // cli
    ConfigError,
    ScriptError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// the HTTP layer and the CLI can map it onto a status or exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace parsons
