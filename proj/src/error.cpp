#include "parsons/error.hpp"

namespace parsons {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptySolution: return "EmptySolution";
        case ErrorCode::NoCode: return "NoCode";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::NoVerifiedSolution: return "NoVerifiedSolution";
        case ErrorCode::RunnerMissing: return "RunnerMissing";
        case ErrorCode::MalformedTest: return "MalformedTest";
        case ErrorCode::UnknownBlock: return "UnknownBlock";
        case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
        case ErrorCode::PuzzleAlreadySolved: return "PuzzleAlreadySolved";
        case ErrorCode::TooFewAttempts: return "TooFewAttempts";
        case ErrorCode::NothingToAdapt: return "NothingToAdapt";
        case ErrorCode::NotSolved: return "NotSolved";
        case ErrorCode::MalformedLog: return "MalformedLog";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::URangeViolation: return "URangeViolation";
        case ErrorCode::MissingCondition: return "MissingCondition";
        case ErrorCode::VerificationFailed: return "VerificationFailed";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DuplicateSession: return "DuplicateSession";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::UnknownProblem: return "UnknownProblem";
        case ErrorCode::WrongCondition: return "WrongCondition";
        case ErrorCode::NoActivePuzzle: return "NoActivePuzzle";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ScriptError: return "ScriptError";
    }
    return "Unknown";
}

}  // namespace parsons
