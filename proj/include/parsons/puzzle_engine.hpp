#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "parsons/puzzle_gen.hpp"

namespace parsons {

inline constexpr int kDefaultMinAttempts = 3;

struct ToTray {
    bool operator==(const ToTray&) const = default;
};
struct ToArea {
    std::size_t position = 0;
    bool operator==(const ToArea&) const = default;
};

struct Move {
    std::string block_id;
    std::variant<ToTray, ToArea> target;

    bool operator==(const Move&) const = default;
};

struct Feedback {
    bool correct = false;
    std::optional<std::size_t> first_error_position;
    std::optional<std::string> distractor_flagged;
    /// Solution blocks still sitting in the tray. Reported when the placed
    /// prefix is fine but incomplete.
    std::size_t missing_blocks = 0;
};

struct AdaptationAction {
    enum class Kind { RemoveDistractor, CombineBlocks };
    Kind kind = Kind::RemoveDistractor;
    std::vector<std::string> affected;

    bool operator==(const AdaptationAction&) const = default;
};

std::string_view to_string(AdaptationAction::Kind kind);

/// The state owns its copy of the puzzle because adaptation edits the block
/// universe (distractors removed, neighbours merged).
struct PuzzleState {
    Puzzle puzzle;
    std::vector<std::string> tray;
    std::vector<std::string> area;
    int attempts = 0;
    std::vector<AdaptationAction> adaptations;
    bool solved = false;

    bool operator==(const PuzzleState&) const = default;
};

PuzzleState new_state(const Puzzle& p);

/// Throws UnknownBlock, PositionOutOfRange, PuzzleAlreadySolved. A position is
/// validated against the current area size; when the block moves within the
/// area it is clamped to the end after removal.
PuzzleState apply_move(PuzzleState s, const Move& m);

/// Comparison is by block key, so blocks with identical text are
/// interchangeable. Indentation never matters.
std::pair<PuzzleState, Feedback> check(PuzzleState s);

/// Removes the earliest-minted distractor (tray first, then area); with none
/// left, merges the earliest adjacent pair of solution blocks, preferring
/// blocks that are not themselves products of an earlier merge.
std::pair<PuzzleState, AdaptationAction> help_me(PuzzleState s, int min_attempts = kDefaultMinAttempts);

std::string assemble(const PuzzleState& s);

/// Moves that take any state to the solved arrangement. Server-side helper
/// for simulation and tests; it reads the hidden solution order.
std::vector<Move> plan_optimal_moves(const PuzzleState& s);

/// Full state for persistence.
void to_json(nlohmann::json& j, const PuzzleState& s);
void from_json(const nlohmann::json& j, PuzzleState& s);
void to_json(nlohmann::json& j, const Feedback& f);
void to_json(nlohmann::json& j, const AdaptationAction& a);
void from_json(const nlohmann::json& j, AdaptationAction& a);

/// What a student client sees: blocks (sorted by id), containers, attempts.
/// Solution order and distractor identity stay server-side.
nlohmann::json client_view(const PuzzleState& s);

}  // namespace parsons
