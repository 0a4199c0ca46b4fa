#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "parsons/code_model.hpp"
#include "parsons/solution_forge.hpp"

namespace parsons {

inline constexpr int kDefaultDistractorCap = 3;

struct PuzzleConfig {
    int distractor_cap = kDefaultDistractorCap;
    int tab_width = kDefaultTabWidth;
};

struct Puzzle {
    BlockSequence solution_blocks;    // correct order
    std::vector<Block> distractors;   // in minting order
    std::vector<std::string> preplaced;   // solution block ids, in solution order
    std::vector<std::string> tray_order;  // shuffled non-preplaced blocks + distractors
    std::uint64_t seed = 0;
    std::string source_solution;
    int tab_width = kDefaultTabWidth;

    bool is_distractor(const std::string& id) const;
    const Block* find(const std::string& id) const;
    std::vector<std::string> solution_ids() const;
    std::size_t block_count() const { return solution_blocks.blocks.size() + distractors.size(); }

    bool operator==(const Puzzle&) const = default;
};

/// Seeded Fisher-Yates. Returns a permutation of [0, count).
std::vector<std::size_t> shuffle_tray(std::size_t count, std::uint64_t seed);
std::vector<std::size_t> shuffle_tray(std::span<const Block> items, std::uint64_t seed);

/// Segments the verified solution, pre-places blocks whose every line the
/// student already has, mints distractors from the student's incorrect lines,
/// and shuffles the rest into the tray. Block ids are opaque tokens derived from
/// the seed so they reveal neither order nor distractor status.
Puzzle make_puzzle(const VerifiedSolution& sol, const std::string& student_code,
                   const PuzzleConfig& cfg, std::uint64_t seed);

void to_json(nlohmann::json& j, const Block& b);
void from_json(const nlohmann::json& j, Block& b);
void to_json(nlohmann::json& j, const Puzzle& p);
void from_json(const nlohmann::json& j, Puzzle& p);

}  // namespace parsons
