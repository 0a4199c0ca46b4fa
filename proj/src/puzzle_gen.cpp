#include "parsons/puzzle_gen.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <unordered_set>

#include "parsons/rng.hpp"

namespace parsons {

namespace {

std::string opaque_id(std::uint64_t seed, std::uint64_t ordinal, std::set<std::string>& taken) {
    for (std::uint64_t salt = 0;; ++salt) {
        const std::uint64_t h = mix_seed(mix_seed(seed, ordinal), salt);
        char buf[16];
        std::snprintf(buf, sizeof buf, "k%06llx", static_cast<unsigned long long>(h & 0xFFFFFFu));
        if (taken.insert(buf).second) return buf;
    }
}

}  // namespace

bool Puzzle::is_distractor(const std::string& id) const {
    return std::any_of(distractors.begin(), distractors.end(),
                       [&](const Block& b) { return b.id == id; });
}

const Block* Puzzle::find(const std::string& id) const {
    for (const auto& b : solution_blocks.blocks)
        if (b.id == id) return &b;
    for (const auto& b : distractors)
        if (b.id == id) return &b;
    return nullptr;
}

std::vector<std::string> Puzzle::solution_ids() const {
    std::vector<std::string> ids;
    for (const auto& b : solution_blocks.blocks) ids.push_back(b.id);
    return ids;
}

std::vector<std::size_t> shuffle_tray(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> perm(count);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    SplitMix64 rng(seed);
    for (std::size_t i = count; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::vector<std::size_t> shuffle_tray(std::span<const Block> items, std::uint64_t seed) {
    return shuffle_tray(items.size(), seed);
}

Puzzle make_puzzle(const VerifiedSolution& sol, const std::string& student_code,
                   const PuzzleConfig& cfg, std::uint64_t seed) {
    Puzzle puzzle;
    puzzle.seed = seed;
    puzzle.source_solution = sol.source;
    puzzle.tab_width = cfg.tab_width;
    puzzle.solution_blocks = segment_blocks(sol.source, {cfg.tab_width, true});

    const Alignment alignment = align_lines(student_code, sol.source, cfg.tab_width);
    std::unordered_set<std::size_t> matched_solution_lines;
    for (auto [s, t] : alignment.pairs) matched_solution_lines.insert(t);

    std::set<std::string> taken;
    std::uint64_t ordinal = 0;
    std::unordered_set<std::string> solution_keys;
    for (auto& block : puzzle.solution_blocks.blocks) {
        const bool all_paired =
            std::all_of(block.source_lines.begin(), block.source_lines.end(),
                        [&](std::size_t line) { return matched_solution_lines.count(line) > 0; });
        block.id = opaque_id(seed, ordinal++, taken);
        if (all_paired) puzzle.preplaced.push_back(block.id);
        solution_keys.insert(block.key());
        for (const auto& line : block.lines) solution_keys.insert(line.key);
    }

    const auto student_lines = split_lines(student_code);
    const LineClassification labels = classify_student_lines(alignment);
    std::unordered_set<std::string> minted;
    const auto cap = static_cast<std::size_t>(std::max(0, cfg.distractor_cap));
    for (std::size_t i = 0; i < student_lines.size() && puzzle.distractors.size() < cap; ++i) {
        if (labels.labels[i] != LineLabel::Incorrect) continue;
        NormalizedLine line = normalize_line(student_lines[i], cfg.tab_width);
        if (line.is_comment_only) continue;
        if (solution_keys.count(line.key) || !minted.insert(line.key).second) continue;
        Block d;
        d.indent = line.indent;
        d.lines.push_back(std::move(line));
        d.source_lines.push_back(i);
        d.id = opaque_id(seed, ordinal++, taken);
        puzzle.distractors.push_back(std::move(d));
    }

    std::vector<std::string> tray_items;
    std::set<std::string> preplaced(puzzle.preplaced.begin(), puzzle.preplaced.end());
    for (const auto& b : puzzle.solution_blocks.blocks)
        if (!preplaced.count(b.id)) tray_items.push_back(b.id);
    for (const auto& d : puzzle.distractors) tray_items.push_back(d.id);
    for (std::size_t idx : shuffle_tray(tray_items.size(), mix_seed(seed, "tray")))
        puzzle.tray_order.push_back(tray_items[idx]);
    return puzzle;
}

void to_json(nlohmann::json& j, const Block& b) {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& l : b.lines) lines.push_back(l.raw);
    j = {{"id", b.id}, {"indent", b.indent}, {"lines", lines}};
}

void from_json(const nlohmann::json& j, Block& b) {
    b.id = j.at("id").get<std::string>();
    b.indent = j.at("indent").get<int>();
    b.lines.clear();
    for (const auto& raw : j.at("lines")) b.lines.push_back(normalize_line(raw.get<std::string>()));
}

void to_json(nlohmann::json& j, const Puzzle& p) {
    j = {{"solution_blocks", p.solution_blocks.blocks},
         {"distractors", p.distractors},
         {"preplaced", p.preplaced},
         {"tray_order", p.tray_order},
         {"seed", p.seed},
         {"source_solution", p.source_solution},
         {"tab_width", p.tab_width}};
}

void from_json(const nlohmann::json& j, Puzzle& p) {
    p.tab_width = j.value("tab_width", kDefaultTabWidth);
    p.solution_blocks.blocks = j.at("solution_blocks").get<std::vector<Block>>();
    p.distractors = j.at("distractors").get<std::vector<Block>>();
    for (auto* group : {&p.solution_blocks.blocks, &p.distractors})
        for (auto& b : *group)
            for (auto& l : b.lines) l = normalize_line(l.raw, p.tab_width);
    p.preplaced = j.at("preplaced").get<std::vector<std::string>>();
    p.tray_order = j.at("tray_order").get<std::vector<std::string>>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.source_solution = j.at("source_solution").get<std::string>();
}

}  // namespace parsons
