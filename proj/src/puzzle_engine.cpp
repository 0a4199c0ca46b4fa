#include "parsons/puzzle_engine.hpp"

#include <algorithm>
#include <set>

#include "parsons/error.hpp"

namespace parsons {

namespace {

std::vector<std::string>* container_of(PuzzleState& s, const std::string& id, std::size_t& index) {
    for (auto* c : {&s.tray, &s.area}) {
        auto it = std::find(c->begin(), c->end(), id);
        if (it != c->end()) {
            index = static_cast<std::size_t>(it - c->begin());
            return c;
        }
    }
    return nullptr;
}

void erase_id(std::vector<std::string>& v, const std::string& id) {
    v.erase(std::remove(v.begin(), v.end(), id), v.end());
}

void require_unsolved(const PuzzleState& s) {
    if (s.solved) throw Error(ErrorCode::PuzzleAlreadySolved, "puzzle is already solved");
}

}  // namespace

std::string_view to_string(AdaptationAction::Kind kind) {
    return kind == AdaptationAction::Kind::RemoveDistractor ? "RemoveDistractor" : "CombineBlocks";
}

PuzzleState new_state(const Puzzle& p) {
    PuzzleState s;
    s.puzzle = p;
    s.area = p.preplaced;
    s.tray = p.tray_order;
    return s;
}

PuzzleState apply_move(PuzzleState s, const Move& m) {
    require_unsolved(s);
    std::size_t from = 0;
    std::vector<std::string>* source = container_of(s, m.block_id, from);
    if (!source) throw Error(ErrorCode::UnknownBlock, "no block '" + m.block_id + "' in this puzzle");

    if (std::holds_alternative<ToTray>(m.target)) {
        if (source == &s.tray) return s;
        source->erase(source->begin() + static_cast<long>(from));
        s.tray.push_back(m.block_id);
        return s;
    }

    std::size_t position = std::get<ToArea>(m.target).position;
    if (position > s.area.size())
        throw Error(ErrorCode::PositionOutOfRange,
                    "position " + std::to_string(position) + " exceeds area size " + std::to_string(s.area.size()));
    source->erase(source->begin() + static_cast<long>(from));
    position = std::min(position, s.area.size());
    s.area.insert(s.area.begin() + static_cast<long>(position), m.block_id);
    return s;
}

std::pair<PuzzleState, Feedback> check(PuzzleState s) {
    require_unsolved(s);
    ++s.attempts;

    const auto& solution = s.puzzle.solution_blocks.blocks;
    Feedback fb;
    std::size_t expected = 0;
    for (std::size_t p = 0; p < s.area.size(); ++p) {
        const std::string& id = s.area[p];
        if (s.puzzle.is_distractor(id)) {
            fb.first_error_position = p;
            fb.distractor_flagged = id;
            break;
        }
        const Block* block = s.puzzle.find(id);
        if (expected < solution.size() && block->key() == solution[expected].key()) {
            ++expected;
            continue;
        }
        fb.first_error_position = p;
        break;
    }
    for (const auto& id : s.tray) fb.missing_blocks += !s.puzzle.is_distractor(id);

    fb.correct = !fb.first_error_position && expected == solution.size() && fb.missing_blocks == 0;
    if (fb.correct) {
        s.solved = true;
        fb.missing_blocks = 0;
    }
    return {std::move(s), fb};
}

std::pair<PuzzleState, AdaptationAction> help_me(PuzzleState s, int min_attempts) {
    require_unsolved(s);
    if (s.attempts < min_attempts)
        throw Error(ErrorCode::TooFewAttempts, "help needs " + std::to_string(min_attempts) +
                                                   " full attempts, have " + std::to_string(s.attempts));

    auto& distractors = s.puzzle.distractors;
    if (!distractors.empty()) {
        auto pick = std::find_if(distractors.begin(), distractors.end(), [&](const Block& d) {
            return std::find(s.tray.begin(), s.tray.end(), d.id) != s.tray.end();
        });
        if (pick == distractors.end()) pick = distractors.begin();
        const std::string id = pick->id;
        distractors.erase(pick);
        erase_id(s.tray, id);
        erase_id(s.area, id);
        erase_id(s.puzzle.tray_order, id);
        AdaptationAction action{AdaptationAction::Kind::RemoveDistractor, {id}};
        s.adaptations.push_back(action);
        return {std::move(s), action};
    }

    auto& blocks = s.puzzle.solution_blocks.blocks;
    if (blocks.size() < 2) throw Error(ErrorCode::NothingToAdapt, "one block left and no distractors");

    std::set<std::string> merged;
    for (const auto& a : s.adaptations)
        if (a.kind == AdaptationAction::Kind::CombineBlocks) merged.insert(a.affected.front());
    std::size_t k = 0;
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
        if (!merged.count(blocks[i].id) && !merged.count(blocks[i + 1].id)) {
            k = i;
            break;
        }
    }

    Block& first = blocks[k];
    Block second = std::move(blocks[k + 1]);
    blocks.erase(blocks.begin() + static_cast<long>(k + 1));
    for (std::size_t i = 0; i < second.lines.size(); ++i) {
        first.lines.push_back(std::move(second.lines[i]));
        if (i < second.source_lines.size()) first.source_lines.push_back(second.source_lines[i]);
    }
    erase_id(s.tray, second.id);
    erase_id(s.area, second.id);
    erase_id(s.puzzle.tray_order, second.id);
    erase_id(s.puzzle.preplaced, second.id);

    AdaptationAction action{AdaptationAction::Kind::CombineBlocks, {first.id, second.id}};
    s.adaptations.push_back(action);
    return {std::move(s), action};
}

std::string assemble(const PuzzleState& s) {
    if (!s.solved) throw Error(ErrorCode::NotSolved, "puzzle is not solved yet");
    std::string out;
    for (const auto& id : s.area) {
        const Block* b = s.puzzle.find(id);
        if (!out.empty()) out += '\n';
        out += b->text();
    }
    return out;
}

std::vector<Move> plan_optimal_moves(const PuzzleState& s) {
    std::vector<Move> moves;
    PuzzleState sim = s;
    const std::vector<std::string> area = sim.area;
    for (const auto& id : area) {
        if (sim.puzzle.is_distractor(id)) {
            moves.push_back({id, ToTray{}});
            sim = apply_move(std::move(sim), moves.back());
        }
    }
    const auto order = sim.puzzle.solution_ids();
    for (std::size_t p = 0; p < order.size(); ++p) {
        if (p < sim.area.size() && sim.area[p] == order[p]) continue;
        moves.push_back({order[p], ToArea{p}});
        sim = apply_move(std::move(sim), moves.back());
    }
    return moves;
}

void to_json(nlohmann::json& j, const AdaptationAction& a) {
    j = {{"kind", std::string(to_string(a.kind))}, {"affected", a.affected}};
}

void from_json(const nlohmann::json& j, AdaptationAction& a) {
    a.kind = j.at("kind").get<std::string>() == "CombineBlocks" ? AdaptationAction::Kind::CombineBlocks
                                                                 : AdaptationAction::Kind::RemoveDistractor;
    a.affected = j.at("affected").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const Feedback& f) {
    j = {{"correct", f.correct}, {"missing_blocks", f.missing_blocks}};
    j["first_error_position"] =
        f.first_error_position ? nlohmann::json(*f.first_error_position) : nlohmann::json(nullptr);
    j["distractor_flagged"] = f.distractor_flagged ? nlohmann::json(*f.distractor_flagged) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const PuzzleState& s) {
    j = {{"puzzle", s.puzzle},     {"tray", s.tray},         {"area", s.area},
         {"attempts", s.attempts}, {"adaptations", s.adaptations}, {"solved", s.solved}};
}

void from_json(const nlohmann::json& j, PuzzleState& s) {
    s.puzzle = j.at("puzzle").get<Puzzle>();
    s.tray = j.at("tray").get<std::vector<std::string>>();
    s.area = j.at("area").get<std::vector<std::string>>();
    s.attempts = j.at("attempts").get<int>();
    s.adaptations = j.at("adaptations").get<std::vector<AdaptationAction>>();
    s.solved = j.at("solved").get<bool>();
}

nlohmann::json client_view(const PuzzleState& s) {
    std::vector<const Block*> blocks;
    for (const auto& b : s.puzzle.solution_blocks.blocks) blocks.push_back(&b);
    for (const auto& b : s.puzzle.distractors) blocks.push_back(&b);
    std::sort(blocks.begin(), blocks.end(), [](const Block* a, const Block* b) { return a->id < b->id; });

    nlohmann::json view;
    view["blocks"] = nlohmann::json::array();
    for (const Block* b : blocks) view["blocks"].push_back({{"id", b->id}, {"text", b->text()}, {"indent", b->indent}});
    view["tray"] = s.tray;
    view["area"] = s.area;
    view["attempts"] = s.attempts;
    view["solved"] = s.solved;
    view["seed"] = s.puzzle.seed;
    view["adaptations"] = s.adaptations;
    return view;
}

}  // namespace parsons
