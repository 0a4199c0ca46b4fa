#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "parsons/exec_harness.hpp"

namespace parsons {

struct Problem {
    std::string id;
    std::string title;
    std::string prompt;
    std::string reference_solution;
    std::vector<TestCase> tests;
    std::string topic;
};

void to_json(nlohmann::json& j, const Problem& p);
void from_json(const nlohmann::json& j, Problem& p);

/// Reads `{"problems": [...]}`. Throws ParseError on malformed JSON, missing
/// fields, or duplicate problem ids (the message names the id).
std::vector<Problem> load_problem_bank(const std::filesystem::path& path);
std::vector<Problem> parse_problem_bank(const std::string& text);
void save_problem_bank(const std::filesystem::path& path, const std::vector<Problem>& problems);

}  // namespace parsons
