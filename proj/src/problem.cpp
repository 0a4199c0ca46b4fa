#include "parsons/problem.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "parsons/error.hpp"
#include "parsons/storage.hpp"

namespace parsons {

void to_json(nlohmann::json& j, const Problem& p) {
    j = {{"id", p.id},
         {"title", p.title},
         {"prompt", p.prompt},
         {"reference_solution", p.reference_solution},
         {"tests", p.tests},
         {"topic", p.topic}};
}

void from_json(const nlohmann::json& j, Problem& p) {
    p.id = j.at("id").get<std::string>();
    p.title = j.value("title", p.id);
    p.prompt = j.at("prompt").get<std::string>();
    p.reference_solution = j.value("reference_solution", std::string());
    p.tests = j.at("tests").get<std::vector<TestCase>>();
    p.topic = j.value("topic", std::string());
}

std::vector<Problem> parse_problem_bank(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("problem bank is not valid JSON: ") + e.what());
    }
    if (!doc.contains("problems") || !doc["problems"].is_array())
        throw Error(ErrorCode::ParseError, "problem bank needs a top-level \"problems\" array");

    std::vector<Problem> problems;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc["problems"].size(); ++i) {
        Problem p;
        try {
            p = doc["problems"][i].get<Problem>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError,
                        "problem #" + std::to_string(i) + " is malformed: " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError, "problem #" + std::to_string(i) + ": " + e.what());
        }
        if (p.id.empty()) throw Error(ErrorCode::ParseError, "problem #" + std::to_string(i) + " has an empty id");
        if (p.prompt.empty()) throw Error(ErrorCode::ParseError, "problem '" + p.id + "' has an empty prompt");
        if (p.tests.empty()) throw Error(ErrorCode::ParseError, "problem '" + p.id + "' has no tests");
        if (!seen.insert(p.id).second) throw Error(ErrorCode::ParseError, "duplicate problem id '" + p.id + "'");
        problems.push_back(std::move(p));
    }
    return problems;
}

std::vector<Problem> load_problem_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot read problem bank " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_problem_bank(buf.str());
}

void save_problem_bank(const std::filesystem::path& path, const std::vector<Problem>& problems) {
    nlohmann::json doc = {{"problems", problems}};
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace parsons
