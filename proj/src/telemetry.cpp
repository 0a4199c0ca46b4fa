#include "parsons/telemetry.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "parsons/error.hpp"

namespace parsons {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 11> kKindNames{{
    {EventKind::SessionStart, "SessionStart"},
    {EventKind::QuestionOpen, "QuestionOpen"},
    {EventKind::Run, "Run"},
    {EventKind::HelpRequest, "HelpRequest"},
    {EventKind::PuzzleMove, "PuzzleMove"},
    {EventKind::PuzzleCheck, "PuzzleCheck"},
    {EventKind::Adaptation, "Adaptation"},
    {EventKind::Regenerate, "Regenerate"},
    {EventKind::CopyAnswer, "CopyAnswer"},
    {EventKind::Submit, "Submit"},
    {EventKind::QuestionComplete, "QuestionComplete"},
}};

}  // namespace

std::string_view to_string(Condition c) { return c == Condition::PC ? "PC" : "CC"; }

Condition condition_from_string(std::string_view s) {
    if (s == "PC") return Condition::PC;
    if (s == "CC") return Condition::CC;
    throw std::invalid_argument("unknown condition '" + std::string(s) + "'");
}

std::string_view to_string(EventKind k) {
    for (auto [kind, name] : kKindNames)
        if (kind == k) return name;
    return "Unknown";
}

EventKind event_kind_from_string(std::string_view s) {
    for (auto [kind, name] : kKindNames)
        if (name == s) return kind;
    throw std::invalid_argument("unknown event kind '" + std::string(s) + "'");
}

std::string serialize_event(const SessionEvent& e) {
    nlohmann::json j = {{"v", kEventSchemaVersion},
                        {"session_id", e.session_id},
                        {"student_id", e.student_id},
                        {"condition", std::string(to_string(e.condition))},
                        {"question_id", e.question_id},
                        {"kind", std::string(to_string(e.kind))},
                        {"ts", e.timestamp_ms},
                        {"payload", e.payload}};
    return j.dump();
}

SessionEvent parse_event(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("v", 0) != kEventSchemaVersion)
        throw std::invalid_argument("unsupported schema version");
    SessionEvent e;
    e.session_id = j.at("session_id").get<std::string>();
    e.student_id = j.at("student_id").get<std::string>();
    e.condition = condition_from_string(j.at("condition").get<std::string>());
    e.question_id = j.value("question_id", std::string());
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.timestamp_ms = j.at("ts").get<std::int64_t>();
    e.payload = j.value("payload", nlohmann::json::object());
    return e;
}

std::vector<SessionEvent> parse_event_log(const std::string& text) {
    std::vector<SessionEvent> log;
    std::istringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            log.push_back(parse_event(line));
        } catch (const std::exception& ex) {
            throw Error(ErrorCode::MalformedLog, "line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return log;
}

std::vector<SessionEvent> load_event_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MalformedLog, "cannot read event log " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_event_log(buf.str());
}

void validate_log(const std::vector<SessionEvent>& log) {
    std::map<std::string, std::int64_t> last_ts;
    std::set<std::pair<std::string, std::string>> opened;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log[i];
        auto [it, fresh] = last_ts.try_emplace(e.session_id, e.timestamp_ms);
        if (!fresh) {
            if (e.timestamp_ms < it->second)
                throw Error(ErrorCode::MalformedLog, "event " + std::to_string(i) + " of session " +
                                                         e.session_id + " goes back in time");
            it->second = e.timestamp_ms;
        }
        if (e.kind == EventKind::QuestionOpen) opened.emplace(e.session_id, e.question_id);
        if (e.kind == EventKind::QuestionComplete && !opened.count({e.session_id, e.question_id}))
            throw Error(ErrorCode::MalformedLog, "question " + e.question_id + " completed before it was opened in session " +
                                                     e.session_id);
    }
}

EventLog::EventLog(const std::filesystem::path& path) {
    if (auto existing = std::ifstream(path, std::ios::binary)) {
        std::stringstream buf;
        buf << existing.rdbuf();
        events_ = parse_event_log(buf.str());
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_.emplace(path, std::ios::binary | std::ios::app);
    if (!*file_) throw std::runtime_error("cannot open event log " + path.string());
}

void EventLog::append(const SessionEvent& e) {
    std::lock_guard lock(mutex_);
    events_.push_back(e);
    if (file_) {
        *file_ << serialize_event(e) << '\n';
        file_->flush();
    }
}

std::vector<SessionEvent> EventLog::snapshot() const {
    std::lock_guard lock(mutex_);
    return events_;
}

void EventLog::flush() {
    std::lock_guard lock(mutex_);
    if (file_) file_->flush();
}

std::size_t EventLog::size() const {
    std::lock_guard lock(mutex_);
    return events_.size();
}

StudentMinutes practice_time(const std::vector<SessionEvent>& log, const PracticeTimeOptions& opts) {
    validate_log(log);

    struct Span {
        std::optional<std::int64_t> open;
        std::optional<std::int64_t> complete;
        std::vector<std::int64_t> stamps;
    };
    std::map<std::string, std::map<std::string, Span>> spans;
    StudentMinutes minutes;
    for (const auto& e : log) {
        minutes.try_emplace(e.student_id, 0.0);
        if (e.question_id.empty()) continue;
        Span& span = spans[e.student_id][e.question_id];
        if (e.kind == EventKind::QuestionOpen && (!span.open || e.timestamp_ms < *span.open)) span.open = e.timestamp_ms;
        if (e.kind == EventKind::QuestionComplete) span.complete = std::max(span.complete.value_or(e.timestamp_ms), e.timestamp_ms);
        span.stamps.push_back(e.timestamp_ms);
    }

    for (auto& [student, questions] : spans) {
        std::int64_t total_ms = 0;
        for (auto& [question, span] : questions) {
            std::sort(span.stamps.begin(), span.stamps.end());
            const std::int64_t start = span.open.value_or(span.stamps.front());
            const std::int64_t end = span.complete.value_or(span.stamps.back());
            if (end <= start) continue;
            if (opts.idle_cap_ms <= 0) {
                total_ms += end - start;
                continue;
            }
            std::int64_t prev = start;
            for (std::int64_t ts : span.stamps) {
                if (ts <= start) continue;
                const std::int64_t t = std::min(ts, end);
                total_ms += std::min(t - prev, opts.idle_cap_ms);
                prev = t;
                if (t == end) break;
            }
        }
        minutes[student] = static_cast<double>(total_ms) / 60000.0;
    }
    return minutes;
}

StudentCounts count_attempts(const std::vector<SessionEvent>& log) {
    validate_log(log);
    StudentCounts counts;
    for (const auto& e : log) {
        auto& n = counts[e.student_id];
        n += e.kind == EventKind::Run || e.kind == EventKind::Submit || e.kind == EventKind::PuzzleCheck;
    }
    return counts;
}

std::vector<EngagementRecord> flag_fast_finishers(std::vector<EngagementRecord> records, double threshold_minutes) {
    if (!(threshold_minutes > 0)) throw std::invalid_argument("fast-finisher threshold must be positive");
    for (auto& r : records) r.fast_finisher = r.practice_minutes < threshold_minutes;
    return records;
}

std::vector<EngagementRecord> engagement_records(const std::vector<SessionEvent>& log, double threshold_minutes,
                                                 const PracticeTimeOptions& opts) {
    const StudentMinutes minutes = practice_time(log, opts);
    const StudentCounts attempts = count_attempts(log);
    std::map<std::string, Condition> condition;
    for (const auto& e : log) condition.try_emplace(e.student_id, e.condition);

    std::vector<EngagementRecord> records;
    for (const auto& [student, mins] : minutes) {
        EngagementRecord r;
        r.student_id = student;
        r.condition = condition.at(student);
        r.practice_minutes = mins;
        r.attempts = attempts.count(student) ? attempts.at(student) : 0;
        records.push_back(r);
    }
    return flag_fast_finishers(std::move(records), threshold_minutes);
}

}  // namespace parsons
