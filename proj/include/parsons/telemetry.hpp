#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace parsons {

enum class Condition { PC, CC };
std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view s);

enum class EventKind {
    SessionStart,
    QuestionOpen,
    Run,
    HelpRequest,
    PuzzleMove,
    PuzzleCheck,
    Adaptation,
    Regenerate,
    CopyAnswer,
    Submit,
    QuestionComplete,
};
std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

inline constexpr int kEventSchemaVersion = 1;

struct SessionEvent {
    std::string session_id;
    std::string student_id;
    Condition condition = Condition::PC;
    std::string question_id;  // empty for session-level events
    EventKind kind = EventKind::SessionStart;
    std::int64_t timestamp_ms = 0;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const SessionEvent&) const = default;
};

/// One JSON object per line, keys in a fixed order, with a "v" schema field.
std::string serialize_event(const SessionEvent& e);
SessionEvent parse_event(const std::string& line);

/// Parses a whole log; throws MalformedLog naming the line number.
std::vector<SessionEvent> parse_event_log(const std::string& text);
std::vector<SessionEvent> load_event_log(const std::filesystem::path& path);

/// Throws MalformedLog on decreasing timestamps within a session or a
/// QuestionComplete without an earlier QuestionOpen for that question.
void validate_log(const std::vector<SessionEvent>& log);

/// Append-only, single-writer event log. Appends are serialized by a mutex;
/// snapshot() hands readers a copy.
class EventLog {
public:
    EventLog() = default;
    /// Appends to `path` (created if absent) and loads existing records.
    explicit EventLog(const std::filesystem::path& path);

    void append(const SessionEvent& e);
    std::vector<SessionEvent> snapshot() const;
    void flush();
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<SessionEvent> events_;
    std::optional<std::ofstream> file_;
};

using StudentMinutes = std::map<std::string, double>;
using StudentCounts = std::map<std::string, std::int64_t>;

struct PracticeTimeOptions {
    /// When > 0, gaps between consecutive events on a question are capped at
    /// this many milliseconds. Off by default.
    std::int64_t idle_cap_ms = 0;
};

/// Per student: sum over questions of (QuestionComplete, or last event on the
/// question) minus the first QuestionOpen, in minutes.
StudentMinutes practice_time(const std::vector<SessionEvent>& log, const PracticeTimeOptions& opts = {});

/// Run + Submit + PuzzleCheck events per student.
StudentCounts count_attempts(const std::vector<SessionEvent>& log);

inline constexpr double kFastFinisherMinutes = 2.0;

struct EngagementRecord {
    std::string student_id;
    Condition condition = Condition::PC;
    double practice_minutes = 0.0;
    std::int64_t attempts = 0;
    bool fast_finisher = false;

    bool operator==(const EngagementRecord&) const = default;
};

/// Strictly less than the threshold is flagged.
std::vector<EngagementRecord> flag_fast_finishers(std::vector<EngagementRecord> records,
                                                  double threshold_minutes = kFastFinisherMinutes);

/// One record per student seen in the log, ordered by student id.
std::vector<EngagementRecord> engagement_records(const std::vector<SessionEvent>& log,
                                                 double threshold_minutes = kFastFinisherMinutes,
                                                 const PracticeTimeOptions& opts = {});

}  // namespace parsons
