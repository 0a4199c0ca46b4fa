#include "parsons/code_model.hpp"

#include <algorithm>
#include <string>

#include "parsons/error.hpp"

namespace parsons {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view rtrim(std::string_view s) {
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace

NormalizedLine normalize_line(std::string_view raw, int tab_width) {
    if (tab_width < 1) tab_width = 1;
    NormalizedLine line;
    line.raw = std::string(raw);

    int width = 0;
    std::size_t pos = 0;
    for (; pos < raw.size(); ++pos) {
        const char c = raw[pos];
        if (c == ' ') {
            ++width;
        } else if (c == '\t') {
            width += tab_width - (width % tab_width);
        } else if (is_space(c)) {
            continue;
        } else {
            break;
        }
    }
    line.key = std::string(rtrim(raw.substr(pos)));
    line.is_blank = line.key.empty();
    line.indent = line.is_blank ? 0 : width;
    line.is_comment_only = !line.is_blank && line.key.front() == '#';
    return line;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = end + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

std::string canonical_source(std::string_view text) {
    std::vector<std::string> kept;
    for (const auto& line : split_lines(text)) {
        std::string_view trimmed = rtrim(line);
        if (trimmed.find_first_not_of(" \t") == std::string_view::npos) continue;
        kept.emplace_back(trimmed);
    }
    return join_lines(kept);
}

std::string Block::key() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i].key;
    }
    return out;
}

std::string Block::text() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i].raw;
    }
    return out;
}

std::string BlockSequence::text() const {
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i) out += '\n';
        out += blocks[i].text();
    }
    return out;
}

BlockSequence segment_blocks(std::string_view solution, const SegmentPolicy& policy) {
    const auto raw_lines = split_lines(solution);
    BlockSequence seq;
    Block pending;

    auto flush = [&](Block&& b) {
        b.id = "b" + std::to_string(seq.blocks.size() + 1);
        b.indent = b.lines.front().indent;
        seq.blocks.push_back(std::move(b));
    };

    for (std::size_t i = 0; i < raw_lines.size(); ++i) {
        NormalizedLine line = normalize_line(raw_lines[i], policy.tab_width);
        if (line.is_blank) continue;
        const bool comment = line.is_comment_only;
        pending.lines.push_back(std::move(line));
        pending.source_lines.push_back(i);
        if (!comment || !policy.attach_comments) {
            flush(std::move(pending));
            pending = Block{};
        }
    }

    if (!pending.lines.empty()) {
        // Trailing comments have no following code line.
        if (seq.blocks.empty()) {
            flush(std::move(pending));
        } else {
            Block& last = seq.blocks.back();
            for (std::size_t k = 0; k < pending.lines.size(); ++k) {
                last.lines.push_back(std::move(pending.lines[k]));
                last.source_lines.push_back(pending.source_lines[k]);
            }
        }
    }

    if (seq.blocks.empty()) throw Error(ErrorCode::EmptySolution, "solution has no non-blank lines");
    return seq;
}

Alignment align_lines(std::string_view student, std::string_view solution, int tab_width) {
    struct Keyed {
        std::size_t index;
        std::string key;
    };
    auto keyed = [tab_width](std::string_view text, std::vector<bool>* blank_flags) {
        std::vector<Keyed> out;
        const auto lines = split_lines(text);
        if (blank_flags) blank_flags->assign(lines.size(), false);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            NormalizedLine n = normalize_line(lines[i], tab_width);
            if (n.is_blank) {
                if (blank_flags) (*blank_flags)[i] = true;
                continue;
            }
            out.push_back({i, std::move(n.key)});
        }
        return std::pair{out, lines.size()};
    };

    Alignment a;
    auto [s, s_count] = keyed(student, &a.student_blank);
    auto [t, t_count] = keyed(solution, nullptr);
    a.solution_line_count = t_count;

    const std::size_t n = s.size();
    const std::size_t m = t.size();
    // suffix[i][j] = LCS length of s[i..] and t[j..]
    std::vector<std::vector<int>> suffix(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            suffix[i][j] = s[i].key == t[j].key ? suffix[i + 1][j + 1] + 1
                                                : std::max(suffix[i + 1][j], suffix[i][j + 1]);
        }
    }

    // Leftmost reconstruction: pick the smallest solution index that can still
    // start a maximum-length completion, then the smallest student index for it.
    std::size_t i = 0, j = 0;
    int remaining = suffix[0][0];
    while (remaining > 0) {
        bool found = false;
        for (std::size_t jj = j; jj < m && !found; ++jj) {
            for (std::size_t ii = i; ii < n; ++ii) {
                if (s[ii].key == t[jj].key && suffix[ii + 1][jj + 1] == remaining - 1) {
                    a.pairs.emplace_back(s[ii].index, t[jj].index);
                    i = ii + 1;
                    j = jj + 1;
                    found = true;
                    break;
                }
            }
        }
        --remaining;
    }

    std::vector<bool> s_used(s_count, false), t_used(t_count, false);
    for (auto [si, ti] : a.pairs) {
        s_used[si] = true;
        t_used[ti] = true;
    }
    for (std::size_t k = 0; k < s_count; ++k)
        if (!s_used[k]) a.student_unmatched.push_back(k);
    for (std::size_t k = 0; k < t_count; ++k)
        if (!t_used[k]) a.solution_unmatched.push_back(k);
    return a;
}

std::size_t LineClassification::count(LineLabel label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

LineClassification classify_student_lines(const Alignment& a) {
    LineClassification c;
    c.labels.assign(a.student_line_count(), LineLabel::Incorrect);
    for (std::size_t i = 0; i < a.student_blank.size(); ++i)
        if (a.student_blank[i]) c.labels[i] = LineLabel::Blank;
    for (auto [si, ti] : a.pairs) c.labels[si] = LineLabel::Correct;
    return c;
}

}  // namespace parsons
