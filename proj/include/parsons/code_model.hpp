#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace parsons {

inline constexpr int kDefaultTabWidth = 4;

struct NormalizedLine {
    std::string raw;
    std::string key;  // raw without indentation and trailing whitespace
    int indent = 0;   // leading whitespace width, tabs expanded to tab stops
    bool is_blank = false;
    bool is_comment_only = false;

    bool operator==(const NormalizedLine&) const = default;
};

NormalizedLine normalize_line(std::string_view raw, int tab_width = kDefaultTabWidth);

/// Splits on '\n' and drops a trailing '\r' from each line. A trailing
/// newline does not produce an extra empty line; "" yields no lines.
std::vector<std::string> split_lines(std::string_view text);

std::string join_lines(const std::vector<std::string>& lines);

/// Canonical program text: trailing whitespace stripped, blank lines removed,
/// '\n'-joined without a final newline. Assembling a solved puzzle reproduces
/// exactly this form.
std::string canonical_source(std::string_view text);

struct Block {
    std::string id;
    std::vector<NormalizedLine> lines;
    int indent = 0;
    /// Line indices into the segmented text (all lines, blanks included).
    /// Positional bookkeeping only; not part of block identity.
    std::vector<std::size_t> source_lines;

    /// Comparison key used for distractor collisions and order checks.
    std::string key() const;
    std::string text() const;

    bool operator==(const Block& other) const {
        return id == other.id && lines == other.lines && indent == other.indent;
    }
};

struct BlockSequence {
    std::vector<Block> blocks;

    std::string text() const;
    bool operator==(const BlockSequence&) const = default;
};

struct SegmentPolicy {
    int tab_width = kDefaultTabWidth;
    /// Attach comment-only lines to the following code block.
    bool attach_comments = true;
};

/// One non-blank logical line per block. Ids are "b1", "b2", ... in source
/// order; puzzle-gen remaps them to opaque ids. Throws EmptySolution.
BlockSequence segment_blocks(std::string_view solution, const SegmentPolicy& policy = {});

struct Alignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (student, solution)
    std::vector<std::size_t> student_unmatched;
    std::vector<std::size_t> solution_unmatched;
    std::vector<bool> student_blank;  // one flag per student line
    std::size_t solution_line_count = 0;

    std::size_t student_line_count() const { return student_blank.size(); }
};

/// LCS over normalized keys of non-blank lines. Among maximum-length matches
/// the solution index sequence is lexicographically smallest, then the
/// student index sequence. Blank lines always land in the unmatched sets.
Alignment align_lines(std::string_view student, std::string_view solution,
                      int tab_width = kDefaultTabWidth);

enum class LineLabel { Correct, Incorrect, Blank };

struct LineClassification {
    std::vector<LineLabel> labels;  // one per student line

    std::size_t count(LineLabel label) const;
};

/// Blank student lines are unmatched by construction; they get LineLabel::Blank
/// so the labels still cover every student line.
LineClassification classify_student_lines(const Alignment& a);

}  // namespace parsons
