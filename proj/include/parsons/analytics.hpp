#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "parsons/telemetry.hpp"

namespace parsons::stats {

struct Ranking {
    std::vector<double> ranks;                 // aligned with the input order
    std::vector<std::size_t> tie_group_sizes;  // one entry per distinct value, ascending
};

/// Average ranks for ties, 1-based. Throws NonFiniteValue.
Ranking rank_with_ties(std::span<const double> pooled);

/// Ranks 1..n with no ties.
Ranking tie_free_ranking(std::size_t n);

struct UStatistic {
    double u_a = 0.0;
    double u_b = 0.0;
};

/// U_a = R_a - n_a(n_a+1)/2 over the pooled ranking. Throws EmptySample.
UStatistic mann_whitney_u(std::span<const double> a, std::span<const double> b);

enum class PMode { Auto, Exact, Normal };
enum class PMethod { Exact, NormalApprox, Degenerate };
std::string_view to_string(PMethod m);

inline constexpr std::size_t kExactCutoff = 12;

struct POptions {
    bool continuity_correction = false;
    std::size_t exact_cutoff = kExactCutoff;  // Auto uses Exact when n1 + n2 <= this
};

struct PValue {
    double p = 1.0;
    PMethod method = PMethod::Exact;
    double z = 0.0;  // 0 for exact and degenerate results
};

/// Exact mode counts every assignment of the pooled ranks to the groups (via a
/// subset-sum table over doubled ranks, so ties stay exact). Normal mode uses
/// the tie-corrected variance. All-identical pooled values give p = 1 with
/// method Degenerate.
PValue p_two_sided(double u, std::size_t n1, std::size_t n2, const Ranking& ranking,
                   PMode mode = PMode::Auto, const POptions& opts = {});

/// U / (n1 n2). Throws URangeViolation when U is outside [0, n1 n2].
double cles(double u, std::size_t n1, std::size_t n2);

struct GroupSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample (n - 1); NaN when n < 2
    double median = 0.0;
};

GroupSummary summarize(std::span<const double> values);

enum class Metric { PracticeTime, Attempts };
std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

struct StatReport {
    Metric metric = Metric::PracticeTime;
    GroupSummary pc;
    GroupSummary cc;
    double u = 0.0;  // of the PC group
    double u_complement = 0.0;
    double p = 1.0;
    double z = 0.0;
    PMethod method = PMethod::Exact;
    double cles = 0.5;
};

/// PC is the first-listed group. Throws MissingCondition if either is absent.
StatReport condition_report(std::span<const EngagementRecord> records, Metric metric,
                            PMode mode = PMode::Auto, const POptions& opts = {});

/// ".69", "1.00"
std::string format_two_decimals_no_lead(double v);
/// "p < .001" or "p = .649"
std::string format_p(double p);

/// "U = 2368.0, p < .001, CLES = .69"
std::string render_comparison(const StatReport& r);
/// Plain-text table with n/M/SD/Median per condition plus the comparison line.
std::string render_text(const StatReport& r);
nlohmann::json report_json(const StatReport& r);

}  // namespace parsons::stats
