#include "parsons/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "parsons/error.hpp"

namespace parsons::stats {

Ranking rank_with_ties(std::span<const double> pooled) {
    if (pooled.empty()) throw Error(ErrorCode::EmptySample, "nothing to rank");
    for (double v : pooled)
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "cannot rank a non-finite value");

    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });

    Ranking r;
    r.ranks.resize(pooled.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        // positions i..j (0-based) share the mean of ranks i+1..j+1
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = avg;
        r.tie_group_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return r;
}

Ranking tie_free_ranking(std::size_t n) {
    Ranking r;
    r.ranks.resize(n);
    std::iota(r.ranks.begin(), r.ranks.end(), 1.0);
    r.tie_group_sizes.assign(n, 1);
    return r;
}

UStatistic mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "both samples must be non-empty");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const Ranking ranking = rank_with_ties(pooled);

    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    const double rank_sum_a = std::accumulate(ranking.ranks.begin(), ranking.ranks.begin() + static_cast<long>(a.size()), 0.0);
    UStatistic u;
    u.u_a = rank_sum_a - na * (na + 1.0) / 2.0;
    u.u_b = na * nb - u.u_a;
    return u;
}

std::string_view to_string(PMethod m) {
    switch (m) {
        case PMethod::Exact: return "exact";
        case PMethod::NormalApprox: return "normal";
        case PMethod::Degenerate: return "degenerate";
    }
    return "exact";
}

namespace {

constexpr std::size_t kMaxExactN = 200;

double exact_p(double u, std::size_t n1, std::size_t n2, const Ranking& ranking) {
    const std::size_t n = n1 + n2;
    if (n > kMaxExactN)
        throw std::invalid_argument("exact p-value limited to n1 + n2 <= " + std::to_string(kMaxExactN));

    std::vector<std::int64_t> doubled(n);
    std::int64_t total_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        doubled[i] = std::llround(2.0 * ranking.ranks[i]);
        total_sum += doubled[i];
    }

    // counts[k][s]: number of k-subsets whose doubled rank sum is s
    const auto width = static_cast<std::size_t>(total_sum) + 1;
    std::vector<double> counts((n1 + 1) * width, 0.0);
    auto at = [&](std::size_t k, std::int64_t s) -> double& { return counts[k * width + static_cast<std::size_t>(s)]; };
    at(0, 0) = 1.0;
    std::size_t placed = 0;
    for (std::int64_t r : doubled) {
        ++placed;
        for (std::size_t k = std::min(placed, n1); k >= 1; --k)
            for (std::int64_t s = total_sum; s >= r; --s) at(k, s) += at(k - 1, s - r);
    }

    const auto a = static_cast<std::int64_t>(n1);
    const auto b = static_cast<std::int64_t>(n2);
    const std::int64_t offset = a * (a + 1) + a * b;
    const std::int64_t distance2 = std::llabs(std::llround(2.0 * u) - a * b);
    double extreme = 0.0, all = 0.0;
    for (std::int64_t s = 0; s <= total_sum; ++s) {
        const double c = at(n1, s);
        if (c == 0.0) continue;
        all += c;
        if (std::llabs(s - offset) >= distance2) extreme += c;
    }
    return std::min(1.0, extreme / all);
}

}  // namespace

PValue p_two_sided(double u, std::size_t n1, std::size_t n2, const Ranking& ranking, PMode mode,
                   const POptions& opts) {
    if (n1 == 0 || n2 == 0) throw Error(ErrorCode::EmptySample, "both samples must be non-empty");
    const std::size_t n = n1 + n2;
    if (ranking.ranks.size() != n) throw std::invalid_argument("ranking size does not match n1 + n2");
    if (ranking.tie_group_sizes.size() <= 1) return {1.0, PMethod::Degenerate, 0.0};

    const bool exact = mode == PMode::Exact || (mode == PMode::Auto && n <= opts.exact_cutoff);
    if (exact) return {exact_p(u, n1, n2, ranking), PMethod::Exact, 0.0};

    const double a = static_cast<double>(n1);
    const double b = static_cast<double>(n2);
    const double big_n = a + b;
    double tie_term = 0.0;
    for (std::size_t t : ranking.tie_group_sizes) {
        const double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    const double variance = a * b / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if (!(variance > 0.0)) return {1.0, PMethod::Degenerate, 0.0};

    const double mu = a * b / 2.0;
    double distance = std::abs(u - mu);
    if (opts.continuity_correction) distance = std::max(0.0, distance - 0.5);
    const double z = std::copysign(distance / std::sqrt(variance), u - mu);
    const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    return {std::clamp(p, 0.0, 1.0), PMethod::NormalApprox, z};
}

double cles(double u, std::size_t n1, std::size_t n2) {
    if (n1 == 0 || n2 == 0) throw Error(ErrorCode::EmptySample, "both samples must be non-empty");
    const double pairs = static_cast<double>(n1) * static_cast<double>(n2);
    if (!(u >= 0.0 && u <= pairs))
        throw Error(ErrorCode::URangeViolation, fmt::format("U = {} outside [0, {}]", u, pairs));
    return u / pairs;
}

GroupSummary summarize(std::span<const double> values) {
    GroupSummary s;
    s.n = values.size();
    if (values.empty()) {
        s.mean = s.sd = s.median = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    const double n = static_cast<double>(s.n);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (s.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / (n - 1.0));
    } else {
        s.sd = std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = s.n / 2;
    s.median = s.n % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
    return s;
}

std::string_view to_string(Metric m) { return m == Metric::PracticeTime ? "practice_time" : "attempts"; }

Metric metric_from_string(std::string_view s) {
    if (s == "practice_time") return Metric::PracticeTime;
    if (s == "attempts") return Metric::Attempts;
    throw std::invalid_argument("unknown metric '" + std::string(s) + "' (expected practice_time or attempts)");
}

StatReport condition_report(std::span<const EngagementRecord> records, Metric metric, PMode mode,
                            const POptions& opts) {
    std::vector<double> pc, cc;
    for (const auto& r : records) {
        const double v = metric == Metric::PracticeTime ? r.practice_minutes : static_cast<double>(r.attempts);
        (r.condition == Condition::PC ? pc : cc).push_back(v);
    }
    if (pc.empty() || cc.empty())
        throw Error(ErrorCode::MissingCondition,
                    std::string("no records for condition ") + (pc.empty() ? "PC" : "CC"));

    StatReport report;
    report.metric = metric;
    report.pc = summarize(pc);
    report.cc = summarize(cc);

    std::vector<double> pooled = pc;
    pooled.insert(pooled.end(), cc.begin(), cc.end());
    const Ranking ranking = rank_with_ties(pooled);
    const UStatistic u = mann_whitney_u(pc, cc);
    report.u = u.u_a;
    report.u_complement = u.u_b;
    const PValue p = p_two_sided(u.u_a, pc.size(), cc.size(), ranking, mode, opts);
    report.p = p.p;
    report.z = p.z;
    report.method = p.method;
    report.cles = cles(u.u_a, pc.size(), cc.size());
    return report;
}

namespace {

std::string strip_leading_zero(std::string s) {
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    return s;
}

std::string one_decimal(double v) { return std::isnan(v) ? "n/a" : fmt::format("{:.1f}", v); }

}  // namespace

std::string format_two_decimals_no_lead(double v) { return strip_leading_zero(fmt::format("{:.2f}", v)); }

std::string format_p(double p) {
    if (p < 0.001) return "p < .001";
    return "p = " + strip_leading_zero(fmt::format("{:.3f}", p));
}

std::string render_comparison(const StatReport& r) {
    return fmt::format("U = {:.1f}, {}, CLES = {}", r.u, format_p(r.p), format_two_decimals_no_lead(r.cles));
}

std::string render_text(const StatReport& r) {
    std::string out;
    out += fmt::format("metric: {}{}\n", to_string(r.metric), r.metric == Metric::PracticeTime ? " (minutes)" : "");
    out += fmt::format("{:<10}{:>6}{:>8}{:>8}{:>8}\n", "condition", "n", "M", "SD", "Median");
    for (auto [name, g] : {std::pair{"PC", &r.pc}, std::pair{"CC", &r.cc}})
        out += fmt::format("{:<10}{:>6}{:>8}{:>8}{:>8}\n", name, g->n, one_decimal(g->mean), one_decimal(g->sd),
                           one_decimal(g->median));
    out += fmt::format("{} [{}]\n", render_comparison(r), to_string(r.method));
    return out;
}

nlohmann::json report_json(const StatReport& r) {
    auto group = [](const GroupSummary& g) {
        auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
        return nlohmann::json{{"n", g.n}, {"M", num(g.mean)}, {"SD", num(g.sd)}, {"Median", num(g.median)}};
    };
    return {{"metric", std::string(to_string(r.metric))},
            {"PC", group(r.pc)},
            {"CC", group(r.cc)},
            {"U", r.u},
            {"U_complement", r.u_complement},
            {"p", r.p},
            {"z", r.z},
            {"method", std::string(to_string(r.method))},
            {"CLES", r.cles},
            {"summary", render_comparison(r)}};
}

}  // namespace parsons::stats
