#include "parsons/stats_kernels.hpp"

#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace parsons::stats::kernels {

namespace {

struct Enumerator {
    std::span<const std::int64_t> ranks;
    std::size_t n1;
    std::int64_t offset;     // n1(n1+1) + n1*n2, so doubled U - n1*n2 = sum - offset
    std::int64_t distance2;
    TailCount count;

    void walk(std::size_t next, std::size_t chosen, std::int64_t sum) {
        if (chosen == n1) {
            ++count.total;
            count.extreme += std::llabs(sum - offset) >= distance2;
            return;
        }
        const std::size_t need = n1 - chosen;
        for (std::size_t i = next; i + need <= ranks.size(); ++i) walk(i + 1, chosen + 1, sum + ranks[i]);
    }
};

std::int64_t centre_offset(std::size_t n, std::size_t n1) {
    const auto a = static_cast<std::int64_t>(n1);
    const auto b = static_cast<std::int64_t>(n - n1);
    return a * (a + 1) + a * b;
}

}  // namespace

namespace serial {

double pairwise_u(std::span<const double> a, std::span<const double> b) {
    double u = 0.0;
    for (double x : a)
        for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return u;
}

TailCount enumerate_tail(std::span<const std::int64_t> doubled_ranks, std::size_t n1, std::int64_t distance2) {
    Enumerator e{doubled_ranks, n1, centre_offset(doubled_ranks.size(), n1), distance2, {}};
    e.walk(0, 0, 0);
    return e.count;
}

}  // namespace serial

namespace omp {

double pairwise_u(std::span<const double> a, std::span<const double> b) {
    // Accumulate in half-units so the reduction is exact and order-free.
    std::int64_t halves = 0;
    const auto na = static_cast<std::int64_t>(a.size());
#pragma omp parallel for reduction(+ : halves) schedule(static)
    for (std::int64_t i = 0; i < na; ++i) {
        const double x = a[static_cast<std::size_t>(i)];
        for (double y : b) halves += x > y ? 2 : (x == y ? 1 : 0);
    }
    return static_cast<double>(halves) / 2.0;
}

TailCount enumerate_tail(std::span<const std::int64_t> doubled_ranks, std::size_t n1, std::int64_t distance2) {
    const std::size_t n = doubled_ranks.size();
    const std::int64_t offset = centre_offset(n, n1);
    if (n1 == 0) return serial::enumerate_tail(doubled_ranks, n1, distance2);

    // Split on the smallest chosen index; each branch enumerates independently.
    std::uint64_t extreme = 0, total = 0;
    const auto branches = static_cast<std::int64_t>(n - n1 + 1);
#pragma omp parallel for reduction(+ : extreme, total) schedule(dynamic)
    for (std::int64_t first = 0; first < branches; ++first) {
        const auto f = static_cast<std::size_t>(first);
        Enumerator e{doubled_ranks, n1, offset, distance2, {}};
        e.walk(f + 1, 1, doubled_ranks[f]);
        extreme += e.count.extreme;
        total += e.count.total;
    }
    return {extreme, total};
}

}  // namespace omp

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace parsons::stats::kernels
