#pragma once

// Inner loops of the Mann-Whitney pipeline in two builds: a serial reference
// kept for testing, and an OpenMP version. Both must agree exactly.

#include <cstdint>
#include <span>

namespace parsons::stats::kernels {

struct TailCount {
    std::uint64_t extreme = 0;  // assignments at least as far from the null centre
    std::uint64_t total = 0;    // C(N, n1)
};

namespace serial {

/// #{(x, y): x > y} + 0.5 #{x == y}
double pairwise_u(std::span<const double> a, std::span<const double> b);

/// Enumerates every size-n1 subset of the pooled ranks. Ranks are passed
/// doubled so tied (half-integer) ranks stay exact. Counts subsets whose
/// doubled U lies at least `distance2` from n1*n2.
TailCount enumerate_tail(std::span<const std::int64_t> doubled_ranks, std::size_t n1, std::int64_t distance2);

}  // namespace serial

namespace omp {

double pairwise_u(std::span<const double> a, std::span<const double> b);
TailCount enumerate_tail(std::span<const std::int64_t> doubled_ranks, std::size_t n1, std::int64_t distance2);

}  // namespace omp

/// Number of threads the OpenMP build will use (1 when built without OpenMP).
int max_threads();

}  // namespace parsons::stats::kernels
