#pragma once

#include <cstdint>
#include <vector>

namespace fewshot {

/// Unordered distance-pair tallies for one batching scheme. The loss modules
/// iterate ordered anchor->neighbour terms; ordered_terms == 2 * unordered.
struct PairCounts {
    std::uint64_t positives = 0;
    std::uint64_t negatives = 0;

    std::uint64_t total() const;
    bool operator==(const PairCounts&) const = default;
};

/// Episodic scheme: positives = w*m*n, negatives = w*(w-1)*m*n (distances from
/// queries to individual support points, counted through the prototypes).
PairCounts pn_pair_counts(std::uint64_t w, std::uint64_t n, std::uint64_t m);

/// Whole-batch scheme: positives = C(m+n,2)*w, negatives = C(w,2)*(m+n)^2.
PairCounts nca_pair_counts(std::uint64_t w, std::uint64_t n, std::uint64_t m);

/// (w/2)*(w*(m^2+n^2) - m - n): pairs the whole-batch scheme exploits beyond
/// the episodic one. Equals nca total minus pn total.
std::uint64_t extra_pairs(std::uint64_t w, std::uint64_t n, std::uint64_t m);

enum class PairScheme { PN, NCA };

/// Enumeration oracle over a concrete episode label layout. NCA counts all
/// unordered pairs within support+query; PN counts query-to-support pairs.
PairCounts brute_force_pair_counts(const std::vector<int>& support_labels,
                                   const std::vector<int>& query_labels, PairScheme scheme);

struct InequalityReport {
    PairCounts pn;
    PairCounts nca;
    bool positives_ok = false;    // nca_pos >= pn_pos
    bool negatives_strict = false; // nca_neg > pn_neg
    bool positives_equal = false;  // the m == n == 1 edge
};

InequalityReport check_inequalities(std::uint64_t w, std::uint64_t n, std::uint64_t m);

}  // namespace fewshot
