#include "fewshot/pairs.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace fewshot {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out;
    if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("pair count overflow");
    return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out;
    if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("pair count overflow");
    return out;
}

std::uint64_t choose2(std::uint64_t x) {
    return checked_mul(x, x - 1) / 2;
}

void check_triplet(std::uint64_t w, std::uint64_t n, std::uint64_t m) {
    if (w < 2 || n < 1 || m < 1)
        throw std::invalid_argument("pair counts: need w >= 2, n >= 1, m >= 1 (got w=" +
                                    std::to_string(w) + ", n=" + std::to_string(n) +
                                    ", m=" + std::to_string(m) + ")");
}

}  // namespace

std::uint64_t PairCounts::total() const { return checked_add(positives, negatives); }

PairCounts pn_pair_counts(std::uint64_t w, std::uint64_t n, std::uint64_t m) {
    check_triplet(w, n, m);
    PairCounts out;
    out.positives = checked_mul(checked_mul(w, m), n);
    out.negatives = checked_mul(out.positives, w - 1);
    return out;
}

PairCounts nca_pair_counts(std::uint64_t w, std::uint64_t n, std::uint64_t m) {
    check_triplet(w, n, m);
    PairCounts out;
    out.positives = checked_mul(choose2(checked_add(m, n)), w);
    out.negatives = checked_mul(choose2(w), checked_mul(checked_add(m, n), checked_add(m, n)));
    return out;
}

std::uint64_t extra_pairs(std::uint64_t w, std::uint64_t n, std::uint64_t m) {
    check_triplet(w, n, m);
    // w * (w*(m^2+n^2) - m - n) is always even; divide at the end to stay exact.
    const std::uint64_t sq = checked_add(checked_mul(m, m), checked_mul(n, n));
    const std::uint64_t inner = checked_mul(w, sq) - m - n;
    return checked_mul(w, inner) / 2;
}

PairCounts brute_force_pair_counts(const std::vector<int>& support_labels,
                                   const std::vector<int>& query_labels, PairScheme scheme) {
    if (support_labels.empty() || query_labels.empty())
        throw std::invalid_argument("brute force pairs: empty support or query set");
    std::map<int, std::size_t> s_count, q_count;
    for (int l : support_labels) ++s_count[l];
    for (int l : query_labels) ++q_count[l];
    if (s_count.size() != q_count.size() || s_count.size() < 2)
        throw std::invalid_argument("brute force pairs: malformed episode layout");
    std::size_t shots = s_count.begin()->second, queries = q_count.begin()->second;
    for (const auto& [l, c] : s_count) {
        if (!q_count.count(l) || c != shots)
            throw std::invalid_argument("brute force pairs: malformed episode layout");
    }
    for (const auto& [l, c] : q_count)
        if (c != queries) throw std::invalid_argument("brute force pairs: malformed episode layout");

    PairCounts out;
    if (scheme == PairScheme::PN) {
        for (int lq : query_labels)
            for (int ls : support_labels)
                ++(lq == ls ? out.positives : out.negatives);
    } else {
        std::vector<int> all = support_labels;
        all.insert(all.end(), query_labels.begin(), query_labels.end());
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j)
                ++(all[i] == all[j] ? out.positives : out.negatives);
    }
    return out;
}

InequalityReport check_inequalities(std::uint64_t w, std::uint64_t n, std::uint64_t m) {
    InequalityReport rep;
    rep.pn = pn_pair_counts(w, n, m);
    rep.nca = nca_pair_counts(w, n, m);
    rep.positives_ok = rep.nca.positives >= rep.pn.positives;
    rep.negatives_strict = rep.nca.negatives > rep.pn.negatives;
    rep.positives_equal = rep.nca.positives == rep.pn.positives;
    return rep;
}

}  // namespace fewshot
