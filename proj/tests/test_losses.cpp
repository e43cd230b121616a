#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fewshot/losses.hpp"
#include "fewshot/rng.hpp"
#include "oracles.hpp"

using namespace fewshot;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.next_gaussian();
    return m;
}

EpisodeEmbeddings random_episode(std::size_t w, std::size_t n, std::size_t m, std::size_t d,
                                 RngStream& rng) {
    EpisodeEmbeddings ep;
    ep.support_emb = random_matrix(w * n, d, rng);
    ep.query_emb = random_matrix(w * m, d, rng);
    for (std::size_t c = 0; c < w; ++c) {
        for (std::size_t i = 0; i < n; ++i) ep.support_labels.push_back(static_cast<int>(c));
    }
    for (std::size_t c = 0; c < w; ++c)
        for (std::size_t i = 0; i < m; ++i) ep.query_labels.push_back(static_cast<int>(c));
    return ep;
}

std::vector<int> random_labels(std::size_t b, std::size_t alphabet, RngStream& rng) {
    std::vector<int> labels(b);
    for (auto& l : labels) l = static_cast<int>(rng.next_below(alphabet));
    return labels;
}

bool has_positive_anchor(const std::vector<int>& labels) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (i != j && labels[i] == labels[j]) return true;
    return false;
}

}  // namespace

TEST_CASE("compute_prototypes basics") {
    const Matrix s = Matrix::from_rows({{0, 0}, {2, 0}});
    const auto p = compute_prototypes(s, {0, 0});
    CHECK(p.centroids.at(0, 0) == doctest::Approx(1.0));
    CHECK(p.centroids.at(0, 1) == 0.0);

    // 1-shot: prototype equals its single support embedding
    const Matrix one = Matrix::from_rows({{5, -1}});
    const auto p1 = compute_prototypes(one, {3});
    CHECK(p1.centroids.at(0, 0) == 5.0);
    CHECK(p1.centroids.at(0, 1) == -1.0);
    CHECK(p1.class_order == std::vector<int>{3});

    // rows come out in ascending class-id order
    const Matrix two = Matrix::from_rows({{4, 0}, {0, 0}});
    const auto p2 = compute_prototypes(two, {7, 2});
    CHECK(p2.class_order == std::vector<int>{2, 7});
    CHECK(p2.centroids.at(0, 0) == 0.0);
    CHECK(p2.centroids.at(1, 0) == 4.0);

    CHECK_THROWS_AS(compute_prototypes(Matrix(0, 2), {}), std::invalid_argument);
}

TEST_CASE("proto_loss frozen examples") {
    EpisodeEmbeddings ep;
    ep.support_emb = Matrix::from_rows({{0, 0}, {4, 0}});
    ep.support_labels = {0, 1};
    ep.query_labels = {0};

    // equidistant query: ln 2
    ep.query_emb = Matrix::from_rows({{2, 0}});
    CHECK(proto_loss(ep).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    // d^2 = 1 vs 9: log(1 + e^-8), evaluated independently
    ep.query_emb = Matrix::from_rows({{1, 0}});
    CHECK(proto_loss(ep).value ==
          doctest::Approx(std::log1p(std::exp(-8.0))).epsilon(1e-12));
    CHECK(proto_loss(ep).value == doctest::Approx(0.00033540637289576885).epsilon(1e-10));
}

TEST_CASE("proto_loss matches the naive oracle on random episodes") {
    RngStream rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t w = 2 + rng.next_below(4);
        const std::size_t n = 1 + rng.next_below(3);
        const std::size_t m = 1 + rng.next_below(3);
        const std::size_t d = 1 + rng.next_below(5);
        const auto ep = random_episode(w, n, m, d, rng);
        const double got = proto_loss(ep).value;
        const double want = oracle::naive_proto(ep);
        CHECK(std::fabs(got - want) <= 1e-10 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("nca_loss frozen examples") {
    // all rows same class: numerator == denominator per anchor
    const Matrix same = Matrix::from_rows({{0.0}, {1.0}, {2.5}});
    const LossResult r = nca_loss(same, {4, 4, 4});
    CHECK(r.value == 0.0);
    for (double g : r.grad.data) CHECK(g == doctest::Approx(0.0).epsilon(1e-15));

    // 1-D [0, 0, 2] with labels A,A,B: two contributing anchors, each log(1+e^-4)
    const Matrix z = Matrix::from_rows({{0.0}, {0.0}, {2.0}});
    CHECK(nca_loss(z, {0, 0, 1}).value ==
          doctest::Approx(std::log1p(std::exp(-4.0))).epsilon(1e-12));
    CHECK(nca_loss(z, {0, 0, 1}).value == doctest::Approx(0.018149927917809738).epsilon(1e-10));

    // no anchor has a positive
    CHECK_THROWS_WITH_AS(nca_loss(z, {0, 1, 2}), doctest::Contains("no positive pairs"),
                         std::runtime_error);
    CHECK_THROWS_AS(nca_loss(Matrix::from_rows({{1.0}}), {0}), std::invalid_argument);
}

TEST_CASE("nca_loss equals brute force on random batches") {
    RngStream rng(31);
    for (int trial = 0; trial < 80; ++trial) {
        const std::size_t b = 2 + rng.next_below(7);  // <= 8
        const std::size_t d = 1 + rng.next_below(5);
        const Matrix z = random_matrix(b, d, rng);
        const auto labels = random_labels(b, 1 + rng.next_below(3), rng);
        if (!has_positive_anchor(labels)) continue;
        const double want = oracle::naive_nca(z, labels);
        const double got = nca_loss(z, labels).value;
        CHECK(std::fabs(got - want) <= 1e-10 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("nca_loss equals brute force over exhaustive small label patterns") {
    RngStream rng(37);
    for (std::size_t b = 2; b <= 10; b += 2) {
        const Matrix z = random_matrix(b, 3, rng);
        for (std::size_t pattern = 0; pattern < (std::size_t{1} << b); ++pattern) {
            std::vector<int> labels(b);
            for (std::size_t i = 0; i < b; ++i) labels[i] = (pattern >> i) & 1;
            if (!has_positive_anchor(labels)) {
                CHECK_THROWS_AS(nca_loss(z, labels), std::runtime_error);
                continue;
            }
            const double want = oracle::naive_nca(z, labels);
            const double got = nca_loss(z, labels).value;
            CHECK(std::fabs(got - want) <= 1e-10 * std::max(1.0, std::fabs(want)));
        }
    }
}

TEST_CASE("proto_no_prototypes_loss frozen example and oracle") {
    EpisodeEmbeddings ep;
    ep.support_emb = Matrix::from_rows({{0, 0}, {2, 0}});
    ep.support_labels = {0, 1};
    ep.query_emb = Matrix::from_rows({{1, 0}});
    ep.query_labels = {0};
    // per-query term ln 2; the printed constant divides by |Q| + |S| = 3
    CHECK(proto_no_prototypes_loss(ep).value ==
          doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-14));

    RngStream rng(41);
    for (int trial = 0; trial < 60; ++trial) {
        const auto e = random_episode(2 + rng.next_below(4), 1 + rng.next_below(3),
                                      1 + rng.next_below(3), 1 + rng.next_below(4), rng);
        const double got = proto_no_prototypes_loss(e).value;
        const double want = oracle::naive_no_proto(e);
        CHECK(std::fabs(got - want) <= 1e-10 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("1-shot identity: per-query log-probabilities agree; totals obey the constants") {
    RngStream rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t w = 2 + rng.next_below(5);
        const std::size_t m = 1 + rng.next_below(4);
        const auto ep = random_episode(w, 1, m, 1 + rng.next_below(4), rng);
        std::vector<double> proto_terms, noagg_terms;
        const LossResult rp = proto_loss(ep, &proto_terms);
        const LossResult rn = proto_no_prototypes_loss(ep, &noagg_terms);
        REQUIRE(proto_terms.size() == noagg_terms.size());
        for (std::size_t i = 0; i < proto_terms.size(); ++i)
            CHECK(std::fabs(proto_terms[i] - noagg_terms[i]) <=
                  1e-10 * std::max(1.0, std::fabs(proto_terms[i])));
        const double nq = static_cast<double>(ep.query_emb.rows);
        const double ns = static_cast<double>(ep.support_emb.rows);
        CHECK(rn.value * (nq + ns) == doctest::Approx(rp.value * nq).epsilon(1e-10));
    }
}

TEST_CASE("proto_allpairs_loss degenerate and hand-enumerated cases") {
    // one class, query sitting on the prototype: both ratios are 1
    EpisodeEmbeddings ep;
    ep.support_emb = Matrix::from_rows({{1.5, -2}});
    ep.support_labels = {0};
    ep.query_emb = Matrix::from_rows({{1.5, -2}});
    ep.query_labels = {0};
    CHECK(proto_allpairs_loss(ep).value == doctest::Approx(0.0).epsilon(1e-15));

    // w=2, n=1, m=1 hand enumeration via the naive oracle
    EpisodeEmbeddings e2;
    e2.support_emb = Matrix::from_rows({{0, 0}, {4, 0}});
    e2.support_labels = {0, 1};
    e2.query_emb = Matrix::from_rows({{2, 0}, {6, 0}});
    e2.query_labels = {0, 1};
    CHECK(proto_allpairs_loss(e2).value ==
          doctest::Approx(oracle::naive_allpairs_proto(e2)).epsilon(1e-12));

    RngStream rng(47);
    for (int trial = 0; trial < 60; ++trial) {
        const auto e = random_episode(2 + rng.next_below(4), 1 + rng.next_below(3),
                                      1 + rng.next_below(3), 1 + rng.next_below(4), rng);
        const double got = proto_allpairs_loss(e).value;
        const double want = oracle::naive_allpairs_proto(e);
        CHECK(std::fabs(got - want) <= 1e-10 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("keystone identity: allpairs_no_proto equals nca on the concatenation exactly") {
    RngStream rng(53);
    for (int trial = 0; trial < 40; ++trial) {
        const auto ep = random_episode(2 + rng.next_below(4), 1 + rng.next_below(3),
                                       1 + rng.next_below(3), 1 + rng.next_below(4), rng);
        const LossResult a = allpairs_no_proto_loss(ep);
        const Matrix z = vstack(ep.support_emb, ep.query_emb);
        std::vector<int> labels = ep.support_labels;
        labels.insert(labels.end(), ep.query_labels.begin(), ep.query_labels.end());
        const LossResult b = nca_loss(z, labels);
        CHECK(a.value == b.value);          // bitwise
        CHECK(a.grad.data == b.grad.data);  // bitwise
        // and against the naive oracle
        CHECK(std::fabs(a.value - oracle::naive_allpairs_no_proto(ep)) <=
              1e-10 * std::max(1.0, std::fabs(a.value)));
    }
}

TEST_CASE("allpairs_no_proto 1-shot a=2 hand enumeration") {
    // 2 ways, 1 shot, 1 query: 4 anchors, each with exactly one positive
    EpisodeEmbeddings ep;
    ep.support_emb = Matrix::from_rows({{0.0}, {3.0}});
    ep.support_labels = {0, 1};
    ep.query_emb = Matrix::from_rows({{1.0}, {2.5}});
    ep.query_labels = {0, 1};
    CHECK(allpairs_no_proto_loss(ep).value ==
          doctest::Approx(oracle::naive_allpairs_no_proto(ep)).epsilon(1e-12));
}

TEST_CASE("subsampled_nca_loss: full mask reproduces nca_loss bit for bit") {
    RngStream data_rng(59);
    const Matrix z = random_matrix(12, 4, data_rng);
    const auto labels = random_labels(12, 3, data_rng);
    RngStream mask_rng(7);
    const LossResult a = subsampled_nca_loss(z, labels, {1.0}, mask_rng);
    const LossResult b = nca_loss(z, labels);
    CHECK(a.value == b.value);
    CHECK(a.grad.data == b.grad.data);
}

TEST_CASE("subsampled_nca_loss: determinism and argument validation") {
    RngStream data_rng(61);
    const Matrix z = random_matrix(10, 3, data_rng);
    const auto labels = random_labels(10, 2, data_rng);
    RngStream r1(99), r2(99);
    const LossResult a = subsampled_nca_loss(z, labels, {0.5}, r1);
    const LossResult b = subsampled_nca_loss(z, labels, {0.5}, r2);
    CHECK(a.value == b.value);
    CHECK(a.grad.data == b.grad.data);

    RngStream r3(1);
    CHECK_THROWS_AS(subsampled_nca_loss(z, labels, {0.0}, r3), std::invalid_argument);
    CHECK_THROWS_AS(subsampled_nca_loss(z, labels, {1.5}, r3), std::invalid_argument);
}

TEST_CASE("pair mask retention matches the binomial expectation (3 sigma)") {
    const std::size_t b = 40;
    const double f = 0.1;
    const std::size_t draws = 1500;
    const double pairs_per_draw = static_cast<double>(b * (b - 1) / 2);
    RngStream rng(67);
    double kept = 0.0;
    for (std::size_t t = 0; t < draws; ++t) {
        const auto mask = draw_pair_mask(b, f, rng);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = i + 1; j < b; ++j) kept += mask[i * b + j];
    }
    const double n_trials = pairs_per_draw * static_cast<double>(draws);
    const double expected = f * n_trials;
    const double sigma = std::sqrt(n_trials * f * (1.0 - f));
    CHECK(std::fabs(kept - expected) <= 3.0 * sigma);
}

TEST_CASE("sup_contrastive_loss: degenerate and hand-checked cases") {
    const Matrix same = Matrix::from_rows({{0.0}, {0.0}});
    CHECK_THROWS_WITH_AS(sup_contrastive_loss(same, {0, 0}, 1.0),
                         doctest::Contains("no negative pairs"), std::runtime_error);
    CHECK_THROWS_AS(sup_contrastive_loss(same, {0, 1}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sup_contrastive_loss(same, {0, 1}, -1.0), std::invalid_argument);

    const Matrix z = Matrix::from_rows({{0.0}, {2.0}, {5.0}});
    const std::vector<int> labels{0, 0, 1};
    CHECK(sup_contrastive_loss(z, labels, 1.0).value ==
          doctest::Approx(oracle::naive_sup_contrastive(z, labels, 1.0)).epsilon(1e-12));
    CHECK(sup_contrastive_loss(z, labels, 2.5).value ==
          doctest::Approx(oracle::naive_sup_contrastive(z, labels, 2.5)).epsilon(1e-12));

    // all anchors positive-less
    CHECK_THROWS_WITH_AS(sup_contrastive_loss(z, {0, 1, 2}, 1.0),
                         doctest::Contains("no positive pairs"), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Gradient checks: every loss, central differences, rel err < 1e-5
// ---------------------------------------------------------------------------

TEST_CASE("gradients match finite differences on embeddings") {
    RngStream rng(71);

    SUBCASE("nca") {
        for (int trial = 0; trial < 8; ++trial) {
            const std::size_t b = 4 + rng.next_below(9);  // <= 12
            const std::size_t d = 1 + rng.next_below(5);
            Matrix z = random_matrix(b, d, rng);
            std::vector<int> labels = random_labels(b, 2, rng);
            if (!has_positive_anchor(labels)) labels[1] = labels[0];
            const LossResult r = nca_loss(z, labels);
            const double err = oracle::max_grad_rel_err(
                z.data, r.grad.data, [&]() { return nca_loss(z, labels).value; });
            CHECK(err < 1e-5);
        }
    }

    SUBCASE("subsampled nca, fixed mask") {
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t b = 6 + rng.next_below(7);
            const std::size_t d = 1 + rng.next_below(4);
            Matrix z = random_matrix(b, d, rng);
            std::vector<int> labels = random_labels(b, 2, rng);
            if (!has_positive_anchor(labels)) labels[1] = labels[0];
            const std::uint64_t mask_seed = 1000 + trial;
            auto value = [&]() {
                RngStream mask_rng(mask_seed);  // same mask on every call
                return subsampled_nca_loss(z, labels, {0.5}, mask_rng).value;
            };
            RngStream mask_rng(mask_seed);
            const LossResult r = subsampled_nca_loss(z, labels, {0.5}, mask_rng);
            CHECK(oracle::max_grad_rel_err(z.data, r.grad.data, value) < 1e-5);
        }
    }

    SUBCASE("episode losses: proto, no-proto, allpairs, allpairs-no-proto") {
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t w = 2 + rng.next_below(3);
            const std::size_t n = 1 + rng.next_below(2);
            const std::size_t m = 1 + rng.next_below(2);
            const std::size_t d = 1 + rng.next_below(4);
            EpisodeEmbeddings ep = random_episode(w, n, m, d, rng);

            using LossFn = LossResult (*)(const EpisodeEmbeddings&);
            const LossFn fns[] = {
                [](const EpisodeEmbeddings& e) { return proto_loss(e, nullptr); },
                [](const EpisodeEmbeddings& e) { return proto_no_prototypes_loss(e, nullptr); },
                [](const EpisodeEmbeddings& e) { return proto_allpairs_loss(e); },
                [](const EpisodeEmbeddings& e) { return allpairs_no_proto_loss(e); },
            };
            for (const LossFn fn : fns) {
                const LossResult r = fn(ep);
                // flatten [support; query] into one parameter vector
                std::vector<double> flat = ep.support_emb.data;
                flat.insert(flat.end(), ep.query_emb.data.begin(), ep.query_emb.data.end());
                auto value = [&]() {
                    EpisodeEmbeddings e2 = ep;
                    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(
                                                               ep.support_emb.data.size()),
                              e2.support_emb.data.begin());
                    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(
                                                 ep.support_emb.data.size()),
                              flat.end(), e2.query_emb.data.begin());
                    return fn(e2).value;
                };
                CHECK(oracle::max_grad_rel_err(flat, r.grad.data, value) < 1e-5);
            }
        }
    }

    SUBCASE("sup contrastive") {
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t b = 4 + rng.next_below(6);
            const std::size_t d = 1 + rng.next_below(4);
            Matrix z = random_matrix(b, d, rng);
            std::vector<int> labels = random_labels(b, 2, rng);
            labels[0] = 0;
            labels[1] = 0;
            labels[b - 1] = 1;  // at least one positive pair and one negative
            const double tau = 0.5 + rng.next_double();
            const LossResult r = sup_contrastive_loss(z, labels, tau);
            const double err = oracle::max_grad_rel_err(
                z.data, r.grad.data, [&]() { return sup_contrastive_loss(z, labels, tau).value; });
            CHECK(err < 1e-5);
        }
    }
}

// ---------------------------------------------------------------------------
// Shared loss properties
// ---------------------------------------------------------------------------

TEST_CASE("translation invariance: losses depend only on embedding differences") {
    RngStream rng(83);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 1 + rng.next_below(4);
        EpisodeEmbeddings ep = random_episode(2 + rng.next_below(3), 1 + rng.next_below(2),
                                              1 + rng.next_below(2), d, rng);
        std::vector<double> shift(d);
        for (double& v : shift) v = 3.0 * rng.next_gaussian();
        EpisodeEmbeddings moved = ep;
        for (std::size_t i = 0; i < moved.support_emb.rows; ++i)
            for (std::size_t c = 0; c < d; ++c) moved.support_emb.at(i, c) += shift[c];
        for (std::size_t i = 0; i < moved.query_emb.rows; ++i)
            for (std::size_t c = 0; c < d; ++c) moved.query_emb.at(i, c) += shift[c];

        CHECK(std::fabs(proto_loss(ep).value - proto_loss(moved).value) < 1e-9);
        CHECK(std::fabs(proto_no_prototypes_loss(ep).value -
                        proto_no_prototypes_loss(moved).value) < 1e-9);
        CHECK(std::fabs(proto_allpairs_loss(ep).value - proto_allpairs_loss(moved).value) <
              1e-9);
        CHECK(std::fabs(allpairs_no_proto_loss(ep).value -
                        allpairs_no_proto_loss(moved).value) < 1e-9);

        const Matrix z = vstack(ep.support_emb, ep.query_emb);
        const Matrix zm = vstack(moved.support_emb, moved.query_emb);
        std::vector<int> labels = ep.support_labels;
        labels.insert(labels.end(), ep.query_labels.begin(), ep.query_labels.end());
        CHECK(std::fabs(nca_loss(z, labels).value - nca_loss(zm, labels).value) < 1e-9);
        CHECK(std::fabs(sup_contrastive_loss(z, labels, 1.3).value -
                        sup_contrastive_loss(zm, labels, 1.3).value) < 1e-9);
    }
}

TEST_CASE("permutation equivariance of nca_loss") {
    RngStream rng(89);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t b = 4 + rng.next_below(6);
        const std::size_t d = 1 + rng.next_below(4);
        const Matrix z = random_matrix(b, d, rng);
        std::vector<int> labels = random_labels(b, 2, rng);
        if (!has_positive_anchor(labels)) labels[1] = labels[0];

        std::vector<std::size_t> perm(b);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);

        Matrix zp(b, d);
        std::vector<int> lp(b);
        for (std::size_t i = 0; i < b; ++i) {
            lp[i] = labels[perm[i]];
            for (std::size_t c = 0; c < d; ++c) zp.at(i, c) = z.at(perm[i], c);
        }
        const LossResult a = nca_loss(z, labels);
        const LossResult p = nca_loss(zp, lp);
        CHECK(std::fabs(a.value - p.value) < 1e-12);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t c = 0; c < d; ++c)
                CHECK(p.grad.at(i, c) == doctest::Approx(a.grad.at(perm[i], c)).epsilon(1e-12));
    }
}

TEST_CASE("episode embeddings validation rejects malformed episodes") {
    EpisodeEmbeddings ep;
    ep.support_emb = Matrix::from_rows({{0, 0}, {1, 1}});
    ep.support_labels = {0, 1};
    ep.query_emb = Matrix::from_rows({{0, 0}});
    ep.query_labels = {2};  // class not in support
    CHECK_THROWS_AS(proto_loss(ep), std::invalid_argument);

    ep.query_emb = Matrix::from_rows({{0, 0}, {1, 1}});
    ep.query_labels = {0, 1};
    CHECK_NOTHROW(proto_loss(ep));

    // unequal per-class support counts
    EpisodeEmbeddings bad;
    bad.support_emb = Matrix::from_rows({{0, 0}, {1, 1}, {2, 2}});
    bad.support_labels = {0, 0, 1};
    bad.query_emb = Matrix::from_rows({{0, 0}, {1, 1}});
    bad.query_labels = {0, 1};
    CHECK_THROWS_WITH_AS(proto_loss(bad), doctest::Contains("unequal"), std::invalid_argument);
}
