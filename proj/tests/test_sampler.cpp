#include <doctest.h>

#include <map>
#include <set>

#include "fewshot/rng.hpp"
#include "fewshot/sampler.hpp"
#include "fewshot/synthetic.hpp"

using namespace fewshot;

namespace {

LabeledDataset toy_dataset(std::size_t classes, std::size_t per_class, std::uint64_t seed = 1) {
    SyntheticSpec spec;
    spec.train_classes = classes;
    spec.val_classes = 1;
    spec.test_classes = 1;
    spec.samples_per_class = per_class;
    spec.dim = 3;
    spec.seed = seed;
    return generate_synthetic(spec).split("train");
}

void check_episode_invariants(const Episode& ep, const EpisodeConfig& cfg) {
    std::map<int, std::size_t> s_counts, q_counts;
    std::set<std::size_t> seen;
    for (const auto& it : ep.support) {
        ++s_counts[it.label];
        CHECK(seen.insert(it.index).second);  // no index twice in the episode
    }
    for (const auto& it : ep.query) {
        ++q_counts[it.label];
        CHECK(seen.insert(it.index).second);
    }
    CHECK(s_counts.size() == cfg.ways);
    CHECK(q_counts.size() == cfg.ways);
    for (const auto& [label, c] : s_counts) CHECK(c == cfg.shots);
    for (const auto& [label, c] : q_counts) CHECK(c == cfg.queries);
}

}  // namespace

TEST_CASE("sample_episode structural example: 5 classes x 4 images, (2,1,1)") {
    const auto ds = toy_dataset(5, 4);
    RngStream rng(9);
    const Episode ep = sample_episode(ds, {2, 1, 1}, rng);
    CHECK(ep.support.size() == 2);
    CHECK(ep.query.size() == 2);
    check_episode_invariants(ep, {2, 1, 1});
}

TEST_CASE("sample_episode paper-sized configurations") {
    const auto ds = toy_dataset(40, 20);
    RngStream rng(10);
    const Episode one_shot = sample_episode(ds, {30, 1, 15}, rng);
    CHECK(one_shot.support.size() + one_shot.query.size() == 480);
    const Episode five_shot = sample_episode(ds, {20, 5, 15}, rng);
    CHECK(five_shot.support.size() + five_shot.query.size() == 400);
}

TEST_CASE("sample_episode failure names the deficient class") {
    const auto ds = toy_dataset(4, 3);
    RngStream rng(2);
    CHECK_THROWS_WITH_AS(sample_episode(ds, {5, 1, 1}, rng), doctest::Contains("classes"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(sample_episode(ds, {2, 2, 2}, rng), doctest::Contains("class"),
                         std::invalid_argument);
}

TEST_CASE("sample_episode invariants hold across random configurations") {
    RngStream meta(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t classes = 2 + meta.next_below(8);
        const std::size_t per_class = 2 + meta.next_below(10);
        const auto ds = toy_dataset(classes, per_class, 100 + trial);
        EpisodeConfig cfg;
        cfg.ways = 2 + meta.next_below(classes - 1);
        cfg.shots = 1 + meta.next_below(per_class - 1);
        const std::size_t room = per_class - cfg.shots;
        cfg.queries = 1 + meta.next_below(room);
        RngStream rng = meta.child(trial);
        check_episode_invariants(sample_episode(ds, cfg, rng), cfg);
    }
}

TEST_CASE("shape_to_episode worked examples") {
    const EpisodeConfig a = shape_to_episode({5, 8, 256});
    CHECK(a.ways == 32);
    CHECK(a.shots == 5);
    CHECK(a.queries == 3);

    const EpisodeConfig b = shape_to_episode({1, 8, 128});
    CHECK(b.ways == 16);
    CHECK(b.shots == 1);
    CHECK(b.queries == 7);

    const EpisodeConfig c = shape_to_episode({5, 16, 512});
    CHECK(c.ways == 32);
    CHECK(c.shots == 5);
    CHECK(c.queries == 11);

    CHECK_THROWS_AS(shape_to_episode({5, 7, 256}), std::invalid_argument);   // b % a != 0
    CHECK_THROWS_AS(shape_to_episode({8, 8, 256}), std::invalid_argument);   // a <= n
    CHECK_THROWS_AS(shape_to_episode({5, 8, 8}), std::invalid_argument);     // w < 2
}

TEST_CASE("shape round trip: w*(n+m) == b") {
    RngStream rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        BatchShapeConfig shape;
        shape.shots = 1 + rng.next_below(6);
        shape.images_per_class = shape.shots + 1 + rng.next_below(8);
        shape.batch_size = shape.images_per_class * (2 + rng.next_below(16));
        const EpisodeConfig ep = shape_to_episode(shape);
        CHECK(ep.ways * (ep.shots + ep.queries) == shape.batch_size);
    }
}

TEST_CASE("epoch_batches covers every index exactly once") {
    const auto ds = toy_dataset(5, 2);  // N = 10
    RngStream rng(6);
    const auto batches = epoch_batches(ds, 4, rng);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);
    std::vector<std::size_t> counts(ds.size(), 0);
    for (const auto& b : batches)
        for (std::size_t i : b) ++counts[i];
    for (std::size_t c : counts) CHECK(c == 1);
}

TEST_CASE("epoch_batches determinism and single-batch case") {
    const auto ds = toy_dataset(3, 2);  // N = 6
    RngStream r1(123), r2(123);
    CHECK(epoch_batches(ds, 4, r1) == epoch_batches(ds, 4, r2));

    RngStream r3(9);
    const auto single = epoch_batches(ds, 6, r3);
    REQUIRE(single.size() == 1);
    std::vector<std::size_t> sorted = single[0];
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 6; ++i) CHECK(sorted[i] == i);

    RngStream r4(1);
    CHECK_THROWS_AS(epoch_batches(ds, 1, r4), std::invalid_argument);
}

TEST_CASE("epoch_batches exhaustive-coverage property over random (N, batch) pairs") {
    RngStream meta(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t per_class = 1 + meta.next_below(20);
        const std::size_t classes = 1 + meta.next_below(10);
        const auto ds = toy_dataset(classes, per_class, 500 + trial);
        const std::size_t batch = 2 + meta.next_below(ds.size() + 4);
        RngStream rng = meta.child(trial);
        const auto batches = epoch_batches(ds, batch, rng);
        std::vector<std::size_t> counts(ds.size(), 0);
        for (const auto& b : batches)
            for (std::size_t i : b) ++counts[i];
        bool all_once = true;
        for (std::size_t c : counts) all_once = all_once && c == 1;
        CHECK(all_once);
    }
}

TEST_CASE("sample_fixed_composition_batch composition") {
    const auto ds = toy_dataset(20, 10);
    RngStream rng(3);
    const auto batch = sample_fixed_composition_batch(ds, 16, 8, rng);
    CHECK(batch.size() == 128);
    std::map<int, std::size_t> counts;
    for (std::size_t i : batch) ++counts[ds.labels[i]];
    CHECK(counts.size() == 16);
    for (const auto& [label, c] : counts) CHECK(c == 8);

    const auto tiny = sample_fixed_composition_batch(ds, 2, 1, rng);
    CHECK(tiny.size() == 2);
    CHECK(ds.labels[tiny[0]] != ds.labels[tiny[1]]);

    CHECK_THROWS_AS(sample_fixed_composition_batch(ds, 21, 1, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_fixed_composition_batch(ds, 2, 11, rng), std::invalid_argument);
}

TEST_CASE("sample_fixed_composition_batch large composition") {
    const auto ds = toy_dataset(64, 16);
    RngStream rng(8);
    const auto batch = sample_fixed_composition_batch(ds, 64, 16, rng);
    CHECK(batch.size() == 1024);
}
