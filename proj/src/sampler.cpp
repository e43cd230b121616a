#include "fewshot/sampler.hpp"

#include <stdexcept>
#include <string>

namespace fewshot {

void EpisodeConfig::validate() const {
    if (ways < 2) throw std::invalid_argument("episode config: ways must be >= 2");
    if (shots < 1) throw std::invalid_argument("episode config: shots must be >= 1");
    if (queries < 1) throw std::invalid_argument("episode config: queries must be >= 1");
}

void BatchShapeConfig::validate() const {
    if (images_per_class <= shots)
        throw std::invalid_argument("batch shape: images per class (a=" +
                                    std::to_string(images_per_class) +
                                    ") must exceed shots (n=" + std::to_string(shots) + ")");
    if (images_per_class == 0 || batch_size % images_per_class != 0)
        throw std::invalid_argument("batch shape: batch size " + std::to_string(batch_size) +
                                    " not divisible by a=" + std::to_string(images_per_class));
    if (batch_size / images_per_class < 2)
        throw std::invalid_argument("batch shape: derived ways " +
                                    std::to_string(batch_size / images_per_class) +
                                    " must be >= 2");
}

EpisodeConfig shape_to_episode(const BatchShapeConfig& cfg) {
    cfg.validate();
    EpisodeConfig ep;
    ep.ways = cfg.batch_size / cfg.images_per_class;
    ep.shots = cfg.shots;
    ep.queries = cfg.images_per_class - cfg.shots;
    ep.validate();
    return ep;
}

std::vector<std::size_t> Episode::support_indices() const {
    std::vector<std::size_t> out;
    out.reserve(support.size());
    for (const auto& it : support) out.push_back(it.index);
    return out;
}

std::vector<std::size_t> Episode::query_indices() const {
    std::vector<std::size_t> out;
    out.reserve(query.size());
    for (const auto& it : query) out.push_back(it.index);
    return out;
}

std::vector<int> Episode::support_labels() const {
    std::vector<int> out;
    out.reserve(support.size());
    for (const auto& it : support) out.push_back(it.label);
    return out;
}

std::vector<int> Episode::query_labels() const {
    std::vector<int> out;
    out.reserve(query.size());
    for (const auto& it : query) out.push_back(it.label);
    return out;
}

Episode sample_episode(const LabeledDataset& ds, const EpisodeConfig& cfg, RngStream& rng) {
    cfg.validate();
    const auto by_class = ds.indices_by_class();
    if (by_class.size() < cfg.ways)
        throw std::invalid_argument("sample_episode: need " + std::to_string(cfg.ways) +
                                    " classes, dataset '" + ds.split_name + "' has " +
                                    std::to_string(by_class.size()));
    const std::size_t per_class = cfg.shots + cfg.queries;
    const auto class_pick = rng.sample_without_replacement(by_class.size(), cfg.ways);

    Episode ep;
    ep.support.reserve(cfg.ways * cfg.shots);
    ep.query.reserve(cfg.ways * cfg.queries);
    // Episode-local labels are 0..w-1 in pick order; dataset class ids only
    // matter through the grouping, and evaluation scores episodes internally.
    for (std::size_t k = 0; k < class_pick.size(); ++k) {
        const auto& pool = by_class[class_pick[k]];
        if (pool.size() < per_class)
            throw std::invalid_argument("sample_episode: class " +
                                        std::to_string(class_pick[k]) + " has " +
                                        std::to_string(pool.size()) + " examples, need " +
                                        std::to_string(per_class));
        const auto picks = rng.sample_without_replacement(pool.size(), per_class);
        for (std::size_t i = 0; i < cfg.shots; ++i)
            ep.support.push_back({pool[picks[i]], static_cast<int>(k)});
        for (std::size_t i = cfg.shots; i < per_class; ++i)
            ep.query.push_back({pool[picks[i]], static_cast<int>(k)});
    }
    return ep;
}

std::vector<std::vector<std::size_t>> epoch_batches(const LabeledDataset& ds,
                                                    std::size_t batch_size, RngStream& rng) {
    if (batch_size < 2) throw std::invalid_argument("epoch_batches: batch size must be >= 2");
    std::vector<std::size_t> perm(ds.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < perm.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, perm.size());
        batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                             perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

std::vector<std::size_t> sample_fixed_composition_batch(const LabeledDataset& ds,
                                                        std::size_t classes_per_batch,
                                                        std::size_t images_per_class,
                                                        RngStream& rng) {
    if (classes_per_batch < 1 || images_per_class < 1)
        throw std::invalid_argument("fixed composition: counts must be >= 1");
    const auto by_class = ds.indices_by_class();
    if (by_class.size() < classes_per_batch)
        throw std::invalid_argument("fixed composition: need " +
                                    std::to_string(classes_per_batch) + " classes, have " +
                                    std::to_string(by_class.size()));
    const auto class_pick = rng.sample_without_replacement(by_class.size(), classes_per_batch);
    std::vector<std::size_t> batch;
    batch.reserve(classes_per_batch * images_per_class);
    for (std::size_t cls : class_pick) {
        const auto& pool = by_class[cls];
        if (pool.size() < images_per_class)
            throw std::invalid_argument("fixed composition: class " + std::to_string(cls) +
                                        " has " + std::to_string(pool.size()) +
                                        " examples, need " + std::to_string(images_per_class));
        const auto picks = rng.sample_without_replacement(pool.size(), images_per_class);
        for (std::size_t p : picks) batch.push_back(pool[p]);
    }
    return batch;
}

}  // namespace fewshot
