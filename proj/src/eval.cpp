#include "fewshot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fewshot/losses.hpp"
#include "fewshot/numerics.hpp"

namespace fewshot {

NormalizationStats stats_from_embeddings(const Matrix& embeddings) {
    if (embeddings.rows == 0) throw std::invalid_argument("normalization stats: empty matrix");
    std::vector<std::size_t> all(embeddings.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return {mean_rows(embeddings, all)};
}

NormalizationStats compute_train_stats(const MlpParams& params, const LabeledDataset& train) {
    return stats_from_embeddings(mlp_forward(params, train.features));
}

Matrix center_and_normalize(const Matrix& x, const NormalizationStats& stats) {
    if (stats.train_mean.size() != x.cols)
        throw std::invalid_argument("center_and_normalize: stats dim " +
                                    std::to_string(stats.train_mean.size()) + " vs features " +
                                    std::to_string(x.cols));
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double norm_sq = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double v = x.at(i, c) - stats.train_mean[c];
            out.at(i, c) = v;
            norm_sq += v * v;
        }
        if (norm_sq == 0.0)
            throw std::runtime_error("center_and_normalize: row " + std::to_string(i) +
                                     " has zero norm after centering");
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (std::size_t c = 0; c < x.cols; ++c) out.at(i, c) *= inv;
    }
    return out;
}

std::vector<int> knn_classify(const Matrix& support_emb, const std::vector<int>& support_labels,
                              const Matrix& query_emb, std::size_t k) {
    if (k < 1 || k > support_emb.rows)
        throw std::invalid_argument("knn_classify: k=" + std::to_string(k) +
                                    " out of range [1, " + std::to_string(support_emb.rows) + "]");
    const Matrix d2 = pairwise_sq_dists(query_emb, support_emb);
    std::vector<int> out(query_emb.rows);
    std::vector<std::size_t> order(support_emb.rows);
    for (std::size_t i = 0; i < query_emb.rows; ++i) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (d2.at(i, a) != d2.at(i, b)) return d2.at(i, a) < d2.at(i, b);
            return a < b;
        });
        std::map<int, std::pair<std::size_t, double>> votes;  // class -> (count, dist sum)
        for (std::size_t r = 0; r < k; ++r) {
            auto& v = votes[support_labels[order[r]]];
            v.first += 1;
            v.second += d2.at(i, order[r]);
        }
        int best = -1;
        std::size_t best_votes = 0;
        double best_dist = 0.0;
        for (const auto& [label, v] : votes) {  // ascending class id
            if (v.first > best_votes ||
                (v.first == best_votes && v.second < best_dist)) {
                best = label;
                best_votes = v.first;
                best_dist = v.second;
            }
        }
        out[i] = best;
    }
    return out;
}

std::vector<int> centroid_classify(const Matrix& support_emb,
                                   const std::vector<int>& support_labels,
                                   const Matrix& query_emb) {
    const Prototypes protos = compute_prototypes(support_emb, support_labels);
    const Matrix d2 = pairwise_sq_dists(query_emb, protos.centroids);
    std::vector<int> out(query_emb.rows);
    for (std::size_t i = 0; i < query_emb.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < protos.centroids.rows; ++c)
            if (d2.at(i, c) < d2.at(i, best)) best = c;  // strict: ties keep lowest id
        out[i] = protos.class_order[best];
    }
    return out;
}

SoftAssignResult soft_assign_classify(const Matrix& support_emb,
                                      const std::vector<int>& support_labels,
                                      const Matrix& query_emb) {
    std::map<int, std::size_t> class_col;
    for (int l : support_labels) class_col.emplace(l, 0);
    std::size_t col = 0;
    SoftAssignResult res;
    for (auto& [label, c] : class_col) {
        c = col++;
        res.class_order.push_back(label);
    }
    const std::size_t n_classes = res.class_order.size();
    const Matrix d2 = pairwise_sq_dists(query_emb, support_emb);
    res.class_scores = Matrix(query_emb.rows, n_classes);
    res.labels.resize(query_emb.rows);

    std::vector<double> logits(support_emb.rows);
    for (std::size_t i = 0; i < query_emb.rows; ++i) {
        for (std::size_t j = 0; j < support_emb.rows; ++j) logits[j] = -d2.at(i, j);
        const double lse = log_sum_exp(logits);
        for (std::size_t j = 0; j < support_emb.rows; ++j)
            res.class_scores.at(i, class_col.at(support_labels[j])) += std::exp(logits[j] - lse);
        std::size_t best = 0;
        for (std::size_t c = 1; c < n_classes; ++c)
            if (res.class_scores.at(i, c) > res.class_scores.at(i, best)) best = c;
        res.labels[i] = res.class_order[best];
    }
    return res;
}

const char* classifier_name(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Knn: return "knn";
        case ClassifierKind::Centroid: return "centroid";
        case ClassifierKind::SoftAssign: return "soft-assign";
    }
    return "?";
}

ClassifierKind classifier_from_name(const std::string& name) {
    if (name == "knn") return ClassifierKind::Knn;
    if (name == "centroid") return ClassifierKind::Centroid;
    if (name == "soft-assign" || name == "soft") return ClassifierKind::SoftAssign;
    throw std::invalid_argument("unknown classifier '" + name + "'");
}

AdaptMode adapt_mode_from_name(const std::string& name) {
    if (name == "none") return AdaptMode::None;
    if (name == "support-finetune") return AdaptMode::SupportFinetune;
    if (name == "mahalanobis") return AdaptMode::Mahalanobis;
    throw std::invalid_argument("unknown adapt mode '" + name + "'");
}

std::pair<double, double> mean_and_ci95(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean_and_ci95: empty");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return {mean, 1.96 * sd / std::sqrt(n)};
}

namespace {

double run_episode(const MlpParams& params, const LabeledDataset& ds, const EpisodeConfig& cfg,
                   const EvalOptions& opts, const NormalizationStats& stats, RngStream rng) {
    const Episode ep = sample_episode(ds, cfg, rng);
    std::vector<std::size_t> idx = ep.support_indices();
    const auto qidx = ep.query_indices();
    idx.insert(idx.end(), qidx.begin(), qidx.end());
    const Matrix x = ds.features.gather_rows(idx);
    const std::vector<int> s_labels = ep.support_labels();
    const std::vector<int> q_labels = ep.query_labels();
    const std::size_t ns = ep.support.size();

    Matrix z;
    if (opts.adapt == AdaptMode::SupportFinetune) {
        Matrix xs(ns, x.cols);
        std::copy(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(ns * x.cols),
                  xs.data.begin());
        RngStream adapt_rng = rng.child("adapt");
        const MlpParams adapted =
            finetune_on_support(params, xs, s_labels, opts.adapt_cfg, adapt_rng);
        z = mlp_forward(adapted, x);
    } else {
        z = mlp_forward(params, x);
    }
    Matrix zn = center_and_normalize(z, stats);

    if (opts.adapt == AdaptMode::Mahalanobis) {
        Matrix zs(ns, zn.cols);
        std::copy(zn.data.begin(), zn.data.begin() + static_cast<std::ptrdiff_t>(ns * zn.cols),
                  zs.data.begin());
        RngStream metric_rng = rng.child("metric");
        const MahalanobisMetric metric = learn_mahalanobis(
            zs, s_labels, opts.mahalanobis_steps, opts.mahalanobis_lr, metric_rng);
        zn = apply_metric(zn, metric);
    }

    Matrix support(ns, zn.cols), query(zn.rows - ns, zn.cols);
    std::copy(zn.data.begin(), zn.data.begin() + static_cast<std::ptrdiff_t>(ns * zn.cols),
              support.data.begin());
    std::copy(zn.data.begin() + static_cast<std::ptrdiff_t>(ns * zn.cols), zn.data.end(),
              query.data.begin());

    std::vector<int> predicted;
    switch (opts.classifier) {
        case ClassifierKind::Knn:
            predicted = knn_classify(support, s_labels, query,
                                     opts.knn_k ? opts.knn_k : cfg.shots);
            break;
        case ClassifierKind::Centroid:
            predicted = centroid_classify(support, s_labels, query);
            break;
        case ClassifierKind::SoftAssign:
            predicted = soft_assign_classify(support, s_labels, query).labels;
            break;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == q_labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace

EvalReport evaluate(const MlpParams& params, const LabeledDataset& ds, const EpisodeConfig& cfg,
                    const EvalOptions& opts, std::uint64_t seed, const NormalizationStats& stats,
                    std::vector<double>* per_episode_acc) {
    cfg.validate();
    if (opts.n_episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
    if (!ds.split_name.empty() && ds.split_name == "train")
        throw std::invalid_argument("evaluate: refusing the training split (few-shot evaluation "
                                    "uses classes disjoint from training)");

    const RngStream base = RngStream(seed).child("episodes");
    std::vector<double> acc(opts.n_episodes, 0.0);

    // Accuracies are keyed to episode indices, so any fan-out reduces to the
    // same report as sequential execution.
    const std::size_t workers = std::max<std::size_t>(1, opts.workers);
    if (workers == 1) {
        for (std::size_t e = 0; e < opts.n_episodes; ++e)
            acc[e] = run_episode(params, ds, cfg, opts, stats, base.child(e));
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        for (std::size_t wid = 0; wid < workers; ++wid) {
            pool.emplace_back([&, wid]() {
                try {
                    for (std::size_t e = wid; e < opts.n_episodes; e += workers)
                        acc[e] = run_episode(params, ds, cfg, opts, stats, base.child(e));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }

    EvalReport report;
    const auto [mean, ci] = mean_and_ci95(acc);
    report.mean_accuracy = mean;
    report.ci95_halfwidth = ci;
    report.n_episodes = opts.n_episodes;
    report.episode = cfg;
    report.classifier = classifier_name(opts.classifier);
    report.seed = seed;
    if (per_episode_acc) *per_episode_acc = std::move(acc);
    return report;
}

std::string eval_csv_header() { return "classifier,w,n,m,n_episodes,mean_acc,ci95,seed"; }

std::string eval_csv_row(const EvalReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%.17g,%.17g,%llu", r.classifier.c_str(),
                  r.episode.ways, r.episode.shots, r.episode.queries, r.n_episodes,
                  r.mean_accuracy, r.ci95_halfwidth,
                  static_cast<unsigned long long>(r.seed));
    return buf;
}

}  // namespace fewshot
