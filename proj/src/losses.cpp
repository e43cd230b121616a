#include "fewshot/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>

#include "fewshot/numerics.hpp"

namespace fewshot {

namespace {

void check_result(const LossResult& r) {
    if (!std::isfinite(r.value) || !r.grad.all_finite())
        throw std::runtime_error("numerical overflow");
}

std::map<int, std::vector<std::size_t>> group_by_label(const std::vector<int>& labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    return groups;
}

/// NCA over rows of z, optionally restricted to a symmetric keep mask over
/// pairs (mask size b*b, diagonal ignored). Null mask means keep everything;
/// the all-ones mask executes the identical float operations.
LossResult nca_core(const Matrix& z, const std::vector<int>& labels,
                    const std::vector<std::uint8_t>* keep) {
    const std::size_t b = z.rows;
    if (b < 2) throw std::invalid_argument("nca loss: need at least 2 rows");
    if (labels.size() != b) throw std::invalid_argument("nca loss: label count mismatch");

    const Matrix d2 = pairwise_sq_dists(z, z);

    // Pass 1: per-anchor log-sum-exp over positives (A) and over all kept
    // neighbours (B); anchors with no kept positive are skipped.
    std::vector<double> lse_pos(b), lse_all(b);
    std::vector<std::uint8_t> contributes(b, 0);
    std::vector<double> buf_all, buf_pos;
    std::size_t n_contributing = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        buf_all.clear();
        buf_pos.clear();
        for (std::size_t k = 0; k < b; ++k) {
            if (k == i) continue;
            if (keep && !(*keep)[i * b + k]) continue;
            const double v = -d2.at(i, k);
            buf_all.push_back(v);
            if (labels[k] == labels[i]) buf_pos.push_back(v);
        }
        if (buf_pos.empty()) continue;
        contributes[i] = 1;
        ++n_contributing;
        lse_pos[i] = log_sum_exp(buf_pos);
        lse_all[i] = log_sum_exp(buf_all);
        total += lse_all[i] - lse_pos[i];
    }
    if (n_contributing == 0) throw std::runtime_error("no positive pairs in batch");

    LossResult out;
    out.value = total / static_cast<double>(n_contributing);
    out.grad = Matrix(b, z.cols);

    // Pass 2: d(term_i)/d(d2_ik) = [same class] * p_pos - p_all, then chain
    // through d2_ik = ||z_i - z_k||^2.
    const double inv_m = 1.0 / static_cast<double>(n_contributing);
    for (std::size_t i = 0; i < b; ++i) {
        if (!contributes[i]) continue;
        for (std::size_t k = 0; k < b; ++k) {
            if (k == i) continue;
            if (keep && !(*keep)[i * b + k]) continue;
            double coef = -std::exp(-d2.at(i, k) - lse_all[i]);
            if (labels[k] == labels[i]) coef += std::exp(-d2.at(i, k) - lse_pos[i]);
            const double w = coef * inv_m;
            double* gi = out.grad.data.data() + i * z.cols;
            double* gk = out.grad.data.data() + k * z.cols;
            const double* zi = z.data.data() + i * z.cols;
            const double* zk = z.data.data() + k * z.cols;
            for (std::size_t c = 0; c < z.cols; ++c) {
                const double g = 2.0 * w * (zi[c] - zk[c]);
                gi[c] += g;
                gk[c] -= g;
            }
        }
    }
    check_result(out);
    return out;
}

}  // namespace

void EpisodeEmbeddings::validate() const {
    if (support_labels.size() != support_emb.rows)
        throw std::invalid_argument("episode embeddings: support label count mismatch");
    if (query_labels.size() != query_emb.rows)
        throw std::invalid_argument("episode embeddings: query label count mismatch");
    if (support_emb.rows == 0 || query_emb.rows == 0)
        throw std::invalid_argument("episode embeddings: empty support or query set");
    if (support_emb.cols != query_emb.cols)
        throw std::invalid_argument("episode embeddings: dim mismatch " +
                                    support_emb.shape_str() + " vs " + query_emb.shape_str());
    const auto s_groups = group_by_label(support_labels);
    const auto q_groups = group_by_label(query_labels);
    std::size_t shots = 0, queries = 0;
    for (const auto& [label, rows] : s_groups) {
        if (shots == 0) shots = rows.size();
        if (rows.size() != shots)
            throw std::invalid_argument("episode embeddings: unequal support counts per class");
    }
    // Sampled episodes have the same label set on both sides; query classes
    // that form a strict subset of the support classes are still well-posed
    // for every query-anchored loss, so only the subset direction is enforced.
    for (const auto& [label, rows] : q_groups) {
        if (!s_groups.count(label))
            throw std::invalid_argument("episode embeddings: query class " +
                                        std::to_string(label) + " missing from support set");
        if (queries == 0) queries = rows.size();
        if (rows.size() != queries)
            throw std::invalid_argument("episode embeddings: unequal query counts per class");
    }
}

Prototypes compute_prototypes(const Matrix& support_emb,
                              const std::vector<int>& support_labels) {
    if (support_emb.rows == 0 || support_labels.size() != support_emb.rows)
        throw std::invalid_argument("compute_prototypes: empty class");
    const auto groups = group_by_label(support_labels);  // std::map: ascending ids
    Prototypes out;
    out.centroids = Matrix(groups.size(), support_emb.cols);
    std::size_t row = 0;
    for (const auto& [label, rows] : groups) {
        const auto mean = mean_rows(support_emb, rows);
        std::copy(mean.begin(), mean.end(), out.centroids.row(row).begin());
        out.class_order.push_back(label);
        ++row;
    }
    return out;
}

LossResult proto_loss(const EpisodeEmbeddings& ep, std::vector<double>* per_query_terms) {
    ep.validate();
    const auto protos = compute_prototypes(ep.support_emb, ep.support_labels);
    const std::size_t w = protos.centroids.rows;
    const std::size_t nq = ep.query_emb.rows;
    std::map<int, std::size_t> class_row;
    for (std::size_t k = 0; k < w; ++k) class_row[protos.class_order[k]] = k;

    const Matrix d2 = pairwise_sq_dists(ep.query_emb, protos.centroids);

    LossResult out;
    out.grad = Matrix(ep.total_rows(), ep.support_emb.cols);
    Matrix proto_grad(w, ep.support_emb.cols);
    if (per_query_terms) per_query_terms->clear();

    const double inv_q = 1.0 / static_cast<double>(nq);
    std::vector<double> logits(w);
    for (std::size_t i = 0; i < nq; ++i) {
        for (std::size_t k = 0; k < w; ++k) logits[k] = -d2.at(i, k);
        const double lse = log_sum_exp(logits);
        const std::size_t y = class_row.at(ep.query_labels[i]);
        const double term = d2.at(i, y) + lse;
        out.value += term * inv_q;
        if (per_query_terms) per_query_terms->push_back(term);

        for (std::size_t k = 0; k < w; ++k) {
            // d(term)/d(d2_ik) = [k == y] - softmax_k
            double dterm = -std::exp(-d2.at(i, k) - lse);
            if (k == y) dterm += 1.0;
            const double wgt = dterm * inv_q;
            double* gq = out.grad.data.data() + (ep.support_emb.rows + i) * out.grad.cols;
            double* gp = proto_grad.data.data() + k * proto_grad.cols;
            const double* q = ep.query_emb.data.data() + i * ep.query_emb.cols;
            const double* c = protos.centroids.data.data() + k * protos.centroids.cols;
            for (std::size_t cdim = 0; cdim < out.grad.cols; ++cdim) {
                const double g = 2.0 * wgt * (q[cdim] - c[cdim]);
                gq[cdim] += g;
                gp[cdim] -= g;
            }
        }
    }

    // Route prototype gradients to the support rows that formed each mean.
    const auto groups = group_by_label(ep.support_labels);
    for (const auto& [label, rows] : groups) {
        const std::size_t k = class_row.at(label);
        const double inv_n = 1.0 / static_cast<double>(rows.size());
        for (std::size_t s : rows) {
            double* gs = out.grad.data.data() + s * out.grad.cols;
            const double* gp = proto_grad.data.data() + k * proto_grad.cols;
            for (std::size_t c = 0; c < out.grad.cols; ++c) gs[c] += gp[c] * inv_n;
        }
    }
    check_result(out);
    return out;
}

LossResult nca_loss(const Matrix& emb, const std::vector<int>& labels) {
    return nca_core(emb, labels, nullptr);
}

LossResult proto_no_prototypes_loss(const EpisodeEmbeddings& ep,
                                    std::vector<double>* per_query_terms) {
    ep.validate();
    const std::size_t ns = ep.support_emb.rows;
    const std::size_t nq = ep.query_emb.rows;
    const Matrix d2 = pairwise_sq_dists(ep.query_emb, ep.support_emb);

    LossResult out;
    out.grad = Matrix(ep.total_rows(), ep.support_emb.cols);
    if (per_query_terms) per_query_terms->clear();
    const double norm = 1.0 / static_cast<double>(nq + ns);

    std::vector<double> buf_all(ns), buf_pos;
    for (std::size_t i = 0; i < nq; ++i) {
        buf_pos.clear();
        for (std::size_t j = 0; j < ns; ++j) {
            buf_all[j] = -d2.at(i, j);
            if (ep.support_labels[j] == ep.query_labels[i]) buf_pos.push_back(-d2.at(i, j));
        }
        const double lse_all = log_sum_exp(buf_all);
        const double lse_pos = log_sum_exp(buf_pos);
        const double term = lse_all - lse_pos;
        out.value += term * norm;
        if (per_query_terms) per_query_terms->push_back(term);

        for (std::size_t j = 0; j < ns; ++j) {
            double coef = -std::exp(-d2.at(i, j) - lse_all);
            if (ep.support_labels[j] == ep.query_labels[i])
                coef += std::exp(-d2.at(i, j) - lse_pos);
            const double w = coef * norm;
            double* gq = out.grad.data.data() + (ns + i) * out.grad.cols;
            double* gs = out.grad.data.data() + j * out.grad.cols;
            const double* q = ep.query_emb.data.data() + i * ep.query_emb.cols;
            const double* s = ep.support_emb.data.data() + j * ep.support_emb.cols;
            for (std::size_t c = 0; c < out.grad.cols; ++c) {
                const double g = 2.0 * w * (q[c] - s[c]);
                gq[c] += g;
                gs[c] -= g;
            }
        }
    }
    check_result(out);
    return out;
}

LossResult proto_allpairs_loss(const EpisodeEmbeddings& ep) {
    ep.validate();
    const auto protos = compute_prototypes(ep.support_emb, ep.support_labels);
    const std::size_t w = protos.centroids.rows;
    const std::size_t nq = ep.query_emb.rows;
    const std::size_t ns = ep.support_emb.rows;

    // Anchor set is Q followed by the prototypes C.
    Matrix z = vstack(ep.query_emb, protos.centroids);
    std::vector<int> zl = ep.query_labels;
    zl.insert(zl.end(), protos.class_order.begin(), protos.class_order.end());
    const std::size_t bz = z.rows;

    const Matrix d2 = pairwise_sq_dists(z, z);
    LossResult out;
    out.grad = Matrix(ep.total_rows(), z.cols);
    Matrix zgrad(bz, z.cols);
    const double norm = 1.0 / static_cast<double>(nq + ns);

    std::vector<double> buf_all, buf_pos;
    for (std::size_t i = 0; i < bz; ++i) {
        buf_all.clear();
        buf_pos.clear();
        for (std::size_t k = 0; k < bz; ++k) {
            if (k == i) continue;
            buf_all.push_back(-d2.at(i, k));
            if (zl[k] == zl[i]) buf_pos.push_back(-d2.at(i, k));
        }
        if (buf_pos.empty()) throw std::runtime_error("no positive pairs in batch");
        const double lse_pos = log_sum_exp(buf_pos);
        const double lse_all = log_sum_exp(buf_all);
        out.value += (lse_all - lse_pos) * norm;

        for (std::size_t k = 0; k < bz; ++k) {
            if (k == i) continue;
            double coef = -std::exp(-d2.at(i, k) - lse_all);
            if (zl[k] == zl[i]) coef += std::exp(-d2.at(i, k) - lse_pos);
            const double wg = coef * norm;
            double* gi = zgrad.data.data() + i * z.cols;
            double* gk = zgrad.data.data() + k * z.cols;
            const double* zi = z.data.data() + i * z.cols;
            const double* zk = z.data.data() + k * z.cols;
            for (std::size_t c = 0; c < z.cols; ++c) {
                const double g = 2.0 * wg * (zi[c] - zk[c]);
                gi[c] += g;
                gk[c] -= g;
            }
        }
    }

    // Queries take their rows directly; prototype rows spread over supports.
    for (std::size_t i = 0; i < nq; ++i) {
        double* gq = out.grad.data.data() + (ns + i) * out.grad.cols;
        const double* gz = zgrad.data.data() + i * z.cols;
        for (std::size_t c = 0; c < z.cols; ++c) gq[c] += gz[c];
    }
    std::map<int, std::size_t> class_row;
    for (std::size_t k = 0; k < w; ++k) class_row[protos.class_order[k]] = k;
    const auto groups = group_by_label(ep.support_labels);
    for (const auto& [label, rows] : groups) {
        const std::size_t k = class_row.at(label);
        const double inv_n = 1.0 / static_cast<double>(rows.size());
        const double* gz = zgrad.data.data() + (nq + k) * z.cols;
        for (std::size_t s : rows) {
            double* gs = out.grad.data.data() + s * out.grad.cols;
            for (std::size_t c = 0; c < z.cols; ++c) gs[c] += gz[c] * inv_n;
        }
    }
    check_result(out);
    return out;
}

LossResult allpairs_no_proto_loss(const EpisodeEmbeddings& ep) {
    ep.validate();
    const Matrix z = vstack(ep.support_emb, ep.query_emb);
    std::vector<int> labels = ep.support_labels;
    labels.insert(labels.end(), ep.query_labels.begin(), ep.query_labels.end());
    return nca_loss(z, labels);
}

std::vector<std::uint8_t> draw_pair_mask(std::size_t batch_size, double keep_fraction,
                                         RngStream& rng) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw std::invalid_argument("pair subsampling: keep fraction must be in (0, 1]");
    std::vector<std::uint8_t> keep(batch_size * batch_size, 0);
    for (std::size_t i = 0; i < batch_size; ++i) {
        for (std::size_t j = i + 1; j < batch_size; ++j) {
            const std::uint8_t k = rng.next_double() < keep_fraction ? 1 : 0;
            keep[i * batch_size + j] = k;
            keep[j * batch_size + i] = k;
        }
    }
    return keep;
}

LossResult subsampled_nca_loss(const Matrix& emb, const std::vector<int>& labels,
                               const PairSubsampleConfig& cfg, RngStream& rng) {
    const std::size_t b = emb.rows;
    if (b < 2) throw std::invalid_argument("nca loss: need at least 2 rows");
    const std::vector<std::uint8_t> keep = draw_pair_mask(b, cfg.keep_fraction, rng);
    return nca_core(emb, labels, &keep);
}

LossResult sup_contrastive_loss(const Matrix& emb, const std::vector<int>& labels,
                                double temperature) {
    if (!(temperature > 0.0))
        throw std::invalid_argument("sup_contrastive_loss: temperature must be positive");
    const std::size_t b = emb.rows;
    if (b < 2) throw std::invalid_argument("sup_contrastive_loss: need at least 2 rows");
    if (labels.size() != b)
        throw std::invalid_argument("sup_contrastive_loss: label count mismatch");

    const Matrix d2 = pairwise_sq_dists(emb, emb);
    const double inv_t = 1.0 / temperature;

    std::vector<std::vector<std::size_t>> pos(b), neg(b);
    std::size_t n_contributing = 0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t k = 0; k < b; ++k) {
            if (k == i) continue;
            (labels[k] == labels[i] ? pos[i] : neg[i]).push_back(k);
        }
        if (!pos[i].empty()) {
            ++n_contributing;
            if (neg[i].empty()) throw std::runtime_error("no negative pairs");
        }
    }
    if (n_contributing == 0) throw std::runtime_error("no positive pairs in batch");

    LossResult out;
    out.grad = Matrix(b, emb.cols);
    const double inv_m = 1.0 / static_cast<double>(n_contributing);
    std::vector<double> buf;
    for (std::size_t i = 0; i < b; ++i) {
        if (pos[i].empty()) continue;
        buf.clear();
        for (std::size_t k : neg[i]) buf.push_back(-d2.at(i, k) * inv_t);
        const double lse_neg = log_sum_exp(buf);
        const double inv_p = 1.0 / static_cast<double>(pos[i].size());

        double term = lse_neg;
        for (std::size_t p : pos[i]) term += d2.at(i, p) * inv_t * inv_p;
        out.value += term * inv_m;

        auto accumulate = [&](std::size_t k, double dterm_dd2) {
            const double w = dterm_dd2 * inv_m;
            double* gi = out.grad.data.data() + i * emb.cols;
            double* gk = out.grad.data.data() + k * emb.cols;
            const double* zi = emb.data.data() + i * emb.cols;
            const double* zk = emb.data.data() + k * emb.cols;
            for (std::size_t c = 0; c < emb.cols; ++c) {
                const double g = 2.0 * w * (zi[c] - zk[c]);
                gi[c] += g;
                gk[c] -= g;
            }
        };
        for (std::size_t p : pos[i]) accumulate(p, inv_t * inv_p);
        for (std::size_t k : neg[i])
            accumulate(k, -std::exp(-d2.at(i, k) * inv_t - lse_neg) * inv_t);
    }
    check_result(out);
    return out;
}

}  // namespace fewshot
