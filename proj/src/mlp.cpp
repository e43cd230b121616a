#include "fewshot/mlp.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fewshot {

MlpParams MlpParams::he_init(const std::vector<std::size_t>& layer_dims, RngStream& rng) {
    if (layer_dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    MlpParams p;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l];
        const std::size_t fan_out = layer_dims[l + 1];
        Matrix w(fan_in, fan_out);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : w.data) v = (2.0 * rng.next_double() - 1.0) * bound;
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
    MlpParams p;
    for (const auto& w : other.weights) p.weights.emplace_back(w.rows, w.cols);
    for (const auto& b : other.biases) p.biases.emplace_back(b.size(), 0.0);
    return p;
}

std::vector<std::size_t> MlpParams::layer_dims() const {
    std::vector<std::size_t> dims;
    dims.push_back(input_dim());
    for (const auto& w : weights) dims.push_back(w.cols);
    return dims;
}

void MlpParams::check_chain() const {
    if (weights.empty() || weights.size() != biases.size())
        throw std::invalid_argument("mlp: malformed parameter set");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].cols)
            throw std::invalid_argument("mlp: bias length mismatch at layer " + std::to_string(l));
        if (l > 0 && weights[l - 1].cols != weights[l].rows)
            throw std::invalid_argument("mlp: layer dims do not chain at layer " + std::to_string(l));
        weights[l].check_finite();
        for (double v : biases[l])
            if (!std::isfinite(v)) throw std::invalid_argument("mlp: non-finite bias");
    }
}

Matrix mlp_forward(const MlpParams& params, const Matrix& x, ForwardCache* cache) {
    if (x.cols != params.input_dim())
        throw std::invalid_argument("mlp forward: input dim " + std::to_string(x.cols) +
                                    " != expected " + std::to_string(params.input_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
    }
    Matrix h = x;
    const std::size_t last = params.num_layers() - 1;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        if (cache) cache->inputs.push_back(h);
        Matrix z = matmul(h, params.weights[l]);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* row = z.data.data() + i * z.cols;
            for (std::size_t j = 0; j < z.cols; ++j) row[j] += params.biases[l][j];
        }
        if (cache) cache->preacts.push_back(z);
        if (l < last) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        }
        h = std::move(z);
    }
    return h;
}

MlpParams mlp_backward(const MlpParams& params, const ForwardCache& cache,
                       const Matrix& grad_embeddings) {
    if (cache.inputs.size() != params.num_layers())
        throw std::invalid_argument("mlp backward: cache does not match network");
    if (grad_embeddings.rows != cache.inputs.front().rows ||
        grad_embeddings.cols != params.output_dim())
        throw std::invalid_argument("mlp backward: upstream gradient shape mismatch");

    MlpParams grads = MlpParams::zeros_like(params);
    Matrix delta = grad_embeddings;
    for (std::size_t li = params.num_layers(); li-- > 0;) {
        grads.weights[li] = matmul_at_b(cache.inputs[li], delta);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* row = delta.data.data() + i * delta.cols;
            for (std::size_t j = 0; j < delta.cols; ++j) grads.biases[li][j] += row[j];
        }
        if (li == 0) break;
        delta = matmul_a_bt(delta, params.weights[li]);
        const Matrix& pre = cache.preacts[li - 1];
        for (std::size_t k = 0; k < delta.data.size(); ++k)
            if (pre.data[k] <= 0.0) delta.data[k] = 0.0;
    }
    return grads;
}

void OptimizerConfig::validate() const {
    // lr == 0 is allowed as a degenerate setting: updates become no-ops.
    if (learning_rate < 0.0) throw std::invalid_argument("optimizer: lr must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("optimizer: momentum must be in [0, 1)");
    if (epochs < 1) throw std::invalid_argument("optimizer: epochs must be >= 1");
}

void sgd_update_array(std::vector<double>& param, const std::vector<double>& grad,
                      std::vector<double>& velocity, double lr, const OptimizerConfig& cfg) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i] + cfg.weight_decay * param[i];
        velocity[i] = cfg.momentum * velocity[i] + g;
        const double step = cfg.nesterov ? g + cfg.momentum * velocity[i] : velocity[i];
        param[i] -= lr * step;
    }
}

void sgd_step(MlpParams& params, const MlpParams& grads, SgdState& state,
              const OptimizerConfig& cfg, std::size_t epoch) {
    if (state.velocity.weights.empty()) state.velocity = MlpParams::zeros_like(params);
    const double lr = cfg.lr_at(epoch);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        sgd_update_array(params.weights[l].data, grads.weights[l].data,
                         state.velocity.weights[l].data, lr, cfg);
        sgd_update_array(params.biases[l], grads.biases[l], state.velocity.biases[l], lr, cfg);
    }
}

void adam_update_array(std::vector<double>& param, const std::vector<double>& grad,
                       std::vector<double>& m, std::vector<double>& v, std::size_t step,
                       const AdamConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i] + cfg.weight_decay * param[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        param[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    }
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
               const AdamConfig& cfg) {
    if (state.first_moment.weights.empty()) {
        state.first_moment = MlpParams::zeros_like(params);
        state.second_moment = MlpParams::zeros_like(params);
    }
    ++state.step;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        adam_update_array(params.weights[l].data, grads.weights[l].data,
                          state.first_moment.weights[l].data,
                          state.second_moment.weights[l].data, state.step, cfg);
        adam_update_array(params.biases[l], grads.biases[l], state.first_moment.biases[l],
                          state.second_moment.biases[l], state.step, cfg);
    }
}

bool loss_needs_episodes(LossKind kind) {
    switch (kind) {
        case LossKind::Proto:
        case LossKind::MatchingNoProto:
        case LossKind::AllPairsProto:
        case LossKind::AllPairsNoProto:
            return true;
        default:
            return false;
    }
}

namespace {

struct BatchLoss {
    double value;
    Matrix grad;  // w.r.t. the embeddings of the batch rows, in batch order
};

BatchLoss episode_batch_loss(const TrainConfig& cfg, const Matrix& z, const Episode& ep) {
    EpisodeEmbeddings emb;
    const std::size_t ns = ep.support.size();
    emb.support_emb = Matrix(ns, z.cols);
    std::copy(z.data.begin(), z.data.begin() + static_cast<std::ptrdiff_t>(ns * z.cols),
              emb.support_emb.data.begin());
    emb.query_emb = Matrix(z.rows - ns, z.cols);
    std::copy(z.data.begin() + static_cast<std::ptrdiff_t>(ns * z.cols), z.data.end(),
              emb.query_emb.data.begin());
    emb.support_labels = ep.support_labels();
    emb.query_labels = ep.query_labels();

    LossResult r;
    switch (cfg.loss) {
        case LossKind::Proto: r = proto_loss(emb); break;
        case LossKind::MatchingNoProto: r = proto_no_prototypes_loss(emb); break;
        case LossKind::AllPairsProto: r = proto_allpairs_loss(emb); break;
        case LossKind::AllPairsNoProto: r = allpairs_no_proto_loss(emb); break;
        default: throw std::logic_error("episode loss dispatch");
    }
    return {r.value, std::move(r.grad)};  // grad rows already [support; query]
}

BatchLoss flat_batch_loss(const TrainConfig& cfg, const Matrix& z, const std::vector<int>& labels,
                          RngStream& mask_rng) {
    LossResult r;
    switch (cfg.loss) {
        case LossKind::Nca:
            r = nca_loss(z, labels);
            break;
        case LossKind::SubsampledNca:
            r = subsampled_nca_loss(z, labels, PairSubsampleConfig{cfg.keep_fraction}, mask_rng);
            break;
        case LossKind::SupContrastive:
            r = sup_contrastive_loss(z, labels, cfg.temperature);
            break;
        default:
            throw std::logic_error("flat loss dispatch");
    }
    return {r.value, std::move(r.grad)};
}

}  // namespace

std::pair<MlpParams, TrainLog> train(const LabeledDataset& ds, const TrainConfig& cfg,
                                     std::uint64_t seed) {
    ds.validate();
    cfg.opt.validate();
    if (ds.size() == 0) throw std::invalid_argument("train: empty dataset");
    const bool episodic_loss = loss_needs_episodes(cfg.loss);
    if (episodic_loss != (cfg.batching.kind == BatchingKind::Episodic))
        throw std::invalid_argument("train: loss/batching mismatch (episode losses need "
                                    "episodic batches and vice versa)");

    RngStream root(seed);
    RngStream init_rng = root.child("init");
    std::vector<std::size_t> dims;
    dims.push_back(ds.dim());
    for (std::size_t h : cfg.model.hidden) dims.push_back(h);
    dims.push_back(cfg.model.embed_dim);
    MlpParams params = MlpParams::he_init(dims, init_rng);

    ProjectionHead projection;
    Matrix proj_velocity;
    const bool has_projection = cfg.model.projection_dim > 0;
    if (has_projection) {
        RngStream proj_rng = root.child("projection");
        projection.weight = Matrix(cfg.model.embed_dim, cfg.model.projection_dim);
        const double bound = std::sqrt(6.0 / static_cast<double>(cfg.model.embed_dim));
        for (double& v : projection.weight.data) v = (2.0 * proj_rng.next_double() - 1.0) * bound;
        proj_velocity = Matrix(projection.weight.rows, projection.weight.cols);
    }

    SgdState state;
    RngStream mask_rng = root.child("pairmask");
    TrainLog log;
    log.seed = seed;

    EpisodeConfig episode_cfg;
    std::size_t steps_per_epoch = 0;
    if (cfg.batching.kind == BatchingKind::Episodic) {
        episode_cfg = shape_to_episode(cfg.batching.episode_shape);
        steps_per_epoch = (ds.size() + episode_cfg.episode_size() - 1) / episode_cfg.episode_size();
    } else if (cfg.batching.kind == BatchingKind::IidBatches) {
        steps_per_epoch = (ds.size() + cfg.batching.batch_size - 1) / cfg.batching.batch_size;
    } else if (cfg.batching.kind == BatchingKind::FixedComposition) {
        const std::size_t per = cfg.batching.classes_per_batch * cfg.batching.images_per_class;
        steps_per_epoch = (ds.size() + per - 1) / per;
    }

    for (std::size_t epoch = 0; epoch < cfg.opt.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream epoch_rng = root.child("epoch").child(epoch);
        double loss_sum = 0.0;
        std::size_t n_batches = 0;

        auto run_step = [&](const std::vector<std::size_t>& idx, const Episode* ep) {
            const Matrix x = ds.features.gather_rows(idx);
            ForwardCache cache;
            Matrix z = mlp_forward(params, x, &cache);

            Matrix z_loss = has_projection ? matmul(z, projection.weight) : std::move(z);
            BatchLoss bl;
            try {
                if (ep) {
                    bl = episode_batch_loss(cfg, z_loss, *ep);
                } else {
                    std::vector<int> labels;
                    labels.reserve(idx.size());
                    for (std::size_t i : idx) labels.push_back(ds.labels[i]);
                    bl = flat_batch_loss(cfg, z_loss, labels, mask_rng);
                }
            } catch (const std::exception& e) {
                throw std::runtime_error("train: loss failed at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(n_batches) + " (size " +
                                         std::to_string(idx.size()) + "): " + e.what());
            }

            Matrix grad_z;
            if (has_projection) {
                // z still holds the unprojected embeddings here
                const Matrix proj_grad = matmul_at_b(z, bl.grad);
                grad_z = matmul_a_bt(bl.grad, projection.weight);
                sgd_update_array(projection.weight.data, proj_grad.data, proj_velocity.data,
                                 cfg.opt.lr_at(epoch), cfg.opt);
            } else {
                grad_z = std::move(bl.grad);
            }
            const MlpParams grads = mlp_backward(params, cache, grad_z);
            sgd_step(params, grads, state, cfg.opt, epoch);
            loss_sum += bl.value;
            ++n_batches;
        };

        if (cfg.batching.kind == BatchingKind::PlainEpochs) {
            const auto batches = epoch_batches(ds, cfg.batching.batch_size, epoch_rng);
            for (const auto& b : batches) run_step(b, nullptr);
        } else if (cfg.batching.kind == BatchingKind::IidBatches) {
            const std::size_t bs = std::min(cfg.batching.batch_size, ds.size());
            for (std::size_t s = 0; s < steps_per_epoch; ++s)
                run_step(epoch_rng.sample_without_replacement(ds.size(), bs), nullptr);
        } else if (cfg.batching.kind == BatchingKind::FixedComposition) {
            for (std::size_t s = 0; s < steps_per_epoch; ++s)
                run_step(sample_fixed_composition_batch(ds, cfg.batching.classes_per_batch,
                                                        cfg.batching.images_per_class, epoch_rng),
                         nullptr);
        } else {
            for (std::size_t s = 0; s < steps_per_epoch; ++s) {
                const Episode ep = sample_episode(ds, episode_cfg, epoch_rng);
                std::vector<std::size_t> idx = ep.support_indices();
                const auto q = ep.query_indices();
                idx.insert(idx.end(), q.begin(), q.end());
                run_step(idx, &ep);
            }
        }

        const auto t1 = std::chrono::steady_clock::now();
        TrainLog::EpochEntry entry;
        entry.mean_loss = n_batches ? loss_sum / static_cast<double>(n_batches) : 0.0;
        entry.lr = cfg.opt.lr_at(epoch);
        entry.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        log.epochs.push_back(entry);
    }
    return {std::move(params), std::move(log)};
}

namespace {

constexpr char kCkMagic[4] = {'F', 'S', 'C', 'K'};
constexpr std::uint32_t kCkVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    write_u64(os, bits);
}

double read_f64(std::istream& is) {
    const std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    ck.params.check_chain();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os.write(kCkMagic, 4);
    write_u64(os, kCkVersion);
    write_u64(os, ck.seed);
    write_u64(os, ck.config_text.size());
    os.write(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
    write_u64(os, ck.params.num_layers());
    for (std::size_t l = 0; l < ck.params.num_layers(); ++l) {
        write_u64(os, ck.params.weights[l].rows);
        write_u64(os, ck.params.weights[l].cols);
        for (double v : ck.params.weights[l].data) write_f64(os, v);
        for (double v : ck.params.biases[l]) write_f64(os, v);
    }
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCkMagic, 4) != 0)
        throw std::runtime_error("'" + path + "' is not a checkpoint file");
    const std::uint64_t version = read_u64(is);
    if (version != kCkVersion)
        throw std::runtime_error("checkpoint version " + std::to_string(version) + " unsupported");
    Checkpoint ck;
    ck.seed = read_u64(is);
    ck.config_text.resize(read_u64(is));
    is.read(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
    const std::uint64_t n_layers = read_u64(is);
    for (std::uint64_t l = 0; l < n_layers; ++l) {
        const std::uint64_t rows = read_u64(is);
        const std::uint64_t cols = read_u64(is);
        Matrix w(rows, cols);
        for (double& v : w.data) v = read_f64(is);
        std::vector<double> b(cols);
        for (double& v : b) v = read_f64(is);
        ck.params.weights.push_back(std::move(w));
        ck.params.biases.push_back(std::move(b));
    }
    ck.params.check_chain();
    return ck;
}

}  // namespace fewshot
