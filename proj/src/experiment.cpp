#include "fewshot/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fewshot {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += "+";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_seeds(const std::vector<std::uint64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += "+";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += "+";
        out += fmt_double(v[i]);
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

std::string opt_canonical(const OptimizerConfig& o) {
    return "lr=" + fmt_double(o.learning_rate) + ";momentum=" + fmt_double(o.momentum) +
           ";nesterov=" + (o.nesterov ? "1" : "0") + ";wd=" + fmt_double(o.weight_decay) +
           ";epochs=" + std::to_string(o.epochs) + ";lr_decay=" + fmt_double(o.lr_decay_factor);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return detail::splitmix64(base ^ detail::splitmix64(salt));
}

EvalReport eval_model(const MlpParams& params, const DatasetFile& ds,
                      const std::string& eval_split, const EpisodeConfig& cfg,
                      const EvalOptions& opts, std::uint64_t seed,
                      std::vector<double>* accs = nullptr) {
    const NormalizationStats stats = compute_train_stats(params, ds.split("train"));
    return evaluate(params, ds.split(eval_split), cfg, opts, seed, stats, accs);
}

}  // namespace

std::uint64_t config_hash(const std::string& canonical) { return detail::fnv1a64(canonical); }

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

OptimizerConfig desk_optimizer() {
    OptimizerConfig opt;
    // Stable step size for the desk-scale MLP; the full-size schedule in
    // OptimizerConfig's own defaults (lr 0.1) diverges on a net this small.
    opt.learning_rate = 0.01;
    opt.momentum = 0.9;
    opt.nesterov = true;
    opt.weight_decay = 5e-4;
    opt.epochs = 20;
    opt.lr_decay_factor = 0.1;
    return opt;
}

std::string cmd_gen_data(const SyntheticSpec& spec, const std::string& out_path) {
    const DatasetFile ds = generate_synthetic(spec);
    save_dataset(ds, out_path);
    return out_path;
}

std::string TrainSpec::canonical() const {
    return "cmd=train;dataset=" + dataset_path + ";split=" + split + ";loss=" + loss +
           ";batching=" + batching + ";b=" + std::to_string(batch_size) +
           ";n=" + std::to_string(shots) + ";a=" + std::to_string(images_per_class) +
           ";fixed_c=" + std::to_string(fixed_classes) +
           ";fixed_i=" + std::to_string(fixed_images) + ";f=" + fmt_double(keep_fraction) +
           ";tau=" + fmt_double(temperature) + ";hidden=" + fmt_sizes(hidden) +
           ";embed=" + std::to_string(embed_dim) + ";proj=" + std::to_string(projection_dim) +
           ";" + opt_canonical(opt) + ";seeds=" + fmt_seeds(seeds);
}

LossKind loss_from_name(const std::string& name) {
    if (name == "nca") return LossKind::Nca;
    if (name == "proto") return LossKind::Proto;
    if (name == "matching" || name == "no-proto") return LossKind::MatchingNoProto;
    if (name == "allpairs" || name == "no-sq") return LossKind::AllPairsProto;
    if (name == "allpairs-noproto") return LossKind::AllPairsNoProto;
    if (name == "nca-subsampled") return LossKind::SubsampledNca;
    if (name == "supcon") return LossKind::SupContrastive;
    throw std::invalid_argument("unknown loss '" + name + "'");
}

TrainConfig to_train_config(const TrainSpec& spec) {
    TrainConfig cfg;
    cfg.model.hidden = spec.hidden;
    cfg.model.embed_dim = spec.embed_dim;
    cfg.model.projection_dim = spec.projection_dim;
    cfg.opt = spec.opt;
    cfg.loss = loss_from_name(spec.loss);
    cfg.keep_fraction = spec.keep_fraction;
    cfg.temperature = spec.temperature;
    if (spec.batching == "plain") {
        cfg.batching.kind = BatchingKind::PlainEpochs;
        cfg.batching.batch_size = spec.batch_size;
    } else if (spec.batching == "iid") {
        cfg.batching.kind = BatchingKind::IidBatches;
        cfg.batching.batch_size = spec.batch_size;
    } else if (spec.batching == "fixed") {
        cfg.batching.kind = BatchingKind::FixedComposition;
        cfg.batching.classes_per_batch = spec.fixed_classes;
        cfg.batching.images_per_class = spec.fixed_images;
    } else if (spec.batching == "episodic") {
        cfg.batching.kind = BatchingKind::Episodic;
        cfg.batching.episode_shape =
            BatchShapeConfig{spec.shots, spec.images_per_class, spec.batch_size};
    } else {
        throw std::invalid_argument("unknown batching '" + spec.batching + "'");
    }
    return cfg;
}

TrainArtifacts cmd_train(const TrainSpec& spec) {
    const DatasetFile ds = load_dataset(spec.dataset_path);
    const TrainConfig cfg = to_train_config(spec);
    const std::string hash = hash_hex(config_hash(spec.canonical()));

    TrainArtifacts artifacts;
    std::string csv = "seed,epoch,mean_loss,lr,config_hash\n";
    for (std::uint64_t seed : spec.seeds) {
        auto [params, log] = train(ds.split(spec.split), cfg, seed);
        for (std::size_t e = 0; e < log.epochs.size(); ++e) {
            csv += std::to_string(seed) + "," + std::to_string(e) + "," +
                   fmt_double(log.epochs[e].mean_loss) + "," + fmt_double(log.epochs[e].lr) +
                   "," + hash + "\n";
        }
        Checkpoint ck{std::move(params), seed, spec.canonical()};
        const std::string path =
            spec.out_dir + "/" + spec.tag + "_seed" + std::to_string(seed) + ".ckpt";
        save_checkpoint(ck, path);
        artifacts.checkpoint_paths.push_back(path);
    }
    artifacts.log_csv_path = spec.out_dir + "/" + spec.tag + "_train_log.csv";
    write_text_file(artifacts.log_csv_path, csv);
    return artifacts;
}

std::string EvalSpec::canonical() const {
    std::string cls;
    for (std::size_t i = 0; i < classifiers.size(); ++i) {
        if (i) cls += "+";
        cls += classifiers[i];
    }
    return "cmd=eval;dataset=" + dataset_path + ";split=" + split + ";classifiers=" + cls +
           ";shots=" + fmt_sizes(shot_settings) + ";w=" + std::to_string(ways) +
           ";m=" + std::to_string(queries) + ";episodes=" + std::to_string(n_episodes) +
           ";knn_k=" + std::to_string(knn_k) + ";adapt=" + adapt +
           ";adapt_epochs=" + std::to_string(adapt_epochs) + ";adapt_lr=" + fmt_double(adapt_lr) +
           ";maha_steps=" + std::to_string(mahalanobis_steps) +
           ";maha_lr=" + fmt_double(mahalanobis_lr) + ";eval_seed=" + std::to_string(eval_seed);
}

std::string cmd_eval(const EvalSpec& spec) {
    const DatasetFile ds = load_dataset(spec.dataset_path);
    const std::string hash = hash_hex(config_hash(spec.canonical()));

    std::vector<Checkpoint> models;
    for (const auto& path : spec.checkpoint_paths) {
        models.push_back(load_checkpoint(path));
        if (models.back().params.input_dim() != ds.dim())
            throw std::runtime_error("checkpoint '" + path + "' expects dim " +
                                     std::to_string(models.back().params.input_dim()) +
                                     ", dataset has " + std::to_string(ds.dim()));
    }
    if (models.empty()) throw std::invalid_argument("cmd_eval: no checkpoints given");

    std::string csv = eval_csv_header() + ",config_hash\n";
    for (const auto& cls_name : spec.classifiers) {
        EvalOptions opts;
        opts.classifier = classifier_from_name(cls_name);
        opts.n_episodes = spec.n_episodes;
        opts.knn_k = spec.knn_k;
        opts.workers = spec.workers;
        opts.adapt = adapt_mode_from_name(spec.adapt);
        opts.adapt_cfg.epochs = spec.adapt_epochs;
        opts.adapt_cfg.opt.learning_rate = spec.adapt_lr;
        opts.mahalanobis_steps = spec.mahalanobis_steps;
        opts.mahalanobis_lr = spec.mahalanobis_lr;
        for (std::size_t shots : spec.shot_settings) {
            EpisodeConfig cfg{spec.ways, shots, spec.queries};
            std::vector<double> pooled;
            for (const auto& model : models) {
                std::vector<double> accs;
                const NormalizationStats stats =
                    compute_train_stats(model.params, ds.split("train"));
                const std::uint64_t seed = derive_seed(spec.eval_seed, model.seed);
                const EvalReport r =
                    evaluate(model.params, ds.split(spec.split), cfg, opts, seed, stats, &accs);
                pooled.insert(pooled.end(), accs.begin(), accs.end());
                csv += eval_csv_row(r) + "," + hash + "\n";
            }
            const auto [mean, ci] = mean_and_ci95(pooled);
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%.17g,%.17g,pooled,%s\n",
                          cls_name.c_str(), spec.ways, shots, spec.queries, pooled.size(), mean,
                          ci, hash.c_str());
            csv += buf;
        }
    }
    write_text_file(spec.out_csv, csv);
    return spec.out_csv;
}

std::vector<PairsTableRow> pairs_reference_table() {
    // Episodic variants of one 512-image batch vs the whole-batch scheme at
    // a = 8 images per class.
    std::vector<PairsTableRow> rows;
    rows.push_back({"NCA", nca_pair_counts(512 / 8, 1, 7)});
    rows.push_back({"5-shot a=16", pn_pair_counts(512 / 16, 5, 16 - 5)});
    rows.push_back({"5-shot a=8", pn_pair_counts(512 / 8, 5, 8 - 5)});
    rows.push_back({"5-shot a=32", pn_pair_counts(512 / 32, 5, 32 - 5)});
    rows.push_back({"1-shot a=8", pn_pair_counts(512 / 8, 1, 8 - 1)});
    return rows;
}

std::string format_pairs_table() {
    std::ostringstream os;
    os << "rank  method        positives  negatives  total\n";
    const auto rows = pairs_reference_table();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-4zu  %-12s  %9llu  %9llu  %7llu\n", i + 1,
                      rows[i].method.c_str(),
                      static_cast<unsigned long long>(rows[i].counts.positives),
                      static_cast<unsigned long long>(rows[i].counts.negatives),
                      static_cast<unsigned long long>(rows[i].counts.total()));
        os << buf;
    }
    return os.str();
}

std::string format_pairs_breakdown(std::uint64_t w, std::uint64_t n, std::uint64_t m) {
    const InequalityReport rep = check_inequalities(w, n, m);
    const std::uint64_t extra = extra_pairs(w, n, m);
    std::ostringstream os;
    os << "episode w=" << w << " n=" << n << " m=" << m << "\n";
    os << "  episodic (PN): " << rep.pn.positives << " positives, " << rep.pn.negatives
       << " negatives, " << rep.pn.total() << " total\n";
    os << "  whole-batch (NCA): " << rep.nca.positives << " positives, " << rep.nca.negatives
       << " negatives, " << rep.nca.total() << " total\n";
    os << "  extra pairs for NCA: " << extra << "\n";
    os << "  nca_pos >= pn_pos: " << (rep.positives_ok ? "yes" : "VIOLATED")
       << (rep.positives_equal ? " (equal)" : "") << "\n";
    os << "  nca_neg >  pn_neg: " << (rep.negatives_strict ? "yes" : "VIOLATED") << "\n";
    return os.str();
}

std::string RunSettings::canonical() const {
    return "hidden=" + fmt_sizes(hidden) + ";embed=" + std::to_string(embed_dim) + ";" +
           opt_canonical(opt) + ";w=" + std::to_string(ways) + ";m=" + std::to_string(queries) +
           ";episodes=" + std::to_string(n_episodes) +
           ";eval_seed=" + std::to_string(eval_seed) + ";eval_split=" + eval_split;
}

namespace {

/// Trains one grid configuration and evaluates it at 1- and/or 5-shot.
GridCell run_cell(const DatasetFile& ds, const std::string& config_name, const TrainConfig& cfg,
                  std::uint64_t seed, std::size_t batch_size, const RunSettings& run,
                  bool eval_1shot, std::size_t eval_shots_5 = 5) {
    const MlpParams params = train(ds.split("train"), cfg, seed).first;
    GridCell cell;
    cell.config = config_name;
    cell.batch_size = batch_size;
    cell.seed = seed;

    EvalOptions opts;
    opts.classifier = ClassifierKind::Centroid;
    opts.n_episodes = run.n_episodes;
    opts.workers = run.workers;

    EpisodeConfig cfg5{run.ways, eval_shots_5, run.queries};
    cell.report_5shot =
        eval_model(params, ds, run.eval_split, cfg5, opts, derive_seed(run.eval_seed, seed));
    if (eval_1shot) {
        EpisodeConfig cfg1{run.ways, 1, run.queries};
        cell.report_1shot = eval_model(params, ds, run.eval_split, cfg1, opts,
                                       derive_seed(run.eval_seed, seed ^ 0x15u));
        cell.has_1shot = true;
    }
    return cell;
}

TrainConfig base_train_config(const RunSettings& run) {
    TrainConfig cfg;
    cfg.model.hidden = run.hidden;
    cfg.model.embed_dim = run.embed_dim;
    cfg.opt = run.opt;
    return cfg;
}

TrainConfig nca_plain_config(const RunSettings& run, std::size_t batch) {
    TrainConfig cfg = base_train_config(run);
    cfg.loss = LossKind::Nca;
    cfg.batching.kind = BatchingKind::PlainEpochs;
    cfg.batching.batch_size = batch;
    return cfg;
}

TrainConfig episodic_config(const RunSettings& run, LossKind loss, std::size_t shots,
                            std::size_t images_per_class, std::size_t batch) {
    TrainConfig cfg = base_train_config(run);
    cfg.loss = loss;
    cfg.batching.kind = BatchingKind::Episodic;
    cfg.batching.episode_shape = BatchShapeConfig{shots, images_per_class, batch};
    return cfg;
}

}  // namespace

std::string AblateSpec::canonical() const {
    return "cmd=ablate;dataset=" + dataset_path + ";batches=" + fmt_sizes(batch_sizes) +
           ";seeds=" + fmt_seeds(seeds) + ";" + run.canonical();
}

std::vector<GridCell> run_ablation(const DatasetFile& ds, const AblateSpec& spec) {
    std::vector<GridCell> cells;
    for (std::size_t batch : spec.batch_sizes) {
        for (std::uint64_t seed : spec.seeds) {
            {
                TrainConfig cfg = nca_plain_config(spec.run, batch);
                cells.push_back(run_cell(ds, "nca", cfg, seed, batch, spec.run, true));
            }
            {
                TrainConfig cfg = nca_plain_config(spec.run, batch);
                cfg.batching.kind = BatchingKind::IidBatches;
                cells.push_back(
                    run_cell(ds, "nca-replacement", cfg, seed, batch, spec.run, true));
            }
            {
                TrainConfig cfg = base_train_config(spec.run);
                cfg.loss = LossKind::Nca;
                cfg.batching.kind = BatchingKind::FixedComposition;
                cfg.batching.classes_per_batch = batch / 8;
                cfg.batching.images_per_class = 8;
                cells.push_back(run_cell(ds, "nca-fixed", cfg, seed, batch, spec.run, true));
            }
            cells.push_back(run_cell(
                ds, "pn-1shot", episodic_config(spec.run, LossKind::Proto, 1, 8, batch), seed,
                batch, spec.run, true));
            cells.push_back(run_cell(
                ds, "pn-5shot", episodic_config(spec.run, LossKind::Proto, 5, 8, batch), seed,
                batch, spec.run, true));
            // No 1-shot "no proto" variant exists: single-shot episodes have
            // no prototypes to disable.
            cells.push_back(run_cell(
                ds, "no-proto",
                episodic_config(spec.run, LossKind::MatchingNoProto, 5, 8, batch), seed, batch,
                spec.run, true));
            cells.push_back(run_cell(
                ds, "no-sq", episodic_config(spec.run, LossKind::AllPairsProto, 5, 8, batch),
                seed, batch, spec.run, true));
        }
    }
    return cells;
}

std::string cmd_ablate(const AblateSpec& spec) {
    const DatasetFile ds = load_dataset(spec.dataset_path);
    const auto cells = run_ablation(ds, spec);
    const std::string hash = hash_hex(config_hash(spec.canonical()));
    std::string csv = "row,batch_size,seed,acc_1shot,ci_1shot,acc_5shot,ci_5shot,config_hash\n";
    for (const auto& c : cells) {
        csv += c.config + "," + std::to_string(c.batch_size) + "," + std::to_string(c.seed) +
               "," + fmt_double(c.report_1shot.mean_accuracy) + "," +
               fmt_double(c.report_1shot.ci95_halfwidth) + "," +
               fmt_double(c.report_5shot.mean_accuracy) + "," +
               fmt_double(c.report_5shot.ci95_halfwidth) + "," + hash + "\n";
    }
    write_text_file(spec.out_csv, csv);
    return spec.out_csv;
}

std::string SweepFractionSpec::canonical() const {
    return "cmd=sweep-fraction;dataset=" + dataset_path + ";fractions=" + fmt_doubles(fractions) +
           ";b=" + std::to_string(batch_size) + ";eval_shots=" + std::to_string(eval_shots) +
           ";seeds=" + fmt_seeds(seeds) + ";" + run.canonical();
}

double pn_reference_fraction(std::size_t shots, std::size_t images_per_class,
                             std::size_t batch_size) {
    const EpisodeConfig ep = shape_to_episode(BatchShapeConfig{shots, images_per_class, batch_size});
    const PairCounts pn = pn_pair_counts(ep.ways, ep.shots, ep.queries);
    const PairCounts nca = nca_pair_counts(ep.ways, ep.shots, ep.queries);
    return static_cast<double>(pn.total()) / static_cast<double>(nca.total());
}

FractionSweepResult run_fraction_sweep(const DatasetFile& ds, const SweepFractionSpec& spec) {
    for (double f : spec.fractions)
        if (!(f > 0.0) || f > 1.0)
            throw std::invalid_argument("sweep-fraction: fractions must lie in (0, 1]");

    FractionSweepResult result;
    for (double f : spec.fractions) {
        for (std::uint64_t seed : spec.seeds) {
            TrainConfig cfg = base_train_config(spec.run);
            cfg.loss = LossKind::SubsampledNca;
            cfg.keep_fraction = f;
            // iid batches keep every batch at exactly b rows; a short tail
            // batch under a small keep fraction can end up with no retained
            // positives at all, which is a hard training failure.
            cfg.batching.kind = BatchingKind::IidBatches;
            cfg.batching.batch_size = spec.batch_size;
            GridCell cell = run_cell(ds, "nca-subsample", cfg, seed, spec.batch_size, spec.run,
                                     false, spec.eval_shots);
            cell.x = f;
            result.cells.push_back(std::move(cell));
        }
    }
    if (!spec.include_pn_refs) return result;
    // Episodic reference points, placed at the fraction of the whole-batch
    // pair budget their scheme exploits.
    struct Ref { std::size_t shots, a; };
    const Ref refs[] = {{1, 8}, {5, 8}, {5, 16}, {5, 32}};
    for (const Ref& ref : refs) {
        if (spec.batch_size % ref.a != 0 || spec.batch_size / ref.a < 2) continue;
        for (std::uint64_t seed : spec.seeds) {
            TrainConfig cfg =
                episodic_config(spec.run, LossKind::Proto, ref.shots, ref.a, spec.batch_size);
            GridCell cell = run_cell(
                ds, "pn-ref n=" + std::to_string(ref.shots) + " a=" + std::to_string(ref.a), cfg,
                seed, spec.batch_size, spec.run, false, spec.eval_shots);
            cell.x = pn_reference_fraction(ref.shots, ref.a, spec.batch_size);
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

std::string cmd_sweep_fraction(const SweepFractionSpec& spec) {
    const DatasetFile ds = load_dataset(spec.dataset_path);
    const auto result = run_fraction_sweep(ds, spec);
    const std::string hash = hash_hex(config_hash(spec.canonical()));

    std::string csv = "kind,x,seed,acc,ci,config_hash\n";
    double min_f = 2.0, max_f = -1.0;
    double min_acc_sum = 0.0, max_acc_sum = 0.0;
    std::size_t min_cnt = 0, max_cnt = 0;
    for (const auto& c : result.cells) {
        csv += c.config + "," + fmt_double(c.x) + "," + std::to_string(c.seed) + "," +
               fmt_double(c.report_5shot.mean_accuracy) + "," +
               fmt_double(c.report_5shot.ci95_halfwidth) + "," + hash + "\n";
        if (c.config == "nca-subsample") {
            min_f = std::min(min_f, c.x);
            max_f = std::max(max_f, c.x);
        }
    }
    for (const auto& c : result.cells) {
        if (c.config != "nca-subsample") continue;
        if (c.x == min_f) { min_acc_sum += c.report_5shot.mean_accuracy; ++min_cnt; }
        if (c.x == max_f) { max_acc_sum += c.report_5shot.mean_accuracy; ++max_cnt; }
    }
    if (min_cnt && max_cnt) {
        const double trend = max_acc_sum / static_cast<double>(max_cnt) -
                             min_acc_sum / static_cast<double>(min_cnt);
        csv += "trend acc(f=" + fmt_double(max_f) + ")-acc(f=" + fmt_double(min_f) + ")," +
               fmt_double(trend) + ",pooled,,," + hash + "\n";
    }
    write_text_file(spec.out_csv, csv);
    return spec.out_csv;
}

std::string SweepBatchSpec::canonical() const {
    return "cmd=sweep-batch;dataset=" + dataset_path + ";batches=" + fmt_sizes(batch_sizes) +
           ";seeds=" + fmt_seeds(seeds) + ";eval1=" + (eval_1shot ? "1" : "0") + ";" +
           run.canonical();
}

std::vector<GridCell> run_batch_sweep(const DatasetFile& ds, const SweepBatchSpec& spec) {
    std::vector<GridCell> cells;
    for (std::size_t batch : spec.batch_sizes) {
        for (std::uint64_t seed : spec.seeds) {
            cells.push_back(run_cell(ds, "nca", nca_plain_config(spec.run, batch), seed, batch,
                                     spec.run, spec.eval_1shot));
            for (std::size_t a : {std::size_t{8}, std::size_t{16}, std::size_t{32}}) {
                if (batch % a != 0 || batch / a < 2) continue;
                cells.push_back(run_cell(
                    ds, "pn-5shot-a" + std::to_string(a),
                    episodic_config(spec.run, LossKind::Proto, 5, a, batch), seed, batch,
                    spec.run, spec.eval_1shot));
            }
            if (batch % 8 == 0 && batch / 8 >= 2) {
                cells.push_back(run_cell(ds, "pn-1shot-a8",
                                         episodic_config(spec.run, LossKind::Proto, 1, 8, batch),
                                         seed, batch, spec.run, spec.eval_1shot));
            }
        }
    }
    return cells;
}

std::string cmd_sweep_batch(const SweepBatchSpec& spec) {
    const DatasetFile ds = load_dataset(spec.dataset_path);
    const auto cells = run_batch_sweep(ds, spec);
    const std::string hash = hash_hex(config_hash(spec.canonical()));
    std::string csv = "config,batch_size,seed,acc_1shot,ci_1shot,acc_5shot,ci_5shot,config_hash\n";
    for (const auto& c : cells) {
        csv += c.config + "," + std::to_string(c.batch_size) + "," + std::to_string(c.seed) + ",";
        if (c.has_1shot)
            csv += fmt_double(c.report_1shot.mean_accuracy) + "," +
                   fmt_double(c.report_1shot.ci95_halfwidth);
        else
            csv += ",";
        csv += "," + fmt_double(c.report_5shot.mean_accuracy) + "," +
               fmt_double(c.report_5shot.ci95_halfwidth) + "," + hash + "\n";
    }
    write_text_file(spec.out_csv, csv);
    return spec.out_csv;
}

}  // namespace fewshot
