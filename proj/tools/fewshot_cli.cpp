// Experiment driver: synthetic data generation, training, evaluation, pair
// accounting, ablations and sweeps. Every command is seeded and writes
// reproducible artifacts (CSV with a config-hash column, binary checkpoints).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fewshot/experiment.hpp"

using namespace fewshot;

namespace {

void add_run_options(CLI::App* cmd, RunSettings& run) {
    cmd->add_option("--hidden", run.hidden, "hidden layer widths")->capture_default_str();
    cmd->add_option("--embed-dim", run.embed_dim, "embedding dimension")->capture_default_str();
    cmd->add_option("--lr", run.opt.learning_rate, "initial learning rate")
        ->capture_default_str();
    cmd->add_option("--momentum", run.opt.momentum)->capture_default_str();
    cmd->add_option("--weight-decay", run.opt.weight_decay)->capture_default_str();
    cmd->add_option("--epochs", run.opt.epochs)->capture_default_str();
    cmd->add_option("--eval-ways", run.ways)->capture_default_str();
    cmd->add_option("--eval-queries", run.queries)->capture_default_str();
    cmd->add_option("--episodes", run.n_episodes, "evaluation episodes per cell")
        ->capture_default_str();
    cmd->add_option("--workers", run.workers)->capture_default_str();
    cmd->add_option("--eval-seed", run.eval_seed)->capture_default_str();
    cmd->add_option("--eval-split", run.eval_split)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot metric learning lab"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI file (sections = subcommands)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    // ---- gen-data ----------------------------------------------------------
    SyntheticSpec gen_spec;
    std::string gen_out = "synthetic.fsds";
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic Gaussian-blob dataset");
    gen->add_option("--train-classes", gen_spec.train_classes)->capture_default_str();
    gen->add_option("--val-classes", gen_spec.val_classes)->capture_default_str();
    gen->add_option("--test-classes", gen_spec.test_classes)->capture_default_str();
    gen->add_option("--samples-per-class", gen_spec.samples_per_class)->capture_default_str();
    gen->add_option("--dim", gen_spec.dim)->capture_default_str();
    gen->add_option("--center-scale", gen_spec.center_scale)->capture_default_str();
    gen->add_option("--stddev", gen_spec.within_stddev)->capture_default_str();
    gen->add_option("--seed", gen_spec.seed)->capture_default_str();
    gen->add_option("--out", gen_out, "output dataset file")->capture_default_str();
    gen->callback([&]() {
        const std::string path = cmd_gen_data(gen_spec, gen_out);
        std::cout << "wrote " << path << "\n";
    });

    // ---- import ------------------------------------------------------------
    std::string import_in, import_split = "train", import_out = "imported.fsds";
    auto* import_cmd =
        app.add_subcommand("import", "convert delimited text (label, f1..fd) to a dataset file");
    import_cmd->add_option("--in", import_in, "text file, one row per example")->required();
    import_cmd->add_option("--split", import_split)->capture_default_str();
    import_cmd->add_option("--out", import_out)->capture_default_str();
    import_cmd->callback([&]() {
        DatasetFile ds;
        ds.splits.push_back(import_delimited(import_in, import_split));
        save_dataset(ds, import_out);
        std::cout << "wrote " << import_out << "\n";
    });

    // ---- train --------------------------------------------------------------
    TrainSpec train_spec;
    auto* tr = app.add_subcommand("train", "train one model per seed");
    tr->add_option("--data", train_spec.dataset_path, "dataset file")->required();
    tr->add_option("--split", train_spec.split)->capture_default_str();
    tr->add_option("--loss", train_spec.loss,
                   "nca | proto | matching | allpairs | allpairs-noproto | nca-subsampled | supcon")
        ->capture_default_str();
    tr->add_option("--batching", train_spec.batching, "plain | iid | fixed | episodic")
        ->capture_default_str();
    tr->add_option("--batch-size", train_spec.batch_size)->capture_default_str();
    tr->add_option("--shots", train_spec.shots, "episodic n")->capture_default_str();
    tr->add_option("--per-class", train_spec.images_per_class, "episodic a = n + m")
        ->capture_default_str();
    tr->add_option("--fixed-classes", train_spec.fixed_classes)->capture_default_str();
    tr->add_option("--fixed-images", train_spec.fixed_images)->capture_default_str();
    tr->add_option("--keep-fraction", train_spec.keep_fraction, "pair fraction for nca-subsampled")
        ->capture_default_str();
    tr->add_option("--temperature", train_spec.temperature, "supcon temperature")
        ->capture_default_str();
    tr->add_option("--hidden", train_spec.hidden)->capture_default_str();
    tr->add_option("--embed-dim", train_spec.embed_dim)->capture_default_str();
    tr->add_option("--projection-dim", train_spec.projection_dim,
                   "train-time linear head output dim (0 = off)")
        ->capture_default_str();
    tr->add_option("--lr", train_spec.opt.learning_rate)->capture_default_str();
    tr->add_option("--momentum", train_spec.opt.momentum)->capture_default_str();
    tr->add_option("--weight-decay", train_spec.opt.weight_decay)->capture_default_str();
    tr->add_option("--epochs", train_spec.opt.epochs)->capture_default_str();
    tr->add_option("--seeds", train_spec.seeds)->capture_default_str();
    tr->add_option("--out-dir", train_spec.out_dir)->capture_default_str();
    tr->add_option("--tag", train_spec.tag, "checkpoint filename prefix")->capture_default_str();
    tr->callback([&]() {
        const TrainArtifacts arts = cmd_train(train_spec);
        for (const auto& p : arts.checkpoint_paths) std::cout << "wrote " << p << "\n";
        std::cout << "wrote " << arts.log_csv_path << "\n";
    });

    // ---- eval ---------------------------------------------------------------
    EvalSpec eval_spec;
    auto* ev = app.add_subcommand("eval", "episode evaluation of trained checkpoints");
    ev->add_option("--data", eval_spec.dataset_path)->required();
    ev->add_option("--split", eval_spec.split)->capture_default_str();
    ev->add_option("--checkpoints", eval_spec.checkpoint_paths, "checkpoint files")->required();
    ev->add_option("--classifiers", eval_spec.classifiers, "knn | centroid | soft-assign")
        ->capture_default_str();
    ev->add_option("--shots", eval_spec.shot_settings)->capture_default_str();
    ev->add_option("--ways", eval_spec.ways)->capture_default_str();
    ev->add_option("--queries", eval_spec.queries)->capture_default_str();
    ev->add_option("--episodes", eval_spec.n_episodes)->capture_default_str();
    ev->add_option("--knn-k", eval_spec.knn_k, "0 = use the shots n")->capture_default_str();
    ev->add_option("--workers", eval_spec.workers)->capture_default_str();
    ev->add_option("--adapt", eval_spec.adapt, "none | support-finetune | mahalanobis")
        ->capture_default_str();
    ev->add_option("--adapt-epochs", eval_spec.adapt_epochs)->capture_default_str();
    ev->add_option("--adapt-lr", eval_spec.adapt_lr)->capture_default_str();
    ev->add_option("--maha-steps", eval_spec.mahalanobis_steps)->capture_default_str();
    ev->add_option("--maha-lr", eval_spec.mahalanobis_lr)->capture_default_str();
    ev->add_option("--eval-seed", eval_spec.eval_seed)->capture_default_str();
    ev->add_option("--out", eval_spec.out_csv)->capture_default_str();
    ev->callback([&]() { std::cout << "wrote " << cmd_eval(eval_spec) << "\n"; });

    // ---- pairs --------------------------------------------------------------
    bool pairs_table = false;
    std::uint64_t pw = 0, pn = 0, pm = 0;
    std::uint64_t pa = 0, pb = 0;
    auto* pr = app.add_subcommand("pairs", "pair accounting for episodic vs whole-batch losses");
    pr->add_flag("--table", pairs_table, "print the five reference rows for a 512 batch");
    pr->add_option("--ways,-w", pw, "episode ways");
    pr->add_option("--shots,-n", pn, "episode shots");
    pr->add_option("--queries,-m", pm, "episode queries");
    pr->add_option("--per-class,-a", pa, "images per class (with --shots and --batch)");
    pr->add_option("--batch,-b", pb, "batch size (with --shots and --per-class)");
    pr->callback([&]() {
        if (pairs_table) {
            std::cout << format_pairs_table();
            return;
        }
        if (pb > 0) {
            const EpisodeConfig ep = shape_to_episode({pn, pa, pb});
            std::cout << format_pairs_breakdown(ep.ways, ep.shots, ep.queries);
            return;
        }
        if (pw == 0 || pn == 0 || pm == 0)
            throw CLI::ValidationError(
                "pairs", "need --table, or --ways/--shots/--queries, or --shots/--per-class/--batch");
        std::cout << format_pairs_breakdown(pw, pn, pm);
    });

    // ---- ablate ---------------------------------------------------------------
    AblateSpec ablate_spec;
    auto* ab = app.add_subcommand("ablate", "the episodic-vs-NCA ablation grid");
    ab->add_option("--data", ablate_spec.dataset_path)->required();
    ab->add_option("--batches", ablate_spec.batch_sizes)->capture_default_str();
    ab->add_option("--seeds", ablate_spec.seeds)->capture_default_str();
    ab->add_option("--out", ablate_spec.out_csv)->capture_default_str();
    add_run_options(ab, ablate_spec.run);
    ab->callback([&]() { std::cout << "wrote " << cmd_ablate(ablate_spec) << "\n"; });

    // ---- sweep-fraction ------------------------------------------------------
    SweepFractionSpec frac_spec;
    auto* sf = app.add_subcommand("sweep-fraction",
                                  "pair-subsampled NCA against episodic reference points");
    sf->add_option("--data", frac_spec.dataset_path)->required();
    sf->add_option("--fractions", frac_spec.fractions)->capture_default_str();
    sf->add_option("--batch-size", frac_spec.batch_size)->capture_default_str();
    sf->add_option("--eval-shots", frac_spec.eval_shots)->capture_default_str();
    sf->add_option("--seeds", frac_spec.seeds)->capture_default_str();
    sf->add_option("--out", frac_spec.out_csv)->capture_default_str();
    add_run_options(sf, frac_spec.run);
    sf->callback([&]() { std::cout << "wrote " << cmd_sweep_fraction(frac_spec) << "\n"; });

    // ---- sweep-batch -----------------------------------------------------------
    SweepBatchSpec batch_spec;
    auto* sb = app.add_subcommand("sweep-batch", "NCA vs episodic configurations per batch size");
    sb->add_option("--data", batch_spec.dataset_path)->required();
    sb->add_option("--batches", batch_spec.batch_sizes)->capture_default_str();
    sb->add_option("--seeds", batch_spec.seeds)->capture_default_str();
    sb->add_flag("--no-1shot-eval{false}", batch_spec.eval_1shot, "skip the 1-shot evaluation");
    sb->add_option("--out", batch_spec.out_csv)->capture_default_str();
    add_run_options(sb, batch_spec.run);
    sb->callback([&]() { std::cout << "wrote " << cmd_sweep_batch(batch_spec) << "\n"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit 0, usage errors exit 2
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
