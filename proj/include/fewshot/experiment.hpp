#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fewshot/dataset.hpp"
#include "fewshot/eval.hpp"
#include "fewshot/mlp.hpp"
#include "fewshot/pairs.hpp"
#include "fewshot/synthetic.hpp"

namespace fewshot {

std::uint64_t config_hash(const std::string& canonical);
std::string hash_hex(std::uint64_t h);

/// Desk-scale optimizer defaults shared by the experiment commands.
OptimizerConfig desk_optimizer();

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

/// Writes the synthetic dataset file; byte-identical for identical specs.
std::string cmd_gen_data(const SyntheticSpec& spec, const std::string& out_path);

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainSpec {
    std::string dataset_path;
    std::string split = "train";
    std::string loss = "nca";        // nca | proto | matching | allpairs | allpairs-noproto
                                     // | nca-subsampled | supcon
    std::string batching = "plain";  // plain | iid | fixed | episodic
    std::size_t batch_size = 128;    // plain / iid / episodic b
    std::size_t shots = 5;           // episodic n
    std::size_t images_per_class = 8;  // episodic a
    std::size_t fixed_classes = 16;
    std::size_t fixed_images = 8;
    double keep_fraction = 1.0;
    double temperature = 1.0;
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t embed_dim = 16;
    std::size_t projection_dim = 0;
    OptimizerConfig opt = desk_optimizer();
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out_dir = ".";
    std::string tag = "model";

    std::string canonical() const;
};

LossKind loss_from_name(const std::string& name);
TrainConfig to_train_config(const TrainSpec& spec);

struct TrainArtifacts {
    std::vector<std::string> checkpoint_paths;
    std::string log_csv_path;
};

TrainArtifacts cmd_train(const TrainSpec& spec);

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalSpec {
    std::string dataset_path;
    std::string split = "test";
    std::vector<std::string> checkpoint_paths;
    std::vector<std::string> classifiers = {"centroid"};
    std::vector<std::size_t> shot_settings = {1, 5};
    std::size_t ways = 5;
    std::size_t queries = 15;
    std::size_t n_episodes = 10000;
    std::size_t knn_k = 0;
    std::size_t workers = 1;
    std::string adapt = "none";  // none | support-finetune | mahalanobis
    std::size_t adapt_epochs = 5;
    double adapt_lr = 1e-4;
    std::size_t mahalanobis_steps = 200;
    double mahalanobis_lr = 0.01;
    std::uint64_t eval_seed = 9001;
    std::string out_csv = "eval.csv";

    std::string canonical() const;
};

std::string cmd_eval(const EvalSpec& spec);

// ---------------------------------------------------------------------------
// pairs
// ---------------------------------------------------------------------------

struct PairsTableRow {
    std::string method;
    PairCounts counts;
};

/// The five batch-size-512 reference rows, episodic configurations expressed
/// as (n, a) against the whole-batch scheme.
std::vector<PairsTableRow> pairs_reference_table();
std::string format_pairs_table();
std::string format_pairs_breakdown(std::uint64_t w, std::uint64_t n, std::uint64_t m);

// ---------------------------------------------------------------------------
// ablate / sweeps
// ---------------------------------------------------------------------------

/// Training/evaluation knobs shared by the grid commands.
struct RunSettings {
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t embed_dim = 16;
    OptimizerConfig opt = desk_optimizer();
    std::size_t ways = 5;
    std::size_t queries = 15;
    std::size_t n_episodes = 2000;
    std::size_t workers = 1;
    std::uint64_t eval_seed = 9001;
    std::string eval_split = "val";

    std::string canonical() const;
};

struct GridCell {
    std::string config;
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    double x = 0.0;  // sweep coordinate when applicable
    EvalReport report_1shot;
    EvalReport report_5shot;
    bool has_1shot = false;
};

struct AblateSpec {
    std::string dataset_path;
    std::vector<std::size_t> batch_sizes = {128, 256, 512};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    RunSettings run;
    std::string out_csv = "ablation.csv";

    std::string canonical() const;
};

std::vector<GridCell> run_ablation(const DatasetFile& ds, const AblateSpec& spec);
std::string cmd_ablate(const AblateSpec& spec);

struct SweepFractionSpec {
    std::string dataset_path;
    std::vector<double> fractions = {0.05, 0.1, 0.25, 0.5, 1.0};
    std::size_t batch_size = 256;
    std::size_t eval_shots = 5;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    bool include_pn_refs = true;
    RunSettings run;
    std::string out_csv = "fraction_sweep.csv";

    std::string canonical() const;
};

struct FractionSweepResult {
    std::vector<GridCell> cells;  // nca-subsample rows and pn-ref rows
};

/// x of a pn-ref cell = pn_total / nca_total for its (n, a, b), closed forms.
double pn_reference_fraction(std::size_t shots, std::size_t images_per_class,
                             std::size_t batch_size);

FractionSweepResult run_fraction_sweep(const DatasetFile& ds, const SweepFractionSpec& spec);
std::string cmd_sweep_fraction(const SweepFractionSpec& spec);

struct SweepBatchSpec {
    std::string dataset_path;
    std::vector<std::size_t> batch_sizes = {128, 256, 512};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    bool eval_1shot = true;
    RunSettings run;
    std::string out_csv = "batch_sweep.csv";

    std::string canonical() const;
};

/// Configs: nca plus episodic 5-shot a in {8,16,32} and 1-shot a=8.
std::vector<GridCell> run_batch_sweep(const DatasetFile& ds, const SweepBatchSpec& spec);
std::string cmd_sweep_batch(const SweepBatchSpec& spec);

}  // namespace fewshot
