#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ugcp/data.hpp"
#include "ugcp/model.hpp"
#include "ugcp/objectives.hpp"

namespace ugcp {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 5e-4;
    double xi = 0.0;  // MMD trade-off weight
    int epochs = 500;
    int patience = 50;  // early stopping on source-validation Micro-F1
    std::uint64_t seed = 0;
    int mmd_subsample_cap = 2000;
    bool freeze_pos = false;
};

struct EpochStat {
    int epoch = 0;
    double loss = 0.0;
    double val_micro_f1 = 0.0;
};

struct RunReport {
    std::string config_echo;  // filled by the caller before serialization
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<EpochStat> curve;
    int best_epoch = -1;
    int stopped_epoch = 0;
    double best_val_micro_f1 = 0.0;
    double target_macro_f1 = std::numeric_limits<double>::quiet_NaN();
    double target_micro_f1 = std::numeric_limits<double>::quiet_NaN();
    double f_low_in_domain = std::numeric_limits<double>::quiet_NaN();  // trained domain
    double f_low_transfer = std::numeric_limits<double>::quiet_NaN();   // evaluation domain
    double f_low_cp = std::numeric_limits<double>::quiet_NaN();
    bool self_loops = true;  // operator normalization used by the run
    double wall_clock_sec = 0.0;
};

struct DivergenceError : std::runtime_error {
    int epoch;
    explicit DivergenceError(int e)
        : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(e)),
          epoch(e) {}
};

// Full-batch training on the labeled source with optional MMD alignment
// against the target embeddings; model selection by best source-validation
// Micro-F1. Fills target metrics and lower-objective diagnostics from the
// target domain. Deterministic given (model seed, cfg.seed, single thread).
RunReport train_source(UgnnModel& model, const DomainDataset& source, const DomainDataset& target,
                       const TrainConfig& cfg);

// Same loop trained directly on the (labeled) target domain: the oracle of
// the diagnostics protocol. No alignment term.
RunReport train_oracle(UgnnModel& model, const DomainDataset& target, const TrainConfig& cfg);

// Evaluation-mode (macro_f1, micro_f1) on a labeled domain.
std::pair<double, double> evaluate(UgnnModel& model, const DomainDataset& domain);

struct SeedAggregate {
    std::vector<std::uint64_t> seeds;
    std::vector<RunReport> runs;
    double mean_val_micro_f1 = 0.0;
    double mean_target_macro_f1 = 0.0;
    double mean_target_micro_f1 = 0.0;
    bool has_std = false;  // sample std needs n >= 2
    double std_target_macro_f1 = 0.0;
    double std_target_micro_f1 = 0.0;
};

// Runs the source-training protocol once per seed (model init seed = run
// seed) and aggregates. Seeds may run concurrently; reports are merged in
// seed order so output is independent of the thread count.
SeedAggregate run_seeds(const DomainDataset& source, const DomainDataset& target, const ModelSpec& spec,
                        const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                        int threads = 1);

struct GridSpec {
    std::vector<double> lr{1e-4, 5e-4, 1e-3, 5e-3};
    std::vector<double> weight_decay{1e-4, 5e-4, 1e-3, 5e-3};
    std::vector<double> xi{1, 2, 3, 4, 5};
    std::vector<double> alpha{0.1, 0.2, 0.5};  // APPNP / GPR axis
    std::vector<double> lambda{3, 6, 9};       // Elastic axis (lambda1 x lambda2)
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct GridRow {
    double lr = 0.0, weight_decay = 0.0, xi = 0.0;
    double alpha = 0.0, lambda1 = 0.0, lambda2 = 0.0;
    double mean_val_micro_f1 = 0.0;
    double mean_target_macro_f1 = 0.0;
    double mean_target_micro_f1 = 0.0;
    std::string key;  // canonical, used for enumeration-order-invariant tie breaks
};

struct GridResult {
    GridRow best;
    std::vector<GridRow> table;
};

// Cartesian product over the variant's axes; selection by mean
// source-validation Micro-F1, ties broken by the canonical key.
GridResult grid_search(const DomainDataset& source, const DomainDataset& target, const ModelSpec& spec,
                       const TrainConfig& base, const GridSpec& grids, int threads = 1);

}  // namespace ugcp
