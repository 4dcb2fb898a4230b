#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ugcp/graph.hpp"

namespace ugcp {

// One graph domain: structure, sparse node features, labels.
struct DomainDataset {
    std::string name;
    Graph graph;
    SparseMatrixCSR features;  // n_nodes x feature_dim
    std::vector<int> labels;   // class index per node, in [0, class_count)
    int feature_dim = 0;
    int class_count = 0;

    void validate() const;  // throws std::invalid_argument
};

struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct SplitMasks {
    std::vector<int> train;  // sorted node indices
    std::vector<int> val;
};

// Synthetic two-domain generator: stochastic block models with
// class-conditional Gaussian features. The target domain applies a
// class-mean offset and an inter-block edge-probability perturbation,
// the two shift axes exercised by the diagnostics.
struct ShiftConfig {
    int nodes_per_domain = 300;
    int blocks = 3;  // also the class count
    int feature_dim = 16;
    double p_intra = 0.1;
    double p_inter = 0.01;
    double target_p_intra = -1.0;  // negative = inherit the source value
    double target_p_inter = -1.0;
    double target_inter_scale = 1.0;  // multiplier on the target inter-block probability
    double mean_scale = 1.0;          // magnitude of the generated class means
    double noise_std = 1.0;
    double mean_offset = 0.0;  // target class-mean shift magnitude
    std::vector<std::vector<double>> class_means;  // optional explicit means (blocks x feature_dim)
    std::uint64_t seed = 0;
};

// Directory layout: meta.json, edges.tsv, features.tsv, labels.tsv.
// Tab-separated, LF line endings, floats printed with 17 significant digits.
DomainDataset load_domain(const std::string& dir_path);
void save_domain(const DomainDataset& ds, const std::string& dir_path);

std::pair<DomainDataset, DomainDataset> generate_shifted_pair(const ShiftConfig& cfg);

SplitMasks split_source(const DomainDataset& ds, const SplitSpec& spec);

}  // namespace ugcp
