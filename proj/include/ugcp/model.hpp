#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugcp/dense.hpp"
#include "ugcp/graph.hpp"
#include "ugcp/propagation.hpp"
#include "ugcp/rng.hpp"
#include "ugcp/tape.hpp"

namespace ugcp {

enum class Variant { appnp, gprgnn, elastic };
enum class PostMode { softmax_only, linear_then_softmax };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(PostMode m);
PostMode post_mode_from_string(const std::string& s);

struct ModelSpec {
    Variant variant = Variant::appnp;
    int k = 8;            // propagation depth K (2K with one cascade round)
    double alpha = 0.1;   // teleport probability; also the GPR init and diagnostic alpha
    ElasticParams elastic = ElasticParams::from_weights(3.0, 3.0);
    int cp_rounds = 0;    // 0 = vanilla, 1 = cascaded propagation
    std::vector<int> hidden = {128};
    double dropout = 0.5;
    PostMode post = PostMode::softmax_only;
    int embed_dim = 128;  // p_pre output width when the post-processor is linear
    bool self_loops = true;
    int in_dim = 0;   // feature width M
    int classes = 0;  // C

    int pre_output_dim() const { return post == PostMode::softmax_only ? classes : embed_dim; }
    void validate() const;  // throws std::invalid_argument
};

struct ForwardResult {
    NodeId logits;
    NodeId embedding;  // propagated representation fed to the post-processor
};

// The full pre-process / propagate / post-process pipeline with trainable
// parameters. One instance per run; the parameter layout is fixed so
// checkpoints round-trip bitwise.
class UgnnModel {
public:
    UgnnModel(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<Parameter*> parameters();
    std::vector<Parameter*> trainable_parameters();  // excludes the frozen post-processor

    void set_post_frozen(bool frozen) { post_frozen_ = frozen; }
    bool post_frozen() const { return post_frozen_; }

    // gamma coefficients (GPR variant); throws for other variants
    Parameter& gamma();
    const Parameter& gamma() const;

    ForwardResult forward(Tape& tape, const GraphOperators& ops, const FeatureMatrix& features,
                          bool training);

    // Evaluation-mode embedding, detached from any tape (dropout off).
    DenseMatrix extract_embedding(const GraphOperators& ops, const FeatureMatrix& features);
    // Evaluation-mode p_pre output (the fidelity anchor of the lower problem).
    DenseMatrix preprocess_eval(const FeatureMatrix& features);
    // Evaluation-mode logits.
    DenseMatrix predict_logits(const GraphOperators& ops, const FeatureMatrix& features);

    void save_checkpoint(const std::string& path) const;
    static UgnnModel load_checkpoint(const std::string& path);

    // Deep parameter snapshot for model selection.
    std::vector<DenseMatrix> snapshot_values() const;
    void restore_values(const std::vector<DenseMatrix>& snap);

    // Next seed for a dropout mask; advances a per-model counter.
    std::uint64_t next_dropout_seed() { return derive_seed(seed_, 0xD0000000ULL + dropout_calls_++); }

private:
    NodeId propagate_on_tape(Tape& tape, const GraphOperators& ops, NodeId x);
    NodeId preprocess_on_tape(Tape& tape, const FeatureMatrix& features, bool training);

    ModelSpec spec_;
    std::uint64_t seed_ = 0;
    std::uint64_t dropout_calls_ = 0;
    std::vector<Parameter> pre_weights_;
    std::vector<Parameter> pre_biases_;
    Parameter gamma_;        // used by the GPR variant only
    Parameter post_weight_;  // used by the linear post-processor only
    Parameter post_bias_;
    bool post_frozen_ = false;
};

}  // namespace ugcp
