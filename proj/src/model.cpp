#include "ugcp/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ugcp {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::appnp: return "appnp";
        case Variant::gprgnn: return "gprgnn";
        case Variant::elastic: return "elastic";
    }
    return "appnp";
}

Variant variant_from_string(const std::string& s) {
    if (s == "appnp") return Variant::appnp;
    if (s == "gprgnn") return Variant::gprgnn;
    if (s == "elastic") return Variant::elastic;
    throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(PostMode m) {
    return m == PostMode::softmax_only ? "softmax_only" : "linear_then_softmax";
}

PostMode post_mode_from_string(const std::string& s) {
    if (s == "softmax_only") return PostMode::softmax_only;
    if (s == "linear_then_softmax") return PostMode::linear_then_softmax;
    throw std::invalid_argument("unknown post mode: " + s);
}

void ModelSpec::validate() const {
    if (in_dim <= 0) throw std::invalid_argument("model: feature width must be positive");
    if (classes < 2) throw std::invalid_argument("model: need at least two classes");
    if (k < 0) throw std::invalid_argument("model: negative depth");
    if (cp_rounds < 0) throw std::invalid_argument("model: negative cp_rounds");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model: dropout must be in [0, 1)");
    if (variant == Variant::appnp || variant == Variant::gprgnn) {
        // alpha = 0 leaves the fidelity term out of the lower problem and its
        // minimizer non-unique; rejected.
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw std::invalid_argument("model: alpha must be in (0, 1]");
    }
    if (variant == Variant::elastic) {
        if (elastic.lambda1 < 0.0 || elastic.lambda2 < 0.0)
            throw std::invalid_argument("model: elastic weights must be nonnegative");
        if (!(elastic.step > 0.0 && elastic.step <= 1.0))
            throw std::invalid_argument("model: elastic step must be in (0, 1]");
        if (!(elastic.beta > 0.0)) throw std::invalid_argument("model: elastic beta must be positive");
        if (elastic.clip_threshold < 0.0)
            throw std::invalid_argument("model: elastic clip threshold must be nonnegative");
    }
    if (post == PostMode::linear_then_softmax && embed_dim <= 0)
        throw std::invalid_argument("model: embed_dim must be positive");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("model: hidden widths must be positive");
}

namespace {

DenseMatrix glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> uni(-limit, limit);
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = uni(rng);
    return m;
}

}  // namespace

UgnnModel::UgnnModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    auto rng = make_rng(derive_seed(seed_, 0x1217));
    std::vector<int> widths;
    widths.push_back(spec_.in_dim);
    for (int h : spec_.hidden) widths.push_back(h);
    widths.push_back(spec_.pre_output_dim());
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        pre_weights_.emplace_back("pre.w" + std::to_string(l), glorot_uniform(widths[l], widths[l + 1], rng));
        pre_biases_.emplace_back("pre.b" + std::to_string(l), DenseMatrix(1, widths[l + 1]));
    }
    if (spec_.variant == Variant::gprgnn) {
        const auto coeffs = ppr_coefficients(spec_.alpha, spec_.k);
        DenseMatrix g(1, static_cast<int>(coeffs.size()));
        for (std::size_t i = 0; i < coeffs.size(); ++i) g.data[i] = coeffs[i];
        gamma_ = Parameter("gamma", std::move(g));
    }
    if (spec_.post == PostMode::linear_then_softmax) {
        post_weight_ = Parameter("pos.w", glorot_uniform(spec_.embed_dim, spec_.classes, rng));
        post_bias_ = Parameter("pos.b", DenseMatrix(1, spec_.classes));
    }
}

std::vector<Parameter*> UgnnModel::parameters() {
    std::vector<Parameter*> out;
    for (std::size_t l = 0; l < pre_weights_.size(); ++l) {
        out.push_back(&pre_weights_[l]);
        out.push_back(&pre_biases_[l]);
    }
    if (spec_.variant == Variant::gprgnn) out.push_back(&gamma_);
    if (spec_.post == PostMode::linear_then_softmax) {
        out.push_back(&post_weight_);
        out.push_back(&post_bias_);
    }
    return out;
}

std::vector<Parameter*> UgnnModel::trainable_parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : parameters()) {
        const bool is_post = p == &post_weight_ || p == &post_bias_;
        if (is_post && post_frozen_) continue;
        out.push_back(p);
    }
    return out;
}

Parameter& UgnnModel::gamma() {
    if (spec_.variant != Variant::gprgnn) throw std::logic_error("gamma: not a GPR model");
    return gamma_;
}

const Parameter& UgnnModel::gamma() const {
    if (spec_.variant != Variant::gprgnn) throw std::logic_error("gamma: not a GPR model");
    return gamma_;
}

NodeId UgnnModel::preprocess_on_tape(Tape& tape, const FeatureMatrix& features, bool training) {
    if (features.cols() != spec_.in_dim)
        throw std::invalid_argument("forward: feature width " + std::to_string(features.cols()) +
                                    " does not match model input " + std::to_string(spec_.in_dim));
    DenseMatrix o(features.rows(), 1);
    std::fill(o.data.begin(), o.data.end(), 1.0);
    NodeId ones = tape.constant(std::move(o));
    NodeId h = -1;
    const std::size_t layers = pre_weights_.size();
    for (std::size_t l = 0; l < layers; ++l) {
        NodeId w = tape.param(pre_weights_[l]);
        // first layer contracts the sparse feature matrix directly
        NodeId lin = l == 0 ? tape.spmm(features.m, features.mt, w) : tape.matmul(h, w);
        NodeId b = tape.param(pre_biases_[l]);
        h = tape.add_scaled(lin, tape.matmul(ones, b), 1.0, 1.0);
        if (l + 1 < layers) {
            h = tape.relu(h);
            h = tape.dropout(h, spec_.dropout, next_dropout_seed(), training);
        }
    }
    return h;
}

NodeId UgnnModel::propagate_on_tape(Tape& tape, const GraphOperators& ops, NodeId x) {
    NodeId gamma_node = spec_.variant == Variant::gprgnn ? tape.param(gamma_) : -1;
    auto one_pass = [&](NodeId anchor) {
        switch (spec_.variant) {
            case Variant::appnp: return appnp_propagate_t(tape, ops, anchor, spec_.alpha, spec_.k);
            case Variant::gprgnn: return gpr_propagate_t(tape, ops, anchor, gamma_node);
            case Variant::elastic: return elastic_propagate_t(tape, ops, anchor, spec_.elastic, spec_.k);
        }
        return anchor;
    };
    NodeId out = one_pass(x);
    for (int r = 0; r < spec_.cp_rounds; ++r) out = one_pass(out);
    return out;
}

ForwardResult UgnnModel::forward(Tape& tape, const GraphOperators& ops, const FeatureMatrix& features,
                                 bool training) {
    NodeId pre = preprocess_on_tape(tape, features, training);
    NodeId emb = propagate_on_tape(tape, ops, pre);
    NodeId logits = emb;
    if (spec_.post == PostMode::linear_then_softmax) {
        NodeId w = tape.param(post_weight_);
        NodeId b = tape.param(post_bias_);
        DenseMatrix o(tape.value(emb).rows, 1);
        std::fill(o.data.begin(), o.data.end(), 1.0);
        NodeId ones = tape.constant(std::move(o));
        logits = tape.add_scaled(tape.matmul(emb, w), tape.matmul(ones, b), 1.0, 1.0);
    }
    return {logits, emb};
}

DenseMatrix UgnnModel::extract_embedding(const GraphOperators& ops, const FeatureMatrix& features) {
    Tape tape;
    ForwardResult r = forward(tape, ops, features, /*training=*/false);
    return tape.value(r.embedding);
}

DenseMatrix UgnnModel::preprocess_eval(const FeatureMatrix& features) {
    Tape tape;
    NodeId pre = preprocess_on_tape(tape, features, /*training=*/false);
    return tape.value(pre);
}

DenseMatrix UgnnModel::predict_logits(const GraphOperators& ops, const FeatureMatrix& features) {
    Tape tape;
    ForwardResult r = forward(tape, ops, features, /*training=*/false);
    return tape.value(r.logits);
}

std::vector<DenseMatrix> UgnnModel::snapshot_values() const {
    std::vector<DenseMatrix> snap;
    for (const Parameter* p : const_cast<UgnnModel*>(this)->parameters()) snap.push_back(p->value);
    return snap;
}

void UgnnModel::restore_values(const std::vector<DenseMatrix>& snap) {
    auto ps = parameters();
    if (snap.size() != ps.size()) throw std::invalid_argument("restore_values: snapshot size mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap[i];
}

namespace {

nlohmann::json spec_to_json(const ModelSpec& s) {
    nlohmann::json j;
    j["variant"] = to_string(s.variant);
    j["k"] = s.k;
    j["alpha"] = s.alpha;
    j["lambda1"] = s.elastic.lambda1;
    j["lambda2"] = s.elastic.lambda2;
    j["clip_threshold"] = s.elastic.clip_threshold;
    j["step"] = s.elastic.step;
    j["beta"] = s.elastic.beta;
    j["cp_rounds"] = s.cp_rounds;
    j["hidden"] = s.hidden;
    j["dropout"] = s.dropout;
    j["post"] = to_string(s.post);
    j["embed_dim"] = s.embed_dim;
    j["self_loops"] = s.self_loops;
    j["in_dim"] = s.in_dim;
    j["classes"] = s.classes;
    return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.variant = variant_from_string(j.at("variant").get<std::string>());
    s.k = j.at("k").get<int>();
    s.alpha = j.at("alpha").get<double>();
    s.elastic.lambda1 = j.at("lambda1").get<double>();
    s.elastic.lambda2 = j.at("lambda2").get<double>();
    s.elastic.clip_threshold = j.at("clip_threshold").get<double>();
    s.elastic.step = j.at("step").get<double>();
    s.elastic.beta = j.at("beta").get<double>();
    s.cp_rounds = j.at("cp_rounds").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.dropout = j.at("dropout").get<double>();
    s.post = post_mode_from_string(j.at("post").get<std::string>());
    s.embed_dim = j.at("embed_dim").get<int>();
    s.self_loops = j.at("self_loops").get<bool>();
    s.in_dim = j.at("in_dim").get<int>();
    s.classes = j.at("classes").get<int>();
    return s;
}

}  // namespace

void UgnnModel::save_checkpoint(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "ugcp-checkpoint-v1";
    j["spec"] = spec_to_json(spec_);
    j["seed"] = seed_;
    nlohmann::json params = nlohmann::json::array();
    for (const Parameter* p : const_cast<UgnnModel*>(this)->parameters()) {
        nlohmann::json t;
        t["name"] = p->name;
        t["rows"] = p->value.rows;
        t["cols"] = p->value.cols;
        t["data"] = p->value.data;
        params.push_back(std::move(t));
    }
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump(2) << "\n";
}

UgnnModel UgnnModel::load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "ugcp-checkpoint-v1")
        throw std::runtime_error("load_checkpoint: unknown format tag");
    UgnnModel model(spec_from_json(j.at("spec")), j.at("seed").get<std::uint64_t>());
    auto ps = model.parameters();
    const auto& params = j.at("params");
    if (params.size() != ps.size()) throw std::runtime_error("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& t = params[i];
        if (t.at("name").get<std::string>() != ps[i]->name)
            throw std::runtime_error("load_checkpoint: parameter order mismatch at " + ps[i]->name);
        DenseMatrix v(t.at("rows").get<int>(), t.at("cols").get<int>());
        const auto& data = t.at("data");
        if (data.size() != v.size()) throw std::runtime_error("load_checkpoint: tensor size mismatch");
        for (std::size_t q = 0; q < v.size(); ++q) v.data[q] = data[q].get<double>();
        ps[i]->value = std::move(v);
        ps[i]->zero_grad();
    }
    return model;
}

}  // namespace ugcp
