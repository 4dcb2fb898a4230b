#include "ugcp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "ugcp/rng.hpp"

namespace ugcp {

void DomainDataset::validate() const {
    if (graph.n_nodes <= 0) throw std::invalid_argument("dataset: empty graph");
    if (feature_dim <= 0) throw std::invalid_argument("dataset: feature_dim must be positive");
    if (class_count <= 0) throw std::invalid_argument("dataset: class_count must be positive");
    if (features.rows != graph.n_nodes || features.cols != feature_dim)
        throw std::invalid_argument("dataset: feature matrix shape mismatch");
    if (static_cast<int>(labels.size()) != graph.n_nodes)
        throw std::invalid_argument("dataset: label count mismatch");
    std::vector<int> counts(class_count, 0);
    for (int y : labels) {
        if (y < 0 || y >= class_count)
            throw std::invalid_argument("dataset: label out of range [0, " + std::to_string(class_count) + ")");
        counts[y]++;
    }
    for (int c = 0; c < class_count; ++c)
        if (counts[c] == 0)
            throw std::invalid_argument("dataset: label gap, class " + std::to_string(c) + " has no nodes");
    features.validate();
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void parse_fail(const std::string& file, int line, const std::string& what) {
    throw std::runtime_error(file + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_tabs(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

long parse_long(const std::string& tok, const std::string& file, int line) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(tok, &used);
    } catch (const std::exception&) {
        parse_fail(file, line, "expected integer, got '" + tok + "'");
    }
    if (used != tok.size()) parse_fail(file, line, "trailing characters after integer '" + tok + "'");
    return v;
}

double parse_double(const std::string& tok, const std::string& file, int line) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        parse_fail(file, line, "expected float, got '" + tok + "'");
    }
    if (used != tok.size()) parse_fail(file, line, "trailing characters after float '" + tok + "'");
    return v;
}

}  // namespace

DomainDataset load_domain(const std::string& dir_path) {
    namespace fs = std::filesystem;
    const fs::path dir(dir_path);
    for (const char* f : {"meta.json", "edges.tsv", "features.tsv", "labels.tsv"})
        if (!fs::exists(dir / f)) throw std::runtime_error("load_domain: missing file " + (dir / f).string());

    DomainDataset ds;
    int n_nodes = 0;
    {
        std::ifstream in(dir / "meta.json");
        nlohmann::json meta = nlohmann::json::parse(in);
        ds.name = meta.at("name").get<std::string>();
        n_nodes = meta.at("n_nodes").get<int>();
        ds.feature_dim = meta.at("feature_dim").get<int>();
        ds.class_count = meta.at("class_count").get<int>();
    }

    std::vector<std::pair<int, int>> edges;
    {
        const std::string file = (dir / "edges.tsv").string();
        std::ifstream in(file);
        std::string line;
        int ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty()) continue;
            const auto toks = split_tabs(line);
            if (toks.size() != 2) parse_fail(file, ln, "expected two tab-separated columns");
            const long u = parse_long(toks[0], file, ln);
            const long v = parse_long(toks[1], file, ln);
            if (u < 0 || u >= n_nodes || v < 0 || v >= n_nodes)
                parse_fail(file, ln, "edge endpoint out of range [0, " + std::to_string(n_nodes) + ")");
            if (u == v) parse_fail(file, ln, "self-loop not allowed");
            edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
        }
    }
    ds.graph = Graph::validated(n_nodes, std::move(edges));

    {
        const std::string file = (dir / "features.tsv").string();
        std::ifstream in(file);
        std::string line;
        int ln = 0;
        std::vector<std::tuple<int, int, double>> trip;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty()) continue;
            const auto toks = split_tabs(line);
            if (toks.size() != 3) parse_fail(file, ln, "expected three tab-separated columns");
            const long r = parse_long(toks[0], file, ln);
            const long c = parse_long(toks[1], file, ln);
            const double v = parse_double(toks[2], file, ln);
            if (r < 0 || r >= n_nodes) parse_fail(file, ln, "feature row out of range");
            if (c < 0 || c >= ds.feature_dim) parse_fail(file, ln, "feature column out of range");
            trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
        }
        ds.features = SparseMatrixCSR::from_triplets(n_nodes, ds.feature_dim, std::move(trip));
    }

    {
        const std::string file = (dir / "labels.tsv").string();
        std::ifstream in(file);
        std::string line;
        int ln = 0;
        ds.labels.assign(n_nodes, -1);
        int seen = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty()) continue;
            const auto toks = split_tabs(line);
            if (toks.size() != 2) parse_fail(file, ln, "expected two tab-separated columns");
            const long node = parse_long(toks[0], file, ln);
            const long y = parse_long(toks[1], file, ln);
            if (node < 0 || node >= n_nodes) parse_fail(file, ln, "node index out of range");
            if (ds.labels[node] != -1) parse_fail(file, ln, "duplicate label for node " + std::to_string(node));
            if (y < 0 || y >= ds.class_count) parse_fail(file, ln, "class index out of range");
            ds.labels[node] = static_cast<int>(y);
            ++seen;
        }
        if (seen != n_nodes)
            throw std::runtime_error(file + ": expected " + std::to_string(n_nodes) + " labels, found " +
                                     std::to_string(seen));
    }

    ds.validate();
    return ds;
}

void save_domain(const DomainDataset& ds, const std::string& dir_path) {
    namespace fs = std::filesystem;
    ds.validate();
    const fs::path dir(dir_path);
    std::error_code ec;
    fs::create_directories(dir, ec);
    auto open = [&](const char* f) {
        std::ofstream out(dir / f, std::ios::binary);  // binary keeps LF endings everywhere
        if (!out) throw std::runtime_error("save_domain: cannot write " + (dir / f).string());
        return out;
    };
    {
        nlohmann::json meta;
        meta["name"] = ds.name;
        meta["n_nodes"] = ds.graph.n_nodes;
        meta["feature_dim"] = ds.feature_dim;
        meta["class_count"] = ds.class_count;
        auto out = open("meta.json");
        out << meta.dump(2) << "\n";
    }
    {
        auto out = open("edges.tsv");
        auto edges = ds.graph.edges;  // validated() already stores them sorted with u < v
        std::sort(edges.begin(), edges.end());
        for (const auto& [u, v] : edges) out << u << "\t" << v << "\n";
    }
    {
        auto out = open("features.tsv");
        for (int r = 0; r < ds.features.rows; ++r)
            for (std::size_t k = ds.features.row_offsets[r];
                 k < ds.features.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
                out << r << "\t" << ds.features.col_indices[k] << "\t" << fmt17(ds.features.values[k])
                    << "\n";
    }
    {
        auto out = open("labels.tsv");
        for (int v = 0; v < ds.graph.n_nodes; ++v) out << v << "\t" << ds.labels[v] << "\n";
    }
}

namespace {

DomainDataset generate_domain(const std::string& name, int n, int blocks, int feature_dim,
                              double p_intra, double p_inter, const std::vector<std::vector<double>>& means,
                              double noise_std, std::uint64_t seed) {
    if (n < blocks) throw std::invalid_argument("generate: fewer nodes than blocks");
    DomainDataset ds;
    ds.name = name;
    ds.feature_dim = feature_dim;
    ds.class_count = blocks;
    ds.labels.resize(n);
    for (int v = 0; v < n; ++v)
        ds.labels[v] = static_cast<int>((static_cast<long long>(v) * blocks) / n);

    auto edge_rng = make_rng(derive_seed(seed, 11));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            const double p = ds.labels[u] == ds.labels[v] ? p_intra : p_inter;
            if (uni(edge_rng) < p) edges.emplace_back(u, v);
        }
    ds.graph = Graph::validated(n, std::move(edges));

    auto feat_rng = make_rng(derive_seed(seed, 13));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::tuple<int, int, double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * feature_dim);
    for (int v = 0; v < n; ++v) {
        const auto& mu = means[ds.labels[v]];
        for (int j = 0; j < feature_dim; ++j)
            trip.emplace_back(v, j, mu[j] + noise_std * gauss(feat_rng));
    }
    ds.features = SparseMatrixCSR::from_triplets(n, feature_dim, std::move(trip));
    ds.validate();
    return ds;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> generate_shifted_pair(const ShiftConfig& cfg) {
    if (cfg.blocks < 2) throw std::invalid_argument("generate: need at least two blocks");
    if (cfg.nodes_per_domain < cfg.blocks)
        throw std::invalid_argument("generate: degenerate block sizes (fewer nodes than blocks)");
    if (cfg.feature_dim <= 0) throw std::invalid_argument("generate: feature_dim must be positive");
    auto check_prob = [](double p, const char* what) {
        if (p < 0.0 || p > 1.0) throw std::invalid_argument(std::string("generate: ") + what + " outside [0, 1]");
    };
    check_prob(cfg.p_intra, "p_intra");
    check_prob(cfg.p_inter, "p_inter");

    std::vector<std::vector<double>> means = cfg.class_means;
    if (means.empty()) {
        auto mean_rng = make_rng(derive_seed(cfg.seed, 3));
        std::normal_distribution<double> gauss(0.0, 1.0);
        means.assign(cfg.blocks, std::vector<double>(cfg.feature_dim, 0.0));
        for (auto& mu : means)
            for (double& x : mu) x = cfg.mean_scale * gauss(mean_rng);
    }
    if (static_cast<int>(means.size()) != cfg.blocks)
        throw std::invalid_argument("generate: class_means must have one row per block");
    for (const auto& mu : means)
        if (static_cast<int>(mu.size()) != cfg.feature_dim)
            throw std::invalid_argument("generate: class_means width mismatch");

    // target means: per-class random unit direction scaled by the offset
    std::vector<std::vector<double>> target_means = means;
    if (cfg.mean_offset != 0.0) {
        auto dir_rng = make_rng(derive_seed(cfg.seed, 5));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& mu : target_means) {
            std::vector<double> dir(cfg.feature_dim);
            double norm_sq = 0.0;
            for (double& d : dir) {
                d = gauss(dir_rng);
                norm_sq += d * d;
            }
            const double norm = std::sqrt(norm_sq);
            for (int j = 0; j < cfg.feature_dim; ++j)
                mu[j] += cfg.mean_offset * (norm > 0.0 ? dir[j] / norm : 0.0);
        }
    }

    const double t_intra = cfg.target_p_intra >= 0.0 ? cfg.target_p_intra : cfg.p_intra;
    double t_inter = (cfg.target_p_inter >= 0.0 ? cfg.target_p_inter : cfg.p_inter) * cfg.target_inter_scale;
    t_inter = std::min(t_inter, 1.0);
    check_prob(t_intra, "target_p_intra");
    check_prob(t_inter, "target_p_inter");

    DomainDataset source = generate_domain("source", cfg.nodes_per_domain, cfg.blocks, cfg.feature_dim,
                                           cfg.p_intra, cfg.p_inter, means, cfg.noise_std,
                                           derive_seed(cfg.seed, 101));
    DomainDataset target = generate_domain("target", cfg.nodes_per_domain, cfg.blocks, cfg.feature_dim,
                                           t_intra, t_inter, target_means, cfg.noise_std,
                                           derive_seed(cfg.seed, 202));
    return {std::move(source), std::move(target)};
}

SplitMasks split_source(const DomainDataset& ds, const SplitSpec& spec) {
    if (std::abs(spec.train_fraction + spec.val_fraction - 1.0) > 1e-12)
        throw std::invalid_argument("split: fractions must sum to 1");
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw std::invalid_argument("split: train fraction must be in (0, 1)");
    const int n = ds.graph.n_nodes;
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = make_rng(derive_seed(spec.seed, 77));
    std::shuffle(idx.begin(), idx.end(), rng);
    const int train_n = std::max(1, std::min(n - 1, static_cast<int>(std::llround(spec.train_fraction * n))));
    SplitMasks masks;
    masks.train.assign(idx.begin(), idx.begin() + train_n);
    masks.val.assign(idx.begin() + train_n, idx.end());
    std::sort(masks.train.begin(), masks.train.end());
    std::sort(masks.val.begin(), masks.val.end());
    return masks;
}

}  // namespace ugcp
