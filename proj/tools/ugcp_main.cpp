// ugcp: unfolded-GNN graph domain adaptation experiments with cascaded
// propagation. One JSON config per invocation; every output embeds the
// config hash so replays are verifiable.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ugcp/data.hpp"
#include "ugcp/gradcheck.hpp"
#include "ugcp/metrics.hpp"
#include "ugcp/model.hpp"
#include "ugcp/objectives.hpp"
#include "ugcp/propagation.hpp"
#include "ugcp/rng.hpp"
#include "ugcp/trainer.hpp"
#include "ugcp/util.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitVerificationFailure = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: expected an object at " + path);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("config: unknown key '" + path + key + "'");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
}

ugcp::ShiftConfig parse_shift(const json& j, std::uint64_t default_seed) {
    check_keys(j, {"nodes_per_domain", "blocks", "feature_dim", "p_intra", "p_inter",
                   "target_p_intra", "target_p_inter", "target_inter_scale", "mean_scale",
                   "noise_std", "mean_offset", "class_means", "seed"},
               "synthetic.");
    ugcp::ShiftConfig cfg;
    cfg.nodes_per_domain = get_or(j, "nodes_per_domain", cfg.nodes_per_domain);
    cfg.blocks = get_or(j, "blocks", cfg.blocks);
    cfg.feature_dim = get_or(j, "feature_dim", cfg.feature_dim);
    cfg.p_intra = get_or(j, "p_intra", cfg.p_intra);
    cfg.p_inter = get_or(j, "p_inter", cfg.p_inter);
    cfg.target_p_intra = get_or(j, "target_p_intra", cfg.target_p_intra);
    cfg.target_p_inter = get_or(j, "target_p_inter", cfg.target_p_inter);
    cfg.target_inter_scale = get_or(j, "target_inter_scale", cfg.target_inter_scale);
    cfg.mean_scale = get_or(j, "mean_scale", cfg.mean_scale);
    cfg.noise_std = get_or(j, "noise_std", cfg.noise_std);
    cfg.mean_offset = get_or(j, "mean_offset", cfg.mean_offset);
    cfg.class_means = get_or(j, "class_means", cfg.class_means);
    cfg.seed = get_or(j, "seed", default_seed);
    return cfg;
}

ugcp::ModelSpec parse_model(const json& j) {
    check_keys(j, {"variant", "k", "alpha", "lambda1", "lambda2", "clip_threshold", "step", "beta",
                   "cp_rounds", "hidden", "dropout", "post", "embed_dim", "self_loops"},
               "model.");
    ugcp::ModelSpec spec;
    spec.variant = ugcp::variant_from_string(get_or<std::string>(j, "variant", "appnp"));
    spec.k = get_or(j, "k", 8);
    spec.alpha = get_or(j, "alpha", 0.1);
    const double l1 = get_or(j, "lambda1", 3.0);
    const double l2 = get_or(j, "lambda2", 3.0);
    spec.elastic = ugcp::ElasticParams::from_weights(l1, l2);
    if (j.contains("clip_threshold")) spec.elastic.clip_threshold = j.at("clip_threshold").get<double>();
    if (j.contains("step")) {
        spec.elastic.step = j.at("step").get<double>();
        spec.elastic.beta = 1.0 / (2.0 * spec.elastic.step);
    }
    if (j.contains("beta")) spec.elastic.beta = j.at("beta").get<double>();
    spec.cp_rounds = get_or(j, "cp_rounds", 0);
    spec.hidden = get_or(j, "hidden", std::vector<int>{128});
    spec.dropout = get_or(j, "dropout", 0.5);
    spec.post = ugcp::post_mode_from_string(get_or<std::string>(j, "post", "softmax_only"));
    spec.embed_dim = get_or(j, "embed_dim", 128);
    spec.self_loops = get_or(j, "self_loops", true);
    return spec;
}

ugcp::TrainConfig parse_train(const json& j) {
    check_keys(j, {"lr", "weight_decay", "xi", "epochs", "patience", "mmd_subsample_cap",
                   "freeze_pos"},
               "train.");
    ugcp::TrainConfig cfg;
    cfg.lr = get_or(j, "lr", 1e-3);
    cfg.weight_decay = get_or(j, "weight_decay", 5e-4);
    cfg.xi = get_or(j, "xi", 0.0);
    cfg.epochs = get_or(j, "epochs", 500);
    cfg.patience = get_or(j, "patience", 50);
    cfg.mmd_subsample_cap = get_or(j, "mmd_subsample_cap", 2000);
    cfg.freeze_pos = get_or(j, "freeze_pos", false);
    return cfg;
}

// Loads or generates the (source, target) pair named by the config.
std::pair<ugcp::DomainDataset, ugcp::DomainDataset> load_pair(const json& config,
                                                              std::uint64_t seed) {
    const bool synthetic = config.contains("synthetic");
    const bool dirs = config.contains("source_dir") || config.contains("target_dir");
    if (synthetic == dirs)
        throw ConfigError("config: provide either 'synthetic' or both 'source_dir' and 'target_dir'");
    if (synthetic) return ugcp::generate_shifted_pair(parse_shift(config.at("synthetic"), seed));
    if (!config.contains("source_dir") || !config.contains("target_dir"))
        throw ConfigError("config: both 'source_dir' and 'target_dir' are required");
    return {ugcp::load_domain(config.at("source_dir").get<std::string>()),
            ugcp::load_domain(config.at("target_dir").get<std::string>())};
}

void fill_dims(ugcp::ModelSpec& spec, const ugcp::DomainDataset& ds) {
    spec.in_dim = ds.feature_dim;
    spec.classes = ds.class_count;
}

std::vector<std::uint64_t> effective_seeds(const json& config, bool seed_overridden,
                                           std::uint64_t base_seed) {
    std::vector<std::uint64_t> seeds = get_or(config, "seeds", std::vector<std::uint64_t>{0, 1, 2, 3, 4});
    if (seeds.empty()) throw ConfigError("config: 'seeds' must not be empty");
    if (seed_overridden)
        for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = base_seed + i;
    return seeds;
}

struct Invocation {
    json config;
    std::string config_hash;
    fs::path output_dir;
    std::uint64_t seed = 0;
    bool seed_overridden = false;
    int threads = 1;
};

Invocation make_invocation(const std::string& config_path, const std::string& output_override,
                           long long seed_override, bool has_seed_override, int threads) {
    Invocation inv;
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config: cannot open " + config_path);
    try {
        inv.config = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    inv.seed = get_or<std::uint64_t>(inv.config, "seed", 0);
    if (has_seed_override) {
        inv.seed = static_cast<std::uint64_t>(seed_override);
        inv.config["seed"] = inv.seed;
        inv.seed_overridden = true;
    }
    std::string out = get_or<std::string>(inv.config, "output_dir", "out");
    if (!output_override.empty()) {
        out = output_override;
        inv.config["output_dir"] = out;
    }
    inv.output_dir = out;
    inv.threads = threads;
    // hash of the effective, canonically serialized config (keys sorted);
    // output_dir and threads are execution plumbing, not experiment identity
    json hashable = inv.config;
    hashable.erase("output_dir");
    hashable.erase("threads");
    inv.config_hash = ugcp::hash_hex(ugcp::fnv1a64(hashable.dump()));
    fs::create_directories(inv.output_dir);
    return inv;
}

void write_json_report(const Invocation& inv, const std::string& name, json body) {
    body["config_hash"] = inv.config_hash;
    body["config_echo"] = inv.config;
    std::ofstream out(inv.output_dir / name, std::ios::binary);
    out << body.dump(2) << "\n";
}

const std::set<std::string> kCommonKeys = {"seed", "output_dir", "threads", "synthetic",
                                           "source_dir", "target_dir", "model", "train", "seeds"};

// ---------------------------------------------------------------- generate

int cmd_generate(const Invocation& inv) {
    check_keys(inv.config, {"seed", "output_dir", "threads", "synthetic"}, "");
    if (!inv.config.contains("synthetic")) throw ConfigError("config: 'synthetic' block required");
    auto [source, target] = ugcp::generate_shifted_pair(parse_shift(inv.config.at("synthetic"), inv.seed));
    ugcp::save_domain(source, (inv.output_dir / "source").string());
    ugcp::save_domain(target, (inv.output_dir / "target").string());
    json summary;
    summary["source"] = {{"n_nodes", source.graph.n_nodes},
                         {"n_edges", source.graph.edges.size()},
                         {"feature_dim", source.feature_dim},
                         {"class_count", source.class_count}};
    summary["target"] = {{"n_nodes", target.graph.n_nodes},
                         {"n_edges", target.graph.edges.size()},
                         {"feature_dim", target.feature_dim},
                         {"class_count", target.class_count}};
    write_json_report(inv, "generate_report.json", summary);
    std::cout << "generated source: " << source.graph.n_nodes << " nodes, " << source.graph.edges.size()
              << " edges\n"
              << "generated target: " << target.graph.n_nodes << " nodes, " << target.graph.edges.size()
              << " edges\n";
    return 0;
}

// ------------------------------------------------------------------- train

json effective_settings(const ugcp::ModelSpec& spec, const ugcp::TrainConfig& cfg) {
    json j;
    j["model"] = {{"variant", ugcp::to_string(spec.variant)},
                  {"k", spec.k},
                  {"alpha", spec.alpha},
                  {"lambda1", spec.elastic.lambda1},
                  {"lambda2", spec.elastic.lambda2},
                  {"clip_threshold", spec.elastic.clip_threshold},
                  {"step", spec.elastic.step},
                  {"beta", spec.elastic.beta},
                  {"cp_rounds", spec.cp_rounds},
                  {"hidden", spec.hidden},
                  {"dropout", spec.dropout},
                  {"post", ugcp::to_string(spec.post)},
                  {"self_loops", spec.self_loops},
                  {"in_dim", spec.in_dim},
                  {"classes", spec.classes}};
    j["train"] = {{"lr", cfg.lr},
                  {"weight_decay", cfg.weight_decay},
                  {"xi", cfg.xi},
                  {"epochs", cfg.epochs},
                  {"patience", cfg.patience},
                  {"mmd_subsample_cap", cfg.mmd_subsample_cap},
                  {"freeze_pos", cfg.freeze_pos}};
    return j;
}

int cmd_train(const Invocation& inv) {
    check_keys(inv.config, kCommonKeys, "");
    auto [source, target] = load_pair(inv.config, inv.seed);
    ugcp::ModelSpec spec = parse_model(inv.config.value("model", json::object()));
    fill_dims(spec, source);
    ugcp::TrainConfig train_cfg = parse_train(inv.config.value("train", json::object()));
    train_cfg.seed = inv.seed;
    ugcp::UgnnModel model(spec, inv.seed);
    ugcp::RunReport report = ugcp::train_source(model, source, target, train_cfg);
    model.save_checkpoint((inv.output_dir / "checkpoint.json").string());

    json body;
    body["seed"] = report.seed;
    body["best_epoch"] = report.best_epoch;
    body["stopped_epoch"] = report.stopped_epoch;
    body["best_val_micro_f1"] = report.best_val_micro_f1;
    body["target_macro_f1"] = report.target_macro_f1;
    body["target_micro_f1"] = report.target_micro_f1;
    body["f_low_in_domain"] = report.f_low_in_domain;
    body["f_low_transfer"] = report.f_low_transfer;
    body["f_low_cp"] = report.f_low_cp;
    const ugcp::DomainPairDiagnostic diag = ugcp::make_domain_pair_diagnostic(
        report.f_low_in_domain, report.f_low_transfer, report.f_low_cp);
    body["f_low_normalized"] = {{"in_domain", diag.normalized_in_domain},
                                {"transfer", diag.normalized_transfer},
                                {"cp", diag.normalized_cp}};
    body["effective"] = effective_settings(spec, train_cfg);
    body["wall_clock_sec"] = report.wall_clock_sec;
    json curve = json::array();
    for (const ugcp::EpochStat& s : report.curve)
        curve.push_back({{"epoch", s.epoch}, {"loss", s.loss}, {"val_micro_f1", s.val_micro_f1}});
    body["curve"] = std::move(curve);
    write_json_report(inv, "run_report.json", body);
    std::cout << "trained: best val Micro-F1 " << report.best_val_micro_f1 << " at epoch "
              << report.best_epoch << "; target Micro-F1 " << report.target_micro_f1 << "\n";
    return 0;
}

// ----------------------------------------------------------------- gda-run

int cmd_gda_run(const Invocation& inv) {
    std::set<std::string> keys = kCommonKeys;
    keys.insert("pairs");
    check_keys(inv.config, keys, "");
    ugcp::TrainConfig base = parse_train(inv.config.value("train", json::object()));
    const auto seeds = effective_seeds(inv.config, inv.seed_overridden, inv.seed);

    // one pair from the top-level data keys, or a list under "pairs"
    struct PairSpec {
        std::string label;
        json data;
    };
    std::vector<PairSpec> pair_specs;
    if (inv.config.contains("pairs")) {
        const json& pairs = inv.config.at("pairs");
        if (!pairs.is_array() || pairs.empty())
            throw ConfigError("config: 'pairs' must be a nonempty array");
        int index = 0;
        for (const json& entry : pairs) {
            check_keys(entry, {"name", "synthetic", "source_dir", "target_dir"}, "pairs[].");
            PairSpec ps;
            ps.label = get_or<std::string>(entry, "name", "pair" + std::to_string(index));
            ps.data = entry;
            ps.data.erase("name");
            pair_specs.push_back(std::move(ps));
            ++index;
        }
    } else {
        json data;
        for (const char* key : {"synthetic", "source_dir", "target_dir"})
            if (inv.config.contains(key)) data[key] = inv.config.at(key);
        pair_specs.push_back({"pair0", std::move(data)});
    }

    struct Arm {
        std::string name;
        double xi;
        int cp_rounds;
    };

    ugcp::CsvWriter csv((inv.output_dir / "gda_run.csv").string(), inv.config_hash,
                        {"source", "target", "variant", "cp_rounds", "xi", "seed", "macro_f1",
                         "micro_f1", "f_low_transfer", "f_low_cp"});
    ugcp::CsvWriter summary((inv.output_dir / "gda_summary.csv").string(), inv.config_hash,
                            {"pair", "arm", "variant", "cp_rounds", "xi", "mean_macro_f1",
                             "mean_micro_f1", "std_macro_f1", "std_micro_f1"});
    json failures = json::array();

    auto run_pair = [&](const PairSpec& ps) {
        auto [source, target] = load_pair(ps.data, inv.seed);
        ugcp::ModelSpec spec = parse_model(inv.config.value("model", json::object()));
        fill_dims(spec, source);
        const double xi = base.xi > 0.0 ? base.xi : 1.0;
        const int cp = spec.cp_rounds > 0 ? spec.cp_rounds : 1;
        const std::vector<Arm> arms = {{"vanilla", 0.0, 0}, {"mmd", xi, 0}, {"cp", xi, cp}};
        for (const Arm& arm : arms) {
            ugcp::ModelSpec arm_spec = spec;
            arm_spec.cp_rounds = arm.cp_rounds;
            ugcp::TrainConfig arm_cfg = base;
            arm_cfg.xi = arm.xi;
            const ugcp::SeedAggregate agg =
                ugcp::run_seeds(source, target, arm_spec, arm_cfg, seeds, inv.threads);
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                const ugcp::RunReport& r = agg.runs[i];
                csv.row({source.name, target.name, ugcp::to_string(spec.variant),
                         ugcp::CsvWriter::cell(arm.cp_rounds), ugcp::CsvWriter::cell(arm.xi),
                         ugcp::CsvWriter::cell(static_cast<long>(seeds[i])),
                         ugcp::CsvWriter::cell(r.target_macro_f1),
                         ugcp::CsvWriter::cell(r.target_micro_f1),
                         ugcp::CsvWriter::cell(r.f_low_transfer), ugcp::CsvWriter::cell(r.f_low_cp)});
            }
            summary.row({ps.label, arm.name, ugcp::to_string(spec.variant),
                         ugcp::CsvWriter::cell(arm.cp_rounds), ugcp::CsvWriter::cell(arm.xi),
                         ugcp::CsvWriter::cell(agg.mean_target_macro_f1),
                         ugcp::CsvWriter::cell(agg.mean_target_micro_f1),
                         ugcp::CsvWriter::cell(agg.std_target_macro_f1),
                         ugcp::CsvWriter::cell(agg.std_target_micro_f1)});
            std::cout << ps.label << " arm " << arm.name << ": mean Micro-F1 "
                      << agg.mean_target_micro_f1 << "\n";
        }
    };
    const bool isolate = pair_specs.size() > 1;  // multi-pair runs record failures and continue
    for (const PairSpec& ps : pair_specs) {
        if (!isolate) {
            run_pair(ps);
            continue;
        }
        try {
            run_pair(ps);
        } catch (const std::runtime_error& e) {
            failures.push_back({{"pair", ps.label}, {"error", e.what()}});
            std::cerr << ps.label << ": " << e.what() << " (pair skipped)\n";
        }
    }
    if (!failures.empty()) {
        json body;
        body["failures"] = failures;
        write_json_report(inv, "gda_failures.json", body);
    }
    return 0;
}

// --------------------------------------------------------- objective-table

int cmd_objective_table(const Invocation& inv) {
    check_keys(inv.config, kCommonKeys, "");
    auto [source, target] = load_pair(inv.config, inv.seed);
    ugcp::ModelSpec spec = parse_model(inv.config.value("model", json::object()));
    fill_dims(spec, source);
    ugcp::TrainConfig base = parse_train(inv.config.value("train", json::object()));
    const auto seeds = effective_seeds(inv.config, inv.seed_overridden, inv.seed);

    struct Cell {
        std::string train_domain, eval_domain;
        std::uint64_t seed;
        double raw = 0.0;
        double normalized = 0.0;
    };
    std::vector<Cell> cells;

    const bool self_loops = spec.self_loops;
    const ugcp::GraphOperators source_ops = ugcp::build_operators(source.graph, self_loops);
    const ugcp::GraphOperators target_ops = ugcp::build_operators(target.graph, self_loops);
    const ugcp::FeatureMatrix source_feats(source.features);
    const ugcp::FeatureMatrix target_feats(target.features);

    auto f_low_on = [&](ugcp::UgnnModel& model, const ugcp::GraphOperators& ops,
                        const ugcp::FeatureMatrix& feats) {
        const ugcp::TheoremCheckResult tc = ugcp::theorem_check(model, ops, feats);
        return tc.f_transfer;
    };

    for (std::uint64_t seed : seeds) {
        ugcp::TrainConfig cfg = base;
        cfg.seed = seed;
        ugcp::UgnnModel source_model(spec, seed);
        ugcp::train_source(source_model, source, target, cfg);
        ugcp::UgnnModel oracle_model(spec, seed);
        ugcp::train_oracle(oracle_model, target, cfg);
        cells.push_back({"source", "source", seed, f_low_on(source_model, source_ops, source_feats), 0});
        cells.push_back({"source", "target", seed, f_low_on(source_model, target_ops, target_feats), 0});
        cells.push_back({"target", "target", seed, f_low_on(oracle_model, target_ops, target_feats), 0});
        cells.push_back({"target", "source", seed, f_low_on(oracle_model, source_ops, source_feats), 0});
    }

    // Table-wide min-max normalization (all seeds and cells jointly), the
    // rescaling that produces interior per-cell averages.
    std::vector<double> raw;
    raw.reserve(cells.size());
    for (const Cell& c : cells) raw.push_back(c.raw);
    const std::vector<double> normalized = ugcp::minmax_normalize(raw);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i].normalized = normalized[i];

    ugcp::CsvWriter csv((inv.output_dir / "objective_table.csv").string(), inv.config_hash,
                        {"train_domain", "eval_domain", "seed", "f_low_raw", "f_low_normalized"});
    for (const Cell& c : cells)
        csv.row({c.train_domain, c.eval_domain, ugcp::CsvWriter::cell(static_cast<long>(c.seed)),
                 ugcp::CsvWriter::cell(c.raw), ugcp::CsvWriter::cell(c.normalized)});

    // per-cell means over seeds, normalized values averaged
    ugcp::CsvWriter means((inv.output_dir / "objective_table_means.csv").string(), inv.config_hash,
                          {"train_domain", "eval_domain", "mean_normalized", "mean_raw"});
    const char* kinds[4][2] = {
        {"source", "source"}, {"source", "target"}, {"target", "target"}, {"target", "source"}};
    for (const auto& kind : kinds) {
        double sum_n = 0.0, sum_r = 0.0;
        int count = 0;
        for (const Cell& c : cells)
            if (c.train_domain == kind[0] && c.eval_domain == kind[1]) {
                sum_n += c.normalized;
                sum_r += c.raw;
                ++count;
            }
        means.row({kind[0], kind[1], ugcp::CsvWriter::cell(sum_n / count),
                   ugcp::CsvWriter::cell(sum_r / count)});
        std::cout << kind[0] << " -> " << kind[1] << ": normalized GSD objective "
                  << sum_n / count << "\n";
    }
    json body;
    body["normalization"] = "joint min-max over all (seed x cell) values in this table";
    write_json_report(inv, "objective_table_report.json", body);
    return 0;
}

// ----------------------------------------------------------- theorem-check

int cmd_theorem_check(const Invocation& inv) {
    check_keys(inv.config,
               {"seed", "output_dir", "threads", "variants", "trials", "max_nodes", "tolerance",
                "inject_violation"},
               "");
    const std::vector<std::string> variant_names =
        get_or(inv.config, "variants", std::vector<std::string>{"appnp", "gprgnn", "elastic"});
    const int trials = get_or(inv.config, "trials", 100);
    const int max_nodes = get_or(inv.config, "max_nodes", 200);
    const double tolerance = get_or(inv.config, "tolerance", 1e-10);
    const bool inject = get_or(inv.config, "inject_violation", false);
    if (trials < 1) throw ConfigError("config: trials must be >= 1");
    if (max_nodes < 2) throw ConfigError("config: max_nodes must be >= 2");

    ugcp::CsvWriter csv((inv.output_dir / "theorem_check.csv").string(), inv.config_hash,
                        {"variant", "trial", "instance_seed", "f_low_transfer", "f_low_cp", "holds"});
    int violations = 0;
    std::uint64_t first_violation_seed = 0;
    for (const std::string& name : variant_names) {
        const ugcp::Variant variant = ugcp::variant_from_string(name);
        int held = 0;
        for (int trial = 0; trial < trials; ++trial) {
            const std::uint64_t instance_seed =
                ugcp::derive_seed(inv.seed, 0xCAFE + 1000 * static_cast<std::uint64_t>(trial) +
                                                ugcp::fnv1a64(name));
            auto rng = ugcp::make_rng(instance_seed);
            std::uniform_int_distribution<int> n_pick(8, max_nodes);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            const int n = n_pick(rng);
            const double density = 0.05 + 0.25 * uni(rng);
            std::vector<std::pair<int, int>> edges;
            for (int u = 0; u < n; ++u)
                for (int v = u + 1; v < n; ++v)
                    if (uni(rng) < density) edges.emplace_back(u, v);
            for (int v = 0; v + 1 < n; v += 2) edges.emplace_back(v, v + 1);
            std::sort(edges.begin(), edges.end());
            edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
            const ugcp::GraphOperators ops =
                ugcp::build_operators(ugcp::Graph::validated(n, std::move(edges)), true);

            std::uniform_int_distribution<int> width_pick(1, 8);
            const int width = width_pick(rng);
            std::normal_distribution<double> gauss(0.0, 1.0);
            ugcp::DenseMatrix x_pre(n, width);
            for (double& v : x_pre.data) v = gauss(rng);

            ugcp::ModelSpec spec;
            spec.variant = variant;
            spec.in_dim = width;
            spec.classes = 2;
            std::uniform_int_distribution<int> k_pick(4, 12);
            spec.k = k_pick(rng);
            spec.alpha = 0.1 + 0.8 * uni(rng);
            spec.elastic =
                ugcp::ElasticParams::from_weights(0.5 + 2.5 * uni(rng), 0.02 + 0.4 * uni(rng));

            ugcp::TheoremCheckResult result = ugcp::theorem_check(spec, ops, x_pre, {}, tolerance);
            if (inject) {  // self-test hook: fake a worse cascaded value
                result.f_cp = result.f_transfer + 1.0;
                result.holds = false;
            }
            csv.row({name, ugcp::CsvWriter::cell(trial),
                     ugcp::CsvWriter::cell(static_cast<long>(instance_seed)),
                     ugcp::CsvWriter::cell(result.f_transfer), ugcp::CsvWriter::cell(result.f_cp),
                     result.holds ? "1" : "0"});
            if (result.holds) {
                ++held;
            } else {
                if (violations == 0) first_violation_seed = instance_seed;
                ++violations;
            }
        }
        std::cout << name << ": " << held << "/" << trials << " trials hold\n";
    }
    if (violations > 0) {
        std::cerr << "theorem violation detected; replay with instance seed " << first_violation_seed
                  << "\n";
        return kExitVerificationFailure;
    }
    return 0;
}

// ------------------------------------------------------------- sensitivity

int cmd_sensitivity(const Invocation& inv) {
    std::set<std::string> keys = kCommonKeys;
    keys.insert("xi_values");
    check_keys(inv.config, keys, "");
    auto [source, target] = load_pair(inv.config, inv.seed);
    ugcp::ModelSpec spec = parse_model(inv.config.value("model", json::object()));
    fill_dims(spec, source);
    ugcp::TrainConfig base = parse_train(inv.config.value("train", json::object()));
    const auto seeds = effective_seeds(inv.config, inv.seed_overridden, inv.seed);
    std::vector<double> xi_values =
        get_or(inv.config, "xi_values", std::vector<double>{0, 1, 2, 3, 4, 5});
    std::sort(xi_values.begin(), xi_values.end());

    ugcp::CsvWriter csv((inv.output_dir / "sensitivity.csv").string(), inv.config_hash,
                        {"xi", "macro_f1", "micro_f1"});
    for (double xi : xi_values) {
        ugcp::TrainConfig cfg = base;
        cfg.xi = xi;
        const ugcp::SeedAggregate agg = ugcp::run_seeds(source, target, spec, cfg, seeds, inv.threads);
        csv.row({ugcp::CsvWriter::cell(xi), ugcp::CsvWriter::cell(agg.mean_target_macro_f1),
                 ugcp::CsvWriter::cell(agg.mean_target_micro_f1)});
        std::cout << "xi=" << xi << ": mean Micro-F1 " << agg.mean_target_micro_f1 << "\n";
    }
    return 0;
}

// --------------------------------------------------------------- gradcheck

int cmd_gradcheck(const Invocation& inv) {
    check_keys(inv.config, {"seed", "output_dir", "threads", "tolerance", "inject_fault"}, "");
    const double tolerance = get_or(inv.config, "tolerance", 1e-5);
    const bool inject = get_or(inv.config, "inject_fault", false);
    const ugcp::GradCheckReport report = ugcp::run_gradient_checks(tolerance, inject);
    ugcp::CsvWriter csv((inv.output_dir / "gradcheck.csv").string(), inv.config_hash,
                        {"check", "rel_err", "pass"});
    for (const ugcp::GradCheckItem& item : report.items) {
        csv.row({item.name, ugcp::CsvWriter::cell(item.rel_err), item.pass ? "1" : "0"});
        std::cout << (item.pass ? "pass " : "FAIL ") << item.name << " (rel_err " << item.rel_err
                  << ")\n";
    }
    if (!report.all_pass) {
        std::cerr << "worst offender: " << report.worst.name << " rel_err " << report.worst.rel_err
                  << " tolerance " << tolerance << "\n";
        return kExitVerificationFailure;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unfolded-GNN graph domain adaptation with cascaded propagation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir_override;
    long long seed_override = 0;
    int threads = 1;

    const std::vector<std::pair<std::string, int (*)(const Invocation&)>> commands = {
        {"generate", cmd_generate},         {"train", cmd_train},
        {"gda-run", cmd_gda_run},           {"objective-table", cmd_objective_table},
        {"theorem-check", cmd_theorem_check}, {"sensitivity", cmd_sensitivity},
        {"gradcheck", cmd_gradcheck},
    };

    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, fn] : commands) {
        (void)fn;
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        sub->add_option("--seed", seed_override, "seed override");
        sub->add_option("--output-dir", output_dir_override, "output directory override");
        sub->add_option("--threads", threads, "worker threads for independent runs");
        subs[name] = sub;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [name, fn] : commands) {
            if (subs[name]->parsed()) {
                const bool has_seed = subs[name]->count("--seed") > 0;
                const Invocation inv = make_invocation(config_path, output_dir_override,
                                                       seed_override, has_seed, threads);
                return fn(inv);
            }
        }
        std::cerr << "no subcommand\n";
        return kExitConfigError;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    } catch (const ugcp::DivergenceError& e) {
        std::cerr << e.what() << "\n";
        return kExitDivergence;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
