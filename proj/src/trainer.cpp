#include "ugcp/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <thread>

#include "ugcp/adam.hpp"
#include "ugcp/metrics.hpp"
#include "ugcp/rng.hpp"
#include "ugcp/util.hpp"

namespace ugcp {

namespace {

struct PreparedDomain {
    GraphOperators ops;
    FeatureMatrix features;

    PreparedDomain(const DomainDataset& ds, bool self_loops)
        : ops(build_operators(ds.graph, self_loops)), features(ds.features) {}
};

double micro_f1_on(const DenseMatrix& logits, const std::vector<int>& labels,
                   const std::vector<int>& subset) {
    std::vector<int> truth, pred;
    truth.reserve(subset.size());
    pred.reserve(subset.size());
    const auto all_pred = argmax_rows(logits);
    for (int v : subset) {
        truth.push_back(labels[v]);
        pred.push_back(all_pred[v]);
    }
    int classes = 0;
    for (int y : labels) classes = std::max(classes, y + 1);
    return f1_scores(truth, pred, classes).micro_f1;
}

void fill_diagnostics(UgnnModel& model, const PreparedDomain& target, RunReport& report) {
    const TheoremCheckResult tc = theorem_check(model, target.ops, target.features);
    report.f_low_transfer = tc.f_transfer;
    report.f_low_cp = tc.f_cp;
}

// Shared training loop: supervised cross entropy on `labeled` plus an
// optional MMD alignment term against `align` (skipped when xi == 0).
RunReport run_training(UgnnModel& model, const DomainDataset& labeled, const DomainDataset* align,
                       const TrainConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.xi < 0.0) throw std::invalid_argument("train: xi must be nonnegative");
    if (align && (align->feature_dim != labeled.feature_dim || align->class_count != labeled.class_count))
        throw std::invalid_argument("train: source and target must share feature space and classes");

    model.set_post_frozen(cfg.freeze_pos);
    const bool self_loops = model.spec().self_loops;
    PreparedDomain lab(labeled, self_loops);
    std::unique_ptr<PreparedDomain> aln;
    const bool use_alignment = align != nullptr && cfg.xi > 0.0;
    if (use_alignment) aln = std::make_unique<PreparedDomain>(*align, self_loops);

    const SplitMasks masks = split_source(labeled, SplitSpec{0.8, 0.2, derive_seed(cfg.seed, 0x5711)});
    AdamW adam(model.trainable_parameters(), AdamConfig{cfg.lr, cfg.weight_decay});

    RunReport report;
    report.seed = cfg.seed;
    double best_val = -1.0;
    std::vector<DenseMatrix> best_snapshot;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Tape tape;
        const ForwardResult fwd = model.forward(tape, lab.ops, lab.features, /*training=*/true);
        NodeId loss;
        if (use_alignment) {
            const ForwardResult fwd_t = model.forward(tape, aln->ops, aln->features, /*training=*/true);
            MmdConfig mmd_cfg;
            mmd_cfg.subsample_cap = cfg.mmd_subsample_cap;
            mmd_cfg.subsample_seed = derive_seed(cfg.seed, 0x3300 + static_cast<std::uint64_t>(epoch));
            loss = upper_loss(tape, fwd.logits, labeled.labels, masks.train, fwd.embedding,
                              fwd_t.embedding, cfg.xi, mmd_cfg);
        } else {
            loss = tape.softmax_cross_entropy(fwd.logits, labeled.labels, masks.train);
        }
        const double loss_value = tape.value(loss).data[0];
        if (!std::isfinite(loss_value)) throw DivergenceError(epoch);

        adam.zero_grad();
        tape.backward(loss);
        adam.step();

        const DenseMatrix val_logits = model.predict_logits(lab.ops, lab.features);
        const double val_micro = micro_f1_on(val_logits, labeled.labels, masks.val);
        report.curve.push_back({epoch, loss_value, val_micro});
        report.stopped_epoch = epoch;

        if (val_micro > best_val) {
            best_val = val_micro;
            best_snapshot = model.snapshot_values();
            report.best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        if (epochs_since_best >= cfg.patience) break;
    }

    if (!best_snapshot.empty()) model.restore_values(best_snapshot);
    report.best_val_micro_f1 = best_val;
    report.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace

RunReport train_source(UgnnModel& model, const DomainDataset& source, const DomainDataset& target,
                       const TrainConfig& cfg) {
    RunReport report = run_training(model, source, &target, cfg);
    report.self_loops = model.spec().self_loops;
    PreparedDomain src(source, model.spec().self_loops);
    PreparedDomain tgt(target, model.spec().self_loops);
    const DenseMatrix logits = model.predict_logits(tgt.ops, tgt.features);
    const F1Scores f1 = f1_scores(target.labels, argmax_rows(logits), target.class_count);
    report.target_macro_f1 = f1.macro_f1;
    report.target_micro_f1 = f1.micro_f1;
    report.f_low_in_domain = theorem_check(model, src.ops, src.features).f_transfer;
    fill_diagnostics(model, tgt, report);
    return report;
}

RunReport train_oracle(UgnnModel& model, const DomainDataset& target, const TrainConfig& cfg) {
    TrainConfig oracle_cfg = cfg;
    oracle_cfg.xi = 0.0;  // the oracle is purely supervised on the target
    RunReport report = run_training(model, target, nullptr, oracle_cfg);
    report.self_loops = model.spec().self_loops;
    PreparedDomain tgt(target, model.spec().self_loops);
    const DenseMatrix logits = model.predict_logits(tgt.ops, tgt.features);
    const F1Scores f1 = f1_scores(target.labels, argmax_rows(logits), target.class_count);
    report.target_macro_f1 = f1.macro_f1;
    report.target_micro_f1 = f1.micro_f1;
    fill_diagnostics(model, tgt, report);
    report.f_low_in_domain = report.f_low_transfer;  // the oracle's domain is the target
    return report;
}

std::pair<double, double> evaluate(UgnnModel& model, const DomainDataset& domain) {
    PreparedDomain dom(domain, model.spec().self_loops);
    const DenseMatrix logits = model.predict_logits(dom.ops, dom.features);
    const F1Scores f1 = f1_scores(domain.labels, argmax_rows(logits), domain.class_count);
    return {f1.macro_f1, f1.micro_f1};
}

namespace {

void parallel_over(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int workers = std::min(threads, n);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& t : pool) t.join();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

SeedAggregate run_seeds(const DomainDataset& source, const DomainDataset& target, const ModelSpec& spec,
                        const TrainConfig& base, const std::vector<std::uint64_t>& seeds, int threads) {
    if (seeds.empty()) throw std::invalid_argument("run_seeds: need at least one seed");
    SeedAggregate agg;
    agg.seeds = seeds;
    agg.runs.resize(seeds.size());
    parallel_over(static_cast<int>(seeds.size()), threads, [&](int i) {
        TrainConfig cfg = base;
        cfg.seed = seeds[i];
        UgnnModel model(spec, seeds[i]);
        agg.runs[i] = train_source(model, source, target, cfg);
    });
    std::vector<double> val, macro, micro;
    for (const RunReport& r : agg.runs) {
        val.push_back(r.best_val_micro_f1);
        macro.push_back(r.target_macro_f1);
        micro.push_back(r.target_micro_f1);
    }
    agg.mean_val_micro_f1 = mean_of(val);
    agg.mean_target_macro_f1 = mean_of(macro);
    agg.mean_target_micro_f1 = mean_of(micro);
    agg.has_std = seeds.size() >= 2;
    agg.std_target_macro_f1 = sample_std(macro);
    agg.std_target_micro_f1 = sample_std(micro);
    return agg;
}

GridResult grid_search(const DomainDataset& source, const DomainDataset& target, const ModelSpec& spec,
                       const TrainConfig& base, const GridSpec& grids, int threads) {
    if (grids.lr.empty() || grids.weight_decay.empty() || grids.xi.empty() || grids.seeds.empty())
        throw std::invalid_argument("grid_search: empty grid axis");
    const bool elastic = spec.variant == Variant::elastic;
    if (elastic && grids.lambda.empty()) throw std::invalid_argument("grid_search: empty lambda grid");
    if (!elastic && grids.alpha.empty()) throw std::invalid_argument("grid_search: empty alpha grid");

    std::vector<GridRow> rows;
    for (double lr : grids.lr)
        for (double wd : grids.weight_decay)
            for (double xi : grids.xi) {
                if (elastic) {
                    for (double l1 : grids.lambda)
                        for (double l2 : grids.lambda) {
                            GridRow r;
                            r.lr = lr;
                            r.weight_decay = wd;
                            r.xi = xi;
                            r.lambda1 = l1;
                            r.lambda2 = l2;
                            rows.push_back(r);
                        }
                } else {
                    for (double a : grids.alpha) {
                        GridRow r;
                        r.lr = lr;
                        r.weight_decay = wd;
                        r.xi = xi;
                        r.alpha = a;
                        rows.push_back(r);
                    }
                }
            }

    for (GridRow& r : rows)
        r.key = "alpha=" + format17(r.alpha) + "|lambda1=" + format17(r.lambda1) +
                "|lambda2=" + format17(r.lambda2) + "|lr=" + format17(r.lr) + "|wd=" +
                format17(r.weight_decay) + "|xi=" + format17(r.xi);

    for (GridRow& r : rows) {
        ModelSpec point = spec;
        TrainConfig cfg = base;
        cfg.lr = r.lr;
        cfg.weight_decay = r.weight_decay;
        cfg.xi = r.xi;
        if (elastic) {
            point.elastic = ElasticParams::from_weights(r.lambda1, r.lambda2);
        } else {
            point.alpha = r.alpha;
        }
        const SeedAggregate agg = run_seeds(source, target, point, cfg, grids.seeds, threads);
        r.mean_val_micro_f1 = agg.mean_val_micro_f1;
        r.mean_target_macro_f1 = agg.mean_target_macro_f1;
        r.mean_target_micro_f1 = agg.mean_target_micro_f1;
    }

    GridResult result;
    result.table = rows;
    const GridRow* best = &rows.front();
    for (const GridRow& r : rows) {
        if (r.mean_val_micro_f1 > best->mean_val_micro_f1 ||
            (r.mean_val_micro_f1 == best->mean_val_micro_f1 && r.key < best->key))
            best = &r;
    }
    result.best = *best;
    return result;
}

}  // namespace ugcp
