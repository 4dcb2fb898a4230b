#include "ugcp/metrics.hpp"

#include <stdexcept>

namespace ugcp {

F1Scores f1_scores(const std::vector<int>& truth, const std::vector<int>& predicted, int classes) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("f1_scores: length mismatch");
    if (classes <= 0) throw std::invalid_argument("f1_scores: class count must be positive");
    std::vector<long> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes)
            throw std::invalid_argument("f1_scores: class index out of range");
        if (t == p) {
            tp[t]++;
        } else {
            fp[p]++;
            fn[t]++;
        }
    }
    F1Scores out;
    out.per_class.resize(classes, 0.0);
    long tp_sum = 0, fp_sum = 0, fn_sum = 0;
    double macro_sum = 0.0;
    for (int c = 0; c < classes; ++c) {
        const long denom = 2 * tp[c] + fp[c] + fn[c];
        if (denom == 0) {
            out.per_class[c] = 0.0;
            out.absent_classes.push_back(c);
        } else {
            out.per_class[c] = 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
        }
        macro_sum += out.per_class[c];
        tp_sum += tp[c];
        fp_sum += fp[c];
        fn_sum += fn[c];
    }
    out.macro_f1 = macro_sum / classes;
    const long micro_denom = 2 * tp_sum + fp_sum + fn_sum;
    out.micro_f1 = micro_denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp_sum) / static_cast<double>(micro_denom);
    return out;
}

std::vector<int> argmax_rows(const DenseMatrix& logits) {
    std::vector<int> out(logits.rows, 0);
    for (int i = 0; i < logits.rows; ++i) {
        int best = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        out[i] = best;
    }
    return out;
}

}  // namespace ugcp
