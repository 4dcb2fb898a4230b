#pragma once

#include <vector>

#include "ugcp/dense.hpp"

namespace ugcp {

struct F1Scores {
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    std::vector<double> per_class;
    std::vector<int> absent_classes;  // classes missing from both prediction and truth (scored 0)
};

// Per-class F1 from confusion counts; macro is the unweighted mean over all
// classes, micro pools the counts (accuracy in single-label multiclass).
F1Scores f1_scores(const std::vector<int>& truth, const std::vector<int>& predicted, int classes);

// Row-wise argmax; ties break toward the lowest class index.
std::vector<int> argmax_rows(const DenseMatrix& logits);

}  // namespace ugcp
