#pragma once

#include <vector>

#include "ugcp/tape.hpp"

namespace ugcp {

struct AdamConfig {
    double lr = 1e-3;
    double weight_decay = 0.0;  // decoupled; never enters the moment estimates
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamW {
public:
    AdamW(std::vector<Parameter*> params, AdamConfig cfg);

    void step();
    void zero_grad();
    int step_count() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    std::vector<DenseMatrix> m_;
    std::vector<DenseMatrix> v_;
    int t_ = 0;
};

}  // namespace ugcp
