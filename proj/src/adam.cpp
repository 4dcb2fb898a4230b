#include "ugcp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ugcp {

AdamW::AdamW(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw std::invalid_argument("adam: learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.rows, p->value.cols);
        v_.emplace_back(p->value.rows, p->value.cols);
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        for (std::size_t q = 0; q < p.value.size(); ++q) {
            const double g = p.grad.data[q];
            m_[i].data[q] = cfg_.beta1 * m_[i].data[q] + (1.0 - cfg_.beta1) * g;
            v_[i].data[q] = cfg_.beta2 * v_[i].data[q] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m_[i].data[q] / bc1;
            const double vhat = v_[i].data[q] / bc2;
            p.value.data[q] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p.value.data[q]);
        }
    }
}

void AdamW::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

}  // namespace ugcp
