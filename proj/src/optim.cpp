#include "bessgnn/optim.hpp"

#include <cmath>
#include <string>

#include "bessgnn/errors.hpp"

namespace bessgnn::nn {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) {
            throw TrainingError("adam: parameter " + std::to_string(i) + " " +
                                shape_str(params_[i].shape()) + " has no gradient");
        }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i].mutable_data();
        auto g = params_[i].mutable_grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            g[j] = 0.0;
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::restore(std::int64_t step, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
        throw DimensionError("adam: restored state covers a different parameter list");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (m[i].size() != params_[i].size() || v[i].size() != params_[i].size()) {
            throw DimensionError("adam: restored moment size mismatch for parameter " + std::to_string(i));
        }
    }
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

} // namespace bessgnn::nn
