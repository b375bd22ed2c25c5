#pragma once

#include <cstdint>
#include <vector>

#include "bessgnn/tensor.hpp"

namespace bessgnn::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers start at zero; each step()
/// consumes the current gradients and zeroes them.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    /// Throws TrainingError if any parameter has no gradient buffer.
    void step();
    void zero_grad();

    std::int64_t steps() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    const std::vector<Tensor>& params() const noexcept { return params_; }

    // Moment buffers, exposed for checkpointing.
    const std::vector<std::vector<double>>& first_moment() const noexcept { return m_; }
    const std::vector<std::vector<double>>& second_moment() const noexcept { return v_; }
    void restore(std::int64_t step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::int64_t step_ = 0;
};

} // namespace bessgnn::nn
