#pragma once

#include <cstdint>
#include <vector>

#include "sqr/layers.hpp"

namespace sqr {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Decoupled decay: every weight is first scaled by (1 - lr * weight_decay).
    double weight_decay = 0.0;
};

/// Bias-corrected Adam:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   w <- w - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps),
/// optionally preceded by the decoupled shrink w <- (1 - lr*wd) w.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// One update over `blocks` (their .grad must be filled). The first call
    /// fixes the block layout. A non-finite gradient aborts the step before
    /// anything is modified.
    void step(const std::vector<ParamBlock<T>*>& blocks);

    std::uint64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

    const std::vector<std::vector<T>>& first_moments() const noexcept { return m_; }
    const std::vector<std::vector<T>>& second_moments() const noexcept { return v_; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace sqr
