#include "sqr/adam.hpp"

#include <cmath>

#include "sqr/error.hpp"

namespace sqr {

template <typename T>
void Adam<T>::step(const std::vector<ParamBlock<T>*>& blocks) {
    if (m_.empty()) {
        for (auto* b : blocks) {
            m_.emplace_back(b->value.size(), T{});
            v_.emplace_back(b->value.size(), T{});
        }
    }
    if (blocks.size() != m_.size()) throw ShapeError("adam: block count changed between steps");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto* b = blocks[i];
        if (!b->learnable || b->grad.size() != b->value.size() || b->value.size() != m_[i].size()) {
            throw ShapeError("adam: block '" + b->name + "' has mismatched gradient or moment shape");
        }
        for (std::size_t k = 0; k < b->grad.size(); ++k) {
            if (!std::isfinite(static_cast<double>(b->grad[k]))) {
                throw EvaluationError("adam: non-finite gradient in block '" + b->name + "' at index " +
                                      std::to_string(k));
            }
        }
    }

    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T shrink = static_cast<T>(1.0 - cfg_.learning_rate * cfg_.weight_decay);
    const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
    const T tc1 = static_cast<T>(c1), tc2 = static_cast<T>(c2);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto& w = blocks[i]->value;
        const auto& g = blocks[i]->grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = tb1 * m[k] + (T(1) - tb1) * g[k];
            v[k] = tb2 * v[k] + (T(1) - tb2) * g[k] * g[k];
            const T m_hat = m[k] / tc1;
            const T v_hat = v[k] / tc2;
            if (cfg_.weight_decay != 0.0) w[k] *= shrink;
            w[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sqr
