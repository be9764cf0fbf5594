#include "labelaug/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace labelaug {

template <typename T>
Adam<T>::Adam(AdamOptions options) : options_(options) {
    if (!(options_.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be > 0");
    if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0) || !(options_.beta2 >= 0.0 && options_.beta2 < 1.0)) {
        throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    if (!(options_.eps > 0.0)) throw std::invalid_argument("adam: eps must be > 0");
}

template <typename T>
void Adam<T>::ensure_state(std::span<const Parameter<T>> params) {
    if (m_.size() == params.size()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (m_[i].shape() != params[i].value.shape() || v_[i].shape() != params[i].value.shape()) {
                throw ShapeError("adam: moment state for '" + params[i].name + "' has shape " +
                                 shape_str(m_[i].shape()) + ", parameter has " +
                                 shape_str(params[i].value.shape()));
            }
        }
        return;
    }
    if (!m_.empty()) throw ShapeError("adam: parameter list changed between steps");
    for (const auto& p : params) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
    }
}

template <typename T>
void Adam<T>::step(std::span<Parameter<T>> params) {
    ensure_state(std::span<const Parameter<T>>(params.data(), params.size()));
    ++steps_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const T lr = static_cast<T>(options_.lr);
    const T eps = static_cast<T>(options_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        T* m = m_[i].data();
        T* v = v_[i].data();
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const T g = p.grad[j];
            m[j] = static_cast<T>(b1) * m[j] + static_cast<T>(1.0 - b1) * g;
            v[j] = static_cast<T>(b2) * v[j] + static_cast<T>(1.0 - b2) * g * g;
            const T mhat = m[j] / static_cast<T>(c1);
            const T vhat = v[j] / static_cast<T>(c2);
            p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        p.zero_grad();
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace labelaug
