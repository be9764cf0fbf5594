#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "labelaug/tensor.hpp"

namespace labelaug {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are positionally aligned with
/// the parameter list passed to step(); the list must not change between steps.
template <typename T>
class Adam {
public:
    explicit Adam(AdamOptions options = {});

    const AdamOptions& options() const noexcept { return options_; }
    std::uint64_t step_count() const noexcept { return steps_; }

    /// One update from the gradients currently held by `params`; zeroes them afterwards.
    void step(std::span<Parameter<T>> params);

    std::vector<Tensor<T>>& first_moments() noexcept { return m_; }
    std::vector<Tensor<T>>& second_moments() noexcept { return v_; }
    const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }
    void set_step_count(std::uint64_t t) noexcept { steps_ = t; }

    /// Allocates zeroed moments matching `params` if not yet present.
    void ensure_state(std::span<const Parameter<T>> params);

private:
    AdamOptions options_;
    std::uint64_t steps_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace labelaug
