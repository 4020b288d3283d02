#pragma once

#include "dmlab/nn/ops.hpp"
#include "dmlab/nn/tensor.hpp"
#include "dmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace dmlab::testing {

using nn::Tensor;

inline Tensor random_tensor(const nn::Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(nn::numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_values(shape, std::move(v), true);
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Compares reverse-mode gradients of L = sum(f(inputs) * R), R a fixed random
/// weighting, against central differences with step h. The relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor keeps
/// entries whose true gradient is ~0 from dividing roundoff by roundoff.
/// At most `per_input` entries of each input are probed (evenly strided).
inline GradCheckResult gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                 std::vector<Tensor> inputs, Rng& rng, double h = 1e-5, double floor = 1e-3,
                                 std::size_t per_input = 64) {
    const auto y0 = f(inputs);
    std::vector<double> r(y0.numel());
    for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    const auto weights = Tensor::from_values(y0.shape(), r);
    const auto loss = [&](const std::vector<Tensor>& in) { return nn::sum(nn::mul(f(in), weights)); };

    for (auto& t : inputs) t.zero_grad();
    loss(inputs).backward();

    GradCheckResult res;
    for (auto& t : inputs) {
        if (!t.requires_grad()) continue;
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        const std::size_t n = t.numel();
        const std::size_t stride = std::max<std::size_t>(1, n / per_input);
        for (std::size_t i = 0; i < n; i += stride) {
            auto vals = t.mutable_values();
            const double orig = vals[i];
            double lp, lm;
            {
                nn::NoGradGuard guard;
                vals[i] = orig + h;
                lp = loss(inputs).item();
                vals[i] = orig - h;
                lm = loss(inputs).item();
                vals[i] = orig;
            }
            const double numeric = (lp - lm) / (2 * h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic[i] - numeric) / denom);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace dmlab::testing
