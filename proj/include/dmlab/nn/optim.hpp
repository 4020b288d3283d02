#pragma once

#include "dmlab/nn/layers.hpp"

#include <map>
#include <string>
#include <vector>

namespace dmlab::nn {

/// w <- w - lr * grad for every parameter. Parameters without a gradient are an error.
void sgd_step(std::vector<Param>& params, double lr);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

/// Bias-corrected Adam. Moment buffers are keyed by parameter name.
class Adam {
public:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    explicit Adam(AdamConfig cfg);

    void step(std::vector<Param>& params);

    const AdamConfig& config() const noexcept { return cfg_; }
    void set_lr(double lr);
    long long steps() const noexcept { return t_; }

    const std::map<std::string, Moments>& state() const noexcept { return state_; }
    void restore(long long t, std::map<std::string, Moments> state);

private:
    AdamConfig cfg_;
    long long t_ = 0;
    std::map<std::string, Moments> state_;
};

/// True when every gradient entry of every parameter is finite.
bool grads_finite(const std::vector<Param>& params);

}  // namespace dmlab::nn
