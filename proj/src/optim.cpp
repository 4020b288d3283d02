#include "dmlab/nn/optim.hpp"

#include "dmlab/errors.hpp"

#include <cmath>

namespace dmlab::nn {

namespace {

void require_grad(const Param& p) {
    if (!p.tensor.has_grad()) throw InvalidParameter("parameter '" + p.name + "' has no gradient");
}

}  // namespace

void sgd_step(std::vector<Param>& params, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("sgd: learning rate must be non-negative");
    for (auto& p : params) {
        require_grad(p);
        auto w = p.tensor.mutable_values();
        const auto g = p.tensor.grad();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
}

void AdamConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("adam: learning rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw InvalidParameter("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw InvalidParameter("adam: eps must be positive");
}

Adam::Adam(AdamConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Adam::set_lr(double lr) {
    AdamConfig c = cfg_;
    c.lr = lr;
    c.validate();
    cfg_ = c;
}

void Adam::step(std::vector<Param>& params) {
    for (const auto& p : params) require_grad(p);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& p : params) {
        auto& s = state_[p.name];
        const std::size_t n = p.tensor.numel();
        if (s.m.size() != n) {
            s.m.assign(n, 0.0);
            s.v.assign(n, 0.0);
        }
        auto w = p.tensor.mutable_values();
        const auto g = p.tensor.grad();
        for (std::size_t i = 0; i < n; ++i) {
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            w[i] -= cfg_.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + cfg_.eps);
        }
    }
}

void Adam::restore(long long t, std::map<std::string, Moments> state) {
    if (t < 0) throw InvalidParameter("adam: negative step count");
    for (const auto& [name, s] : state) {
        if (s.m.size() != s.v.size()) throw ShapeMismatch("adam: moment sizes differ for " + name);
    }
    t_ = t;
    state_ = std::move(state);
}

bool grads_finite(const std::vector<Param>& params) {
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad())
            if (!std::isfinite(g)) return false;
    }
    return true;
}

}  // namespace dmlab::nn
