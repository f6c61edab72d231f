#include "synthguard/optim.hpp"

#include <algorithm>
#include <cmath>

#include "synthguard/kernels.hpp"

namespace synthguard::nn {

void Adam::step(ParameterStore& params, const GradientMap& grads) {
    for (const auto& [name, g] : grads)
        if (!g.all_finite()) throw NumericsError("non-finite gradient for parameter " + name);

    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        if (!g.same_shape(p)) throw ShapeError("gradient shape mismatch for " + name);

        Tensor& m = m_.try_emplace(name, Tensor(p.rows(), p.cols())).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(p.rows(), p.cols())).first->second;

        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Sgd::step(ParameterStore& params, const GradientMap& grads) {
    for (auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        if (!it->second.same_shape(p)) throw ShapeError("gradient shape mismatch for " + name);
        kernels::axpy(-lr_, it->second.data(), p.data(), p.size());
    }
}

double global_norm(const GradientMap& grads) {
    double ss = 0.0;
    for (const auto& [name, g] : grads) ss += kernels::sum_squares(g.data(), g.size());
    return std::sqrt(ss);
}

GradientMap clip_by_global_norm(const GradientMap& grads, double clip_norm) {
    if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
    GradientMap out = grads;
    if (!std::isfinite(clip_norm)) return out;
    double norm = global_norm(grads);
    if (norm <= clip_norm) return out;
    double s = clip_norm / norm;
    for (auto& [name, g] : out) kernels::scale(g.data(), s, g.data(), g.size());
    return out;
}

void clip_weights_elementwise(ParameterStore& params, double c) {
    if (!(c > 0.0)) throw ConfigError("weight clip bound must be positive");
    for (auto& [name, p] : params)
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], -c, c);
}

}  // namespace synthguard::nn
