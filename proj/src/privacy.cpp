#include "synthguard/privacy.hpp"

#include <cmath>
#include <limits>

#include "synthguard/kernels.hpp"
#include "synthguard/optim.hpp"

namespace synthguard::privacy {

void DpConfig::validate() const {
    if (!(clip_norm > 0.0)) throw ConfigError("dp clip norm must be positive");
    if (noise_multiplier < 0.0) throw ConfigError("dp noise multiplier must be non-negative");
    if (noise_multiplier > 0.0 && !std::isfinite(clip_norm))
        throw ConfigError("dp noise requires a finite clip norm");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dp delta must be in (0, 1)");
    if (schedule == NoiseSchedule::kDecay) {
        if (!(decay_gamma > 0.0 && decay_gamma <= 1.0))
            throw ConfigError("dp decay factor must be in (0, 1]");
        if (sigma_floor < 0.0 || sigma_floor > noise_multiplier)
            throw ConfigError("dp sigma floor must be in [0, sigma]");
    }
}

double schedule_sigma(const DpConfig& cfg, long step) {
    if (step < 0) throw ConfigError("schedule step must be >= 0");
    if (cfg.schedule == NoiseSchedule::kConstant) return cfg.noise_multiplier;
    double s = cfg.noise_multiplier * std::pow(cfg.decay_gamma, static_cast<double>(step));
    return std::max(cfg.sigma_floor, s);
}

nn::GradientMap dp_sanitize(const std::vector<nn::GradientMap>& per_sample_grads,
                            const DpConfig& cfg, long step, Rng& rng) {
    if (per_sample_grads.empty()) throw ShapeError("dp_sanitize on an empty batch");
    cfg.validate();

    double batch = static_cast<double>(per_sample_grads.size());

    nn::GradientMap mean;
    for (const auto& [name, g] : per_sample_grads.front()) mean[name] = Tensor(g.rows(), g.cols());

    for (const auto& sample : per_sample_grads) {
        nn::GradientMap clipped = nn::clip_by_global_norm(sample, cfg.clip_norm);
        for (auto& [name, acc] : mean) {
            const Tensor& g = clipped.at(name);
            if (!g.same_shape(acc)) throw ShapeError("per-sample gradient shapes differ");
            kernels::axpy(1.0 / batch, g.data(), acc.data(), acc.size());
        }
    }

    double sigma_t = schedule_sigma(cfg, step);
    if (sigma_t > 0.0) {
        double std_dev = sigma_t * cfg.clip_norm / batch;
        for (auto& [name, acc] : mean)
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += rng.normal(0.0, std_dev);
    }
    return mean;
}

PrivacySpend estimate_epsilon(long steps, double sigma_effective, double delta) {
    if (steps < 0) throw ConfigError("step count must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
    PrivacySpend spend;
    spend.delta = delta;
    spend.steps = steps;
    if (steps == 0) return spend;
    if (sigma_effective <= 0.0) {
        spend.epsilon = std::numeric_limits<double>::infinity();
        return spend;
    }
    double eps0 = std::sqrt(2.0 * std::log(1.25 / delta)) / sigma_effective;
    double s = static_cast<double>(steps);
    spend.epsilon = eps0 * std::sqrt(2.0 * s * std::log(1.0 / delta)) +
                    s * eps0 * (std::exp(eps0) - 1.0);
    return spend;
}

}  // namespace synthguard::privacy
