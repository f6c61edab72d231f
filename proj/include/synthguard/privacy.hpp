#ifndef SYNTHGUARD_PRIVACY_HPP
#define SYNTHGUARD_PRIVACY_HPP

#include <cstdint>
#include <vector>

#include "synthguard/graph.hpp"
#include "synthguard/rng.hpp"

namespace synthguard::privacy {

enum class NoiseSchedule { kConstant, kDecay };

struct DpConfig {
    double clip_norm = 1.0;         // C
    double noise_multiplier = 0.0;  // sigma; noise std is sigma * C
    double delta = 1e-5;
    NoiseSchedule schedule = NoiseSchedule::kConstant;
    double decay_gamma = 1.0;   // sigma_t = max(floor, sigma * gamma^t)
    double sigma_floor = 0.0;

    void validate() const;  // throws ConfigError
};

struct PrivacySpend {
    double epsilon = 0.0;  // +inf when the mechanism adds no noise
    double delta = 0.0;
    long steps = 0;
};

// Noise multiplier used at sanitized update t (t counts from 0).
// Constant schedule returns sigma; decay returns max(floor, sigma * gamma^t).
double schedule_sigma(const DpConfig& cfg, long step);

// DP-SGD style sanitizer: clips each per-sample gradient map to joint L2 norm
// C, averages, then adds per-coordinate Gaussian noise with std
// sigma_t * C / batch. With sigma_t == 0 no randomness is consumed, so the
// degenerate config (sigma=0, C=inf) reproduces plain averaging bit for bit.
nn::GradientMap dp_sanitize(const std::vector<nn::GradientMap>& per_sample_grads,
                            const DpConfig& cfg, long step, Rng& rng);

// Gaussian mechanism per step (eps0 = sqrt(2 ln(1.25/delta)) / sigma) combined
// over `steps` updates by advanced composition:
//   eps = eps0 * sqrt(2 * steps * ln(1/delta)) + steps * eps0 * (e^eps0 - 1).
// sigma_effective = 0 reports epsilon = +inf.
PrivacySpend estimate_epsilon(long steps, double sigma_effective, double delta);

}  // namespace synthguard::privacy

#endif
