#ifndef SYNTHGUARD_OPTIM_HPP
#define SYNTHGUARD_OPTIM_HPP

#include "synthguard/graph.hpp"

namespace synthguard::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment tensors are created on first use and
// shape-match their parameters; `step_count` counts calls to step().
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Throws NumericsError on non-finite gradient entries.
    void step(ParameterStore& params, const GradientMap& grads);

    long step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    long step_ = 0;
    ParameterStore m_;
    ParameterStore v_;
};

class Sgd {
  public:
    explicit Sgd(double lr) : lr_(lr) {}
    void step(ParameterStore& params, const GradientMap& grads);

  private:
    double lr_;
};

// Joint L2 norm over every tensor in the map.
double global_norm(const GradientMap& grads);

// Scales all gradients by C / norm when the joint norm exceeds C; the
// direction is preserved. C must be positive (ConfigError otherwise).
GradientMap clip_by_global_norm(const GradientMap& grads, double clip_norm);

// Clamps every entry of every tensor into [-c, c]. Idempotent.
void clip_weights_elementwise(ParameterStore& params, double c);

}  // namespace synthguard::nn

#endif
