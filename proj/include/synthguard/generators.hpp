#ifndef SYNTHGUARD_GENERATORS_HPP
#define SYNTHGUARD_GENERATORS_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthguard/dataset.hpp"
#include "synthguard/layers.hpp"
#include "synthguard/optim.hpp"
#include "synthguard/privacy.hpp"

namespace synthguard::gan {

enum class GanKind { kSimple, kMedgan, kTimeseries };
enum class GanLoss { kStandard, kWasserstein };
enum class Lipschitz { kNone, kWeightClip, kGradientPenalty };

const char* to_string(GanKind k);
GanKind kind_from_string(const std::string& s);

struct GanConfig {
    GanKind kind = GanKind::kSimple;
    std::size_t latent_dim = 32;
    long epochs = 10000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::vector<std::size_t> gen_hidden = {64, 64};
    std::vector<std::size_t> disc_hidden = {64, 64};
    std::size_t code_dim = 32;  // medgan autoencoder code width
    GanLoss loss = GanLoss::kStandard;
    Lipschitz lipschitz = Lipschitz::kNone;
    double weight_clip = 0.01;
    double gp_lambda = 10.0;
    std::size_t steps_per_cell = 5;  // S: time points emitted per LSTM cell
    std::size_t lstm_hidden = 64;
    std::size_t cell_latent = 8;  // per-cell latent fed next to the attributes
    long n_critic = 0;            // 0 = by loss: 5 for wasserstein, 1 for standard
    std::optional<privacy::DpConfig> dp;
    std::uint64_t seed = 1;

    long critic_steps() const;
    void validate() const;  // throws ConfigError
};

struct TrainLog {
    std::vector<double> d_loss;   // one entry per epoch
    std::vector<double> g_loss;   // one entry per epoch
    std::vector<double> ae_loss;  // medgan pretrain phase, one entry per epoch
    std::vector<double> epsilon;  // cumulative spend per epoch when dp is on
    privacy::PrivacySpend final_spend;
    bool dp_active = false;
};

struct GeneratorModel {
    GanKind kind = GanKind::kSimple;
    GanConfig config;
    nn::ParameterStore params;  // all component parameters, prefix-scoped
    data::NormalizationParams normalization;
    std::size_t feature_arity = 0;  // F
    std::size_t attr_dim = 0;       // timeseries attribute width
    std::size_t max_len = 0;        // timeseries sequence cap

    std::string to_json() const;
    static GeneratorModel from_json(const std::string& text);
};

struct GeneratedData {
    GanKind kind = GanKind::kSimple;
    Tensor rows;  // n x (F+1), raw units (inverse-normalized)
    std::vector<data::EntitySequence> sequences;  // timeseries kind only
};

// Test hook: called after every epoch with the live parameter stores.
struct TrainHooks {
    std::function<void(long epoch, const nn::ParameterStore& gen, const nn::ParameterStore& disc)>
        after_epoch;
};

// d_loss = mean(d_fake) - mean(d_real); g_loss = -mean(d_fake).
std::pair<double, double> wasserstein_losses(std::span<const double> d_real,
                                             std::span<const double> d_fake);

// lambda * mean over interpolates u*real + (1-u)*fake of (||dD/dx||_2 - 1)^2.
// Throws ConfigError unless cfg.lipschitz selects the gradient penalty.
double gradient_penalty(const GanConfig& cfg, const nn::ParameterStore& disc_params,
                        const nn::MlpSpec& disc_spec, const Tensor& real, const Tensor& fake,
                        Rng& rng);

// Identity normalization: ranges (-1, 1) make de-normalization a no-op.
data::NormalizationParams identity_normalization(std::size_t feature_arity);

// Autoencoder layer shapes used by the medgan kind ("enc" / "dec" prefixes).
nn::MlpSpec medgan_encoder_spec(const GanConfig& cfg, std::size_t row_arity);
nn::MlpSpec medgan_decoder_spec(const GanConfig& cfg, std::size_t row_arity);

std::pair<GeneratorModel, TrainLog> train_simple_gan(const Tensor& rows, const GanConfig& cfg,
                                                     Rng& rng,
                                                     const data::NormalizationParams& norm,
                                                     const TrainHooks* hooks = nullptr);

std::pair<GeneratorModel, TrainLog> train_medgan(const Tensor& rows, const GanConfig& cfg,
                                                 Rng& rng, const data::NormalizationParams& norm,
                                                 const TrainHooks* hooks = nullptr);

std::pair<GeneratorModel, TrainLog> train_timeseries_gan(const data::SequenceDataset& ds,
                                                         const GanConfig& cfg, Rng& rng,
                                                         const TrainHooks* hooks = nullptr);

// Exactly n raw-unit rows; the timeseries kind samples whole sequences until
// they total >= n rows, then truncates to n.
GeneratedData generate_rows(const GeneratorModel& model, std::size_t n, Rng& rng);

}  // namespace synthguard::gan

#endif
