#include "synthguard/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "synthguard/kernels.hpp"

namespace synthguard::gan {

using nn::Graph;
using nn::GradientMap;
using nn::ParameterStore;

const char* to_string(GanKind k) {
    switch (k) {
        case GanKind::kSimple: return "simple";
        case GanKind::kMedgan: return "medgan";
        case GanKind::kTimeseries: return "timeseries";
    }
    return "?";
}

GanKind kind_from_string(const std::string& s) {
    if (s == "simple") return GanKind::kSimple;
    if (s == "medgan") return GanKind::kMedgan;
    if (s == "timeseries") return GanKind::kTimeseries;
    throw ConfigError("unknown generator kind: " + s);
}

long GanConfig::critic_steps() const {
    if (n_critic > 0) return n_critic;
    return loss == GanLoss::kWasserstein ? 5 : 1;
}

void GanConfig::validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps_per_cell < 1) throw ConfigError("steps_per_cell must be >= 1");
    if (lipschitz == Lipschitz::kGradientPenalty && loss != GanLoss::kWasserstein)
        throw ConfigError("gradient penalty requires the wasserstein loss");
    if (lipschitz == Lipschitz::kWeightClip && !(weight_clip > 0.0))
        throw ConfigError("weight clip bound must be positive");
    if (dp) dp->validate();
}

std::pair<double, double> wasserstein_losses(std::span<const double> d_real,
                                             std::span<const double> d_fake) {
    if (d_real.empty() || d_fake.empty()) throw ShapeError("wasserstein_losses on an empty batch");
    double mean_real = kernels::sum(d_real.data(), d_real.size()) / double(d_real.size());
    double mean_fake = kernels::sum(d_fake.data(), d_fake.size()) / double(d_fake.size());
    return {mean_fake - mean_real, -mean_fake};
}

data::NormalizationParams identity_normalization(std::size_t feature_arity) {
    data::NormalizationParams p;
    p.feature_ranges.assign(feature_arity, {-1.0, 1.0});
    p.label_range = {-1.0, 1.0};
    return p;
}

namespace {

Tensor tensor_row(const Tensor& m, std::size_t i) {
    Tensor out(1, m.cols());
    std::copy(m.data() + i * m.cols(), m.data() + (i + 1) * m.cols(), out.data());
    return out;
}

Tensor sample_batch(const Tensor& rows, std::size_t batch, Rng& rng) {
    Tensor out(batch, rows.cols());
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t idx = rng.uniform_index(rows.rows());
        std::copy(rows.data() + idx * rows.cols(), rows.data() + (idx + 1) * rows.cols(),
                  out.data() + i * out.cols());
    }
    return out;
}

Tensor gaussian_latents(std::size_t batch, std::size_t dim, Rng& rng) {
    Tensor z(batch, dim);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return z;
}

privacy::DpConfig sanitizer_config(const GanConfig& cfg) {
    if (cfg.dp) return *cfg.dp;
    // Degenerate sanitizer: infinite clip bound, zero noise. This is the
    // single gradient path for every discriminator update, DP or not.
    privacy::DpConfig d;
    d.clip_norm = std::numeric_limits<double>::infinity();
    d.noise_multiplier = 0.0;
    d.delta = 1e-5;
    return d;
}

// loss = (||grad_x D(interp)|| - 1)^2 * lambda, one interpolate per row.
Graph::NodeId gradient_penalty_node(Graph& g, const ParameterStore& disc,
                                    const nn::MlpSpec& dspec, const Tensor& interp,
                                    double lambda) {
    auto x = g.constant(interp);
    auto grad = nn::mlp_input_gradient(g, disc, "disc", dspec, x);
    auto norm = g.sqrt(g.add_scalar(g.rowsum(g.square(grad)), 1e-12));
    auto excess = g.add_scalar(norm, -1.0);
    return g.scale(g.mean_all(g.square(excess)), lambda);
}

struct DiscStepResult {
    std::vector<double> real_scores;
    std::vector<double> fake_scores;
    double mean_loss = 0.0;
};

// One sanitized discriminator update on matched (real_i, fake_i) pairs.
// Per-sample gradients are independent, so the batch fans out across threads;
// scores and gradients land in index-for-index slots.
DiscStepResult disc_update(ParameterStore& disc, const nn::MlpSpec& dspec, nn::Adam& opt,
                           const GanConfig& cfg, const Tensor& real_batch,
                           const Tensor& fake_batch, const std::vector<double>& gp_u,
                           long sanitize_step, Rng& noise_rng, long epoch) {
    std::size_t batch = real_batch.rows();
    bool use_gp = cfg.lipschitz == Lipschitz::kGradientPenalty;

    std::vector<GradientMap> grads(batch);
    DiscStepResult res;
    res.real_scores.resize(batch);
    res.fake_scores.resize(batch);
    std::vector<double> losses(batch);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < batch; ++i) {
        Graph g;
        auto real = g.constant(tensor_row(real_batch, i));
        auto fake = g.constant(tensor_row(fake_batch, i));
        auto sr = nn::mlp_apply(g, disc, "disc", dspec, real);
        auto sf = nn::mlp_apply(g, disc, "disc", dspec, fake);

        Graph::NodeId loss;
        if (cfg.loss == GanLoss::kWasserstein) {
            loss = g.sub(sf, sr);
        } else {
            loss = g.add(g.softplus(g.scale(sr, -1.0)), g.softplus(sf));
        }
        if (use_gp) {
            Tensor interp(1, real_batch.cols());
            double u = gp_u[i];
            for (std::size_t j = 0; j < interp.size(); ++j)
                interp[j] = u * real_batch.at(i, j) + (1.0 - u) * fake_batch.at(i, j);
            loss = g.add(loss, gradient_penalty_node(g, disc, dspec, interp, cfg.gp_lambda));
        }

        res.real_scores[i] = g.scalar_value(sr);
        res.fake_scores[i] = g.scalar_value(sf);
        losses[i] = g.scalar_value(loss);
        grads[i] = g.backward(loss);
    }

    res.mean_loss = kernels::sum(losses.data(), losses.size()) / double(batch);
    if (!std::isfinite(res.mean_loss))
        throw TrainingDiverged("discriminator loss became non-finite", epoch);

    GradientMap sanitized =
        privacy::dp_sanitize(grads, sanitizer_config(cfg), sanitize_step, noise_rng);
    opt.step(disc, sanitized);
    if (cfg.lipschitz == Lipschitz::kWeightClip) nn::clip_weights_elementwise(disc, cfg.weight_clip);
    return res;
}

Graph::NodeId generator_loss_node(Graph& g, const GanConfig& cfg, Graph::NodeId fake_scores) {
    if (cfg.loss == GanLoss::kWasserstein) return g.scale(g.mean_all(fake_scores), -1.0);
    // Non-saturating generator loss.
    return g.mean_all(g.softplus(g.scale(fake_scores, -1.0)));
}

struct SpendTracker {
    bool active = false;
    double sigma_min = std::numeric_limits<double>::infinity();
    long steps = 0;
    double delta = 0.0;

    void record(const GanConfig& cfg, long sanitize_step) {
        if (!cfg.dp) return;
        active = true;
        delta = cfg.dp->delta;
        sigma_min = std::min(sigma_min, privacy::schedule_sigma(*cfg.dp, sanitize_step));
        ++steps;
    }

    privacy::PrivacySpend spend() const {
        if (!active) return {};
        return privacy::estimate_epsilon(steps, std::isfinite(sigma_min) ? sigma_min : 0.0, delta);
    }
};

void check_finite(double d_loss, double g_loss, long epoch) {
    if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
        throw TrainingDiverged("training loss became non-finite", epoch);
}

void check_normalized(const Tensor& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!(rows[i] >= -1.0 - 1e-9 && rows[i] <= 1.0 + 1e-9))
            throw ConfigError("training rows must be normalized into [-1, 1]");
}

}  // namespace

double gradient_penalty(const GanConfig& cfg, const ParameterStore& disc_params,
                        const nn::MlpSpec& disc_spec, const Tensor& real, const Tensor& fake,
                        Rng& rng) {
    if (cfg.lipschitz != Lipschitz::kGradientPenalty)
        throw ConfigError("gradient_penalty called but the config selects another mechanism");
    if (!real.same_shape(fake)) throw ShapeError("real and fake batches differ in shape");
    Tensor interp(real.rows(), real.cols());
    for (std::size_t i = 0; i < real.rows(); ++i) {
        double u = rng.uniform();
        for (std::size_t j = 0; j < real.cols(); ++j)
            interp.at(i, j) = u * real.at(i, j) + (1.0 - u) * fake.at(i, j);
    }
    Graph g;
    return g.scalar_value(gradient_penalty_node(g, disc_params, disc_spec, interp, cfg.gp_lambda));
}

// ---------------------------------------------------------------------------
// simpleGAN / PPGAN skeleton: flat rows in, flat rows out
// ---------------------------------------------------------------------------

std::pair<GeneratorModel, TrainLog> train_simple_gan(const Tensor& rows, const GanConfig& cfg,
                                                     Rng& rng,
                                                     const data::NormalizationParams& norm,
                                                     const TrainHooks* hooks) {
    cfg.validate();
    if (cfg.kind != GanKind::kSimple) throw ConfigError("train_simple_gan requires kind=simple");
    if (rows.rows() == 0) throw ConfigError("empty training matrix");
    check_normalized(rows);

    std::size_t arity = rows.cols();
    nn::MlpSpec gspec{cfg.latent_dim, cfg.gen_hidden, arity, nn::Activation::kTanh,
                      nn::Activation::kTanh};
    nn::MlpSpec dspec{arity, cfg.disc_hidden, 1, nn::Activation::kTanh, nn::Activation::kLinear};

    Rng init_rng = rng.split("init");
    ParameterStore gen = nn::init_mlp("gen", gspec, init_rng);
    ParameterStore disc = nn::init_mlp("disc", dspec, init_rng);

    nn::Adam g_opt({cfg.learning_rate});
    nn::Adam d_opt({cfg.learning_rate});
    Rng batch_rng = rng.split("batches");
    Rng latent_rng = rng.split("latents");
    Rng noise_rng = rng.split("dp-noise");
    Rng gp_rng = rng.split("gp");

    TrainLog log;
    log.dp_active = cfg.dp.has_value();
    SpendTracker spend;
    long sanitize_step = 0;

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        DiscStepResult last{};
        for (long k = 0; k < cfg.critic_steps(); ++k) {
            Tensor real = sample_batch(rows, cfg.batch_size, batch_rng);
            Tensor z = gaussian_latents(cfg.batch_size, cfg.latent_dim, latent_rng);
            Graph fg;
            Tensor fake = fg.value(nn::mlp_apply(fg, gen, "gen", gspec, fg.constant(z)));
            std::vector<double> gp_u(cfg.batch_size);
            if (cfg.lipschitz == Lipschitz::kGradientPenalty)
                for (auto& u : gp_u) u = gp_rng.uniform();
            spend.record(cfg, sanitize_step);
            last = disc_update(disc, dspec, d_opt, cfg, real, fake, gp_u, sanitize_step,
                               noise_rng, epoch);
            ++sanitize_step;
        }

        Tensor z = gaussian_latents(cfg.batch_size, cfg.latent_dim, latent_rng);
        Graph g;
        auto fake = nn::mlp_apply(g, gen, "gen", gspec, g.constant(z));
        auto scores = nn::mlp_apply(g, disc, "disc", dspec, fake);
        auto loss = generator_loss_node(g, cfg, scores);
        double g_loss = g.scalar_value(loss);
        g_opt.step(gen, g.backward(loss));

        double d_loss = cfg.loss == GanLoss::kWasserstein
                            ? wasserstein_losses(last.real_scores, last.fake_scores).first
                            : last.mean_loss;
        check_finite(d_loss, g_loss, epoch);
        log.d_loss.push_back(d_loss);
        log.g_loss.push_back(g_loss);
        if (log.dp_active) log.epsilon.push_back(spend.spend().epsilon);
        if (hooks && hooks->after_epoch) hooks->after_epoch(epoch, gen, disc);
    }
    log.final_spend = spend.spend();

    GeneratorModel model;
    model.kind = GanKind::kSimple;
    model.config = cfg;
    model.normalization = norm;
    model.feature_arity = arity - 1;
    for (auto& [k, v] : gen) model.params[k] = v;
    for (auto& [k, v] : disc) model.params[k] = v;
    return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// medGAN adaptation: autoencoder pretrain, then a GAN over the code space
// ---------------------------------------------------------------------------

nn::MlpSpec medgan_encoder_spec(const GanConfig& cfg, std::size_t row_arity) {
    return {row_arity, {64}, cfg.code_dim, nn::Activation::kTanh, nn::Activation::kTanh};
}
nn::MlpSpec medgan_decoder_spec(const GanConfig& cfg, std::size_t row_arity) {
    return {cfg.code_dim, {64}, row_arity, nn::Activation::kTanh, nn::Activation::kTanh};
}

std::pair<GeneratorModel, TrainLog> train_medgan(const Tensor& rows, const GanConfig& cfg,
                                                 Rng& rng, const data::NormalizationParams& norm,
                                                 const TrainHooks* hooks) {
    cfg.validate();
    if (cfg.kind != GanKind::kMedgan) throw ConfigError("train_medgan requires kind=medgan");
    if (rows.rows() == 0) throw ConfigError("empty training matrix");
    check_normalized(rows);

    std::size_t arity = rows.cols();
    nn::MlpSpec enc_spec = medgan_encoder_spec(cfg, arity);
    nn::MlpSpec dec_spec = medgan_decoder_spec(cfg, arity);
    nn::MlpSpec gspec{cfg.latent_dim, cfg.gen_hidden, cfg.code_dim, nn::Activation::kTanh,
                      nn::Activation::kTanh};
    nn::MlpSpec dspec{cfg.code_dim, cfg.disc_hidden, 1, nn::Activation::kTanh,
                      nn::Activation::kLinear};

    Rng init_rng = rng.split("init");
    ParameterStore ae = nn::init_mlp("enc", enc_spec, init_rng);
    for (auto& [k, v] : nn::init_mlp("dec", dec_spec, init_rng)) ae[k] = v;
    ParameterStore gen = nn::init_mlp("gen", gspec, init_rng);
    ParameterStore disc = nn::init_mlp("disc", dspec, init_rng);

    Rng batch_rng = rng.split("batches");
    Rng latent_rng = rng.split("latents");
    Rng noise_rng = rng.split("dp-noise");
    Rng gp_rng = rng.split("gp");

    TrainLog log;
    log.dp_active = cfg.dp.has_value();

    // Phase 1: reconstruction pretraining. enc/dec are updated jointly.
    nn::Adam ae_opt({cfg.learning_rate});
    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tensor batch = sample_batch(rows, cfg.batch_size, batch_rng);
        Graph g;
        auto x = g.constant(batch);
        auto code = nn::mlp_apply(g, ae, "enc", enc_spec, x);
        auto rec = nn::mlp_apply(g, ae, "dec", dec_spec, code);
        auto loss = nn::mse_loss(g, rec, x);
        double v = g.scalar_value(loss);
        if (!std::isfinite(v)) throw TrainingDiverged("autoencoder loss became non-finite", epoch);
        log.ae_loss.push_back(v);
        ae_opt.step(ae, g.backward(loss));
    }

    // Phase 2: GAN over codes; the decoder stays frozen from here on.
    SpendTracker spend;
    long sanitize_step = 0;
    nn::Adam g_opt({cfg.learning_rate});
    nn::Adam d_opt({cfg.learning_rate});

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        DiscStepResult last{};
        for (long k = 0; k < cfg.critic_steps(); ++k) {
            Tensor real_rows = sample_batch(rows, cfg.batch_size, batch_rng);
            Graph eg;
            Tensor real_codes =
                eg.value(nn::mlp_apply(eg, ae, "enc", enc_spec, eg.constant(real_rows)));
            Tensor z = gaussian_latents(cfg.batch_size, cfg.latent_dim, latent_rng);
            Graph fg;
            Tensor fake_codes = fg.value(nn::mlp_apply(fg, gen, "gen", gspec, fg.constant(z)));
            std::vector<double> gp_u(cfg.batch_size);
            if (cfg.lipschitz == Lipschitz::kGradientPenalty)
                for (auto& u : gp_u) u = gp_rng.uniform();
            spend.record(cfg, sanitize_step);
            last = disc_update(disc, dspec, d_opt, cfg, real_codes, fake_codes, gp_u,
                               sanitize_step, noise_rng, epoch);
            ++sanitize_step;
        }

        Tensor z = gaussian_latents(cfg.batch_size, cfg.latent_dim, latent_rng);
        Graph g;
        auto code = nn::mlp_apply(g, gen, "gen", gspec, g.constant(z));
        auto scores = nn::mlp_apply(g, disc, "disc", dspec, code);
        auto loss = generator_loss_node(g, cfg, scores);
        double g_loss = g.scalar_value(loss);
        g_opt.step(gen, g.backward(loss));

        double d_loss = cfg.loss == GanLoss::kWasserstein
                            ? wasserstein_losses(last.real_scores, last.fake_scores).first
                            : last.mean_loss;
        check_finite(d_loss, g_loss, epoch);
        log.d_loss.push_back(d_loss);
        log.g_loss.push_back(g_loss);
        if (log.dp_active) log.epsilon.push_back(spend.spend().epsilon);
        if (hooks && hooks->after_epoch) hooks->after_epoch(epoch, gen, disc);
    }
    log.final_spend = spend.spend();

    GeneratorModel model;
    model.kind = GanKind::kMedgan;
    model.config = cfg;
    model.normalization = norm;
    model.feature_arity = arity - 1;
    for (auto& [k, v] : gen) model.params[k] = v;
    for (auto& [k, v] : disc) model.params[k] = v;
    for (auto& [k, v] : ae) model.params[k] = v;
    return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Timeseries GAN (DoppelGANger-style): attribute MLP plus an LSTM whose cells
// each emit S time steps of (features, label, continuation flag)
// ---------------------------------------------------------------------------

namespace {

struct TsDims {
    std::size_t attr_dim;
    std::size_t arity;  // F
    std::size_t max_len;
    std::size_t steps_per_cell;
    std::size_t step_channels() const { return arity + 2; }  // features + label + flag
    std::size_t cells() const { return (max_len + steps_per_cell - 1) / steps_per_cell; }
    std::size_t flat_cols() const { return max_len * step_channels(); }
    std::size_t disc_in() const { return attr_dim + flat_cols(); }
};

nn::MlpSpec ts_attr_spec(const GanConfig& cfg, const TsDims& dims) {
    return {cfg.latent_dim, cfg.gen_hidden, dims.attr_dim, nn::Activation::kTanh,
            nn::Activation::kTanh};
}

nn::LstmSpec ts_lstm_spec(const GanConfig& cfg, const TsDims& dims) {
    return {dims.attr_dim + cfg.cell_latent, cfg.lstm_hidden};
}

nn::MlpSpec ts_disc_spec(const GanConfig& cfg, const TsDims& dims) {
    return {dims.disc_in(), cfg.disc_hidden, 1, nn::Activation::kTanh, nn::Activation::kLinear};
}

// Unrolls the generator; returns {attrs, flat steps}, both graph nodes.
std::pair<Graph::NodeId, Graph::NodeId> ts_generator_forward(
    Graph& g, const ParameterStore& params, const GanConfig& cfg, const TsDims& dims,
    const Tensor& z_attr, const std::vector<Tensor>& z_cells) {
    auto attrs = nn::mlp_apply(g, params, "attr", ts_attr_spec(cfg, dims), g.constant(z_attr));
    nn::LstmSpec lspec = ts_lstm_spec(cfg, dims);
    auto state = nn::lstm_initial_state(g, z_attr.rows(), cfg.lstm_hidden);

    Graph::NodeId flat = -1;
    for (std::size_t cell = 0; cell < dims.cells(); ++cell) {
        auto x = g.concat_cols(attrs, g.constant(z_cells[cell]));
        state = nn::lstm_step(g, params, "lstm", lspec, x, state);
        auto w = g.parameter("proj.w0", params.at("proj.w0"));
        auto b = g.parameter("proj.b0", params.at("proj.b0"));
        auto out = g.tanh(g.add_rowvec(g.matmul(state.h, w), b));
        flat = cell == 0 ? out : g.concat_cols(flat, out);
    }
    if (dims.cells() * dims.steps_per_cell > dims.max_len)
        flat = g.slice_cols(flat, 0, dims.flat_cols());
    return {attrs, flat};
}

// Real sample: attributes ++ per-step [features, label, flag]; live steps get
// flag +1, padding is zero with flag -1, so the discriminator input arity is
// constant no matter the true length.
Tensor ts_real_matrix(const data::SequenceDataset& ds, const TsDims& dims) {
    Tensor out(ds.sequences.size(), dims.disc_in());
    std::size_t ch = dims.step_channels();
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        const auto& s = ds.sequences[i];
        double* row = out.data() + i * out.cols();
        for (std::size_t a = 0; a < dims.attr_dim; ++a) row[a] = s.attributes[a];
        for (std::size_t t = 0; t < dims.max_len; ++t) {
            double* step = row + dims.attr_dim + t * ch;
            if (t < s.length()) {
                for (std::size_t f = 0; f < dims.arity; ++f) step[f] = s.features.at(t, f);
                step[dims.arity] = s.labels[t];
                step[dims.arity + 1] = 1.0;
            } else {
                step[dims.arity + 1] = -1.0;
            }
        }
    }
    return out;
}

std::vector<Tensor> ts_cell_latents(std::size_t batch, const GanConfig& cfg, const TsDims& dims,
                                    Rng& rng) {
    std::vector<Tensor> z(dims.cells());
    for (auto& t : z) t = gaussian_latents(batch, cfg.cell_latent, rng);
    return z;
}

ParameterStore ts_init_generator(const GanConfig& cfg, const TsDims& dims, Rng& rng) {
    ParameterStore gen = nn::init_mlp("attr", ts_attr_spec(cfg, dims), rng);
    ParameterStore lstm = nn::init_lstm("lstm", ts_lstm_spec(cfg, dims), rng);
    for (auto& [k, v] : lstm) gen[k] = v;
    gen["proj.w0"] = nn::glorot_uniform(cfg.lstm_hidden,
                                        dims.steps_per_cell * dims.step_channels(), rng);
    gen["proj.b0"] = Tensor(1, dims.steps_per_cell * dims.step_channels());
    return gen;
}

}  // namespace

std::pair<GeneratorModel, TrainLog> train_timeseries_gan(const data::SequenceDataset& ds,
                                                         const GanConfig& cfg, Rng& rng,
                                                         const TrainHooks* hooks) {
    cfg.validate();
    if (cfg.kind != GanKind::kTimeseries)
        throw ConfigError("train_timeseries_gan requires kind=timeseries");
    if (ds.sequences.empty()) throw ConfigError("empty sequence dataset");
    if (!ds.normalization) throw ConfigError("timeseries training expects a normalized dataset");

    TsDims dims{ds.sequences.front().attributes.size(), ds.feature_arity(), ds.max_len,
                cfg.steps_per_cell};
    nn::MlpSpec dspec = ts_disc_spec(cfg, dims);

    Rng init_rng = rng.split("init");
    ParameterStore gen = ts_init_generator(cfg, dims, init_rng);
    ParameterStore disc = nn::init_mlp("disc", dspec, init_rng);

    Tensor real_all = ts_real_matrix(ds, dims);

    nn::Adam g_opt({cfg.learning_rate});
    nn::Adam d_opt({cfg.learning_rate});
    Rng batch_rng = rng.split("batches");
    Rng latent_rng = rng.split("latents");
    Rng noise_rng = rng.split("dp-noise");
    Rng gp_rng = rng.split("gp");

    TrainLog log;
    log.dp_active = cfg.dp.has_value();
    SpendTracker spend;
    long sanitize_step = 0;

    auto make_fake = [&](Graph& g, std::size_t batch) {
        Tensor z_attr = gaussian_latents(batch, cfg.latent_dim, latent_rng);
        auto z_cells = ts_cell_latents(batch, cfg, dims, latent_rng);
        auto [attrs, flat] = ts_generator_forward(g, gen, cfg, dims, z_attr, z_cells);
        return g.concat_cols(attrs, flat);
    };

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        DiscStepResult last{};
        for (long k = 0; k < cfg.critic_steps(); ++k) {
            Tensor real = sample_batch(real_all, cfg.batch_size, batch_rng);
            Graph fg;
            Tensor fake = fg.value(make_fake(fg, cfg.batch_size));
            std::vector<double> gp_u(cfg.batch_size);
            if (cfg.lipschitz == Lipschitz::kGradientPenalty)
                for (auto& u : gp_u) u = gp_rng.uniform();
            spend.record(cfg, sanitize_step);
            last = disc_update(disc, dspec, d_opt, cfg, real, fake, gp_u, sanitize_step,
                               noise_rng, epoch);
            ++sanitize_step;
        }

        Graph g;
        auto fake = make_fake(g, cfg.batch_size);
        auto scores = nn::mlp_apply(g, disc, "disc", dspec, fake);
        auto loss = generator_loss_node(g, cfg, scores);
        double g_loss = g.scalar_value(loss);
        g_opt.step(gen, g.backward(loss));

        double d_loss = cfg.loss == GanLoss::kWasserstein
                            ? wasserstein_losses(last.real_scores, last.fake_scores).first
                            : last.mean_loss;
        check_finite(d_loss, g_loss, epoch);
        log.d_loss.push_back(d_loss);
        log.g_loss.push_back(g_loss);
        if (log.dp_active) log.epsilon.push_back(spend.spend().epsilon);
        if (hooks && hooks->after_epoch) hooks->after_epoch(epoch, gen, disc);
    }
    log.final_spend = spend.spend();

    GeneratorModel model;
    model.kind = GanKind::kTimeseries;
    model.config = cfg;
    model.normalization = *ds.normalization;
    model.feature_arity = dims.arity;
    model.attr_dim = dims.attr_dim;
    model.max_len = dims.max_len;
    for (auto& [k, v] : gen) model.params[k] = v;
    for (auto& [k, v] : disc) model.params[k] = v;
    return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

GeneratedData generate_rows(const GeneratorModel& model, std::size_t n, Rng& rng) {
    if (n < 1) throw ConfigError("generation row count must be >= 1");
    const GanConfig& cfg = model.config;
    std::size_t arity = model.feature_arity;

    GeneratedData out;
    out.kind = model.kind;

    if (model.kind == GanKind::kSimple || model.kind == GanKind::kMedgan) {
        Tensor z = gaussian_latents(n, cfg.latent_dim, rng);
        Graph g;
        Graph::NodeId rows_node;
        if (model.kind == GanKind::kSimple) {
            nn::MlpSpec gspec{cfg.latent_dim, cfg.gen_hidden, arity + 1, nn::Activation::kTanh,
                              nn::Activation::kTanh};
            rows_node = nn::mlp_apply(g, model.params, "gen", gspec, g.constant(z));
        } else {
            nn::MlpSpec gspec{cfg.latent_dim, cfg.gen_hidden, cfg.code_dim, nn::Activation::kTanh,
                              nn::Activation::kTanh};
            auto code = nn::mlp_apply(g, model.params, "gen", gspec, g.constant(z));
            rows_node = nn::mlp_apply(g, model.params, "dec", medgan_decoder_spec(cfg, arity + 1), code);
        }
        Tensor rows = g.value(rows_node);
        for (std::size_t i = 0; i < rows.rows(); ++i) {
            for (std::size_t j = 0; j < arity; ++j)
                rows.at(i, j) =
                    data::denormalize_value(rows.at(i, j), model.normalization.feature_ranges[j]);
            rows.at(i, arity) =
                data::denormalize_value(rows.at(i, arity), model.normalization.label_range);
        }
        out.rows = std::move(rows);
        return out;
    }

    // Timeseries: sample whole sequences until the row budget is covered.
    TsDims dims{model.attr_dim, arity, model.max_len, cfg.steps_per_cell};
    std::size_t ch = dims.step_channels();
    std::size_t total = 0;
    std::vector<std::vector<double>> flat_rows;

    while (total < n) {
        std::size_t batch = std::min<std::size_t>(64, std::max<std::size_t>(1, (n - total + dims.max_len - 1) / dims.max_len));
        Tensor z_attr = gaussian_latents(batch, cfg.latent_dim, rng);
        auto z_cells = ts_cell_latents(batch, cfg, dims, rng);
        Graph g;
        auto [attrs_node, flat_node] = ts_generator_forward(g, model.params, cfg, dims, z_attr, z_cells);
        const Tensor& attrs = g.value(attrs_node);
        const Tensor& flat = g.value(flat_node);

        for (std::size_t b = 0; b < batch && total < n; ++b) {
            std::size_t len = dims.max_len;
            for (std::size_t t = 0; t < dims.max_len; ++t) {
                if (flat.at(b, t * ch + arity + 1) < 0.0) {
                    len = std::max<std::size_t>(1, t);
                    break;
                }
            }
            len = std::min(len, n - total);

            data::EntitySequence seq;
            seq.features = Tensor(len, arity);
            seq.labels.resize(len);
            for (std::size_t t = 0; t < len; ++t) {
                for (std::size_t f = 0; f < arity; ++f)
                    seq.features.at(t, f) = data::denormalize_value(
                        flat.at(b, t * ch + f), model.normalization.feature_ranges[f]);
                seq.labels[t] = data::denormalize_value(flat.at(b, t * ch + arity),
                                                        model.normalization.label_range);
            }
            seq.attributes.resize(model.attr_dim);
            for (std::size_t a = 0; a < model.attr_dim; ++a) {
                auto range = a < arity ? model.normalization.feature_ranges[a]
                                       : model.normalization.label_range;
                seq.attributes[a] = data::denormalize_value(attrs.at(b, a), range);
            }
            for (std::size_t t = 0; t < len; ++t) {
                std::vector<double> row(arity + 1);
                for (std::size_t f = 0; f < arity; ++f) row[f] = seq.features.at(t, f);
                row[arity] = seq.labels[t];
                flat_rows.push_back(std::move(row));
            }
            total += len;
            out.sequences.push_back(std::move(seq));
        }
    }

    out.rows = Tensor(n, arity + 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= arity; ++j) out.rows.at(i, j) = flat_rows[i][j];
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::json;

json config_to_json(const GanConfig& cfg) {
    json j;
    j["kind"] = to_string(cfg.kind);
    j["latent_dim"] = cfg.latent_dim;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["gen_hidden"] = cfg.gen_hidden;
    j["disc_hidden"] = cfg.disc_hidden;
    j["code_dim"] = cfg.code_dim;
    j["loss"] = cfg.loss == GanLoss::kWasserstein ? "wasserstein" : "standard";
    j["lipschitz"] = cfg.lipschitz == Lipschitz::kNone
                         ? "none"
                         : (cfg.lipschitz == Lipschitz::kWeightClip ? "weight_clip"
                                                                    : "gradient_penalty");
    j["weight_clip"] = cfg.weight_clip;
    j["gp_lambda"] = cfg.gp_lambda;
    j["steps_per_cell"] = cfg.steps_per_cell;
    j["lstm_hidden"] = cfg.lstm_hidden;
    j["cell_latent"] = cfg.cell_latent;
    j["n_critic"] = cfg.n_critic;
    j["seed"] = cfg.seed;
    if (cfg.dp) {
        json d;
        d["clip_norm"] = cfg.dp->clip_norm;
        d["noise_multiplier"] = cfg.dp->noise_multiplier;
        d["delta"] = cfg.dp->delta;
        d["schedule"] = cfg.dp->schedule == privacy::NoiseSchedule::kConstant ? "constant" : "decay";
        d["decay_gamma"] = cfg.dp->decay_gamma;
        d["sigma_floor"] = cfg.dp->sigma_floor;
        j["dp"] = d;
    }
    return j;
}

GanConfig config_from_json(const json& j) {
    GanConfig cfg;
    cfg.kind = kind_from_string(j.at("kind").get<std::string>());
    cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
    cfg.epochs = j.at("epochs").get<long>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.gen_hidden = j.at("gen_hidden").get<std::vector<std::size_t>>();
    cfg.disc_hidden = j.at("disc_hidden").get<std::vector<std::size_t>>();
    cfg.code_dim = j.at("code_dim").get<std::size_t>();
    cfg.loss = j.at("loss") == "wasserstein" ? GanLoss::kWasserstein : GanLoss::kStandard;
    std::string lip = j.at("lipschitz").get<std::string>();
    cfg.lipschitz = lip == "none" ? Lipschitz::kNone
                                  : (lip == "weight_clip" ? Lipschitz::kWeightClip
                                                          : Lipschitz::kGradientPenalty);
    cfg.weight_clip = j.at("weight_clip").get<double>();
    cfg.gp_lambda = j.at("gp_lambda").get<double>();
    cfg.steps_per_cell = j.at("steps_per_cell").get<std::size_t>();
    cfg.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    cfg.cell_latent = j.at("cell_latent").get<std::size_t>();
    cfg.n_critic = j.at("n_critic").get<long>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dp")) {
        privacy::DpConfig d;
        const json& jd = j.at("dp");
        d.clip_norm = jd.at("clip_norm").get<double>();
        d.noise_multiplier = jd.at("noise_multiplier").get<double>();
        d.delta = jd.at("delta").get<double>();
        d.schedule = jd.at("schedule") == "decay" ? privacy::NoiseSchedule::kDecay
                                                  : privacy::NoiseSchedule::kConstant;
        d.decay_gamma = jd.at("decay_gamma").get<double>();
        d.sigma_floor = jd.at("sigma_floor").get<double>();
        cfg.dp = d;
    }
    return cfg;
}

}  // namespace

std::string GeneratorModel::to_json() const {
    json j;
    j["format"] = "synthguard-generator-v1";
    j["kind"] = gan::to_string(kind);
    j["feature_arity"] = feature_arity;
    j["attr_dim"] = attr_dim;
    j["max_len"] = max_len;
    j["config"] = config_to_json(config);
    json norm;
    norm["features"] = json::array();
    for (auto [lo, hi] : normalization.feature_ranges) norm["features"].push_back({lo, hi});
    norm["label"] = {normalization.label_range.first, normalization.label_range.second};
    j["normalization"] = norm;
    json params;
    for (const auto& [name, t] : this->params) {
        json p;
        p["rows"] = t.rows();
        p["cols"] = t.cols();
        p["data"] = t.vec();
        params[name] = p;
    }
    j["params"] = params;
    return j.dump();
}

GeneratorModel GeneratorModel::from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format") != "synthguard-generator-v1")
        throw ParseError("unsupported generator model format");
    GeneratorModel m;
    m.kind = kind_from_string(j.at("kind").get<std::string>());
    m.feature_arity = j.at("feature_arity").get<std::size_t>();
    m.attr_dim = j.at("attr_dim").get<std::size_t>();
    m.max_len = j.at("max_len").get<std::size_t>();
    m.config = config_from_json(j.at("config"));
    for (const auto& pair : j.at("normalization").at("features"))
        m.normalization.feature_ranges.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    m.normalization.label_range = {j.at("normalization").at("label")[0].get<double>(),
                                   j.at("normalization").at("label")[1].get<double>()};
    for (const auto& [name, p] : j.at("params").items()) {
        m.params[name] = Tensor(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>(),
                                p.at("data").get<std::vector<double>>());
    }
    return m;
}

}  // namespace synthguard::gan
