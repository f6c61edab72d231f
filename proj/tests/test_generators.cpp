#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "synthguard/generators.hpp"

using namespace synthguard;
using namespace synthguard::gan;

namespace {

Tensor random_rows(Rng& rng, std::size_t n, std::size_t arity) {
    Tensor rows(n, arity);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = rng.uniform(-0.9, 0.9);
    return rows;
}

GanConfig small_simple(long epochs) {
    GanConfig cfg;
    cfg.kind = GanKind::kSimple;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.latent_dim = 4;
    cfg.gen_hidden = {16};
    cfg.disc_hidden = {16};
    return cfg;
}

data::SequenceDataset cohort_sequences(std::size_t max_len) {
    auto table = data::make_synthetic_cohort(data::CohortSpec{});
    auto raw = data::build_sequences(table, max_len);
    auto [norm, params] = data::normalize(raw);
    return norm;
}

}  // namespace

TEST_CASE("wasserstein_losses") {
    SUBCASE("equal batches give d_loss 0 and g_loss -mean exactly") {
        Rng rng(1);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> x(1 + rng.uniform_index(40));
            for (auto& v : x) v = rng.normal();
            auto [d, g] = wasserstein_losses(x, x);
            CHECK(d == 0.0);
            double mean = 0.0;
            for (double v : x) mean += v;
            CHECK(g == doctest::Approx(-mean / double(x.size())).epsilon(1e-12));
        }
    }
    SUBCASE("[1,1] vs [0,0] gives (-1, 0)") {
        std::vector<double> real{1.0, 1.0}, fake{0.0, 0.0};
        auto [d, g] = wasserstein_losses(real, fake);
        CHECK(d == -1.0);
        CHECK(g == 0.0);
    }
    SUBCASE("g_loss is minus the fake mean for random batches") {
        Rng rng(2);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> real(3), fake(1 + rng.uniform_index(20));
            for (auto& v : real) v = rng.normal();
            for (auto& v : fake) v = rng.normal();
            double mean = 0.0;
            for (double v : fake) mean += v;
            mean /= double(fake.size());
            auto [d, g] = wasserstein_losses(real, fake);
            CHECK(g == doctest::Approx(-mean).epsilon(1e-12));
        }
    }
    SUBCASE("empty batch is a shape error") {
        std::vector<double> x{1.0}, empty;
        CHECK_THROWS_AS((void)wasserstein_losses(empty, x), ShapeError);
        CHECK_THROWS_AS((void)wasserstein_losses(x, empty), ShapeError);
    }
}

TEST_CASE("gradient_penalty") {
    GanConfig cfg;
    cfg.loss = GanLoss::kWasserstein;
    cfg.lipschitz = Lipschitz::kGradientPenalty;
    cfg.gp_lambda = 10.0;

    SUBCASE("linear discriminator with unit-norm weights has zero penalty") {
        nn::MlpSpec dspec{2, {}, 1, nn::Activation::kTanh, nn::Activation::kLinear};
        nn::ParameterStore disc;
        disc["disc.w0"] = Tensor(2, 1, {0.6, 0.8});  // norm 1
        disc["disc.b0"] = Tensor(1, 1, {0.3});
        Rng rng(3);
        Tensor real = random_rows(rng, 8, 2);
        Tensor fake = random_rows(rng, 8, 2);
        double pen = gradient_penalty(cfg, disc, dspec, real, fake, rng);
        CHECK(pen == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("linear discriminator with weight norm 2 pays lambda") {
        nn::MlpSpec dspec{2, {}, 1, nn::Activation::kTanh, nn::Activation::kLinear};
        nn::ParameterStore disc;
        disc["disc.w0"] = Tensor(2, 1, {1.2, 1.6});  // norm 2
        disc["disc.b0"] = Tensor(1, 1);
        Rng rng(4);
        Tensor real = random_rows(rng, 8, 2);
        Tensor fake = random_rows(rng, 8, 2);
        double pen = gradient_penalty(cfg, disc, dspec, real, fake, rng);
        CHECK(pen == doctest::Approx(cfg.gp_lambda).epsilon(1e-6));
    }
    SUBCASE("input gradient of a random MLP matches finite differences") {
        Rng rng(5);
        nn::MlpSpec dspec{3, {6}, 1, nn::Activation::kTanh, nn::Activation::kLinear};
        Rng init = rng.split("init");
        nn::ParameterStore disc = nn::init_mlp("disc", dspec, init);
        Tensor x = random_rows(rng, 4, 3);

        nn::Graph g;
        auto grad_node = nn::mlp_input_gradient(g, disc, "disc", dspec, g.constant(x));
        const Tensor& grad = g.value(grad_node);

        const double h = 1e-5;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < x.cols(); ++j) {
                auto score = [&](double delta) {
                    Tensor xx = x;
                    xx.at(i, j) += delta;
                    nn::Graph gg;
                    auto out = nn::mlp_apply(gg, disc, "disc", dspec, gg.constant(xx));
                    return gg.value(out).at(i, 0);
                };
                double fd = (score(h) - score(-h)) / (2.0 * h);
                CHECK(std::abs(fd - grad.at(i, j)) / std::max(1.0, std::abs(fd)) < 1e-3);
            }
        }
    }
    SUBCASE("penalty gradients w.r.t. parameters match finite differences") {
        // The double-backprop path: differentiate the norm of the input
        // gradient with respect to the discriminator weights.
        Rng rng(6);
        nn::MlpSpec dspec{2, {4}, 1, nn::Activation::kTanh, nn::Activation::kLinear};
        Rng init = rng.split("init");
        nn::ParameterStore disc = nn::init_mlp("disc", dspec, init);
        Tensor interp = random_rows(rng, 5, 2);

        auto penalty_of = [&](const nn::ParameterStore& ps) {
            nn::Graph g;
            auto grad = nn::mlp_input_gradient(g, ps, "disc", dspec, g.constant(interp));
            auto norm = g.sqrt(g.add_scalar(g.rowsum(g.square(grad)), 1e-12));
            auto excess = g.add_scalar(norm, -1.0);
            return g.scalar_value(g.scale(g.mean_all(g.square(excess)), 10.0));
        };

        nn::Graph g;
        auto grad = nn::mlp_input_gradient(g, disc, "disc", dspec, g.constant(interp));
        auto norm = g.sqrt(g.add_scalar(g.rowsum(g.square(grad)), 1e-12));
        auto excess = g.add_scalar(norm, -1.0);
        auto pen = g.scale(g.mean_all(g.square(excess)), 10.0);
        auto grads = g.backward(pen);

        const double h = 1e-5;
        for (const auto& [name, p] : disc) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                nn::ParameterStore perturbed = disc;
                perturbed.at(name)[i] += h;
                double up = penalty_of(perturbed);
                perturbed.at(name)[i] -= 2.0 * h;
                double down = penalty_of(perturbed);
                double fd = (up - down) / (2.0 * h);
                double ad = grads.at(name)[i];
                CHECK(std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)}) < 1e-4);
            }
        }
    }
    SUBCASE("wrong lipschitz mechanism is a config error") {
        GanConfig plain;
        plain.lipschitz = Lipschitz::kWeightClip;
        plain.loss = GanLoss::kWasserstein;
        nn::MlpSpec dspec{2, {}, 1, nn::Activation::kTanh, nn::Activation::kLinear};
        nn::ParameterStore disc;
        disc["disc.w0"] = Tensor(2, 1, {1.0, 0.0});
        disc["disc.b0"] = Tensor(1, 1);
        Rng rng(7);
        Tensor batch = random_rows(rng, 4, 2);
        CHECK_THROWS_AS((void)gradient_penalty(plain, disc, dspec, batch, batch, rng),
                        ConfigError);
    }
    SUBCASE("gradient penalty requires the wasserstein loss") {
        GanConfig bad;
        bad.loss = GanLoss::kStandard;
        bad.lipschitz = Lipschitz::kGradientPenalty;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("train_simple_gan: contracts") {
    Rng data_rng(8);
    Tensor rows = random_rows(data_rng, 30, 3);
    auto norm = identity_normalization(2);

    SUBCASE("one epoch gives a one-entry log") {
        GanConfig cfg = small_simple(1);
        Rng rng(9);
        auto [model, log] = train_simple_gan(rows, cfg, rng, norm);
        CHECK(log.d_loss.size() == 1);
        CHECK(log.g_loss.size() == 1);
    }
    SUBCASE("same seed twice gives bit-identical parameters") {
        GanConfig cfg = small_simple(25);
        auto run = [&]() {
            Rng rng(10);
            return train_simple_gan(rows, cfg, rng, norm).first;
        };
        auto a = run();
        auto b = run();
        CHECK(a.params == b.params);
    }
    SUBCASE("unnormalized rows are rejected") {
        Tensor bad(2, 2, {0.0, 5.0, 1.0, -1.0});
        GanConfig cfg = small_simple(1);
        Rng rng(11);
        CHECK_THROWS_AS((void)train_simple_gan(bad, cfg, rng, norm), ConfigError);
    }
    SUBCASE("divergence raises TrainingDiverged with the epoch index") {
        GanConfig cfg = small_simple(50);
        cfg.loss = GanLoss::kWasserstein;
        cfg.lipschitz = Lipschitz::kNone;
        cfg.learning_rate = std::numeric_limits<double>::infinity();
        Rng rng(12);
        try {
            (void)train_simple_gan(rows, cfg, rng, norm);
            FAIL("expected TrainingDiverged");
        } catch (const TrainingDiverged& e) {
            CHECK(e.epoch >= 0);
            CHECK(std::string(e.what()).find("epoch") != std::string::npos);
        }
    }
    SUBCASE("weight clipping keeps every discriminator weight in [-c, c]") {
        GanConfig cfg = small_simple(30);
        cfg.loss = GanLoss::kWasserstein;
        cfg.lipschitz = Lipschitz::kWeightClip;
        cfg.weight_clip = 0.01;
        Rng rng(13);
        auto [model, log] = train_simple_gan(rows, cfg, rng, norm);
        for (const auto& [name, p] : model.params) {
            if (name.rfind("disc.", 0) != 0) continue;
            for (std::size_t i = 0; i < p.size(); ++i) {
                CHECK(p[i] >= -0.01);
                CHECK(p[i] <= 0.01);
            }
        }
    }
}

TEST_CASE("train_simple_gan learns a 1-D Gaussian (Monte-Carlo oracle)") {
    // N(5,1) scaled into [-1,1]; after 2000 epochs the generated sample mean
    // must sit within +-20% of 5 and the std within +-50% of 1.
    Rng data_rng(1234);
    const std::size_t n = 300;
    std::vector<double> raw(n);
    for (auto& v : raw) v = data_rng.normal(5.0, 1.0);
    double lo = raw[0], hi = raw[0];
    for (double v : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor rows(n, 1);
    for (std::size_t i = 0; i < n; ++i) rows[i] = data::normalize_value(raw[i], {lo, hi});
    data::NormalizationParams params;
    params.label_range = {lo, hi};

    GanConfig cfg;
    cfg.kind = GanKind::kSimple;
    cfg.epochs = 2000;
    cfg.batch_size = 64;
    cfg.latent_dim = 8;
    cfg.gen_hidden = {32, 32};
    cfg.disc_hidden = {32, 32};
    cfg.learning_rate = 1e-3;

    Rng rng(7);
    auto [model, log] = train_simple_gan(rows, cfg, rng, params);
    Rng gen_rng(100);
    auto g = generate_rows(model, 1000, gen_rng);
    REQUIRE(g.rows.rows() == 1000);

    double mean = 0.0;
    for (std::size_t i = 0; i < g.rows.rows(); ++i) mean += g.rows.at(i, 0);
    mean /= double(g.rows.rows());
    double var = 0.0;
    for (std::size_t i = 0; i < g.rows.rows(); ++i) {
        double d = g.rows.at(i, 0) - mean;
        var += d * d;
    }
    double sd = std::sqrt(var / double(g.rows.rows()));

    CHECK(mean >= 4.0);
    CHECK(mean <= 6.0);
    CHECK(sd >= 0.5);
    CHECK(sd <= 1.5);
}

TEST_CASE("train_medgan") {
    SUBCASE("autoencoder memorizes a tiny dataset (reconstruction MSE < 1e-2)") {
        Rng data_rng(14);
        Tensor rows = random_rows(data_rng, 10, 4);
        GanConfig cfg;
        cfg.kind = GanKind::kMedgan;
        cfg.epochs = 1200;
        cfg.batch_size = 10;
        cfg.latent_dim = 8;
        cfg.code_dim = 32;
        cfg.gen_hidden = {16};
        cfg.disc_hidden = {16};
        cfg.learning_rate = 5e-3;
        Rng rng(15);
        auto [model, log] = train_medgan(rows, cfg, rng, identity_normalization(3));

        // Reconstruction error through the trained autoencoder on all rows.
        nn::Graph g;
        auto x = g.constant(rows);
        auto code = nn::mlp_apply(g, model.params, "enc", medgan_encoder_spec(cfg, 4), x);
        auto rec = nn::mlp_apply(g, model.params, "dec", medgan_decoder_spec(cfg, 4), code);
        double mse = g.scalar_value(nn::mse_loss(g, rec, x));
        CHECK(mse < 1e-2);
    }
    SUBCASE("generated rows keep the input arity") {
        Rng data_rng(16);
        Tensor rows = random_rows(data_rng, 20, 5);
        GanConfig cfg;
        cfg.kind = GanKind::kMedgan;
        cfg.epochs = 10;
        cfg.batch_size = 8;
        cfg.latent_dim = 4;
        cfg.code_dim = 6;
        cfg.gen_hidden = {8};
        cfg.disc_hidden = {8};
        Rng rng(17);
        auto [model, log] = train_medgan(rows, cfg, rng, identity_normalization(4));
        Rng gen_rng(18);
        auto g = generate_rows(model, 7, gen_rng);
        CHECK(g.rows.rows() == 7);
        CHECK(g.rows.cols() == 5);
    }
    SUBCASE("the log records both phases at the configured length") {
        Rng data_rng(19);
        Tensor rows = random_rows(data_rng, 12, 2);
        GanConfig cfg;
        cfg.kind = GanKind::kMedgan;
        cfg.epochs = 15;
        cfg.batch_size = 6;
        cfg.latent_dim = 3;
        cfg.code_dim = 4;
        cfg.gen_hidden = {6};
        cfg.disc_hidden = {6};
        Rng rng(20);
        auto [model, log] = train_medgan(rows, cfg, rng, identity_normalization(1));
        CHECK(log.ae_loss.size() == 15);
        CHECK(log.d_loss.size() == 15);
        CHECK(log.g_loss.size() == 15);
    }
}

TEST_CASE("train_timeseries_gan: structural contracts") {
    auto ds = cohort_sequences(12);

    GanConfig cfg;
    cfg.kind = GanKind::kTimeseries;
    cfg.loss = GanLoss::kWasserstein;
    cfg.lipschitz = Lipschitz::kWeightClip;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.n_critic = 1;
    cfg.steps_per_cell = 3;
    cfg.lstm_hidden = 8;
    cfg.latent_dim = 6;
    cfg.cell_latent = 3;

    SUBCASE("S=3, L=12 unrolls in 4 cells (projection emits 3 steps each)") {
        Rng rng(21);
        auto [model, log] = train_timeseries_gan(ds, cfg, rng);
        // proj output covers ceil(12/3)*3 = 12 steps of (F+2) channels
        const Tensor& w = model.params.at("proj.w0");
        CHECK(w.cols() == 3 * (ds.feature_arity() + 2));
        Rng gen_rng(22);
        auto g = generate_rows(model, 30, gen_rng);
        for (const auto& s : g.sequences) {
            CHECK(s.length() >= 1);
            CHECK(s.length() <= 12);
        }
    }
    SUBCASE("empty dataset is a config error") {
        data::SequenceDataset empty;
        empty.max_len = 12;
        Rng rng(23);
        CHECK_THROWS_AS((void)train_timeseries_gan(empty, cfg, rng), ConfigError);
    }
    SUBCASE("unnormalized dataset is a config error") {
        auto table = data::make_synthetic_cohort(data::CohortSpec{});
        auto raw = data::build_sequences(table, 12);
        Rng rng(24);
        CHECK_THROWS_AS((void)train_timeseries_gan(raw, cfg, rng), ConfigError);
    }
}

TEST_CASE("timeseries GAN learns realistic sequence lengths on the cohort") {
    // 500 epochs, seed 11: mean generated length within +-40% of the real
    // clipped mean.
    auto ds = cohort_sequences(150);
    double real_mean = double(ds.total_rows()) / double(ds.sequences.size());

    GanConfig cfg;
    cfg.kind = GanKind::kTimeseries;
    cfg.loss = GanLoss::kWasserstein;
    cfg.lipschitz = Lipschitz::kWeightClip;
    cfg.epochs = 500;
    cfg.batch_size = 16;
    cfg.n_critic = 2;
    cfg.steps_per_cell = 5;
    cfg.lstm_hidden = 64;
    cfg.latent_dim = 32;
    cfg.cell_latent = 8;
    cfg.learning_rate = 1e-3;

    Rng rng(11);
    auto [model, log] = train_timeseries_gan(ds, cfg, rng);
    CHECK(log.d_loss.size() == 500);

    Rng gen_rng(200);
    auto g = generate_rows(model, 2000, gen_rng);
    REQUIRE(!g.sequences.empty());
    double mean_len = 0.0;
    for (const auto& s : g.sequences) mean_len += double(s.length());
    mean_len /= double(g.sequences.size());

    CHECK(mean_len >= 0.6 * real_mean);
    CHECK(mean_len <= 1.4 * real_mean);
}

TEST_CASE("generate_rows contracts") {
    Rng data_rng(25);
    Tensor rows = random_rows(data_rng, 25, 3);
    GanConfig cfg = small_simple(5);
    data::NormalizationParams norm;
    norm.feature_ranges = {{0.0, 10.0}, {-3.0, 3.0}};
    norm.label_range = {0.0, 30.0};
    Rng rng(26);
    auto [model, log] = train_simple_gan(rows, cfg, rng, norm);

    SUBCASE("n rows exactly, all within the de-normalized ranges") {
        Rng gen_rng(27);
        auto g = generate_rows(model, 10000, gen_rng);
        CHECK(g.rows.rows() == 10000);
        for (std::size_t i = 0; i < g.rows.rows(); ++i) {
            CHECK(g.rows.at(i, 0) >= 0.0);
            CHECK(g.rows.at(i, 0) <= 10.0);
            CHECK(g.rows.at(i, 1) >= -3.0);
            CHECK(g.rows.at(i, 1) <= 3.0);
            CHECK(g.rows.at(i, 2) >= 0.0);
            CHECK(g.rows.at(i, 2) <= 30.0);
        }
    }
    SUBCASE("same (model, n, seed) twice is identical") {
        Rng a(31), b(31);
        auto ga = generate_rows(model, 50, a);
        auto gb = generate_rows(model, 50, b);
        CHECK(ga.rows == gb.rows);
    }
    SUBCASE("n = 0 is a config error") {
        Rng gen_rng(28);
        CHECK_THROWS_AS((void)generate_rows(model, 0, gen_rng), ConfigError);
    }
}

TEST_CASE("model serialization round-trips through generation") {
    Rng data_rng(29);
    Tensor rows = random_rows(data_rng, 20, 3);
    GanConfig cfg = small_simple(10);
    Rng rng(30);
    auto [model, log] = train_simple_gan(rows, cfg, rng, identity_normalization(2));

    std::string text = model.to_json();
    GeneratorModel loaded = GeneratorModel::from_json(text);
    CHECK(loaded.params == model.params);

    Rng a(77), b(77);
    auto ga = generate_rows(model, 40, a);
    auto gb = generate_rows(loaded, 40, b);
    CHECK(ga.rows == gb.rows);
}

TEST_CASE("dp with sigma=0 and infinite clip matches non-dp training exactly") {
    Rng data_rng(32);
    Tensor rows = random_rows(data_rng, 24, 2);

    auto run = [&](bool with_dp) {
        GanConfig cfg = small_simple(40);
        cfg.loss = GanLoss::kWasserstein;
        cfg.lipschitz = Lipschitz::kWeightClip;
        if (with_dp) {
            privacy::DpConfig dp;
            dp.clip_norm = std::numeric_limits<double>::infinity();
            dp.noise_multiplier = 0.0;
            cfg.dp = dp;
        }
        std::vector<nn::ParameterStore> trajectory;
        TrainHooks hooks;
        hooks.after_epoch = [&](long, const nn::ParameterStore& gen,
                                const nn::ParameterStore& disc) {
            nn::ParameterStore merged = gen;
            for (const auto& [k, v] : disc) merged[k] = v;
            trajectory.push_back(merged);
        };
        Rng rng(33);
        (void)train_simple_gan(rows, cfg, rng, identity_normalization(1), &hooks);
        return trajectory;
    };

    auto plain = run(false);
    auto dp = run(true);
    REQUIRE(plain.size() == dp.size());
    for (std::size_t e = 0; e < plain.size(); ++e) {
        for (const auto& [name, p] : plain[e]) {
            const Tensor& q = dp[e].at(name);
            REQUIRE(p.same_shape(q));
            for (std::size_t i = 0; i < p.size(); ++i)
                CHECK(std::abs(p[i] - q[i]) <= 1e-12);
        }
    }
}

TEST_CASE("dp training reports a monotone privacy spend") {
    Rng data_rng(34);
    Tensor rows = random_rows(data_rng, 24, 2);
    GanConfig cfg = small_simple(30);
    cfg.loss = GanLoss::kWasserstein;
    cfg.lipschitz = Lipschitz::kWeightClip;
    privacy::DpConfig dp;
    dp.clip_norm = 1.0;
    dp.noise_multiplier = 1.0;
    dp.schedule = privacy::NoiseSchedule::kDecay;
    dp.decay_gamma = 0.99;
    dp.sigma_floor = 0.25;
    cfg.dp = dp;
    Rng rng(35);
    auto [model, log] = train_simple_gan(rows, cfg, rng, identity_normalization(1));
    REQUIRE(log.epsilon.size() == 30);
    for (std::size_t i = 1; i < log.epsilon.size(); ++i)
        CHECK(log.epsilon[i] >= log.epsilon[i - 1]);
    CHECK(log.final_spend.steps == 30 * cfg.critic_steps());
    CHECK(log.final_spend.epsilon > 0.0);
}

TEST_CASE("config validation rejects bad setups") {
    GanConfig cfg;
    cfg.latent_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.latent_dim = 4;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epochs = 1;
    cfg.steps_per_cell = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.steps_per_cell = 1;
    CHECK_NOTHROW(cfg.validate());
    Rng rng(36);
    Tensor rows(4, 2);
    cfg.kind = GanKind::kMedgan;
    CHECK_THROWS_AS((void)train_simple_gan(rows, cfg, rng, identity_normalization(1)),
                    ConfigError);
}
