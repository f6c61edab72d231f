#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "synthguard/graph.hpp"
#include "synthguard/layers.hpp"
#include "synthguard/optim.hpp"
#include "synthguard/rng.hpp"

using namespace synthguard;
using nn::Graph;

namespace {

// Central finite differences over every coordinate of every parameter.
// `loss_fn` rebuilds the graph from scratch for the given parameter store.
void check_gradients(const nn::ParameterStore& params,
                     const std::function<double(const nn::ParameterStore&)>& loss_fn,
                     const nn::GradientMap& analytic, double tol = 1e-4, double h = 1e-5) {
    for (const auto& [name, p] : params) {
        const Tensor& g = analytic.at(name);
        REQUIRE(g.same_shape(p));
        for (std::size_t i = 0; i < p.size(); ++i) {
            nn::ParameterStore perturbed = params;
            perturbed.at(name)[i] = p[i] + h;
            double up = loss_fn(perturbed);
            perturbed.at(name)[i] = p[i] - h;
            double down = loss_fn(perturbed);
            double fd = (up - down) / (2.0 * h);
            double denom = std::max({1.0, std::abs(fd), std::abs(g[i])});
            CHECK_MESSAGE(std::abs(fd - g[i]) / denom < tol,
                          name << "[" << i << "]: fd=" << fd << " ad=" << g[i]);
        }
    }
}

}  // namespace

TEST_CASE("backward: d(x*x)/dx = 2x") {
    Graph g;
    auto x = g.parameter("x", Tensor::scalar(3.0));
    auto y = g.mul(x, x);
    auto grads = g.backward(y);
    CHECK(grads.at("x")[0] == doctest::Approx(6.0));
}

TEST_CASE("backward: constant loss has zero gradient") {
    Graph g;
    auto x = g.parameter("x", Tensor::scalar(3.0));
    (void)x;
    auto c = g.constant(Tensor::scalar(7.0));
    auto loss = g.mean_all(c);
    auto grads = g.backward(loss);
    CHECK(grads.at("x")[0] == 0.0);
}

TEST_CASE("backward rejects a non-scalar loss") {
    Graph g;
    auto x = g.parameter("x", Tensor::row({1.0, 2.0}));
    CHECK_THROWS_AS((void)g.backward(x), ShapeError);
}

TEST_CASE("backward is repeatable on an unchanged graph") {
    Rng rng(7);
    Graph g;
    auto x = g.parameter("x", nn::glorot_uniform(3, 4, rng));
    auto w = g.parameter("w", nn::glorot_uniform(4, 1, rng));
    auto loss = g.mean_all(g.tanh(g.matmul(x, w)));
    auto g1 = g.backward(loss);
    auto g2 = g.backward(loss);
    CHECK(g1.at("x") == g2.at("x"));
    CHECK(g1.at("w") == g2.at("w"));
}

TEST_CASE("two-layer net gradients match finite differences") {
    Rng rng(42);
    nn::MlpSpec spec{3, {5, 4}, 1, nn::Activation::kTanh, nn::Activation::kLinear};
    Rng init = rng.split("init");
    nn::ParameterStore params = nn::init_mlp("net", spec, init);
    Tensor x(6, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Tensor target(6, 1);
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform(-1.0, 1.0);

    auto loss_fn = [&](const nn::ParameterStore& ps) {
        Graph g;
        auto out = nn::mlp_apply(g, ps, "net", spec, g.constant(x));
        return g.scalar_value(nn::mse_loss(g, out, g.constant(target)));
    };

    Graph g;
    auto out = nn::mlp_apply(g, params, "net", spec, g.constant(x));
    auto loss = nn::mse_loss(g, out, g.constant(target));
    check_gradients(params, loss_fn, g.backward(loss));
}

TEST_CASE("per-op gradients match finite differences") {
    Rng rng(43);
    // A composite touching every op kind that participates in training.
    auto build = [&](const nn::ParameterStore& ps, Graph& g) {
        auto a = g.parameter("a", ps.at("a"));
        auto b = g.parameter("b", ps.at("b"));
        auto c = g.parameter("c", ps.at("c"));
        auto m = g.matmul(a, b);                           // 2x3 . 3x2
        auto s = g.sigmoid(m);
        auto r = g.relu(g.add_scalar(m, 0.3));
        auto t = g.tanh(g.concat_cols(s, r));              // 2x4
        auto sp = g.softplus(g.slice_cols(t, 1, 3));       // 2x2
        auto q = g.square(g.add(sp, g.transpose(c)));      // c is 2x2
        auto root = g.sqrt(g.add_scalar(q, 1.0));
        auto row = g.rowsum(g.mul(root, root));            // 2x1
        auto bias = g.parameter("bias", ps.at("bias"));
        auto shifted = g.add_rowvec(g.transpose(row), bias);  // 1x2 + bias
        return g.mean_all(g.sub(g.scale(shifted, 1.5), g.softplus(shifted)));
    };
    nn::ParameterStore params;
    params["a"] = nn::glorot_uniform(2, 3, rng);
    params["b"] = nn::glorot_uniform(3, 2, rng);
    params["c"] = nn::glorot_uniform(2, 2, rng);
    params["bias"] = nn::glorot_uniform(1, 2, rng);

    auto loss_fn = [&](const nn::ParameterStore& ps) {
        Graph g;
        return g.scalar_value(build(ps, g));
    };
    Graph g;
    auto loss = build(params, g);
    check_gradients(params, loss_fn, g.backward(loss));
}

TEST_CASE("lstm_step: zero parameters and zero cell give zero outputs") {
    nn::LstmSpec spec{3, 4};
    nn::ParameterStore params;
    for (const char* gate : {"i", "f", "g", "o"}) {
        params[std::string("cell.wx") + gate] = Tensor(3, 4);
        params[std::string("cell.wh") + gate] = Tensor(4, 4);
        params[std::string("cell.b") + gate] = Tensor(1, 4);
    }
    Graph g;
    auto x = g.constant(Tensor(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6}));
    auto state = nn::lstm_initial_state(g, 2, 4);
    auto next = nn::lstm_step(g, params, "cell", spec, x, state);
    for (std::size_t i = 0; i < g.value(next.h).size(); ++i) {
        CHECK(g.value(next.h)[i] == 0.0);
        CHECK(g.value(next.c)[i] == 0.0);
    }
}

TEST_CASE("lstm_step: output shapes follow the hidden state") {
    Rng rng(44);
    nn::LstmSpec spec{5, 7};
    nn::ParameterStore params = nn::init_lstm("cell", spec, rng);
    Graph g;
    auto x = g.constant(nn::glorot_uniform(3, 5, rng));
    auto state = nn::lstm_initial_state(g, 3, 7);
    auto next = nn::lstm_step(g, params, "cell", spec, x, state);
    CHECK(g.value(next.h).rows() == 3);
    CHECK(g.value(next.h).cols() == 7);
    CHECK(g.value(next.c).rows() == 3);
    CHECK(g.value(next.c).cols() == 7);
}

TEST_CASE("lstm_step rejects mismatched widths") {
    Rng rng(45);
    nn::LstmSpec spec{5, 7};
    nn::ParameterStore params = nn::init_lstm("cell", spec, rng);
    Graph g;
    auto x = g.constant(Tensor(3, 4));  // wrong input width
    auto state = nn::lstm_initial_state(g, 3, 7);
    CHECK_THROWS_AS((void)nn::lstm_step(g, params, "cell", spec, x, state), ShapeError);
}

TEST_CASE("lstm_step gradients match finite differences") {
    Rng rng(46);
    nn::LstmSpec spec{3, 4};
    Rng init = rng.split("init");
    nn::ParameterStore params = nn::init_lstm("cell", spec, init);
    Tensor x(2, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Tensor h0(2, 4), c0(2, 4);
    for (std::size_t i = 0; i < h0.size(); ++i) h0[i] = rng.uniform(-0.5, 0.5);
    for (std::size_t i = 0; i < c0.size(); ++i) c0[i] = rng.uniform(-0.5, 0.5);

    auto loss_fn = [&](const nn::ParameterStore& ps) {
        Graph g;
        nn::LstmState state{g.constant(h0), g.constant(c0)};
        // Two chained steps exercise gradient flow through h and c.
        auto s1 = nn::lstm_step(g, ps, "cell", spec, g.constant(x), state);
        auto s2 = nn::lstm_step(g, ps, "cell", spec, g.constant(x), s1);
        return g.scalar_value(g.sum_all(s2.h));
    };

    Graph g;
    nn::LstmState state{g.constant(h0), g.constant(c0)};
    auto s1 = nn::lstm_step(g, params, "cell", spec, g.constant(x), state);
    auto s2 = nn::lstm_step(g, params, "cell", spec, g.constant(x), s1);
    auto loss = g.sum_all(s2.h);
    check_gradients(params, loss_fn, g.backward(loss));
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    nn::ParameterStore params;
    params["w"] = Tensor::row({1.0, -2.0, 3.0});
    nn::GradientMap grads;
    grads["w"] = Tensor(1, 3);
    nn::Adam opt;
    Tensor before = params.at("w");
    for (int i = 0; i < 5; ++i) opt.step(params, grads);
    CHECK(params.at("w") == before);
    CHECK(opt.step_count() == 5);
}

TEST_CASE("adam: first-step magnitude is lr*|g|/(|g|+eps)") {
    nn::AdamConfig cfg;
    cfg.lr = 0.05;
    for (double g0 : {0.3, -2.0, 1e-6}) {
        nn::ParameterStore params;
        params["w"] = Tensor::scalar(1.0);
        nn::GradientMap grads;
        grads["w"] = Tensor::scalar(g0);
        nn::Adam opt(cfg);
        opt.step(params, grads);
        double expected = cfg.lr * std::abs(g0) / (std::abs(g0) + cfg.eps);
        CHECK(std::abs(1.0 - params.at("w")[0]) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("adam: identical runs produce bit-identical parameters") {
    Rng rng(47);
    auto run = [&]() {
        Rng local(99);
        nn::ParameterStore params;
        params["w"] = nn::glorot_uniform(4, 4, local);
        nn::Adam opt({0.01});
        for (int i = 0; i < 20; ++i) {
            nn::GradientMap grads;
            Tensor g(4, 4);
            Rng step = local.split(i);
            for (std::size_t j = 0; j < g.size(); ++j) g[j] = step.normal();
            grads["w"] = g;
            opt.step(params, grads);
        }
        return params.at("w");
    };
    CHECK(run() == run());
}

TEST_CASE("adam rejects non-finite gradients") {
    nn::ParameterStore params;
    params["w"] = Tensor::scalar(1.0);
    nn::GradientMap grads;
    grads["w"] = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
    nn::Adam opt;
    CHECK_THROWS_AS(opt.step(params, grads), NumericsError);
}

TEST_CASE("clip_by_global_norm") {
    SUBCASE("under the bound is identity") {
        nn::GradientMap g;
        g["w"] = Tensor::row({0.3, 0.4});  // norm 0.5
        auto clipped = nn::clip_by_global_norm(g, 1.0);
        CHECK(clipped.at("w") == g.at("w"));
    }
    SUBCASE("(3,4) with C=2.5 scales to (1.5,2)") {
        nn::GradientMap g;
        g["w"] = Tensor::row({3.0, 4.0});
        auto clipped = nn::clip_by_global_norm(g, 2.5);
        CHECK(clipped.at("w")[0] == doctest::Approx(1.5));
        CHECK(clipped.at("w")[1] == doctest::Approx(2.0));
    }
    SUBCASE("output norm never exceeds C and direction is preserved") {
        Rng rng(48);
        for (int trial = 0; trial < 100; ++trial) {
            nn::GradientMap g;
            g["a"] = nn::glorot_uniform(3, 3, rng);
            g["b"] = nn::glorot_uniform(2, 5, rng);
            double c = rng.uniform(0.01, 2.0);
            auto clipped = nn::clip_by_global_norm(g, c);
            CHECK(nn::global_norm(clipped) <= c + 1e-9);
            // cosine similarity between original and clipped
            double dot = 0.0, n1 = 0.0, n2 = 0.0;
            for (const auto& [name, t] : g) {
                const Tensor& u = clipped.at(name);
                for (std::size_t i = 0; i < t.size(); ++i) {
                    dot += t[i] * u[i];
                    n1 += t[i] * t[i];
                    n2 += u[i] * u[i];
                }
            }
            CHECK(dot / std::sqrt(n1 * n2) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("non-positive bound is a config error") {
        nn::GradientMap g;
        g["w"] = Tensor::scalar(1.0);
        CHECK_THROWS_AS((void)nn::clip_by_global_norm(g, 0.0), ConfigError);
        CHECK_THROWS_AS((void)nn::clip_by_global_norm(g, -1.0), ConfigError);
    }
}

TEST_CASE("clip_weights_elementwise") {
    SUBCASE("values inside the bound are untouched") {
        nn::ParameterStore p;
        p["w"] = Tensor::row({0.005, -0.003});
        nn::ParameterStore before = p;
        nn::clip_weights_elementwise(p, 0.01);
        CHECK(p.at("w") == before.at("w"));
    }
    SUBCASE("0.7 clamps to 0.01") {
        nn::ParameterStore p;
        p["w"] = Tensor::scalar(0.7);
        nn::clip_weights_elementwise(p, 0.01);
        CHECK(p.at("w")[0] == 0.01);
    }
    SUBCASE("idempotent") {
        Rng rng(49);
        nn::ParameterStore p;
        p["w"] = nn::glorot_uniform(4, 4, rng);
        nn::clip_weights_elementwise(p, 0.2);
        nn::ParameterStore once = p;
        nn::clip_weights_elementwise(p, 0.2);
        CHECK(p.at("w") == once.at("w"));
    }
    SUBCASE("non-positive bound is a config error") {
        nn::ParameterStore p;
        p["w"] = Tensor::scalar(1.0);
        CHECK_THROWS_AS(nn::clip_weights_elementwise(p, 0.0), ConfigError);
    }
}

TEST_CASE("rng: deterministic, splittable, bounded") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng parent(5);
    Rng c1 = parent.split("one");
    Rng c2 = parent.split("two");
    CHECK(c1.next_u64() != c2.next_u64());

    Rng u(9);
    double mean = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        mean += v;
    }
    CHECK(mean / 10000 == doctest::Approx(0.5).epsilon(0.05));

    Rng nrm(10);
    double m = 0.0, s = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double v = nrm.normal();
        m += v;
        s += v * v;
    }
    m /= n;
    CHECK(m == doctest::Approx(0.0).epsilon(0.05));
    CHECK(std::sqrt(s / n - m * m) == doctest::Approx(1.0).epsilon(0.05));
}
