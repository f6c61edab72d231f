#include "synthguard/layers.hpp"

#include <cmath>

namespace synthguard::nn {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(fan_in, fan_out);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    return w;
}

std::vector<std::size_t> MlpSpec::layer_dims() const {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    return dims;
}

ParameterStore init_mlp(const std::string& prefix, const MlpSpec& spec, Rng& rng) {
    ParameterStore ps;
    auto dims = spec.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        ps[prefix + ".w" + std::to_string(l)] = glorot_uniform(dims[l], dims[l + 1], rng);
        ps[prefix + ".b" + std::to_string(l)] = Tensor(1, dims[l + 1]);
    }
    return ps;
}

namespace {

Graph::NodeId apply_activation(Graph& g, Activation act, Graph::NodeId x) {
    switch (act) {
        case Activation::kLinear: return x;
        case Activation::kTanh: return g.tanh(x);
        case Activation::kSigmoid: return g.sigmoid(x);
        case Activation::kRelu: return g.relu(x);
    }
    return x;
}

}  // namespace

Graph::NodeId mlp_apply(Graph& g, const ParameterStore& params, const std::string& prefix,
                        const MlpSpec& spec, Graph::NodeId x) {
    auto dims = spec.layer_dims();
    Graph::NodeId h = x;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        auto w = g.parameter(prefix + ".w" + std::to_string(l),
                             params.at(prefix + ".w" + std::to_string(l)));
        auto b = g.parameter(prefix + ".b" + std::to_string(l),
                             params.at(prefix + ".b" + std::to_string(l)));
        h = g.add_rowvec(g.matmul(h, w), b);
        bool last = l + 2 == dims.size();
        h = apply_activation(g, last ? spec.out_act : spec.hidden_act, h);
    }
    return h;
}

Graph::NodeId mlp_input_gradient(Graph& g, const ParameterStore& params, const std::string& prefix,
                                 const MlpSpec& spec, Graph::NodeId x) {
    if (spec.out != 1) throw ShapeError("input gradient requires a scalar-output network");
    if (spec.hidden_act != Activation::kTanh || spec.out_act != Activation::kLinear)
        throw ConfigError("input gradient is implemented for tanh-hidden linear-output networks");

    auto dims = spec.layer_dims();
    std::size_t batch = g.value(x).rows();

    // Forward pass, keeping each hidden activation.
    std::vector<Graph::NodeId> acts;
    Graph::NodeId h = x;
    std::vector<Graph::NodeId> weights;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        auto w = g.parameter(prefix + ".w" + std::to_string(l),
                             params.at(prefix + ".w" + std::to_string(l)));
        auto b = g.parameter(prefix + ".b" + std::to_string(l),
                             params.at(prefix + ".b" + std::to_string(l)));
        weights.push_back(w);
        h = g.add_rowvec(g.matmul(h, w), b);
        if (l + 2 < dims.size()) {
            h = g.tanh(h);
            acts.push_back(h);
        }
    }

    // Reverse sweep expressed with forward ops: d = (1 - a^2) .* (d_next W^T).
    Graph::NodeId ones = g.constant(Tensor(batch, 1, std::vector<double>(batch, 1.0)));
    Graph::NodeId d = ones;  // gradient w.r.t. the linear output
    for (std::size_t l = dims.size() - 2; l-- > 0;) {
        Graph::NodeId dpre = g.matmul(d, g.transpose(weights[l + 1]));
        Graph::NodeId a = acts[l];
        Graph::NodeId one_minus_sq =
            g.add_scalar(g.scale(g.square(a), -1.0), 1.0);
        d = g.mul(dpre, one_minus_sq);
    }
    return g.matmul(d, g.transpose(weights[0]));
}

ParameterStore init_lstm(const std::string& prefix, const LstmSpec& spec, Rng& rng) {
    ParameterStore ps;
    for (const char* gate : {"i", "f", "g", "o"}) {
        ps[prefix + ".wx" + gate] = glorot_uniform(spec.in, spec.hidden, rng);
        ps[prefix + ".wh" + gate] = glorot_uniform(spec.hidden, spec.hidden, rng);
        ps[prefix + ".b" + gate] = Tensor(1, spec.hidden);
    }
    return ps;
}

LstmState lstm_initial_state(Graph& g, std::size_t batch, std::size_t hidden) {
    return {g.constant(Tensor(batch, hidden)), g.constant(Tensor(batch, hidden))};
}

LstmState lstm_step(Graph& g, const ParameterStore& params, const std::string& prefix,
                    const LstmSpec& spec, Graph::NodeId x, LstmState prev) {
    if (g.value(x).cols() != spec.in || g.value(prev.h).cols() != spec.hidden ||
        g.value(prev.c).cols() != spec.hidden)
        throw ShapeError("lstm_step operand widths do not match the cell spec");
    if (g.value(x).rows() != g.value(prev.h).rows() ||
        g.value(prev.h).rows() != g.value(prev.c).rows())
        throw ShapeError("lstm_step batch sizes differ");

    auto gate_pre = [&](const char* gate) {
        auto wx = g.parameter(prefix + ".wx" + gate, params.at(prefix + ".wx" + gate));
        auto wh = g.parameter(prefix + ".wh" + gate, params.at(prefix + ".wh" + gate));
        auto b = g.parameter(prefix + ".b" + gate, params.at(prefix + ".b" + gate));
        return g.add_rowvec(g.add(g.matmul(x, wx), g.matmul(prev.h, wh)), b);
    };

    auto gi = g.sigmoid(gate_pre("i"));
    auto gf = g.sigmoid(gate_pre("f"));
    auto gg = g.tanh(gate_pre("g"));
    auto go = g.sigmoid(gate_pre("o"));

    auto c = g.add(g.mul(gf, prev.c), g.mul(gi, gg));
    auto h = g.mul(go, g.tanh(c));
    return {h, c};
}

Graph::NodeId mse_loss(Graph& g, Graph::NodeId a, Graph::NodeId b) {
    return g.mean_all(g.square(g.sub(a, b)));
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::kLinear;
    if (s == "tanh") return Activation::kTanh;
    if (s == "sigmoid") return Activation::kSigmoid;
    if (s == "relu") return Activation::kRelu;
    throw ConfigError("unknown activation: " + s);
}

}  // namespace synthguard::nn
