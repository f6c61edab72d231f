#ifndef SYNTHGUARD_LAYERS_HPP
#define SYNTHGUARD_LAYERS_HPP

#include <string>
#include <vector>

#include "synthguard/graph.hpp"
#include "synthguard/rng.hpp"

namespace synthguard::nn {

enum class Activation { kLinear, kTanh, kSigmoid, kRelu };

// Uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct MlpSpec {
    std::size_t in = 0;
    std::vector<std::size_t> hidden;
    std::size_t out = 0;
    Activation hidden_act = Activation::kTanh;
    Activation out_act = Activation::kLinear;

    std::vector<std::size_t> layer_dims() const;
};

// Parameter names are "<prefix>.w<i>" / "<prefix>.b<i>".
ParameterStore init_mlp(const std::string& prefix, const MlpSpec& spec, Rng& rng);

// Applies the MLP to x (batch x in); parameter nodes are bound from `params`
// on first use and shared afterwards.
Graph::NodeId mlp_apply(Graph& g, const ParameterStore& params, const std::string& prefix,
                        const MlpSpec& spec, Graph::NodeId x);

// Input gradient d out / d x of a tanh-hidden, linear-output MLP, built from
// ordinary graph ops so it can itself be differentiated (the gradient-penalty
// path). Requires out == 1.
Graph::NodeId mlp_input_gradient(Graph& g, const ParameterStore& params, const std::string& prefix,
                                 const MlpSpec& spec, Graph::NodeId x);

struct LstmSpec {
    std::size_t in = 0;
    std::size_t hidden = 0;
};

// Gate parameter names: <prefix>.{wx,wh,b}{i,f,g,o}.
ParameterStore init_lstm(const std::string& prefix, const LstmSpec& spec, Rng& rng);

struct LstmState {
    Graph::NodeId h;
    Graph::NodeId c;
};

LstmState lstm_initial_state(Graph& g, std::size_t batch, std::size_t hidden);

// One cell step: sigmoid input/forget/output gates, tanh candidate.
// x is batch x in, state tensors are batch x hidden.
LstmState lstm_step(Graph& g, const ParameterStore& params, const std::string& prefix,
                    const LstmSpec& spec, Graph::NodeId x, LstmState prev);

// mean((a - b)^2)
Graph::NodeId mse_loss(Graph& g, Graph::NodeId a, Graph::NodeId b);

Activation activation_from_string(const std::string& s);

}  // namespace synthguard::nn

#endif
