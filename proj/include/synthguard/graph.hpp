#ifndef SYNTHGUARD_GRAPH_HPP
#define SYNTHGUARD_GRAPH_HPP

#include <map>
#include <string>
#include <vector>

#include "synthguard/tensor.hpp"

namespace synthguard::nn {

using GradientMap = std::map<std::string, Tensor>;
using ParameterStore = std::map<std::string, Tensor>;

// Define-by-run reverse-mode tape. Values are computed eagerly when a node is
// created; node creation order is therefore a topological order and backward
// is a single reverse sweep. Graphs are single-owner objects: build, read,
// backward, discard. One graph per training step.
class Graph {
  public:
    using NodeId = int;

    NodeId constant(Tensor value);
    // Trainable leaf. Re-binding an existing name returns the same node, so
    // an unrolled recurrence shares one parameter node and its gradient
    // accumulates across time steps.
    NodeId parameter(const std::string& name, const Tensor& value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    // a is m x k, b is k x n.
    NodeId matmul(NodeId a, NodeId b);
    // a is m x n, bias is 1 x n, broadcast over rows.
    NodeId add_rowvec(NodeId a, NodeId bias);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId relu(NodeId a);
    NodeId softplus(NodeId a);
    NodeId square(NodeId a);
    // Domain must stay positive; callers add an epsilon before taking roots.
    NodeId sqrt(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId add_scalar(NodeId a, double c);
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    // m x n -> m x 1.
    NodeId rowsum(NodeId a);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId slice_cols(NodeId a, std::size_t lo, std::size_t hi);
    NodeId transpose(NodeId a);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    double scalar_value(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    // Gradient of a scalar loss node w.r.t. every trainable parameter in the
    // graph (zero tensors for parameters the loss does not reach). Leaves
    // forward values untouched; repeat calls give identical results.
    GradientMap backward(NodeId loss) const;

  private:
    enum class Op {
        kConstant,
        kParameter,
        kAdd,
        kSub,
        kMul,
        kMatmul,
        kAddRowvec,
        kTanh,
        kSigmoid,
        kRelu,
        kSoftplus,
        kSquare,
        kSqrt,
        kScale,
        kAddScalar,
        kSumAll,
        kMeanAll,
        kRowsum,
        kConcatCols,
        kSliceCols,
        kTranspose,
    };

    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        double c = 0.0;
        std::size_t lo = 0;
        std::size_t hi = 0;
        Tensor value;
        std::string name;  // parameters only
    };

    NodeId push(Node n);
    NodeId unary(Op op, NodeId a, void (*fn)(const double*, double*, std::size_t));
    NodeId binary_same_shape(Op op, NodeId a, NodeId b);
    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> param_nodes_;
};

}  // namespace synthguard::nn

#endif
