#include "synthguard/graph.hpp"

#include <cmath>

#include "synthguard/kernels.hpp"

namespace synthguard::nn {

namespace ker = synthguard::kernels;

Graph::NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::constant(Tensor value) {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(value);
    return push(std::move(n));
}

Graph::NodeId Graph::parameter(const std::string& name, const Tensor& value) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) {
        if (!node(it->second).value.same_shape(value))
            throw ShapeError("parameter re-bound with different shape: " + name);
        return it->second;
    }
    Node n;
    n.op = Op::kParameter;
    n.value = value;
    n.name = name;
    NodeId id = push(std::move(n));
    param_nodes_[name] = id;
    return id;
}

Graph::NodeId Graph::binary_same_shape(Op op, NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw ShapeError("elementwise operands differ in shape");
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.rows(), va.cols());
    switch (op) {
        case Op::kAdd: ker::add(va.data(), vb.data(), n.value.data(), va.size()); break;
        case Op::kSub: ker::sub(va.data(), vb.data(), n.value.data(), va.size()); break;
        case Op::kMul: ker::mul(va.data(), vb.data(), n.value.data(), va.size()); break;
        default: throw ShapeError("not a binary op");
    }
    return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) { return binary_same_shape(Op::kAdd, a, b); }
Graph::NodeId Graph::sub(NodeId a, NodeId b) { return binary_same_shape(Op::kSub, a, b); }
Graph::NodeId Graph::mul(NodeId a, NodeId b) { return binary_same_shape(Op::kMul, a, b); }

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.cols() != vb.rows()) throw ShapeError("matmul inner dimensions differ");
    Node n;
    n.op = Op::kMatmul;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.rows(), vb.cols());
    ker::matmul(va.data(), vb.data(), n.value.data(), va.rows(), va.cols(), vb.cols());
    return push(std::move(n));
}

Graph::NodeId Graph::add_rowvec(NodeId a, NodeId bias) {
    const Tensor& va = value(a);
    const Tensor& vb = value(bias);
    if (vb.rows() != 1 || vb.cols() != va.cols())
        throw ShapeError("row vector does not match matrix columns");
    Node n;
    n.op = Op::kAddRowvec;
    n.a = a;
    n.b = bias;
    n.value = Tensor(va.rows(), va.cols());
    for (std::size_t i = 0; i < va.rows(); ++i)
        ker::add(va.data() + i * va.cols(), vb.data(), n.value.data() + i * va.cols(), va.cols());
    return push(std::move(n));
}

Graph::NodeId Graph::unary(Op op, NodeId a, void (*fn)(const double*, double*, std::size_t)) {
    const Tensor& va = value(a);
    Node n;
    n.op = op;
    n.a = a;
    n.value = Tensor(va.rows(), va.cols());
    fn(va.data(), n.value.data(), va.size());
    return push(std::move(n));
}

Graph::NodeId Graph::tanh(NodeId a) { return unary(Op::kTanh, a, ker::tanh_v); }
Graph::NodeId Graph::sigmoid(NodeId a) { return unary(Op::kSigmoid, a, ker::sigmoid_v); }
Graph::NodeId Graph::relu(NodeId a) { return unary(Op::kRelu, a, ker::relu_v); }
Graph::NodeId Graph::softplus(NodeId a) { return unary(Op::kSoftplus, a, ker::softplus_v); }
Graph::NodeId Graph::square(NodeId a) { return unary(Op::kSquare, a, ker::square_v); }
Graph::NodeId Graph::sqrt(NodeId a) { return unary(Op::kSqrt, a, ker::sqrt_v); }

Graph::NodeId Graph::scale(NodeId a, double c) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.c = c;
    n.value = Tensor(va.rows(), va.cols());
    ker::scale(va.data(), c, n.value.data(), va.size());
    return push(std::move(n));
}

Graph::NodeId Graph::add_scalar(NodeId a, double c) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kAddScalar;
    n.a = a;
    n.c = c;
    n.value = Tensor(va.rows(), va.cols());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + c;
    return push(std::move(n));
}

Graph::NodeId Graph::sum_all(NodeId a) {
    Node n;
    n.op = Op::kSumAll;
    n.a = a;
    n.value = Tensor::scalar(ker::sum(value(a).data(), value(a).size()));
    return push(std::move(n));
}

Graph::NodeId Graph::mean_all(NodeId a) {
    const Tensor& va = value(a);
    if (va.size() == 0) throw ShapeError("mean of empty tensor");
    Node n;
    n.op = Op::kMeanAll;
    n.a = a;
    n.value = Tensor::scalar(ker::sum(va.data(), va.size()) / static_cast<double>(va.size()));
    return push(std::move(n));
}

Graph::NodeId Graph::rowsum(NodeId a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kRowsum;
    n.a = a;
    n.value = Tensor(va.rows(), 1);
    ker::rowsum(va.data(), n.value.data(), va.rows(), va.cols());
    return push(std::move(n));
}

Graph::NodeId Graph::concat_cols(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rows() != vb.rows()) throw ShapeError("concat_cols row counts differ");
    Node n;
    n.op = Op::kConcatCols;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.rows(), va.cols() + vb.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        double* out = n.value.data() + i * n.value.cols();
        const double* pa = va.data() + i * va.cols();
        const double* pb = vb.data() + i * vb.cols();
        std::copy(pa, pa + va.cols(), out);
        std::copy(pb, pb + vb.cols(), out + va.cols());
    }
    return push(std::move(n));
}

Graph::NodeId Graph::slice_cols(NodeId a, std::size_t lo, std::size_t hi) {
    const Tensor& va = value(a);
    if (lo >= hi || hi > va.cols()) throw ShapeError("slice_cols range out of bounds");
    Node n;
    n.op = Op::kSliceCols;
    n.a = a;
    n.lo = lo;
    n.hi = hi;
    n.value = Tensor(va.rows(), hi - lo);
    for (std::size_t i = 0; i < va.rows(); ++i) {
        const double* src = va.data() + i * va.cols() + lo;
        std::copy(src, src + (hi - lo), n.value.data() + i * (hi - lo));
    }
    return push(std::move(n));
}

Graph::NodeId Graph::transpose(NodeId a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::kTranspose;
    n.a = a;
    n.value = Tensor(va.cols(), va.rows());
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j) n.value.at(j, i) = va.at(i, j);
    return push(std::move(n));
}

double Graph::scalar_value(NodeId id) const {
    if (value(id).size() != 1) throw ShapeError("node is not a scalar");
    return value(id)[0];
}

GradientMap Graph::backward(NodeId loss) const {
    const Node& top = node(loss);
    if (top.value.size() != 1) throw ShapeError("backward requires a scalar loss node");

    std::vector<Tensor> grads(nodes_.size());
    auto grad_of = [&](NodeId id) -> Tensor& {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.empty()) {
            const Tensor& v = nodes_[static_cast<std::size_t>(id)].value;
            g = Tensor(v.rows(), v.cols());
        }
        return g;
    };

    grad_of(loss)[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = node(id);
        const Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.empty()) continue;

        switch (n.op) {
            case Op::kConstant:
            case Op::kParameter:
                break;
            case Op::kAdd: {
                ker::axpy(1.0, g.data(), grad_of(n.a).data(), g.size());
                ker::axpy(1.0, g.data(), grad_of(n.b).data(), g.size());
                break;
            }
            case Op::kSub: {
                ker::axpy(1.0, g.data(), grad_of(n.a).data(), g.size());
                ker::axpy(-1.0, g.data(), grad_of(n.b).data(), g.size());
                break;
            }
            case Op::kMul: {
                const Tensor& va = value(n.a);
                const Tensor& vb = value(n.b);
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * vb[i];
                    gb[i] += g[i] * va[i];
                }
                break;
            }
            case Op::kMatmul: {
                const Tensor& va = value(n.a);
                const Tensor& vb = value(n.b);
                // dA += dC . B^T ; dB += A^T . dC
                ker::matmul_nt_add(g.data(), vb.data(), grad_of(n.a).data(), va.rows(), vb.cols(),
                                   va.cols());
                ker::matmul_tn_add(va.data(), g.data(), grad_of(n.b).data(), va.rows(), va.cols(),
                                   vb.cols());
                break;
            }
            case Op::kAddRowvec: {
                ker::axpy(1.0, g.data(), grad_of(n.a).data(), g.size());
                Tensor col(1, g.cols());
                ker::colsum(g.data(), col.data(), g.rows(), g.cols());
                ker::axpy(1.0, col.data(), grad_of(n.b).data(), col.size());
                break;
            }
            case Op::kTanh: {
                const Tensor& y = n.value;
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                break;
            }
            case Op::kSigmoid: {
                const Tensor& y = n.value;
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
                break;
            }
            case Op::kRelu: {
                const Tensor& x = value(n.a);
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (x[i] > 0.0) ga[i] += g[i];
                break;
            }
            case Op::kSoftplus: {
                const Tensor& x = value(n.a);
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * ker::stable_sigmoid(x[i]);
                break;
            }
            case Op::kSquare: {
                const Tensor& x = value(n.a);
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * x[i];
                break;
            }
            case Op::kSqrt: {
                const Tensor& y = n.value;
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / y[i];
                break;
            }
            case Op::kScale: {
                ker::axpy(n.c, g.data(), grad_of(n.a).data(), g.size());
                break;
            }
            case Op::kAddScalar: {
                ker::axpy(1.0, g.data(), grad_of(n.a).data(), g.size());
                break;
            }
            case Op::kSumAll: {
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                break;
            }
            case Op::kMeanAll: {
                Tensor& ga = grad_of(n.a);
                double s = g[0] / static_cast<double>(ga.size());
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s;
                break;
            }
            case Op::kRowsum: {
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.rows(); ++i)
                    for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, 0);
                break;
            }
            case Op::kConcatCols: {
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    const double* row = g.data() + i * g.cols();
                    ker::axpy(1.0, row, ga.data() + i * ga.cols(), ga.cols());
                    ker::axpy(1.0, row + ga.cols(), gb.data() + i * gb.cols(), gb.cols());
                }
                break;
            }
            case Op::kSliceCols: {
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    ker::axpy(1.0, g.data() + i * g.cols(), ga.data() + i * ga.cols() + n.lo,
                              g.cols());
                break;
            }
            case Op::kTranspose: {
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
                break;
            }
        }
    }

    GradientMap out;
    for (const auto& [name, id] : param_nodes_) {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.empty()) {
            const Tensor& v = node(id).value;
            g = Tensor(v.rows(), v.cols());
        }
        out[name] = std::move(g);
    }
    return out;
}

}  // namespace synthguard::nn
