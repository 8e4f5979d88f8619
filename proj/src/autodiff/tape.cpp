#include "wsgat/autodiff/tape.hpp"

#include <cmath>
#include <limits>

#include "wsgat/errors.hpp"

namespace wsgat::autodiff {

namespace {

struct GradientFault {
    std::string op;
    double factor = 1.0;
};

GradientFault& fault() {
    static GradientFault f;
    return f;
}

}  // namespace

namespace testing {

void set_gradient_fault(std::string op, double factor) {
    fault().op = std::move(op);
    fault().factor = factor;
}

void clear_gradient_fault() { fault() = {}; }

}  // namespace testing

const Matrix& Var::value() const { return tape_->nodes_[id_].value; }

Matrix Var::grad() const {
    const auto& node = tape_->nodes_[id_];
    if (node.has_grad) return node.grad;
    return Matrix(node.value.rows(), node.value.cols());
}

bool Var::requires_grad() const { return tape_->nodes_[id_].requires_grad; }

Var Tape::constant(Matrix value) {
    if (!value.all_finite()) throw NumericFault("constant: non-finite value");
    nodes_.push_back(Node{"constant", std::move(value), {}, false, false, {}, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) {
    if (!value.all_finite()) throw NumericFault("leaf: non-finite value");
    nodes_.push_back(Node{"leaf", std::move(value), {}, true, false, {}, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    if (!p.value.all_finite()) throw NumericFault("parameter '" + p.name + "' is non-finite");
    nodes_.push_back(Node{"param:" + p.name, p.value, {}, true, false, {}, &p});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Matrix value, std::span<const Var> inputs,
                 BackwardFn backward) {
    if (!value.all_finite())
        throw NumericFault("op '" + std::string(op) + "' produced a non-finite value");
    bool needs_grad = false;
    for (const Var& v : inputs) {
        if (v.tape_ != this) throw TapeError("op '" + std::string(op) + "': input from another tape");
        needs_grad = needs_grad || nodes_[v.id_].requires_grad;
    }
    nodes_.push_back(Node{std::string(op), std::move(value), {}, needs_grad, false,
                          needs_grad ? std::move(backward) : BackwardFn{}, nullptr});
    return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_buffer(const Var& target) {
    Node& node = nodes_[target.id_];
    if (!node.has_grad) {
        node.grad = Matrix(node.value.rows(), node.value.cols());
        node.has_grad = true;
    }
    return node.grad;
}

void Tape::accumulate(const Var& target, const Matrix& grad) {
    Node& node = nodes_[target.id_];
    if (!node.requires_grad) return;
    if (!grad.same_shape(node.value))
        throw ShapeError("gradient shape " + grad.shape_string() + " does not match value " +
                         node.value.shape_string() + " of op '" + node.op + "'");
    if (!node.has_grad) {
        node.grad = grad;
        node.has_grad = true;
        return;
    }
    for (std::size_t i = 0; i < node.grad.size(); ++i) node.grad[i] += grad[i];
}

void Tape::backward(const Var& output) {
    if (output.tape_ != this) throw TapeError("backward: output belongs to another tape");
    if (backward_done_) throw TapeError("backward called twice without reset_grads()");
    const Node& out = nodes_[output.id_];
    if (out.value.rows() != 1 || out.value.cols() != 1)
        throw TapeError("backward requires a scalar output, got " + out.value.shape_string());
    backward_done_ = true;
    grad_buffer(output)[0] = 1.0;

    const GradientFault& f = fault();
    for (std::size_t id = output.id_ + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.has_grad || !node.backward) continue;
        if (!node.grad.all_finite())
            throw NumericFault("non-finite gradient reaching op '" + node.op + "'");
        if (!f.op.empty() && f.op == node.op) {
            Matrix scaled = node.grad;
            for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= f.factor;
            node.backward(*this, scaled);
        } else {
            node.backward(*this, node.grad);
        }
    }
    for (Node& node : nodes_) {
        if (node.parameter == nullptr || !node.has_grad) continue;
        if (!node.grad.all_finite())
            throw NumericFault("non-finite gradient for parameter '" + node.parameter->name + "'");
        Matrix& pg = node.parameter->grad;
        if (!pg.same_shape(node.grad)) pg = Matrix(node.grad.rows(), node.grad.cols());
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += node.grad[i];
    }
}

void Tape::reset_grads() {
    for (Node& node : nodes_) {
        node.grad = Matrix();
        node.has_grad = false;
    }
    backward_done_ = false;
}

void Tape::note_kinks(std::span<const double> xs) {
    for (double x : xs) kink_margin_ = std::min(kink_margin_, std::abs(x));
}

}  // namespace wsgat::autodiff
