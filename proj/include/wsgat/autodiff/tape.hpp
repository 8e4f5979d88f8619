#ifndef WSGAT_AUTODIFF_TAPE_HPP
#define WSGAT_AUTODIFF_TAPE_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wsgat/autodiff/matrix.hpp"

namespace wsgat::autodiff {

class Tape;

/// A trainable array that outlives individual tapes.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;  // accumulated by Tape::backward, cleared by the caller

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape is alive.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    /// Gradient of the last backward output with respect to this value.
    /// Zero-filled when nothing flowed into it.
    Matrix grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records operations in execution (= topological) order and replays them
/// in reverse for backward. One tape per forward pass.
class Tape {
public:
    /// Receives the gradient of the node's output and accumulates into the
    /// inputs through Tape::accumulate.
    using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Differentiable leaf that is not a Parameter; read its gradient with
    /// Var::grad().
    Var leaf(Matrix value);
    /// Leaf bound to a Parameter. Repeated calls with the same Parameter
    /// return the same node, so its gradient is accumulated once.
    Var param(Parameter& p);

    /// Records an op. `backward` may be empty when no input needs a gradient.
    Var record(std::string_view op, Matrix value, std::span<const Var> inputs, BackwardFn backward);

    /// Reverse pass from a 1x1 output. Adds into every bound Parameter::grad.
    /// A second call requires reset_grads() first.
    void backward(const Var& output);

    /// Clears node gradients so backward may run again.
    void reset_grads();

    void accumulate(const Var& target, const Matrix& grad);
    /// Direct access to a node gradient buffer (allocated on demand).
    Matrix& grad_buffer(const Var& target);

    const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::string_view op_name(std::size_t id) const { return nodes_[id].op; }

    /// Smallest |x| over inputs of non-differentiable points (leaky_relu,
    /// abs, sign, and signed softmax logits) seen so far.
    double kink_margin() const noexcept { return kink_margin_; }
    void note_kinks(std::span<const double> xs);

private:
    friend class Var;

    struct Node {
        std::string op;
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        bool has_grad = false;
        BackwardFn backward;
        Parameter* parameter = nullptr;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, std::size_t> param_nodes_;
    bool backward_done_ = false;
    double kink_margin_ = std::numeric_limits<double>::infinity();
};

namespace testing {

/// Fault injection for verification suites: scales the gradient flowing
/// out of every node whose op name equals `op` by `factor`. Empty name
/// disables. Process-global; not for concurrent use.
void set_gradient_fault(std::string op, double factor = 1.5);
void clear_gradient_fault();

}  // namespace testing

}  // namespace wsgat::autodiff

#endif  // WSGAT_AUTODIFF_TAPE_HPP
