#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atpinn/errors.hpp"
#include "atpinn/tensor.hpp"

// Tape-based reverse-mode differentiation over dense tensors.
//
// Nodes are appended in evaluation order, so a node's operands always have
// smaller indices and a reverse sweep over the tape is a valid topological
// order. A tape is owned by one thread; independent tapes may run
// concurrently.

namespace atpinn::ad {

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Tanh,
    Sin,
    Cos,
    Exp,
    PowInt,
    Abs,
    Square,
    Sum,
    Mean,
    Broadcast,
    // Extensions used by the network and residual builders.
    Neg,
    Scale,
    Shift,
    AddRow,
    Column,
};

const char* op_name(Op op);

struct Node {
    Op op = Op::Leaf;
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    bool requires_grad = false;
    // Op attributes: Scale/Shift constant, PowInt exponent, Column index,
    // MatMul transpose flag.
    double scalar = 0.0;
    std::int64_t iparam = 0;
    Tensor value;
    Tensor adjoint;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    const Tensor& value() const;
    const Tensor& grad() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Var leaf(const Tensor& value, bool requires_grad = false);
    Var leaf(Tensor&& value, bool requires_grad = false);
    Var constant(double v) { return leaf(Tensor::scalar(v), false); }

    // Records `op` applied to `operands`; the forward value is computed
    // immediately.
    Var apply(Op op, std::span<const Var> operands, double scalar = 0.0, std::int64_t iparam = 0,
              const Shape& target = {});

    // Accumulates d(root)/d(node) into every node that requires a gradient.
    // Requires a single-element root. Interior adjoints are reset on entry;
    // leaf adjoints accumulate across calls until zero_grad().
    void backward(Var root);
    void zero_grad();

    // Forgets all nodes but keeps their buffers for the next recording.
    void clear() { size_ = 0; }
    std::size_t size() const { return size_; }

    const Node& node(Var v) const;
    const Tensor& value(Var v) const { return node(v).value; }
    const Tensor& grad(Var v) const { return node(v).adjoint; }

    // When enabled (default), any op producing NaN/Inf throws NumericalError.
    void set_check_finite(bool on) { check_finite_ = on; }

private:
    Node& push(Op op, bool requires_grad);
    void forward(std::size_t idx, const Shape& target);
    void backprop(std::size_t idx);
    std::int32_t check_operand(Var v) const;

    std::vector<Node> nodes_;
    std::size_t size_ = 0;
    bool check_finite_ = true;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
// a·b, or a·bᵀ when transpose_rhs is set.
Var matmul(Var a, Var b, bool transpose_rhs = false);
Var tanh(Var a);
Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var pow(Var a, int exponent);
Var abs(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var broadcast(Var scalar, const Shape& shape);
Var neg(Var a);
Var scale(Var a, double c);
Var shift(Var a, double c);
// Adds a length-w row vector to every row of an n×w matrix.
Var add_row(Var m, Var row);
// Column j of an n×d matrix as an n×1 matrix.
Var column(Var m, std::size_t j);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator+(Var a, double c) { return shift(a, c); }
inline Var operator+(double c, Var a) { return shift(a, c); }
inline Var operator-(Var a, double c) { return shift(a, -c); }
inline Var operator-(double c, Var a) { return shift(neg(a), c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace atpinn::ad
