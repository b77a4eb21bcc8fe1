#include "atpinn/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace atpinn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data(), Eigen::Index(t.rows()), Eigen::Index(t.cols())); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data(), Eigen::Index(t.rows()), Eigen::Index(t.cols())); }

// sign with sign(0) = 0.
double sign0(double v) { return double((v > 0.0) - (v < 0.0)); }

bool is_binary(Op op)
{
    switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::MatMul:
    case Op::AddRow:
        return true;
    default:
        return false;
    }
}

Shape elementwise_shape(Op op, const Tensor& a, const Tensor& b)
{
    if (a.shape() == b.shape()) return a.shape();
    if (b.is_scalar()) return a.shape();
    if (a.is_scalar()) return b.shape();
    throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// Accumulates g (shaped like the output) into the adjoint of an operand that
// was either full-shaped or broadcast from a scalar.
template <class F>
void accumulate(Tensor& adj, const Tensor& g, F&& f)
{
    const std::size_t n = g.numel();
    double* a = adj.data();
    if (adj.numel() == n) {
        for (std::size_t i = 0; i < n; ++i) a[i] += f(i);
    } else {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += f(i);
        a[0] += s;
    }
}

}  // namespace

const char* op_name(Op op)
{
    switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::MatMul: return "matmul";
    case Op::Tanh: return "tanh";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::PowInt: return "pow";
    case Op::Abs: return "abs";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Broadcast: return "broadcast";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::AddRow: return "add_row";
    case Op::Column: return "column";
    }
    return "unknown";
}

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

const Node& Tape::node(Var v) const
{
    if (v.tape != this || v.id < 0 || std::size_t(v.id) >= size_) {
        throw std::logic_error("autodiff: variable does not belong to this tape");
    }
    return nodes_[std::size_t(v.id)];
}

std::int32_t Tape::check_operand(Var v) const
{
    node(v);
    return v.id;
}

Node& Tape::push(Op op, bool requires_grad)
{
    if (size_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[size_++];
    n.op = op;
    n.lhs = n.rhs = -1;
    n.requires_grad = requires_grad;
    n.scalar = 0.0;
    n.iparam = 0;
    return n;
}

Var Tape::leaf(const Tensor& value, bool requires_grad)
{
    if (!value.all_finite()) throw NumericalError("autodiff: non-finite leaf value");
    Node& n = push(Op::Leaf, requires_grad);
    n.value.resize(value.shape());
    std::copy(value.values().begin(), value.values().end(), n.value.data());
    n.adjoint.reset(value.shape());
    return Var{this, std::int32_t(size_ - 1)};
}

Var Tape::leaf(Tensor&& value, bool requires_grad)
{
    if (!value.all_finite()) throw NumericalError("autodiff: non-finite leaf value");
    Node& n = push(Op::Leaf, requires_grad);
    n.value = std::move(value);
    n.adjoint.reset(n.value.shape());
    return Var{this, std::int32_t(size_ - 1)};
}

Var Tape::apply(Op op, std::span<const Var> operands, double scalar, std::int64_t iparam, const Shape& target)
{
    if (op == Op::Leaf) throw std::invalid_argument("autodiff: apply(leaf) is not an operation");
    const std::size_t arity = is_binary(op) ? 2 : 1;
    if (operands.size() != arity) {
        throw std::invalid_argument(std::string("autodiff: ") + op_name(op) + " expects " + std::to_string(arity) +
                                    " operands, got " + std::to_string(operands.size()));
    }
    const std::int32_t lhs = check_operand(operands[0]);
    const std::int32_t rhs = arity == 2 ? check_operand(operands[1]) : -1;
    const bool rg = nodes_[lhs].requires_grad || (rhs >= 0 && nodes_[rhs].requires_grad);

    Node& n = push(op, rg);
    n.lhs = lhs;
    n.rhs = rhs;
    n.scalar = scalar;
    n.iparam = iparam;
    const std::size_t idx = size_ - 1;
    try {
        forward(idx, target);
    } catch (...) {
        --size_;
        throw;
    }
    Node& out = nodes_[idx];
    if (check_finite_ && !out.value.all_finite()) {
        --size_;
        throw NumericalError(std::string("autodiff: ") + op_name(op) + " produced a non-finite value");
    }
    out.adjoint.reset(out.value.shape());
    return Var{this, std::int32_t(idx)};
}

void Tape::forward(std::size_t idx, const Shape& target)
{
    Node& n = nodes_[idx];
    const Tensor& a = nodes_[std::size_t(n.lhs)].value;
    Tensor& y = n.value;

    auto binary = [&](auto&& f) {
        const Tensor& b = nodes_[std::size_t(n.rhs)].value;
        y.resize(elementwise_shape(n.op, a, b));
        const std::size_t len = y.numel();
        const double* pa = a.data();
        const double* pb = b.data();
        double* py = y.data();
        const bool sa = a.numel() != len;
        const bool sb = b.numel() != len;
        for (std::size_t i = 0; i < len; ++i) py[i] = f(pa[sa ? 0 : i], pb[sb ? 0 : i]);
    };
    auto unary = [&](auto&& f) {
        y.resize(a.shape());
        const std::size_t len = a.numel();
        const double* pa = a.data();
        double* py = y.data();
        for (std::size_t i = 0; i < len; ++i) py[i] = f(pa[i]);
    };

    switch (n.op) {
    case Op::Leaf:
        break;
    case Op::Add: binary([](double u, double v) { return u + v; }); break;
    case Op::Sub: binary([](double u, double v) { return u - v; }); break;
    case Op::Mul: binary([](double u, double v) { return u * v; }); break;
    case Op::Div: binary([](double u, double v) { return u / v; }); break;
    case Op::MatMul: {
        const Tensor& b = nodes_[std::size_t(n.rhs)].value;
        const bool tb = n.iparam != 0;
        if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank-2");
        const std::size_t inner_b = tb ? b.cols() : b.rows();
        const std::size_t outer_b = tb ? b.rows() : b.cols();
        if (a.cols() != inner_b) {
            throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                             (tb ? "^T" : ""));
        }
        y.resize({a.rows(), outer_b});
        auto ym = as_matrix(y);
        if (tb) ym.noalias() = as_matrix(a) * as_matrix(b).transpose();
        else ym.noalias() = as_matrix(a) * as_matrix(b);
        break;
    }
    case Op::Tanh: unary([](double u) { return std::tanh(u); }); break;
    case Op::Sin: unary([](double u) { return std::sin(u); }); break;
    case Op::Cos: unary([](double u) { return std::cos(u); }); break;
    case Op::Exp: unary([](double u) { return std::exp(u); }); break;
    case Op::PowInt: {
        const int p = int(n.iparam);
        unary([p](double u) { return std::pow(u, p); });
        break;
    }
    case Op::Abs: unary([](double u) { return std::abs(u); }); break;
    case Op::Square: unary([](double u) { return u * u; }); break;
    case Op::Neg: unary([](double u) { return -u; }); break;
    case Op::Scale: {
        const double c = n.scalar;
        unary([c](double u) { return c * u; });
        break;
    }
    case Op::Shift: {
        const double c = n.scalar;
        unary([c](double u) { return u + c; });
        break;
    }
    case Op::Sum:
    case Op::Mean: {
        double s = 0.0;
        for (double v : a.values()) s += v;
        if (n.op == Op::Mean) {
            if (a.numel() == 0) throw ShapeError("mean: empty operand");
            s /= double(a.numel());
        }
        y.resize({1});
        y[0] = s;
        break;
    }
    case Op::Broadcast: {
        if (!a.is_scalar()) throw ShapeError("broadcast: operand must be a single element");
        y.reset(target, a[0]);
        break;
    }
    case Op::AddRow: {
        const Tensor& b = nodes_[std::size_t(n.rhs)].value;
        if (a.rank() != 2 || b.numel() != a.cols()) {
            throw ShapeError("add_row: cannot add " + shape_str(b.shape()) + " to rows of " + shape_str(a.shape()));
        }
        y.resize(a.shape());
        const std::size_t r = a.rows(), c = a.cols();
        const double* pa = a.data();
        const double* pb = b.data();
        double* py = y.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) py[i * c + j] = pa[i * c + j] + pb[j];
        break;
    }
    case Op::Column: {
        const std::size_t j = std::size_t(n.iparam);
        if (a.rank() != 2 || j >= a.cols()) {
            throw ShapeError("column: index " + std::to_string(j) + " out of range for " + shape_str(a.shape()));
        }
        const std::size_t r = a.rows(), c = a.cols();
        y.resize({r, 1});
        for (std::size_t i = 0; i < r; ++i) y[i] = a[i * c + j];
        break;
    }
    default:
        throw std::invalid_argument(std::string("autodiff: unsupported op ") + op_name(n.op));
    }
}

void Tape::backward(Var root)
{
    const Node& r = node(root);
    if (!r.value.is_scalar()) throw ShapeError("backward: root must be a single element, got " + shape_str(r.value.shape()));
    for (std::size_t i = 0; i <= std::size_t(root.id); ++i) {
        if (nodes_[i].op != Op::Leaf && nodes_[i].requires_grad) nodes_[i].adjoint.fill(0.0);
    }
    nodes_[std::size_t(root.id)].adjoint[0] += 1.0;
    for (std::size_t i = std::size_t(root.id) + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (n.op == Op::Leaf || !n.requires_grad) continue;
        if (std::size_t(n.lhs) >= i || (n.rhs >= 0 && std::size_t(n.rhs) >= i)) {
            throw std::logic_error("autodiff: operand recorded after its consumer (tape corrupted)");
        }
        backprop(i);
    }
}

void Tape::zero_grad()
{
    for (std::size_t i = 0; i < size_; ++i) nodes_[i].adjoint.fill(0.0);
}

void Tape::backprop(std::size_t idx)
{
    const Node& n = nodes_[idx];
    const Tensor& g = n.adjoint;
    const Tensor& y = n.value;
    Node& na = nodes_[std::size_t(n.lhs)];
    Node* nb = n.rhs >= 0 ? &nodes_[std::size_t(n.rhs)] : nullptr;
    const bool ga = na.requires_grad;
    const bool gb = nb != nullptr && nb->requires_grad;
    const double* pg = g.data();
    const double* pa = na.value.data();
    const double* pb = nb != nullptr ? nb->value.data() : nullptr;
    const std::size_t len = g.numel();
    const bool sa = na.value.numel() != len;
    const bool sb = nb != nullptr && nb->value.numel() != len;
    auto A = [&](std::size_t i) { return pa[sa ? 0 : i]; };
    auto B = [&](std::size_t i) { return pb[sb ? 0 : i]; };

    switch (n.op) {
    case Op::Leaf:
        break;
    case Op::Add:
        if (ga) accumulate(na.adjoint, g, [&](std::size_t i) { return pg[i]; });
        if (gb) accumulate(nb->adjoint, g, [&](std::size_t i) { return pg[i]; });
        break;
    case Op::Sub:
        if (ga) accumulate(na.adjoint, g, [&](std::size_t i) { return pg[i]; });
        if (gb) accumulate(nb->adjoint, g, [&](std::size_t i) { return -pg[i]; });
        break;
    case Op::Mul:
        if (ga) accumulate(na.adjoint, g, [&](std::size_t i) { return pg[i] * B(i); });
        if (gb) accumulate(nb->adjoint, g, [&](std::size_t i) { return pg[i] * A(i); });
        break;
    case Op::Div:
        if (ga) accumulate(na.adjoint, g, [&](std::size_t i) { return pg[i] / B(i); });
        if (gb) accumulate(nb->adjoint, g, [&](std::size_t i) { return -pg[i] * A(i) / (B(i) * B(i)); });
        break;
    case Op::MatMul: {
        const bool tb = n.iparam != 0;
        auto G = as_matrix(g);
        if (ga) {
            auto da = as_matrix(na.adjoint);
            if (tb) da.noalias() += G * as_matrix(nb->value);
            else da.noalias() += G * as_matrix(nb->value).transpose();
        }
        if (gb) {
            auto db = as_matrix(nb->adjoint);
            if (tb) db.noalias() += G.transpose() * as_matrix(na.value);
            else db.noalias() += as_matrix(na.value).transpose() * G;
        }
        break;
    }
    case Op::Tanh: {
        const double* py = y.data();
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += pg[i] * (1.0 - py[i] * py[i]);
        break;
    }
    case Op::Sin: {
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += pg[i] * std::cos(pa[i]);
        break;
    }
    case Op::Cos: {
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] -= pg[i] * std::sin(pa[i]);
        break;
    }
    case Op::Exp: {
        const double* py = y.data();
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += pg[i] * py[i];
        break;
    }
    case Op::PowInt: {
        const int p = int(n.iparam);
        double* da = na.adjoint.data();
        if (p == 0) break;
        for (std::size_t i = 0; i < len; ++i) da[i] += pg[i] * double(p) * std::pow(pa[i], p - 1);
        break;
    }
    case Op::Abs: {
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += pg[i] * sign0(pa[i]);
        break;
    }
    case Op::Square: {
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += 2.0 * pa[i] * pg[i];
        break;
    }
    case Op::Neg: {
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] -= pg[i];
        break;
    }
    case Op::Scale: {
        const double c = n.scalar;
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += c * pg[i];
        break;
    }
    case Op::Shift: {
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i] += pg[i];
        break;
    }
    case Op::Sum:
    case Op::Mean: {
        const std::size_t m = na.value.numel();
        const double s = n.op == Op::Mean ? pg[0] / double(m) : pg[0];
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < m; ++i) da[i] += s;
        break;
    }
    case Op::Broadcast: {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += pg[i];
        na.adjoint[0] += s;
        break;
    }
    case Op::AddRow: {
        const std::size_t r = y.rows(), c = y.cols();
        if (ga) {
            double* da = na.adjoint.data();
            for (std::size_t i = 0; i < len; ++i) da[i] += pg[i];
        }
        if (gb) {
            double* db = nb->adjoint.data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) db[j] += pg[i * c + j];
        }
        break;
    }
    case Op::Column: {
        const std::size_t j = std::size_t(n.iparam);
        const std::size_t c = na.value.cols();
        double* da = na.adjoint.data();
        for (std::size_t i = 0; i < len; ++i) da[i * c + j] += pg[i];
        break;
    }
    }
}

namespace {

Var apply1(Op op, Var a, double scalar = 0.0, std::int64_t iparam = 0)
{
    if (!a.valid()) throw std::logic_error("autodiff: invalid variable");
    const Var ops[] = {a};
    return a.tape->apply(op, ops, scalar, iparam);
}

Var apply2(Op op, Var a, Var b, std::int64_t iparam = 0)
{
    if (!a.valid() || !b.valid()) throw std::logic_error("autodiff: invalid variable");
    if (a.tape != b.tape) throw std::logic_error("autodiff: operands live on different tapes");
    const Var ops[] = {a, b};
    return a.tape->apply(op, ops, 0.0, iparam);
}

}  // namespace

Var add(Var a, Var b) { return apply2(Op::Add, a, b); }
Var sub(Var a, Var b) { return apply2(Op::Sub, a, b); }
Var mul(Var a, Var b) { return apply2(Op::Mul, a, b); }
Var div(Var a, Var b) { return apply2(Op::Div, a, b); }
Var matmul(Var a, Var b, bool transpose_rhs) { return apply2(Op::MatMul, a, b, transpose_rhs ? 1 : 0); }
Var tanh(Var a) { return apply1(Op::Tanh, a); }
Var sin(Var a) { return apply1(Op::Sin, a); }
Var cos(Var a) { return apply1(Op::Cos, a); }
Var exp(Var a) { return apply1(Op::Exp, a); }
Var pow(Var a, int exponent) { return apply1(Op::PowInt, a, 0.0, exponent); }
Var abs(Var a) { return apply1(Op::Abs, a); }
Var square(Var a) { return apply1(Op::Square, a); }
Var sum(Var a) { return apply1(Op::Sum, a); }
Var mean(Var a) { return apply1(Op::Mean, a); }
Var neg(Var a) { return apply1(Op::Neg, a); }
Var scale(Var a, double c) { return apply1(Op::Scale, a, c); }
Var shift(Var a, double c) { return apply1(Op::Shift, a, c); }
Var add_row(Var m, Var row) { return apply2(Op::AddRow, m, row); }
Var column(Var m, std::size_t j) { return apply1(Op::Column, m, 0.0, std::int64_t(j)); }

Var broadcast(Var scalar, const Shape& shape)
{
    if (!scalar.valid()) throw std::logic_error("autodiff: invalid variable");
    const Var ops[] = {scalar};
    return scalar.tape->apply(Op::Broadcast, ops, 0.0, 0, shape);
}

}  // namespace atpinn::ad
