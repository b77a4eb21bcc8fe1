#include "atpinn/network.hpp"

#include <Eigen/Core>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace atpinn::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr const char* kCheckpointMagic = "atpinn-mlp";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::size_t MlpParams::num_parameters() const
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].numel() + biases[l].numel();
    return n;
}

std::vector<double> MlpParams::flatten() const
{
    std::vector<double> flat;
    flat.reserve(num_parameters());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].values().begin(), weights[l].values().end());
        flat.insert(flat.end(), biases[l].values().begin(), biases[l].values().end());
    }
    return flat;
}

void MlpParams::assign_flat(std::span<const double> flat)
{
    if (flat.size() != num_parameters()) {
        throw ShapeError("assign_flat: expected " + std::to_string(num_parameters()) + " values, got " +
                         std::to_string(flat.size()));
    }
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (double& w : weights[l].values()) w = flat[k++];
        for (double& b : biases[l].values()) b = flat[k++];
    }
}

std::vector<std::size_t> mlp_layout(std::size_t input_dim, std::size_t hidden_layers, std::size_t width)
{
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden_layers, width);
    sizes.push_back(1);
    return sizes;
}

void validate_layout(std::span<const std::size_t> layer_sizes)
{
    if (layer_sizes.size() < 2) throw std::invalid_argument("network: need at least input and output layers");
    for (std::size_t s : layer_sizes) {
        if (s == 0) throw std::invalid_argument("network: zero-width layer");
    }
    if (layer_sizes.back() != 1) throw std::invalid_argument("network: output layer must have width 1");
}

MlpParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed)
{
    validate_layout(layer_sizes);
    MlpParams p;
    p.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor w({fan_out, fan_in});
        for (double& v : w.values()) v = dist(rng);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(Shape{fan_out}, 0.0);
    }
    return p;
}

std::vector<double> forward(const MlpParams& params, const Tensor& x)
{
    if (x.rank() != 2 || x.cols() != params.input_dim()) {
        throw ShapeError("forward: expected points with " + std::to_string(params.input_dim()) + " columns, got " +
                         shape_str(x.shape()));
    }
    RowMat a = Eigen::Map<const RowMat>(x.data(), Eigen::Index(x.rows()), Eigen::Index(x.cols()));
    const std::size_t last = params.num_layers() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
        const Tensor& w = params.weights[l];
        const Tensor& b = params.biases[l];
        Eigen::Map<const RowMat> W(w.data(), Eigen::Index(w.rows()), Eigen::Index(w.cols()));
        Eigen::Map<const Eigen::RowVectorXd> bias(b.data(), Eigen::Index(b.numel()));
        RowMat z = a * W.transpose();
        z.rowwise() += bias;
        if (l < last) z = z.array().tanh().matrix();
        a = std::move(z);
    }
    return std::vector<double>(a.data(), a.data() + a.size());
}

ParamVars bind_params(ad::Tape& tape, const MlpParams& params, bool requires_grad)
{
    ParamVars vars;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        vars.weights.push_back(tape.leaf(params.weights[l], requires_grad));
        vars.biases.push_back(tape.leaf(params.biases[l], requires_grad));
    }
    return vars;
}

std::vector<double> collect_gradient(const ParamVars& vars)
{
    std::vector<double> g;
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        const Tensor& gw = vars.weights[l].grad();
        const Tensor& gb = vars.biases[l].grad();
        g.insert(g.end(), gw.values().begin(), gw.values().end());
        g.insert(g.end(), gb.values().begin(), gb.values().end());
    }
    return g;
}

namespace {

void check_input(const ParamVars& params, ad::Var x)
{
    if (params.weights.empty()) throw std::invalid_argument("forward: empty parameter set");
    const Shape& xs = x.shape();
    const Shape& ws = params.weights.front().shape();
    if (xs.size() != 2 || xs[1] != ws[1]) {
        throw ShapeError("forward: expected points with " + std::to_string(ws[1]) + " columns, got " + shape_str(xs));
    }
}

ad::Var affine(ad::Var a, const ParamVars& p, std::size_t l)
{
    return ad::add_row(ad::matmul(a, p.weights[l], true), p.biases[l]);
}

}  // namespace

ad::Var forward(const ParamVars& params, ad::Var x)
{
    check_input(params, x);
    ad::Var a = x;
    const std::size_t last = params.weights.size() - 1;
    for (std::size_t l = 0; l < last; ++l) a = ad::tanh(affine(a, params, l));
    return affine(a, params, last);
}

DerivBundle forward_with_derivs(const ParamVars& params, ad::Var x, const std::vector<bool>& second_order)
{
    check_input(params, x);
    ad::Tape& tape = *x.tape;
    const std::size_t n = x.shape()[0];
    const std::size_t dim = x.shape()[1];
    auto wants_second = [&](std::size_t i) { return second_order.empty() || second_order.at(i); };

    // Seeds: da/dx_i = e_i, d2a/dx_i2 = 0 at the input layer. The zero
    // second derivative is represented by an invalid Var.
    std::vector<ad::Var> d1(dim), d2(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        Tensor e({n, dim}, 0.0);
        for (std::size_t r = 0; r < n; ++r) e[r * dim + i] = 1.0;
        d1[i] = tape.leaf(std::move(e), false);
    }

    ad::Var a = x;
    const std::size_t last = params.weights.size() - 1;
    for (std::size_t l = 0; l < last; ++l) {
        const ad::Var w = params.weights[l];
        const ad::Var t = ad::tanh(affine(a, params, l));
        const ad::Var s1 = 1.0 - ad::square(t);  // tanh'
        ad::Var s2;                              // tanh''
        for (std::size_t i = 0; i < dim; ++i) {
            const ad::Var z1 = ad::matmul(d1[i], w, true);
            ad::Var z2;
            if (d2[i].valid()) z2 = ad::matmul(d2[i], w, true);
            d1[i] = s1 * z1;
            if (!wants_second(i)) continue;
            if (!s2.valid()) s2 = -2.0 * (t * s1);
            const ad::Var curv = s2 * ad::square(z1);
            d2[i] = z2.valid() ? curv + s1 * z2 : curv;
        }
        a = t;
    }

    DerivBundle out;
    const ad::Var w = params.weights[last];
    out.u = affine(a, params, last);
    out.du.resize(dim);
    out.d2u.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        out.du[i] = ad::matmul(d1[i], w, true);
        if (!wants_second(i)) continue;
        if (d2[i].valid()) out.d2u[i] = ad::matmul(d2[i], w, true);
        else out.d2u[i] = ad::broadcast(tape.constant(0.0), {n, 1});
    }
    return out;
}

void save_params(std::ostream& out, const MlpParams& params)
{
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "layers " << params.layer_sizes.size();
    for (std::size_t s : params.layer_sizes) out << ' ' << s;
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        const Tensor& w = params.weights[l];
        const Tensor& b = params.biases[l];
        out << "W " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (std::size_t r = 0; r < w.rows(); ++r) {
            for (std::size_t c = 0; c < w.cols(); ++c) out << (c ? " " : "") << w.at(r, c);
            out << '\n';
        }
        out << "b " << l << ' ' << b.numel() << '\n';
        for (std::size_t i = 0; i < b.numel(); ++i) out << (i ? " " : "") << b[i];
        out << '\n';
    }
}

MlpParams load_params(std::istream& in)
{
    auto fail = [](const std::string& what) { throw std::runtime_error("checkpoint: " + what); };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kCheckpointMagic) fail("missing header");
    if (version != kCheckpointVersion) fail("unsupported version " + std::to_string(version));
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "layers") fail("missing layer list");
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes) {
        if (!(in >> s)) fail("truncated layer list");
    }
    validate_layout(sizes);
    MlpParams p;
    p.layer_sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::size_t idx = 0, rows = 0, cols = 0;
        if (!(in >> tag >> idx >> rows >> cols) || tag != "W" || idx != l) fail("bad weight header at layer " + std::to_string(l));
        if (rows != sizes[l + 1] || cols != sizes[l]) fail("weight shape disagrees with layer list");
        Tensor w({rows, cols});
        for (double& v : w.values()) {
            if (!(in >> v)) fail("truncated weights");
        }
        std::size_t len = 0;
        if (!(in >> tag >> idx >> len) || tag != "b" || idx != l || len != rows) fail("bad bias header at layer " + std::to_string(l));
        Tensor b(Shape{len});
        for (double& v : b.values()) {
            if (!(in >> v)) fail("truncated biases");
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

void save_params(const std::string& path, const MlpParams& params)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    save_params(out, params);
}

MlpParams load_params(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
    return load_params(in);
}

}  // namespace atpinn::nn
