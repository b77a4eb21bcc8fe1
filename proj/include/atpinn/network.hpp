#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atpinn/autodiff.hpp"
#include "atpinn/tensor.hpp"

namespace atpinn::nn {

// Fully-connected tanh network with a linear scalar output.
// weights[l] is (layer_sizes[l+1], layer_sizes[l]); biases[l] has
// layer_sizes[l+1] entries.
struct MlpParams {
    std::vector<std::size_t> layer_sizes;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t num_layers() const { return weights.size(); }
    std::size_t num_parameters() const;

    // Parameters in the order W0, b0, W1, b1, ...
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> flat);

    bool operator==(const MlpParams&) const = default;
};

// Builds layer sizes (input, hidden × depth, 1).
std::vector<std::size_t> mlp_layout(std::size_t input_dim, std::size_t hidden_layers, std::size_t width);

void validate_layout(std::span<const std::size_t> layer_sizes);

// Glorot-uniform weights, zero biases; deterministic in `seed`.
MlpParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

// Tape-free evaluation of u at each row of x (n × input_dim). Returns n values.
std::vector<double> forward(const MlpParams& params, const Tensor& x);

// Parameters recorded as leaves on a tape.
struct ParamVars {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
};

ParamVars bind_params(ad::Tape& tape, const MlpParams& params, bool requires_grad);

// Gradient of the last backward sweep with respect to each bound parameter,
// in flatten() order.
std::vector<double> collect_gradient(const ParamVars& vars);

// u as an n×1 node.
ad::Var forward(const ParamVars& params, ad::Var x);

// u with its pure first and second derivatives along each input coordinate,
// all n×1 nodes on the same tape as u.
struct DerivBundle {
    ad::Var u;
    std::vector<ad::Var> du;
    std::vector<ad::Var> d2u;
};

// second_order[i] == false skips d2u[i] (left as an invalid Var). An empty
// mask requests every coordinate.
DerivBundle forward_with_derivs(const ParamVars& params, ad::Var x, const std::vector<bool>& second_order = {});

// Checkpoint text format, see docs/formats.md.
void save_params(std::ostream& out, const MlpParams& params);
MlpParams load_params(std::istream& in);
void save_params(const std::string& path, const MlpParams& params);
MlpParams load_params(const std::string& path);

}  // namespace atpinn::nn
