#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atpinn/autodiff.hpp"
#include "atpinn/network.hpp"
#include "atpinn/tensor.hpp"

namespace atpinn::pde {

// Axis-aligned box; lo[i] < hi[i].
struct DomainBox {
    std::vector<double> lo;
    std::vector<double> hi;

    DomainBox() = default;
    DomainBox(std::vector<double> lo, std::vector<double> hi);

    std::size_t dim() const { return lo.size(); }
    double width(std::size_t i) const { return hi[i] - lo[i]; }
    bool contains(std::span<const double> point, double tol = 0.0) const;
    // Coordinate-wise projection onto the box.
    void clip(std::span<double> point) const;
};

enum class MetricKind { RelativeL2, ResidualMse };

const char* metric_name(MetricKind kind);

// Supervised boundary/initial points (n × dim) and their target values.
struct BoundaryData {
    Tensor points;
    std::vector<double> targets;
};

using ResidualFn = std::function<ad::Var(ad::Var points, const nn::DerivBundle& derivs)>;
using PointFn = std::function<double(std::span<const double>)>;
using BoundarySampler = std::function<BoundaryData(std::size_t n, std::uint64_t seed)>;

struct PdeProblem {
    std::string name;
    DomainBox domain;
    std::vector<std::string> axis_names;
    // Time, when present, is the last input coordinate.
    bool time_dependent = false;
    ResidualFn residual;
    // Input coordinates whose second derivative the residual reads.
    std::vector<bool> second_order;
    BoundarySampler sample_boundary;
    std::optional<PointFn> exact_solution;
    MetricKind metric = MetricKind::RelativeL2;
};

PdeProblem poisson_problem();
PdeProblem burgers_problem();
PdeProblem multiscale_problem();
PdeProblem allen_cahn_problem();

// "poisson2d", "burgers", "multiscale", "allen_cahn".
PdeProblem problem_by_name(const std::string& name);
std::vector<std::string> problem_names();

// Signed residual at each point as an n×1 node on the tape of `points`.
// Throws std::out_of_range for points more than 1e-12 outside the domain.
ad::Var residual_batch(const PdeProblem& problem, const nn::ParamVars& params, ad::Var points);

// Tape-free convenience: residual values at each row of `points`,
// evaluated in chunks of at most `chunk` rows.
std::vector<double> residual_values(const PdeProblem& problem, const nn::MlpParams& params, const Tensor& points,
                                    std::size_t chunk = 2048);

void check_in_domain(const DomainBox& domain, const Tensor& points, double tol = 1e-12);

// Closed forms used by the problem definitions; exposed for tests.
namespace closed_form {
double poisson_u(double x, double y);
// f = -Δu for the Gaussian ridge/canyon solution.
double poisson_f(double x, double y);
double burgers_initial(double x);
inline constexpr double kBurgersViscosity = 0.01 / 3.14159265358979323846;
double multiscale_kappa(double x);
double multiscale_kappa_prime(double x);
inline constexpr double kMultiscaleEps = 0.25;
double allen_cahn_initial(double x);
inline constexpr double kAllenCahnDiffusion = 1e-4;
inline constexpr double kAllenCahnReaction = 5.0;
}  // namespace closed_form

}  // namespace atpinn::pde
