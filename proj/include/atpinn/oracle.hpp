#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "atpinn/tensor.hpp"

// Reference solutions for the benchmarks without closed forms. Used by
// evaluation and tests only; training never reads them.

namespace atpinn::oracle {

// Values on the Cartesian product of strictly increasing axes. values is
// row-major with extents (axes[0].size(), axes[1].size(), ...).
struct ReferenceGrid {
    std::vector<std::vector<double>> axes;
    Tensor values;

    std::size_t dim() const { return axes.size(); }
    void validate() const;
    // Multilinear interpolation; points outside the axes are clamped.
    double interpolate(std::span<const double> point) const;
};

// Evenly spaced points on [lo, hi], both ends included.
std::vector<double> linspace(double lo, double hi, std::size_t n);

struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes and weights for ∫ f(z) exp(-z²) dz, ascending nodes.
GaussHermite gauss_hermite(std::size_t order);

// Solves a tridiagonal system (Thomas algorithm). sub[0] and sup[n-1] are
// ignored. Throws std::runtime_error on a zero pivot.
std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> sup, std::span<const double> rhs);

// u_t + u u_x = nu u_xx, u(x,0) = -sin(pi x), u(±1,t) = 0 via the Cole–Hopf
// transform, with both integrals evaluated by Gauss–Hermite quadrature.
class BurgersColeHopf {
public:
    explicit BurgersColeHopf(std::size_t order = 100);
    double operator()(double x, double t) const;
    std::size_t order() const { return rule_.nodes.size(); }

private:
    GaussHermite rule_;
    std::vector<double> log_weights_;
};

double burgers_reference(double x, double t);

// Cole–Hopf values on an nx × nt grid over [-1,1] × [0,1].
ReferenceGrid burgers_reference_grid(std::size_t nx = 256, std::size_t nt = 256, std::size_t order = 100);

// Independent finite-difference Burgers solver: central conservative
// convection, second-order IMEX (SBDF2) in time with implicit diffusion.
// Returns node values on [-1,1] at every `output_every`-th step.
ReferenceGrid burgers_finite_difference(std::size_t cells, std::size_t steps, std::size_t output_every);

// u_t = D u_xx + 5 (u - u³), u(x,0) = x² cos(pi x), u(±1,t) = 0 on
// [-1,1] × [0,1]. Second-order finite differences on a grid refined
// `x_refine` times between output nodes, SBDF2 time stepping with
// dt = 1 / ((output_points - 1) · t_refine). Output is
// output_points × output_points over (x, t).
struct AllenCahnOptions {
    std::size_t output_points = 256;
    std::size_t x_refine = 32;
    std::size_t t_refine = 40;
};
ReferenceGrid allen_cahn_reference(const AllenCahnOptions& options = {});

// -(kappa u')' = sin x on [0, pi], u(0) = u(pi) = 0, conservative
// second-order differences with kappa at cell midpoints. Output on all
// cells + 1 nodes.
ReferenceGrid multiscale_reference(std::size_t cells = 65536);

// max |A u - f| of the discrete multiscale system evaluated on a grid
// produced by multiscale_reference.
double multiscale_discrete_residual(const ReferenceGrid& grid);

// On-disk cache, see docs/formats.md.
using GridParams = std::map<std::string, double>;

struct CachedGrid {
    std::string problem;
    GridParams params;
    ReferenceGrid grid;
};

void save_grid(const std::string& path, const std::string& problem, const GridParams& params,
               const ReferenceGrid& grid);
CachedGrid load_grid(const std::string& path);

// Default discretization of each oracle-backed problem.
GridParams default_params(const std::string& problem);
std::string cache_file_name(const std::string& problem, const GridParams& params);

// Builds the reference for "burgers", "allen_cahn" or "multiscale" with the
// given parameters.
ReferenceGrid build_reference(const std::string& problem, const GridParams& params);

// Loads from cache_dir when a file with matching parameters exists,
// otherwise builds and writes it. An empty cache_dir disables caching.
ReferenceGrid cached_reference(const std::string& problem, const std::string& cache_dir);

}  // namespace atpinn::oracle
