#include "atpinn/pde.hpp"

#include "atpinn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atpinn::pde {

using std::numbers::pi;

DomainBox::DomainBox(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_))
{
    if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("domain: bounds must have equal, non-zero length");
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(lo[i] < hi[i])) throw std::invalid_argument("domain: lo must be below hi in every dimension");
    }
}

bool DomainBox::contains(std::span<const double> point, double tol) const
{
    if (point.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (point[i] < lo[i] - tol || point[i] > hi[i] + tol) return false;
    }
    return true;
}

void DomainBox::clip(std::span<double> point) const
{
    for (std::size_t i = 0; i < dim(); ++i) point[i] = std::clamp(point[i], lo[i], hi[i]);
}

const char* metric_name(MetricKind kind)
{
    return kind == MetricKind::RelativeL2 ? "relative_l2" : "residual_mse";
}

namespace closed_form {

namespace {
constexpr double kCenters[] = {-0.8, 0.0, 0.8};

double gauss(double s, double c) { return std::exp(-100.0 * (s - c) * (s - c)); }

// d²/ds² exp(-100 (s-c)²) = (40000 (s-c)² - 200) exp(-100 (s-c)²)
double gauss_dd(double s, double c)
{
    const double d = s - c;
    return (40000.0 * d * d - 200.0) * gauss(s, c);
}
}  // namespace

double poisson_u(double x, double y)
{
    double u = 0.0;
    for (double c : kCenters) u += gauss(x, c) - gauss(y, c);
    return u;
}

double poisson_f(double x, double y)
{
    double lap = 0.0;
    for (double c : kCenters) lap += gauss_dd(x, c) - gauss_dd(y, c);
    return -lap;
}

double burgers_initial(double x) { return -std::sin(pi * x); }

double multiscale_kappa(double x) { return 0.5 * std::sin(2.0 * pi * x / kMultiscaleEps) + std::sin(x) + 2.0; }

double multiscale_kappa_prime(double x)
{
    return 0.5 * (2.0 * pi / kMultiscaleEps) * std::cos(2.0 * pi * x / kMultiscaleEps) + std::cos(x);
}

double allen_cahn_initial(double x) { return x * x * std::cos(pi * x); }

}  // namespace closed_form

void check_in_domain(const DomainBox& domain, const Tensor& points, double tol)
{
    if (points.rank() != 2 || points.cols() != domain.dim()) {
        throw ShapeError("points must be n x " + std::to_string(domain.dim()) + ", got " + shape_str(points.shape()));
    }
    const std::size_t d = domain.dim();
    for (std::size_t r = 0; r < points.rows(); ++r) {
        if (!domain.contains(points.values().subspan(r * d, d), tol)) {
            throw std::out_of_range("point " + std::to_string(r) + " lies outside the problem domain");
        }
    }
}

namespace {

// Sum over the three Gaussian centres of g''(s - c) as a graph expression.
ad::Var gauss_dd_sum(ad::Var s)
{
    ad::Var acc;
    for (double c : closed_form::kCenters) {
        const ad::Var d2 = ad::square(s - c);
        const ad::Var term = (40000.0 * d2 - 200.0) * ad::exp(-100.0 * d2);
        acc = acc.valid() ? acc + term : term;
    }
    return acc;
}

// Evolution problems on [x_lo, x_hi] × [0, 1]: half the points on the t = 0
// face (corners included), the rest split between the two spatial walls
// with t in (0, 1].
BoundaryData evolution_boundary(std::size_t n, std::uint64_t seed, double x_lo, double x_hi,
                                const std::function<double(double)>& initial)
{
    Rng rng(seed);
    BoundaryData b;
    b.points = Tensor({n, 2});
    b.targets.resize(n);
    const std::size_t n_init = (n + 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        double x, t, target;
        if (i < n_init) {
            x = x_lo + (x_hi - x_lo) * uniform01(rng);
            if (i == 0) x = x_lo;
            if (i == 1 && n_init > 1) x = x_hi;
            t = 0.0;
            target = initial(x);
        } else {
            x = ((i - n_init) % 2 == 0) ? x_lo : x_hi;
            t = 1.0 - uniform01(rng);
            target = 0.0;
        }
        b.points.at(i, 0) = x;
        b.points.at(i, 1) = t;
        b.targets[i] = target;
    }
    return b;
}

}  // namespace

PdeProblem poisson_problem()
{
    PdeProblem p;
    p.name = "poisson2d";
    p.domain = DomainBox({-1.0, -1.0}, {1.0, 1.0});
    p.axis_names = {"x", "y"};
    p.second_order = {true, true};
    p.metric = MetricKind::RelativeL2;
    p.residual = [](ad::Var points, const nn::DerivBundle& d) {
        // -Δu - f with f = -Δu_exact = -Σ g''(x - c) + Σ g''(y - c)
        const ad::Var f = gauss_dd_sum(ad::column(points, 1)) - gauss_dd_sum(ad::column(points, 0));
        return -(d.d2u[0] + d.d2u[1]) - f;
    };
    p.exact_solution = [](std::span<const double> x) { return closed_form::poisson_u(x[0], x[1]); };
    p.sample_boundary = [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        BoundaryData b;
        b.points = Tensor({n, 2});
        b.targets.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = -1.0 + 2.0 * uniform01(rng);
            double x = s, y = s;
            switch (i % 4) {
            case 0: y = -1.0; break;
            case 1: x = 1.0; break;
            case 2: y = 1.0; break;
            default: x = -1.0; break;
            }
            b.points.at(i, 0) = x;
            b.points.at(i, 1) = y;
            b.targets[i] = closed_form::poisson_u(x, y);
        }
        return b;
    };
    return p;
}

PdeProblem burgers_problem()
{
    PdeProblem p;
    p.name = "burgers";
    p.domain = DomainBox({-1.0, 0.0}, {1.0, 1.0});
    p.axis_names = {"x", "t"};
    p.time_dependent = true;
    p.second_order = {true, false};
    p.metric = MetricKind::RelativeL2;
    p.residual = [](ad::Var, const nn::DerivBundle& d) {
        return d.du[1] + d.u * d.du[0] - closed_form::kBurgersViscosity * d.d2u[0];
    };
    p.sample_boundary = [](std::size_t n, std::uint64_t seed) {
        return evolution_boundary(n, seed, -1.0, 1.0, closed_form::burgers_initial);
    };
    return p;
}

PdeProblem multiscale_problem()
{
    PdeProblem p;
    p.name = "multiscale";
    p.domain = DomainBox({0.0}, {pi});
    p.axis_names = {"x"};
    p.second_order = {true};
    p.metric = MetricKind::ResidualMse;
    p.residual = [](ad::Var points, const nn::DerivBundle& d) {
        using namespace closed_form;
        const ad::Var x = ad::column(points, 0);
        const double w = 2.0 * pi / kMultiscaleEps;
        const ad::Var kappa = 0.5 * ad::sin(w * x) + ad::sin(x) + 2.0;
        const ad::Var kappa_prime = (0.5 * w) * ad::cos(w * x) + ad::cos(x);
        return -(kappa_prime * d.du[0]) - kappa * d.d2u[0] - ad::sin(x);
    };
    // Both endpoints, whatever n is requested.
    p.sample_boundary = [](std::size_t, std::uint64_t) {
        BoundaryData b;
        b.points = Tensor::matrix(2, 1, {0.0, pi});
        b.targets = {0.0, 0.0};
        return b;
    };
    return p;
}

PdeProblem allen_cahn_problem()
{
    PdeProblem p;
    p.name = "allen_cahn";
    p.domain = DomainBox({-1.0, 0.0}, {1.0, 1.0});
    p.axis_names = {"x", "t"};
    p.time_dependent = true;
    p.second_order = {true, false};
    p.metric = MetricKind::RelativeL2;
    p.residual = [](ad::Var, const nn::DerivBundle& d) {
        using namespace closed_form;
        return d.du[1] - kAllenCahnDiffusion * d.d2u[0] - kAllenCahnReaction * (d.u - ad::pow(d.u, 3));
    };
    p.sample_boundary = [](std::size_t n, std::uint64_t seed) {
        return evolution_boundary(n, seed, -1.0, 1.0, closed_form::allen_cahn_initial);
    };
    return p;
}

std::vector<std::string> problem_names() { return {"poisson2d", "burgers", "multiscale", "allen_cahn"}; }

PdeProblem problem_by_name(const std::string& name)
{
    if (name == "poisson2d") return poisson_problem();
    if (name == "burgers") return burgers_problem();
    if (name == "multiscale") return multiscale_problem();
    if (name == "allen_cahn") return allen_cahn_problem();
    throw std::invalid_argument("unknown problem '" + name + "'");
}

ad::Var residual_batch(const PdeProblem& problem, const nn::ParamVars& params, ad::Var points)
{
    check_in_domain(problem.domain, points.value());
    const nn::DerivBundle d = nn::forward_with_derivs(params, points, problem.second_order);
    return problem.residual(points, d);
}

std::vector<double> residual_values(const PdeProblem& problem, const nn::MlpParams& params, const Tensor& points,
                                    std::size_t chunk)
{
    check_in_domain(problem.domain, points);
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    std::vector<double> out;
    out.reserve(n);
    ad::Tape tape;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t len = std::min(chunk, n - begin);
        Tensor block({len, d});
        std::copy_n(points.data() + begin * d, len * d, block.data());
        tape.clear();
        const nn::ParamVars pv = nn::bind_params(tape, params, false);
        const ad::Var x = tape.leaf(std::move(block), false);
        const ad::Var r = residual_batch(problem, pv, x);
        out.insert(out.end(), r.value().values().begin(), r.value().values().end());
    }
    return out;
}

}  // namespace atpinn::pde
