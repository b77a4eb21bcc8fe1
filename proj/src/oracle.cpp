#include "atpinn/oracle.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "atpinn/errors.hpp"
#include "atpinn/pde.hpp"

namespace atpinn::oracle {

using std::numbers::pi;

void ReferenceGrid::validate() const
{
    Shape extents;
    for (const auto& axis : axes) {
        if (axis.empty()) throw std::invalid_argument("reference grid: empty axis");
        for (std::size_t i = 1; i < axis.size(); ++i) {
            if (!(axis[i] > axis[i - 1])) throw std::invalid_argument("reference grid: axis not strictly increasing");
        }
        extents.push_back(axis.size());
    }
    if (values.shape() != extents) {
        throw std::invalid_argument("reference grid: values shape " + shape_str(values.shape()) + " does not match axes " +
                                    shape_str(extents));
    }
    if (!values.all_finite()) throw NumericalError("reference grid: non-finite values");
}

double ReferenceGrid::interpolate(std::span<const double> point) const
{
    if (point.size() != dim()) throw ShapeError("reference grid: point dimension mismatch");
    // Per-axis bracketing cell and weight.
    std::vector<std::size_t> base(dim());
    std::vector<double> frac(dim());
    for (std::size_t d = 0; d < dim(); ++d) {
        const auto& axis = axes[d];
        if (axis.size() == 1) {
            base[d] = 0;
            frac[d] = 0.0;
            continue;
        }
        const double p = std::clamp(point[d], axis.front(), axis.back());
        auto it = std::upper_bound(axis.begin(), axis.end(), p);
        std::size_t hi = std::size_t(it - axis.begin());
        hi = std::clamp<std::size_t>(hi, 1, axis.size() - 1);
        base[d] = hi - 1;
        frac[d] = (p - axis[hi - 1]) / (axis[hi] - axis[hi - 1]);
    }
    double acc = 0.0;
    const std::size_t corners = std::size_t{1} << dim();
    for (std::size_t mask = 0; mask < corners; ++mask) {
        double w = 1.0;
        std::size_t flat = 0;
        for (std::size_t d = 0; d < dim(); ++d) {
            const bool up = (mask >> d) & 1U;
            const std::size_t n = axes[d].size();
            std::size_t idx = base[d] + (up ? 1 : 0);
            if (idx >= n) idx = n - 1;
            w *= up ? frac[d] : 1.0 - frac[d];
            flat = flat * n + idx;
        }
        if (w != 0.0) acc += w * values[flat];
    }
    return acc;
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    if (n == 0) return {};
    if (n == 1) return {lo};
    std::vector<double> out(n);
    const double step = (hi - lo) / double(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * double(i);
    out.back() = hi;
    return out;
}

GaussHermite gauss_hermite(std::size_t order)
{
    if (order == 0) throw std::invalid_argument("gauss_hermite: order must be positive");
    // Golub–Welsch eigenvalues of the Jacobi matrix seed the roots; each root
    // is then polished by Newton on the orthonormal Hermite functions
    // psi_j(z) = H_j(z) exp(-z^2/2) / norm, which stay representable at large
    // orders, and the weight is taken from psi'_n at the root.
    constexpr double kPiM4 = 0.7511255444649425;  // pi^(-1/4)
    const std::size_t n = order;
    const double nd = double(n);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(Eigen::Index(n));
    Eigen::VectorXd off(Eigen::Index(n > 1 ? n - 1 : 1));
    for (std::size_t k = 1; k < n; ++k) off[Eigen::Index(k - 1)] = std::sqrt(double(k) / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    if (n > 1) eig.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    std::vector<double> x(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = n > 1 ? eig.eigenvalues()[Eigen::Index(i)] : 0.0;
        double dpsi = 0.0;
        for (int iter = 0; iter < 8; ++iter) {
            double p1 = kPiM4 * std::exp(-0.5 * z * z), p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double jd = double(j);
                p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
            }
            // At a root of psi_n, d/dz psi_n = sqrt(2n) psi_{n-1}.
            dpsi = std::sqrt(2.0 * nd) * p2;
            const double step = p1 / dpsi;
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        w[i] = 2.0 * std::exp(-z * z) / (dpsi * dpsi);
    }
    // Symmetrize.
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double z = 0.5 * (x[n - 1 - i] - x[i]);
        const double wi = 0.5 * (w[i] + w[n - 1 - i]);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = wi;
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    double total = 0.0;
    for (double v : w) total += v;
    if (!(std::abs(total - std::sqrt(pi)) < 1e-10)) throw NumericalError("gauss_hermite: weights do not sum to sqrt(pi)");
    return GaussHermite{std::move(x), std::move(w)};
}

std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> sup, std::span<const double> rhs)
{
    const std::size_t n = diag.size();
    if (sub.size() != n || sup.size() != n || rhs.size() != n) throw std::invalid_argument("tridiagonal: size mismatch");
    std::vector<double> c(n), d(n);
    double denom = diag[0];
    if (denom == 0.0) throw std::runtime_error("tridiagonal: zero pivot");
    c[0] = sup[0] / denom;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - sub[i] * c[i - 1];
        if (denom == 0.0) throw std::runtime_error("tridiagonal: zero pivot");
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
}

namespace {

// Pre-factored constant tridiagonal operator (diffusion solves repeated every
// time step).
class TridiagonalSolver {
public:
    TridiagonalSolver(std::size_t n, double sub, double diag, double sup) : sub_(sub), c_(n), inv_(n)
    {
        double denom = diag;
        inv_[0] = 1.0 / denom;
        c_[0] = sup * inv_[0];
        for (std::size_t i = 1; i < n; ++i) {
            denom = diag - sub * c_[i - 1];
            if (denom == 0.0) throw std::runtime_error("tridiagonal: zero pivot");
            inv_[i] = 1.0 / denom;
            c_[i] = sup * inv_[i];
        }
    }

    // Solves in place.
    void solve(std::span<double> x) const
    {
        const std::size_t n = c_.size();
        x[0] *= inv_[0];
        for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - sub_ * x[i - 1]) * inv_[i];
        for (std::size_t i = n - 1; i-- > 0;) x[i] -= c_[i] * x[i + 1];
    }

private:
    double sub_;
    std::vector<double> c_;
    std::vector<double> inv_;
};

// Second-order IMEX (SBDF2) integrator for u_t = nu u_xx + N(u) on a uniform
// grid with homogeneous Dirichlet ends. u holds all nodes; interior nodes
// are 1..n-2. The first step is IMEX Euler.
class Sbdf2Stepper {
public:
    template <class Nonlinear>
    Sbdf2Stepper(std::vector<double> u0, double h, double dt, double nu, Nonlinear&& nonlinear)
        : u_(std::move(u0)), prev_(u_), n_prev_(u_.size()), n_cur_(u_.size()), h_(h), dt_(dt), nu_(nu),
          nonlinear_(std::forward<Nonlinear>(nonlinear)),
          euler_(interior(), -nu / (h * h), 1.0 / dt + 2.0 * nu / (h * h), -nu / (h * h)),
          bdf2_(interior(), -nu / (h * h), 1.5 / dt + 2.0 * nu / (h * h), -nu / (h * h))
    {
        u_.front() = 0.0;
        u_.back() = 0.0;
    }

    void step()
    {
        const std::size_t m = interior();
        nonlinear_(u_, n_cur_);
        std::vector<double> rhs(m);
        if (steps_ == 0) {
            for (std::size_t i = 0; i < m; ++i) rhs[i] = u_[i + 1] / dt_ + n_cur_[i + 1];
            euler_.solve(rhs);
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                rhs[i] = (4.0 * u_[i + 1] - prev_[i + 1]) / (2.0 * dt_) + 2.0 * n_cur_[i + 1] - n_prev_[i + 1];
            }
            bdf2_.solve(rhs);
        }
        prev_ = u_;
        n_prev_.swap(n_cur_);
        std::copy(rhs.begin(), rhs.end(), u_.begin() + 1);
        ++steps_;
    }

    const std::vector<double>& state() const { return u_; }

private:
    std::size_t interior() const { return u_.size() - 2; }

    std::vector<double> u_, prev_, n_prev_, n_cur_;
    double h_, dt_, nu_;
    std::function<void(const std::vector<double>&, std::vector<double>&)> nonlinear_;
    TridiagonalSolver euler_, bdf2_;
    std::size_t steps_ = 0;
};

}  // namespace

BurgersColeHopf::BurgersColeHopf(std::size_t order) : rule_(gauss_hermite(order))
{
    log_weights_.reserve(rule_.weights.size());
    for (double w : rule_.weights) log_weights_.push_back(std::log(w));
}

double BurgersColeHopf::operator()(double x, double t) const
{
    if (t < 0.0) throw std::domain_error("burgers reference: t must be non-negative");
    if (t == 0.0) return pde::closed_form::burgers_initial(x);
    const double nu = pde::closed_form::kBurgersViscosity;
    const double c = std::sqrt(4.0 * nu * t);
    const double inv = 1.0 / (2.0 * pi * nu);
    const std::size_t n = rule_.nodes.size();
    std::vector<double> expo(n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double y = x - c * rule_.nodes[i];
        expo[i] = log_weights_[i] - std::cos(pi * y) * inv;
        top = std::max(top, expo[i]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = x - c * rule_.nodes[i];
        const double e = std::exp(expo[i] - top);
        num += e * std::sin(pi * y);
        den += e;
    }
    return -num / den;
}

double burgers_reference(double x, double t)
{
    static const BurgersColeHopf solver(100);
    return solver(x, t);
}

ReferenceGrid burgers_reference_grid(std::size_t nx, std::size_t nt, std::size_t order)
{
    const BurgersColeHopf solver(order);
    ReferenceGrid g;
    g.axes = {linspace(-1.0, 1.0, nx), linspace(0.0, 1.0, nt)};
    g.values = Tensor({nx, nt});
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < nt; ++j) g.values[i * nt + j] = solver(g.axes[0][i], g.axes[1][j]);
    g.validate();
    return g;
}

ReferenceGrid burgers_finite_difference(std::size_t cells, std::size_t steps, std::size_t output_every)
{
    if (cells < 4 || steps == 0 || output_every == 0 || steps % output_every != 0) {
        throw std::invalid_argument("burgers fd: steps must be a positive multiple of output_every");
    }
    const double h = 2.0 / double(cells);
    const double dt = 1.0 / double(steps);
    const std::vector<double> x = linspace(-1.0, 1.0, cells + 1);
    std::vector<double> u0(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) u0[i] = pde::closed_form::burgers_initial(x[i]);
    auto convection = [h](const std::vector<double>& u, std::vector<double>& out) {
        const std::size_t n = u.size();
        out[0] = out[n - 1] = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) out[i] = -(u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) / (4.0 * h);
    };
    Sbdf2Stepper stepper(u0, h, dt, pde::closed_form::kBurgersViscosity, convection);

    const std::size_t n_out = steps / output_every + 1;
    ReferenceGrid g;
    g.axes = {x, linspace(0.0, 1.0, n_out)};
    g.values = Tensor({cells + 1, n_out});
    auto store = [&](std::size_t col, const std::vector<double>& u) {
        for (std::size_t i = 0; i <= cells; ++i) g.values[i * n_out + col] = u[i];
    };
    store(0, u0);
    for (std::size_t s = 1; s <= steps; ++s) {
        stepper.step();
        if (s % output_every == 0) store(s / output_every, stepper.state());
    }
    g.validate();
    return g;
}

ReferenceGrid allen_cahn_reference(const AllenCahnOptions& options)
{
    const std::size_t P = options.output_points;
    if (P < 2 || options.x_refine == 0 || options.t_refine == 0) throw std::invalid_argument("allen-cahn: bad options");
    const std::size_t cells = (P - 1) * options.x_refine;
    const std::size_t steps = (P - 1) * options.t_refine;
    const double h = 2.0 / double(cells);
    const double dt = 1.0 / double(steps);
    std::vector<double> u0(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) {
        u0[i] = pde::closed_form::allen_cahn_initial(-1.0 + h * double(i));
    }
    auto reaction = [](const std::vector<double>& u, std::vector<double>& out) {
        const double k = pde::closed_form::kAllenCahnReaction;
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = k * (u[i] - u[i] * u[i] * u[i]);
    };
    Sbdf2Stepper stepper(u0, h, dt, pde::closed_form::kAllenCahnDiffusion, reaction);

    ReferenceGrid g;
    g.axes = {linspace(-1.0, 1.0, P), linspace(0.0, 1.0, P)};
    g.values = Tensor({P, P});
    for (std::size_t i = 0; i < P; ++i) g.values[i * P] = pde::closed_form::allen_cahn_initial(g.axes[0][i]);
    for (std::size_t s = 1; s <= steps; ++s) {
        stepper.step();
        if (s % options.t_refine != 0) continue;
        const std::size_t col = s / options.t_refine;
        const auto& u = stepper.state();
        for (std::size_t i = 0; i < P; ++i) {
            const double v = u[i * options.x_refine];
            if (!std::isfinite(v) || std::abs(v) > 2.0) {
                throw NumericalError("allen-cahn stepper diverged at t=" + std::to_string(g.axes[1][col]));
            }
            g.values[i * P + col] = v;
        }
    }
    g.validate();
    return g;
}

namespace {

std::vector<double> multiscale_midpoint_kappa(std::size_t cells, double h)
{
    std::vector<double> k(cells);
    for (std::size_t j = 0; j < cells; ++j) k[j] = pde::closed_form::multiscale_kappa((double(j) + 0.5) * h);
    return k;
}

}  // namespace

ReferenceGrid multiscale_reference(std::size_t cells)
{
    if (cells < 2) throw std::invalid_argument("multiscale: need at least two cells");
    const double h = pi / double(cells);
    const std::vector<double> kappa = multiscale_midpoint_kappa(cells, h);
    const std::size_t m = cells - 1;
    std::vector<double> sub(m), diag(m), sup(m), rhs(m);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t j = r + 1;
        sub[r] = -kappa[j - 1];
        sup[r] = -kappa[j];
        diag[r] = kappa[j - 1] + kappa[j];
        rhs[r] = h * h * std::sin(double(j) * h);
    }
    std::vector<double> inner;
    try {
        inner = solve_tridiagonal(sub, diag, sup, rhs);
    } catch (const std::runtime_error& e) {
        throw std::logic_error(std::string("multiscale: singular system despite kappa >= 0.5: ") + e.what());
    }
    ReferenceGrid g;
    g.axes = {linspace(0.0, pi, cells + 1)};
    g.values = Tensor(Shape{cells + 1}, 0.0);
    std::copy(inner.begin(), inner.end(), g.values.data() + 1);
    g.validate();
    return g;
}

double multiscale_discrete_residual(const ReferenceGrid& grid)
{
    // Flux-balance form per cell: -(F_{j+1/2} - F_{j-1/2}) - h sin(x_j),
    // F = kappa (u_{j+1} - u_j) / h.
    const std::size_t cells = grid.axes.at(0).size() - 1;
    const double h = pi / double(cells);
    const std::vector<double> kappa = multiscale_midpoint_kappa(cells, h);
    const double* u = grid.values.data();
    double worst = std::abs(u[0]) + std::abs(u[cells]);
    for (std::size_t j = 1; j < cells; ++j) {
        const double right = kappa[j] * (u[j + 1] - u[j]) / h;
        const double left = kappa[j - 1] * (u[j] - u[j - 1]) / h;
        worst = std::max(worst, std::abs(-(right - left) - h * std::sin(double(j) * h)));
    }
    return worst;
}

namespace {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

constexpr char kGridMagic[8] = {'A', 'T', 'P', 'N', 'G', 'R', 'I', 'D'};
constexpr std::uint32_t kGridVersion = 1;

template <class T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s)
{
    put<std::uint32_t>(out, std::uint32_t(s.size()));
    out.write(s.data(), std::streamsize(s.size()));
}

template <class T>
T get(std::istream& in)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("grid cache: truncated file");
    return v;
}

std::string get_string(std::istream& in)
{
    const auto n = get<std::uint32_t>(in);
    if (n > (1U << 20)) throw std::runtime_error("grid cache: implausible string length");
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw std::runtime_error("grid cache: truncated file");
    return s;
}

}  // namespace

void save_grid(const std::string& path, const std::string& problem, const GridParams& params,
               const ReferenceGrid& grid)
{
    grid.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("grid cache: cannot write " + path);
    out.write(kGridMagic, sizeof(kGridMagic));
    put<std::uint32_t>(out, kGridVersion);
    put_string(out, problem);
    put<std::uint32_t>(out, std::uint32_t(params.size()));
    for (const auto& [key, value] : params) {
        put_string(out, key);
        put<double>(out, value);
    }
    put<std::uint32_t>(out, std::uint32_t(grid.dim()));
    for (const auto& axis : grid.axes) put<std::uint64_t>(out, axis.size());
    for (const auto& axis : grid.axes) out.write(reinterpret_cast<const char*>(axis.data()), std::streamsize(axis.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(grid.values.data()), std::streamsize(grid.values.numel() * sizeof(double)));
    if (!out) throw std::runtime_error("grid cache: write failed for " + path);
}

CachedGrid load_grid(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("grid cache: cannot read " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kGridMagic)) {
        throw std::runtime_error("grid cache: bad magic in " + path);
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kGridVersion) throw std::runtime_error("grid cache: unsupported version " + std::to_string(version));
    CachedGrid c;
    c.problem = get_string(in);
    const auto n_params = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string key = get_string(in);
        c.params[key] = get<double>(in);
    }
    const auto ndim = get<std::uint32_t>(in);
    if (ndim == 0 || ndim > 8) throw std::runtime_error("grid cache: bad dimension count");
    Shape extents(ndim);
    for (auto& e : extents) e = std::size_t(get<std::uint64_t>(in));
    c.grid.axes.resize(ndim);
    for (std::size_t d = 0; d < ndim; ++d) {
        c.grid.axes[d].resize(extents[d]);
        if (!in.read(reinterpret_cast<char*>(c.grid.axes[d].data()), std::streamsize(extents[d] * sizeof(double)))) {
            throw std::runtime_error("grid cache: truncated axes");
        }
    }
    c.grid.values = Tensor(extents);
    if (!in.read(reinterpret_cast<char*>(c.grid.values.data()), std::streamsize(c.grid.values.numel() * sizeof(double)))) {
        throw std::runtime_error("grid cache: truncated values");
    }
    c.grid.validate();
    return c;
}

GridParams default_params(const std::string& problem)
{
    if (problem == "burgers") return {{"nx", 256}, {"nt", 256}, {"order", 100}};
    if (problem == "allen_cahn") return {{"points", 256}, {"x_refine", 32}, {"t_refine", 40}};
    if (problem == "multiscale") return {{"cells", 65536}};
    throw std::invalid_argument("no reference oracle for problem '" + problem + "'");
}

std::string cache_file_name(const std::string& problem, const GridParams& params)
{
    std::ostringstream name;
    name << problem;
    for (const auto& [key, value] : params) name << '_' << key << value;
    name << ".grid";
    return name.str();
}

ReferenceGrid build_reference(const std::string& problem, const GridParams& params)
{
    auto get_size = [&](const char* key) {
        auto it = params.find(key);
        if (it == params.end()) throw std::invalid_argument(std::string("oracle parameter missing: ") + key);
        return std::size_t(it->second);
    };
    if (problem == "burgers") return burgers_reference_grid(get_size("nx"), get_size("nt"), get_size("order"));
    if (problem == "allen_cahn") {
        return allen_cahn_reference({get_size("points"), get_size("x_refine"), get_size("t_refine")});
    }
    if (problem == "multiscale") return multiscale_reference(get_size("cells"));
    throw std::invalid_argument("no reference oracle for problem '" + problem + "'");
}

ReferenceGrid cached_reference(const std::string& problem, const std::string& cache_dir)
{
    const GridParams params = default_params(problem);
    if (cache_dir.empty()) return build_reference(problem, params);
    namespace fs = std::filesystem;
    const fs::path file = fs::path(cache_dir) / cache_file_name(problem, params);
    if (fs::exists(file)) {
        try {
            CachedGrid c = load_grid(file.string());
            if (c.problem == problem && c.params == params) return std::move(c.grid);
        } catch (const std::exception&) {
            // Unreadable cache entries are rebuilt below.
        }
    }
    ReferenceGrid g = build_reference(problem, params);
    fs::create_directories(cache_dir);
    const fs::path tmp = file.string() + ".tmp";
    save_grid(tmp.string(), problem, params, g);
    fs::rename(tmp, file);
    return g;
}

}  // namespace atpinn::oracle
