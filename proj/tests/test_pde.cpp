#include "atpinn/pde.hpp"
#include "atpinn/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace atpinn;
using std::numbers::pi;

namespace {

Tensor interior_points(const pde::DomainBox& dom, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Tensor x({n, dom.dim()});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < dom.dim(); ++i) x.at(r, i) = uniform(rng, dom.lo[i], dom.hi[i]);
    }
    return x;
}

nn::MlpParams test_params(std::size_t dim, std::uint64_t seed)
{
    nn::MlpParams p = nn::init_params(nn::mlp_layout(dim, 3, 10), seed);
    Rng rng(seed + 7);
    for (auto& b : p.biases) {
        for (double& v : b.values()) v = uniform(rng, -0.5, 0.5);
    }
    return p;
}

// Network value and pure derivatives at one point, computed from the tape
// bundle; the residual formulas below are then evaluated independently.
struct PointDerivs {
    double u, ux, uxx, uy, uyy;
};

std::vector<PointDerivs> bundle_at(const nn::MlpParams& p, const Tensor& x)
{
    ad::Tape tape;
    const auto pv = nn::bind_params(tape, p, false);
    const auto b = nn::forward_with_derivs(pv, tape.leaf(x));
    std::vector<PointDerivs> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out[r].u = b.u.value()[r];
        out[r].ux = b.du[0].value()[r];
        out[r].uxx = b.d2u[0].value()[r];
        out[r].uy = x.cols() > 1 ? b.du[1].value()[r] : 0.0;
        out[r].uyy = x.cols() > 1 ? b.d2u[1].value()[r] : 0.0;
    }
    return out;
}

// Fourth-order central second difference in long double.
long double second_difference(const std::function<long double(long double)>& f, long double x, long double h)
{
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

}  // namespace

TEST_CASE("domain box contains and clips")
{
    const pde::DomainBox box({-1.0, 0.0}, {1.0, 1.0});
    CHECK(box.dim() == 2);
    CHECK(box.width(0) == 2.0);
    const std::vector<double> in{0.5, 0.5};
    const std::vector<double> out{1.5, -0.2};
    CHECK(box.contains(in));
    CHECK_FALSE(box.contains(out));
    std::vector<double> p = out;
    box.clip(p);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
    CHECK_THROWS(pde::DomainBox({1.0}, {0.0}));
    CHECK_THROWS(pde::DomainBox({0.0, 0.0}, {1.0}));
}

TEST_CASE("problem registry")
{
    for (const auto& name : pde::problem_names()) {
        const pde::PdeProblem p = pde::problem_by_name(name);
        CHECK(p.name == name);
        CHECK(p.axis_names.size() == p.domain.dim());
        CHECK(p.second_order.size() == p.domain.dim());
    }
    CHECK_THROWS(pde::problem_by_name("heat"));
    const auto poisson = pde::poisson_problem();
    CHECK(poisson.exact_solution.has_value());
    CHECK(poisson.domain.lo == std::vector<double>{-1.0, -1.0});
    const auto multiscale = pde::multiscale_problem();
    CHECK(multiscale.metric == pde::MetricKind::ResidualMse);
    CHECK(multiscale.domain.hi[0] == doctest::Approx(pi));
    CHECK(pde::allen_cahn_problem().time_dependent);
    CHECK(pde::burgers_problem().axis_names.back() == "t");
}

TEST_CASE("poisson source is minus the Laplacian of the exact solution")
{
    using namespace pde::closed_form;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        const long double x = uniform(rng, -1.0, 1.0), y = uniform(rng, -1.0, 1.0);
        const long double h = 1e-3L;
        const long double uxx = second_difference([&](long double s) { return (long double)poisson_u(double(s), double(y)); }, x, h);
        const long double uyy = second_difference([&](long double s) { return (long double)poisson_u(double(x), double(s)); }, y, h);
        const double f = poisson_f(double(x), double(y));
        CHECK(std::abs(f + double(uxx + uyy)) < 1e-4 * (1.0 + std::abs(f)));
    }
    CHECK(poisson_u(0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(poisson_u(0.8, -1.0) == doctest::Approx(1.0 - std::exp(-400.0) - std::exp(-4.0) - std::exp(-324.0)).epsilon(1e-12));
}

TEST_CASE("closed-form initial conditions and coefficients")
{
    using namespace pde::closed_form;
    CHECK(burgers_initial(0.5) == doctest::Approx(-1.0));
    CHECK(std::abs(burgers_initial(1.0)) < 1e-15);
    CHECK(allen_cahn_initial(1.0) == doctest::Approx(-1.0));
    CHECK(allen_cahn_initial(0.0) == 0.0);
    CHECK(multiscale_kappa(0.0) == doctest::Approx(2.0));
    const double h = 1e-6;
    for (double x : {0.1, 0.7, 2.3}) {
        CHECK(multiscale_kappa_prime(x) ==
              doctest::Approx((multiscale_kappa(x + h) - multiscale_kappa(x - h)) / (2 * h)).epsilon(1e-7));
    }
    CHECK(kBurgersViscosity == doctest::Approx(0.01 / pi));
}

TEST_CASE("poisson residual matches the operator applied to the network")
{
    const auto prob = pde::poisson_problem();
    const auto params = test_params(2, 1);
    const Tensor x = interior_points(prob.domain, 25, 2);
    const auto r = pde::residual_values(prob, params, x);
    const auto d = bundle_at(params, x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double expect = -(d[i].uxx + d[i].uyy) - pde::closed_form::poisson_f(x.at(i, 0), x.at(i, 1));
        CHECK(std::abs(r[i] - expect) < 1e-9 * (1.0 + std::abs(expect)));
    }
}

TEST_CASE("burgers, multiscale and allen-cahn residual formulas")
{
    using namespace pde::closed_form;
    SUBCASE("burgers")
    {
        const auto prob = pde::burgers_problem();
        const auto params = test_params(2, 3);
        const Tensor x = interior_points(prob.domain, 20, 4);
        const auto r = pde::residual_values(prob, params, x);
        const auto d = bundle_at(params, x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double expect = d[i].uy + d[i].u * d[i].ux - (0.01 / pi) * d[i].uxx;
            CHECK(std::abs(r[i] - expect) < 1e-12);
        }
    }
    SUBCASE("allen-cahn")
    {
        const auto prob = pde::allen_cahn_problem();
        const auto params = test_params(2, 5);
        const Tensor x = interior_points(prob.domain, 20, 6);
        const auto r = pde::residual_values(prob, params, x);
        const auto d = bundle_at(params, x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double u = d[i].u;
            const double expect = d[i].uy - 1e-4 * d[i].uxx - 5.0 * (u - u * u * u);
            CHECK(std::abs(r[i] - expect) < 1e-12);
        }
    }
    SUBCASE("multiscale")
    {
        const auto prob = pde::multiscale_problem();
        const auto params = test_params(1, 7);
        const Tensor x = interior_points(prob.domain, 20, 8);
        const auto r = pde::residual_values(prob, params, x);
        const auto d = bundle_at(params, x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double s = x.at(i, 0);
            // -(kappa u')' - sin x
            const double expect = -(multiscale_kappa_prime(s) * d[i].ux + multiscale_kappa(s) * d[i].uxx) - std::sin(s);
            CHECK(std::abs(r[i] - expect) < 1e-10 * (1.0 + std::abs(expect)));
        }
    }
}

TEST_CASE("residual is chunk-size independent")
{
    const auto prob = pde::allen_cahn_problem();
    const auto params = test_params(2, 9);
    const Tensor x = interior_points(prob.domain, 37, 10);
    const auto a = pde::residual_values(prob, params, x, 1000);
    const auto b = pde::residual_values(prob, params, x, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12 * (1.0 + std::abs(a[i])));
    CHECK(pde::residual_values(prob, params, x, 5) == b);
}

TEST_CASE("out-of-domain points are rejected")
{
    const auto prob = pde::poisson_problem();
    const auto params = test_params(2, 1);
    Tensor x = interior_points(prob.domain, 3, 1);
    x.at(1, 0) = 1.0 + 1e-9;
    CHECK_THROWS_AS(pde::residual_values(prob, params, x), std::out_of_range);
    x.at(1, 0) = 1.0 + 1e-13;
    CHECK_NOTHROW(pde::residual_values(prob, params, x));
    CHECK_THROWS_AS(pde::residual_values(prob, params, Tensor({3, 3})), ShapeError);
}

TEST_CASE("poisson boundary points lie on the square and carry exact values")
{
    const auto prob = pde::poisson_problem();
    const auto b = prob.sample_boundary(200, 17);
    REQUIRE(b.points.shape() == Shape{200, 2});
    int faces[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < 200; ++i) {
        const double x = b.points.at(i, 0), y = b.points.at(i, 1);
        CHECK((std::abs(x) == 1.0 || std::abs(y) == 1.0));
        CHECK(b.targets[i] == pde::closed_form::poisson_u(x, y));
        if (y == -1.0) ++faces[0];
        if (x == 1.0) ++faces[1];
        if (y == 1.0) ++faces[2];
        if (x == -1.0) ++faces[3];
    }
    for (int f : faces) CHECK(f >= 50);
    const auto again = prob.sample_boundary(200, 17);
    CHECK(again.points == b.points);
}

TEST_CASE("evolution boundaries split between initial line and walls")
{
    for (const auto& prob : {pde::burgers_problem(), pde::allen_cahn_problem()}) {
        CAPTURE(prob.name);
        const auto b = prob.sample_boundary(101, 3);
        std::size_t initial = 0, left = 0, right = 0;
        for (std::size_t i = 0; i < 101; ++i) {
            const double x = b.points.at(i, 0), t = b.points.at(i, 1);
            CHECK(prob.domain.contains(std::vector<double>{x, t}));
            if (t == 0.0) {
                ++initial;
                const double expect = prob.name == "burgers" ? pde::closed_form::burgers_initial(x)
                                                             : pde::closed_form::allen_cahn_initial(x);
                CHECK(b.targets[i] == expect);
            } else {
                CHECK((x == -1.0 || x == 1.0));
                CHECK(b.targets[i] == 0.0);
                (x < 0 ? left : right)++;
            }
        }
        CHECK(initial == 51);
        CHECK(left == 25);
        CHECK(right == 25);
        CHECK(b.points.at(0, 0) == -1.0);
        CHECK(b.points.at(1, 0) == 1.0);
    }
}

TEST_CASE("multiscale boundary is the two endpoints")
{
    const auto b = pde::multiscale_problem().sample_boundary(100, 1);
    REQUIRE(b.points.shape() == Shape{2, 1});
    CHECK(b.points[0] == 0.0);
    CHECK(b.points[1] == doctest::Approx(pi));
    CHECK(b.targets == std::vector<double>{0.0, 0.0});
}

namespace {

// Hyper-dual evaluation of exp(-100 (s - c)²) giving the value and second
// derivative without the hand-derived closed form.
struct Hd {
    long double a, b, c, d;
};
Hd hd_mul(Hd x, Hd y) { return {x.a * y.a, x.a * y.b + x.b * y.a, x.a * y.c + x.c * y.a, x.a * y.d + x.b * y.c + x.c * y.b + x.d * y.a}; }
Hd hd_exp(Hd x)
{
    const long double e = std::exp(x.a);
    return {e, e * x.b, e * x.c, e * (x.d + x.b * x.c)};
}
long double gaussian_dd(long double s, long double c)
{
    const Hd d{s - c, 1, 1, 0};
    const Hd sq = hd_mul(d, d);
    return hd_exp({-100 * sq.a, -100 * sq.b, -100 * sq.c, -100 * sq.d}).d;
}

nn::MlpParams zero_params(std::size_t dim)
{
    nn::MlpParams p = nn::init_params(nn::mlp_layout(dim, 2, 4), 0);
    for (auto& w : p.weights) w.fill(0.0);
    return p;
}

}  // namespace

TEST_CASE("poisson exact solution values")
{
    using pde::closed_form::poisson_u;
    for (double x : {-0.9, -0.3, 0.0, 0.55, 1.0}) CHECK(poisson_u(x, x) == 0.0);
    CHECK(poisson_u(0.8, 0.4) == doctest::Approx(1.0).epsilon(5e-5));
    CHECK(std::abs(poisson_u(0.8, 0.4) - 1.0) < 1e-6);
}

TEST_CASE("poisson forcing agrees with symbolic second derivatives at 1000 points")
{
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const double x = uniform(rng, -1.0, 1.0), y = uniform(rng, -1.0, 1.0);
        long double lap = 0;
        for (long double c : {-0.8L, 0.0L, 0.8L}) lap += gaussian_dd(x, c) - gaussian_dd(y, c);
        const double f = pde::closed_form::poisson_f(x, y);
        CHECK(std::abs(f + double(lap)) <= 1e-9 * std::max(1.0, std::abs(f)));
    }
}

TEST_CASE("multiscale coefficient values")
{
    using namespace pde::closed_form;
    CHECK(multiscale_kappa(pi / 2) == doctest::Approx(0.5 * std::sin(4 * pi * pi) + 3.0).epsilon(1e-14));
    CHECK(multiscale_kappa(pi / 2) == doctest::Approx(3.4893).epsilon(1e-4));
    CHECK(multiscale_kappa_prime(0.0) == doctest::Approx(4 * pi + 1).epsilon(1e-14));
    CHECK(allen_cahn_initial(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(allen_cahn_initial(0.5)) < 1e-16);
}

TEST_CASE("the zero function solves the homogeneous evolution problems")
{
    for (const auto& prob : {pde::burgers_problem(), pde::allen_cahn_problem()}) {
        const Tensor x = interior_points(prob.domain, 50, 1);
        for (double r : pde::residual_values(prob, zero_params(2), x)) CHECK(r == 0.0);
    }
}

TEST_CASE("residual evaluation is total and repeatable")
{
    for (const auto& name : pde::problem_names()) {
        const auto prob = pde::problem_by_name(name);
        const auto params = nn::init_params(nn::mlp_layout(prob.domain.dim(), 8, 20), 4);
        const Tensor x = interior_points(prob.domain, 1, 5);
        const auto a = pde::residual_values(prob, params, x);
        REQUIRE(a.size() == 1);
        CHECK(std::isfinite(a[0]));
        CHECK(pde::residual_values(prob, params, x) == a);
    }
}
