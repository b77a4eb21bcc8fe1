#include "atpinn/sampling.hpp"

#include "atpinn/errors.hpp"
#include "atpinn/text.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace atpinn::sampling {

namespace {
constexpr const char* kOriginNames[] = {"lhs", "uniform", "rar", "sais", "adversarial", "boundary"};

std::vector<double> abs_values(std::vector<double> v)
{
    for (double& x : v) x = std::abs(x);
    return v;
}

Tensor rows_of(const Tensor& points, std::span<const std::size_t> indices)
{
    const std::size_t d = points.cols();
    Tensor out({indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(points.data() + indices[i] * d, d, out.data() + i * d);
    }
    return out;
}
}  // namespace

const char* origin_name(Origin origin) { return kOriginNames[static_cast<int>(origin)]; }

Origin origin_from_name(const std::string& name)
{
    for (int i = 0; i < 6; ++i) {
        if (name == kOriginNames[i]) return static_cast<Origin>(i);
    }
    throw std::invalid_argument("unknown sample origin '" + name + "'");
}

SampleSet::SampleSet(Tensor pts, std::size_t k, Origin o) : points(std::move(pts))
{
    if (points.rank() != 2) throw ShapeError("sample points must be a matrix, got " + shape_str(points.shape()));
    iteration.assign(points.rows(), k);
    origin.assign(points.rows(), o);
}

void SampleSet::append(const SampleSet& other)
{
    if (other.empty()) return;
    if (empty()) {
        *this = other;
        return;
    }
    if (other.dim() != dim()) throw ShapeError("cannot append samples of a different dimension");
    const std::size_t d = dim();
    std::vector<double> data = std::move(points.storage());
    data.insert(data.end(), other.points.values().begin(), other.points.values().end());
    iteration.insert(iteration.end(), other.iteration.begin(), other.iteration.end());
    origin.insert(origin.end(), other.origin.begin(), other.origin.end());
    points = Tensor({iteration.size(), d}, std::move(data));
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const
{
    SampleSet out;
    out.points = rows_of(points, indices);
    out.iteration.reserve(indices.size());
    out.origin.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw std::out_of_range("sample index out of range");
        out.iteration.push_back(iteration[i]);
        out.origin.push_back(origin[i]);
    }
    return out;
}

void SampleSet::validate() const
{
    if (iteration.size() != origin.size()) throw std::logic_error("sample tags out of sync");
    if (empty()) return;
    if (points.rank() != 2 || points.rows() != size()) throw ShapeError("sample points do not match tag count");
    if (!points.all_finite()) throw NumericalError("sample points are not finite");
}

void AttackConfig::validate() const
{
    if (!(epsilon > 0.0)) throw std::invalid_argument("attack epsilon must be positive");
    if (!(eta > 0.0)) throw std::invalid_argument("attack eta must be positive");
    if (steps < 1) throw std::invalid_argument("attack steps must be at least 1");
    if (!(revisit >= 0.0) || !std::isfinite(revisit)) throw std::invalid_argument("revisit depth must be >= 0");
}

ObjectiveFn abs_residual_objective(const pde::PdeProblem& problem, const nn::MlpParams& params, std::size_t chunk)
{
    return [&problem, &params, chunk](const Tensor& points) {
        pde::check_in_domain(problem.domain, points);
        const std::size_t n = points.rows();
        const std::size_t d = points.cols();
        ObjectiveEval out;
        out.values.reserve(n);
        out.grad = Tensor({n, d});
        ad::Tape tape;
        tape.set_check_finite(false);
        for (std::size_t begin = 0; begin < n; begin += chunk) {
            const std::size_t len = std::min(chunk, n - begin);
            Tensor block({len, d});
            std::copy_n(points.data() + begin * d, len * d, block.data());
            tape.clear();
            const nn::ParamVars pv = nn::bind_params(tape, params, false);
            const ad::Var x = tape.leaf(std::move(block), true);
            const ad::Var r = ad::abs(pde::residual_batch(problem, pv, x));
            tape.backward(ad::sum(r));
            out.values.insert(out.values.end(), r.value().values().begin(), r.value().values().end());
            std::copy_n(x.grad().data(), len * d, out.grad.data() + begin * d);
        }
        return out;
    };
}

ScoreFn abs_residual_score(const pde::PdeProblem& problem, const nn::MlpParams& params, std::size_t chunk)
{
    return [&problem, &params, chunk](const Tensor& points) {
        return abs_values(pde::residual_values(problem, params, points, chunk));
    };
}

std::vector<std::size_t> top_n(std::span<const double> scores, std::size_t n)
{
    if (n > scores.size()) {
        throw std::invalid_argument("cannot select " + std::to_string(n) + " of " + std::to_string(scores.size()) +
                                    " candidates");
    }
    std::vector<double> key(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw NumericalError("non-finite score at candidate " + std::to_string(i));
        key[i] = std::abs(scores[i]);
    }
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(n), idx.end(), [&](std::size_t a, std::size_t b) {
        return key[a] > key[b] || (key[a] == key[b] && a < b);
    });
    idx.resize(n);
    return idx;
}

SampleSet lhs(std::size_t n, const pde::DomainBox& domain, std::uint64_t seed, std::size_t k)
{
    if (n == 0) throw std::invalid_argument("lhs: n must be positive");
    Rng rng(seed);
    const std::size_t d = domain.dim();
    Tensor pts({n, d});
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        // Fisher–Yates with our own draws so the result does not depend on
        // the standard library's shuffle.
        for (std::size_t i = n; i > 1; --i) {
            const auto r = std::size_t(uniform01(rng) * double(i));
            std::swap(perm[i - 1], perm[std::min(r, i - 1)]);
        }
        const double w = domain.width(j) / double(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = domain.lo[j] + (double(perm[i]) + uniform01(rng)) * w;
            pts.at(i, j) = std::min(v, domain.hi[j]);
        }
    }
    return SampleSet(std::move(pts), k, Origin::Lhs);
}

SampleSet uniform(std::size_t n, const pde::DomainBox& domain, std::uint64_t seed, std::size_t k)
{
    if (n == 0) throw std::invalid_argument("uniform: n must be positive");
    Rng rng(seed);
    const std::size_t d = domain.dim();
    Tensor pts({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) pts.at(i, j) = atpinn::uniform(rng, domain.lo[j], domain.hi[j]);
    }
    return SampleSet(std::move(pts), k, Origin::Uniform);
}

SampleSet rar_select(double K, std::size_t n, const pde::DomainBox& domain, const ScoreFn& score, std::uint64_t seed,
                     std::size_t k)
{
    if (!(K > 1.0)) throw std::invalid_argument("rar: candidate factor K must exceed 1");
    if (n == 0) throw std::invalid_argument("rar: n must be positive");
    const auto m = std::size_t(std::floor(K * double(n)));
    const SampleSet cand = uniform(m, domain, seed, k);
    const std::vector<double> s = score(cand.points);
    if (s.size() != m) throw ShapeError("rar: score returned the wrong number of values");
    SampleSet out = cand.subset(top_n(s, n));
    std::fill(out.origin.begin(), out.origin.end(), Origin::Rar);
    return out;
}

GaussianFit fit_gaussian(const Tensor& elite)
{
    if (elite.rank() != 2 || elite.rows() < 1) throw ShapeError("fit_gaussian: need a non-empty point matrix");
    const std::size_t n = elite.rows();
    const std::size_t d = elite.cols();
    GaussianFit fit;
    fit.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) fit.mean[j] += elite.at(i, j);
    }
    for (double& m : fit.mean) m /= double(n);
    fit.covariance.assign(d * d, 0.0);
    if (n > 1) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < d; ++a) {
                const double da = elite.at(i, a) - fit.mean[a];
                for (std::size_t b = 0; b < d; ++b) fit.covariance[a * d + b] += da * (elite.at(i, b) - fit.mean[b]);
            }
        }
        for (double& c : fit.covariance) c /= double(n - 1);
    }
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
        fit.covariance.data(), Eigen::Index(d), Eigen::Index(d));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        for (std::size_t a = 0; a < d; ++a) fit.covariance[a * d + a] += 1e-6;
        fit.regularized = true;
    }
    return fit;
}

Tensor sample_truncated_gaussian(const GaussianFit& fit, std::size_t n, const pde::DomainBox& domain, Rng& rng)
{
    const std::size_t d = domain.dim();
    if (fit.mean.size() != d || fit.covariance.size() != d * d) throw ShapeError("gaussian fit does not match domain");
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
        fit.covariance.data(), Eigen::Index(d), Eigen::Index(d));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("gaussian covariance is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor out({n, d});
    Eigen::VectorXd z{Eigen::Index(d)}, x{Eigen::Index(d)};
    const std::size_t cap = 1000 * n;
    std::size_t attempts = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (true) {
            for (std::size_t j = 0; j < d; ++j) z[Eigen::Index(j)] = normal(rng);
            x = L * z;
            for (std::size_t j = 0; j < d; ++j) x[Eigen::Index(j)] += fit.mean[j];
            ++attempts;
            const std::span<const double> p(x.data(), d);
            if (domain.contains(p)) break;
            if (attempts >= cap) {
                domain.clip(std::span<double>(x.data(), d));
                break;
            }
        }
        std::copy_n(x.data(), d, out.data() + i * d);
    }
    return out;
}

SampleSet sais_step(const SaisConfig& config, const pde::DomainBox& domain, const ScoreFn& score, std::uint64_t seed,
                    std::size_t k, std::size_t n_out)
{
    if (!(config.p0 > 0.0 && config.p0 < 1.0)) throw std::invalid_argument("sais: p0 must lie in (0, 1)");
    if (config.max_rounds < 1) throw std::invalid_argument("sais: at least one round required");
    if (config.n_per_round < 1) throw std::invalid_argument("sais: n_per_round must be positive");
    if (n_out == 0) n_out = config.n_per_round;
    const auto n_elite = std::size_t(std::ceil(config.p0 * double(config.n_per_round)));
    Rng rng(seed);
    GaussianFit fit;
    Tensor draw;
    for (std::size_t round = 0; round < config.max_rounds; ++round) {
        const bool last = round + 1 == config.max_rounds;
        const std::size_t n = last ? n_out : config.n_per_round;
        if (round == 0) {
            draw = uniform(n, domain, derive_seed(seed, 0), k).points;
        } else {
            draw = sample_truncated_gaussian(fit, n, domain, rng);
        }
        if (last) break;
        const std::vector<double> s = score(draw);
        if (s.size() != n) throw ShapeError("sais: score returned the wrong number of values");
        const std::vector<std::size_t> elite = top_n(s, n_elite);
        fit = fit_gaussian(rows_of(draw, elite));
    }
    return SampleSet(std::move(draw), k, Origin::Sais);
}

PgdResult pinn_pgd(const Tensor& x0, const ObjectiveFn& objective, const AttackConfig& config,
                   const pde::DomainBox& domain, std::uint64_t seed)
{
    config.validate();
    const std::size_t d = domain.dim();
    if (x0.rank() != 2 || x0.cols() != d) throw ShapeError("pgd: points must be n x " + std::to_string(d));
    pde::check_in_domain(domain, x0);
    const std::size_t n = x0.rows();
    const double eps = config.epsilon;

    Tensor x = x0;
    if (config.random_init) {
        Rng rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) x.at(i, j) += atpinn::uniform(rng, -eps, eps);
            domain.clip(x.values().subspan(i * d, d));
        }
    }

    PgdResult result;
    Tensor g0({n, d}, 0.0);
    Tensor probe({n, d});
    for (std::size_t t = 0; t < config.steps; ++t) {
        // The gradient is taken at the current iterate, projected onto the
        // domain so the residual stays defined.
        for (std::size_t i = 0; i < n * d; ++i) probe[i] = x[i] + g0[i];
        for (std::size_t i = 0; i < n; ++i) domain.clip(probe.values().subspan(i * d, d));
        const ObjectiveEval ev = objective(probe);
        if (ev.grad.numel() != n * d) throw ShapeError("pgd: objective gradient has the wrong shape");
        for (std::size_t i = 0; i < n; ++i) {
            const double* g = ev.grad.data() + i * d;
            bool finite = true;
            for (std::size_t j = 0; j < d; ++j) finite = finite && std::isfinite(g[j]);
            if (!finite) {
                ++result.skipped_steps;
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) {
                const double s = g[j] > 0.0 ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
                g0.at(i, j) = std::clamp(g0.at(i, j) + config.eta * s, -eps, eps);
            }
        }
    }
    for (std::size_t i = 0; i < n * d; ++i) x[i] += g0[i];
    for (std::size_t i = 0; i < n; ++i) domain.clip(x.values().subspan(i * d, d));
    result.points = std::move(x);
    return result;
}

std::vector<RevisitPlan> revisit_plan(std::size_t k, double revisit)
{
    if (k == 0) throw std::invalid_argument("revisit plan needs k >= 1");
    if (!(revisit >= 0.0) || !std::isfinite(revisit)) throw std::invalid_argument("revisit depth must be >= 0");
    const double whole = std::floor(revisit);
    const double frac = revisit - whole;
    std::vector<RevisitPlan> plan;
    // Iterations k-1 down to k-1-floor(m) in full.
    for (std::size_t back = 0; back <= std::size_t(whole); ++back) {
        if (back + 1 > k) break;
        plan.push_back({k - 1 - back, 1.0});
    }
    // The next older one in part.
    const std::size_t partial_back = std::size_t(whole) + 1;
    if (frac > 0.0 && partial_back + 1 <= k) plan.push_back({k - 1 - partial_back, frac});
    // The initial iteration always in full; it replaces any partial entry.
    auto it = std::find_if(plan.begin(), plan.end(), [](const RevisitPlan& p) { return p.iteration == 0; });
    if (it == plan.end()) {
        plan.push_back({0, 1.0});
    } else {
        it->fraction = 1.0;
    }
    return plan;
}

CandidateResult at_pinn_candidates(std::span<const SampleSet> history, const AttackConfig& config,
                                   const ObjectiveFn& objective, const pde::DomainBox& domain, std::size_t n_k,
                                   std::uint64_t seed, const Tensor& extra_seeds)
{
    config.validate();
    if (history.empty()) throw std::invalid_argument("at_pinn_candidates: empty history");
    const std::size_t k = history.size();
    const std::size_t d = domain.dim();

    std::vector<double> seeds;
    for (const RevisitPlan& p : revisit_plan(k, config.revisit)) {
        const SampleSet& s = history[p.iteration];
        if (s.empty()) continue;
        if (s.dim() != d) throw ShapeError("history samples do not match the domain dimension");
        std::vector<std::size_t> idx(s.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (p.fraction < 1.0) {
            Rng rng(derive_seed(seed, 1000 + p.iteration));
            for (std::size_t i = idx.size(); i > 1; --i) {
                const auto r = std::size_t(uniform01(rng) * double(i));
                std::swap(idx[i - 1], idx[std::min(r, i - 1)]);
            }
            idx.resize(std::size_t(std::llround(p.fraction * double(s.size()))));
            std::sort(idx.begin(), idx.end());
        }
        for (std::size_t i : idx) {
            const auto r = s.row(i);
            seeds.insert(seeds.end(), r.begin(), r.end());
        }
    }
    if (extra_seeds.numel() > 0) {
        if (extra_seeds.rank() != 2 || extra_seeds.cols() != d) throw ShapeError("extra attack seeds have the wrong shape");
        seeds.insert(seeds.end(), extra_seeds.values().begin(), extra_seeds.values().end());
    }
    const std::size_t m = seeds.size() / d;
    if (n_k > m) {
        throw std::invalid_argument("at_pinn_candidates: n_k = " + std::to_string(n_k) + " exceeds " +
                                    std::to_string(m) + " candidates");
    }

    CandidateResult out;
    out.candidate_count = m;
    const PgdResult adv = pinn_pgd(Tensor({m, d}, std::move(seeds)), objective, config, domain, seed);
    out.skipped_steps = adv.skipped_steps;
    const ObjectiveEval ev = objective(adv.points);
    const std::vector<std::size_t> pick = top_n(ev.values, n_k);
    out.selected = SampleSet(rows_of(adv.points, pick), k, Origin::Adversarial);
    return out;
}

void write_samples_csv(std::ostream& out, const SampleSet& samples, std::span<const std::string> axis_names)
{
    samples.validate();
    const std::size_t d = samples.empty() ? axis_names.size() : samples.dim();
    if (axis_names.size() != d) throw std::invalid_argument("axis names do not match the sample dimension");
    for (const auto& a : axis_names) out << a << ',';
    out << "iteration,origin\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out << text::format_double(samples.points.at(i, j)) << ',';
        out << samples.iteration[i] << ',' << origin_name(samples.origin[i]) << '\n';
    }
}

SampleSet read_samples_csv(std::istream& in, std::vector<std::string>* axis_names)
{
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("samples csv: missing header");
    const auto header = text::split(line, ',');
    if (header.size() < 3 || header[header.size() - 2] != "iteration" || header.back() != "origin") {
        throw std::runtime_error("samples csv: bad header '" + line + "'");
    }
    const std::size_t d = header.size() - 2;
    if (axis_names) axis_names->assign(header.begin(), header.begin() + std::ptrdiff_t(d));
    SampleSet s;
    std::vector<double> data;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != d + 2) throw std::runtime_error("samples csv: wrong field count on line " + std::to_string(lineno));
        for (std::size_t j = 0; j < d; ++j) data.push_back(text::parse_double(f[j]));
        s.iteration.push_back(std::size_t(text::parse_int(f[d])));
        s.origin.push_back(origin_from_name(std::string(text::trim(f[d + 1]))));
    }
    s.points = Tensor({s.iteration.size(), d}, std::move(data));
    return s;
}

}  // namespace atpinn::sampling
