// Acceptance runner: prints one PASS/FAIL line per requested criterion and
// exits non-zero when any of them fails.

#include "atpinn/errors.hpp"
#include "atpinn/harness.hpp"
#include "atpinn/oracle.hpp"
#include "atpinn/rng.hpp"
#include "atpinn/sampling.hpp"
#include "atpinn/text.hpp"
#include "atpinn/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace atpinn;
namespace fs = std::filesystem;

namespace {

struct Options {
    harness::Profile profile = harness::Profile::Desk;
    std::string work = "acceptance_work";
    std::string cache_dir = ".atpinn_cache";
    std::size_t seeds = 3;
    bool verbose = false;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) { return text::format_double(v); }

std::string short_fmt(double v)
{
    std::ostringstream o;
    o.precision(3);
    o << v;
    return o.str();
}

const std::vector<std::string> kProblems = {"poisson2d", "burgers", "multiscale", "allen_cahn"};

std::string preset_prefix(const std::string& problem)
{
    if (problem == "poisson2d") return "poisson";
    if (problem == "allen_cahn") return "allen-cahn";
    return problem;
}

Tensor random_points(const pde::DomainBox& box, std::size_t n, std::uint64_t seed)
{
    return sampling::uniform(n, box, seed).points;
}

double rel_norm(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

// Brute-force top-n: stable sort by descending score.
std::vector<std::size_t> brute_top(const std::vector<double>& s, std::size_t n)
{
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    idx.resize(n);
    return idx;
}

// ---------------------------------------------------------------- 1

Outcome derivatives(const Options&)
{
    double worst1 = 0, worst2 = 0;
    std::uint64_t seed = 10;
    for (const auto& name : kProblems) {
        const pde::PdeProblem prob = pde::problem_by_name(name);
        const std::size_t d = prob.domain.dim();
        const nn::MlpParams p = nn::init_params(nn::mlp_layout(d, 8, 20), ++seed);
        // Keep central differences inside the domain.
        std::vector<double> lo = prob.domain.lo, hi = prob.domain.hi;
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] += 1e-3;
            hi[j] -= 1e-3;
        }
        const Tensor x = random_points(pde::DomainBox(lo, hi), 100, ++seed);
        ad::Tape tape;
        const auto b = nn::forward_with_derivs(nn::bind_params(tape, p, false), tape.leaf(x));
        const auto u0 = nn::forward(p, x);
        const double h = 1e-4;
        for (std::size_t j = 0; j < d; ++j) {
            Tensor xp = x, xm = x;
            for (std::size_t r = 0; r < x.rows(); ++r) {
                xp.at(r, j) += h;
                xm.at(r, j) -= h;
            }
            const auto up = nn::forward(p, xp), um = nn::forward(p, xm);
            std::vector<double> fd1(x.rows()), fd2(x.rows()), ad1(x.rows()), ad2(x.rows());
            for (std::size_t r = 0; r < x.rows(); ++r) {
                fd1[r] = (up[r] - um[r]) / (2 * h);
                fd2[r] = (up[r] - 2 * u0[r] + um[r]) / (h * h);
                ad1[r] = b.du[j].value()[r];
                ad2[r] = b.d2u[j].value()[r];
            }
            worst1 = std::max(worst1, rel_norm(ad1, fd1));
            worst2 = std::max(worst2, rel_norm(ad2, fd2));
        }
    }
    return {worst1 < 1e-5 && worst2 < 1e-4,
            "worst relative error first " + short_fmt(worst1) + " (< 1e-5), second " + short_fmt(worst2) + " (< 1e-4)"};
}

// ---------------------------------------------------------------- 2

Outcome parameter_gradient(const Options&)
{
    double worst = 0;
    std::uint64_t seed = 40;
    for (const auto& name : kProblems) {
        const pde::PdeProblem prob = pde::problem_by_name(name);
        nn::MlpParams p = nn::init_params(nn::mlp_layout(prob.domain.dim(), 2, 5), ++seed);
        Rng rng(++seed);
        for (auto& bias : p.biases)
            for (double& v : bias.values()) v = uniform(rng, -0.3, 0.3);
        const Tensor x = random_points(prob.domain, 64, ++seed);
        const pde::BoundaryData bd = prob.sample_boundary(16, ++seed);

        ad::Tape tape;
        const auto pv = nn::bind_params(tape, p, true);
        tape.backward(training::pinn_loss(tape, prob, pv, x, bd, 1.5));
        const auto grad = nn::collect_gradient(pv);

        auto loss_at = [&](const std::vector<double>& flat) {
            nn::MlpParams q = p;
            q.assign_flat(flat);
            ad::Tape t;
            return training::pinn_loss(t, prob, nn::bind_params(t, q, false), x, bd, 1.5).value().item();
        };
        const auto flat = p.flatten();
        std::vector<std::size_t> idx(flat.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(20);
        std::vector<double> ad_g, fd_g;
        const double h = 1e-6;
        for (std::size_t i : idx) {
            auto fp = flat, fm = flat;
            fp[i] += h;
            fm[i] -= h;
            fd_g.push_back((loss_at(fp) - loss_at(fm)) / (2 * h));
            ad_g.push_back(grad[i]);
        }
        worst = std::max(worst, rel_norm(ad_g, fd_g));
    }
    return {worst < 1e-4, "worst relative error " + short_fmt(worst) + " over 4 problems (< 1e-4)"};
}

// ---------------------------------------------------------------- 3

Outcome pgd_toy(const Options&)
{
    const pde::DomainBox unit({0.0}, {1.0});
    const sampling::ObjectiveFn objective = [](const Tensor& x) {
        sampling::ObjectiveEval ev;
        ev.grad = Tensor(x.shape());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double d = x.at(i, 0) - 0.5;
            ev.values.push_back(-d * d);
            ev.grad[i] = -2.0 * d;
        }
        return ev;
    };
    sampling::AttackConfig c;
    c.random_init = false;
    c.eta = 0.05;
    c.steps = 10;
    const Tensor x0 = Tensor::matrix(1, 1, {0.3});
    auto by_hand = [](double eps) {
        double g0 = 0.0;
        for (int t = 0; t < 10; ++t) {
            const double probe = std::clamp(0.3 + g0, 0.0, 1.0);
            const double g = -2.0 * (probe - 0.5);
            g0 = std::clamp(g0 + 0.05 * double((g > 0) - (g < 0)), -eps, eps);
        }
        return std::clamp(0.3 + g0, 0.0, 1.0);
    };
    c.epsilon = 0.15;
    const double a = sampling::pinn_pgd(x0, objective, c, unit, 1).points[0];
    c.epsilon = 0.5;
    const double b = sampling::pinn_pgd(x0, objective, c, unit, 1).points[0];
    const bool ok = a == by_hand(0.15) && b == by_hand(0.5) && std::abs(a - 0.45) < 1e-15 && std::abs(b - 0.5) < 1e-15;
    return {ok, "x_adv " + fmt(a) + " (eps 0.15), " + fmt(b) + " (eps 0.5)"};
}

// ---------------------------------------------------------------- 4

Outcome ascent(const Options& opt)
{
    const std::size_t k0_epochs = 2000;
    std::ostringstream detail;
    bool ok = true;
    for (const auto& name : kProblems) {
        const pde::PdeProblem prob = pde::problem_by_name(name);
        harness::ConfigDoc doc;
        doc.set("experiment.preset", preset_prefix(name) + "-at-pinn");
        const harness::ExperimentConfig ec = harness::resolve_config(doc);
        std::size_t passed = 0;
        for (std::size_t s = 0; s < opt.seeds; ++s) {
            training::TrainConfig tc = ec.train;
            tc.iterations = 0;
            tc.samples.resize(1);
            tc.epochs = {k0_epochs};
            tc.seed = s;
            const training::TrainResult tr = training::run_iterative_training(prob, tc);
            const Tensor& seeds = tr.history[0].points;
            const auto obj = sampling::abs_residual_objective(prob, tr.state.params);
            const auto before = obj(seeds).values;
            const auto after =
                obj(sampling::pinn_pgd(seeds, obj, tc.attack, prob.domain, derive_seed(s, 77)).points).values;
            double mb = 0, ma = 0;
            std::size_t up = 0;
            for (std::size_t i = 0; i < before.size(); ++i) {
                mb += before[i];
                ma += after[i];
                up += after[i] >= before[i];
            }
            mb /= double(before.size());
            ma /= double(before.size());
            const double frac = double(up) / double(before.size());
            const bool seed_ok = ma >= mb && frac >= 0.8;
            passed += seed_ok;
            if (opt.verbose) {
                std::cerr << name << " seed " << s << ": mean |r| " << mb << " -> " << ma << ", non-decreasing "
                          << frac << '\n';
            }
            detail << (detail.tellp() ? "; " : "") << name << "/" << s << " " << short_fmt(mb) << "->"
                   << short_fmt(ma) << " (" << short_fmt(100 * frac) << "%)";
        }
        ok = ok && passed == opt.seeds;
    }
    return {ok, detail.str()};
}

// ---------------------------------------------------------------- 5-8 and 12

struct PresetRun {
    std::vector<harness::MetricRow> rows;
    std::string directory;
};

// Runs (or reuses a completed run of) a preset for one seed.
PresetRun run_preset(const Options& opt, const std::string& group, const std::string& preset, std::uint64_t seed,
                     const std::vector<std::string>& overrides = {})
{
    harness::ConfigDoc doc;
    doc.set("experiment.preset", preset);
    doc.set("experiment.profile", harness::profile_name(opt.profile));
    doc.set("evaluation.cache_dir", opt.cache_dir);
    doc.set("evaluation.checkpoints", "false");
    for (const auto& o : overrides) harness::apply_override(doc, o);
    harness::ExperimentConfig c = harness::resolve_config(doc);
    c.seeds = {seed};
    const fs::path dir = fs::path(opt.work) / group / preset / ("seed_" + std::to_string(seed));
    c.output_dir = dir.parent_path().string();

    const fs::path manifest = dir / "manifest.txt";
    if (fs::exists(manifest) && fs::exists(dir / "metrics.csv")) {
        std::ifstream in(manifest);
        std::stringstream s;
        s << in.rdbuf();
        if (s.str().find("status = complete") != std::string::npos &&
            s.str().find(harness::render_config(c)) != std::string::npos) {
            std::ifstream m(dir / "metrics.csv");
            return {harness::read_metrics_csv(m), dir.string()};
        }
    }
    harness::Logger log;
    if (opt.verbose) log = [](const std::string& msg) { std::cerr << "  " << msg << '\n'; };
    return {harness::run_seed(c, seed, dir.string(), log).rows, dir.string()};
}

double metric_at(const PresetRun& r, std::size_t k)
{
    for (const auto& row : r.rows)
        if (row.k == k) return row.metric_value;
    throw std::runtime_error("run " + r.directory + " has no metrics row for k = " + std::to_string(k));
}

std::string seed_list(const std::vector<double>& v)
{
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + short_fmt(x);
    return s;
}

Outcome poisson_comparison(const Options& opt)
{
    std::vector<double> at, un;
    std::size_t wins = 0, in_band = 0;
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        at.push_back(metric_at(run_preset(opt, "c5", "poisson-at-pinn", s), 8));
        un.push_back(metric_at(run_preset(opt, "c5", "poisson-uniform", s), 8));
        wins += at.back() < un.back();
        in_band += at.back() <= 0.5;
    }
    const bool full = opt.profile == harness::Profile::Full;
    const bool ok = wins >= 2 && (!full || in_band >= 2);
    return {ok, std::string(harness::profile_name(opt.profile)) + " profile, k=8 relative L2 at_pinn [" + seed_list(at) +
                    "] uniform [" + seed_list(un) + "]" + (full ? "" : " (ordering only)")};
}

Outcome multiscale_comparison(const Options& opt)
{
    std::vector<double> at, rar, sais;
    std::size_t good = 0;
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        at.push_back(metric_at(run_preset(opt, "c6", "multiscale-at-pinn", s), 29));
        rar.push_back(metric_at(run_preset(opt, "c6", "multiscale-rar", s), 29));
        sais.push_back(metric_at(run_preset(opt, "c6", "multiscale-sais", s), 29));
        good += at.back() <= 1e-2 && at.back() < rar.back() && at.back() < sais.back();
    }
    return {good >= 2, "k=29 residual MSE at_pinn [" + seed_list(at) + "] rar [" + seed_list(rar) + "] sais [" +
                           seed_list(sais) + "]"};
}

Outcome burgers_comparison(const Options& opt)
{
    std::vector<double> at, un;
    std::size_t good = 0, wins = 0;
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        at.push_back(metric_at(run_preset(opt, "c7", "burgers-at-pinn", s), 2));
        un.push_back(metric_at(run_preset(opt, "c7", "burgers-uniform", s), 2));
        good += at.back() <= 1.2e-1;
        wins += at.back() <= un.back();
    }
    return {good >= 2 && wins >= 2,
            "k=2 relative L2 at_pinn [" + seed_list(at) + "] uniform [" + seed_list(un) + "]"};
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome allen_cahn_causality(const Options& opt)
{
    std::ostringstream detail;
    bool ok = true;
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        const PresetRun run = run_preset(opt, "c8", "allen-cahn-at-pinn", s);
        std::vector<double> medians;
        double max_t = 0;
        for (std::size_t k = 1; k <= 4; ++k) {
            std::ifstream in(fs::path(run.directory) / ("samples_" + std::to_string(k) + ".csv"));
            if (!in) throw std::runtime_error("missing samples_" + std::to_string(k) + ".csv in " + run.directory);
            const sampling::SampleSet set = sampling::read_samples_csv(in);
            std::vector<double> t;
            for (std::size_t i = 0; i < set.size(); ++i) t.push_back(set.row(i)[1]);
            medians.push_back(median(t));
            max_t = std::max(max_t, *std::max_element(t.begin(), t.end()));
        }
        bool increasing = true;
        for (std::size_t i = 1; i < medians.size(); ++i) increasing = increasing && medians[i] > medians[i - 1];
        const double err = metric_at(run, 8);
        const bool seed_ok = increasing && max_t > 0.9 && err <= 2e-1;
        ok = ok && seed_ok;
        detail << (s ? "; " : "") << "seed " << s << " median t [" << seed_list(medians) << "] max t "
               << short_fmt(max_t) << " k=8 error " << short_fmt(err);
    }
    return {ok, std::string(harness::profile_name(opt.profile)) + " profile, " + detail.str()};
}

Outcome determinism(const Options& opt)
{
    const std::vector<std::string> presets = {"poisson-at-pinn", "burgers-at-pinn", "multiscale-at-pinn",
                                              "allen-cahn-at-pinn", "poisson-rar", "poisson-sais", "poisson-lhs"};
    std::ostringstream detail;
    bool ok = true;
    for (const auto& p : presets) {
        harness::ConfigDoc doc;
        doc.set("experiment.preset", p);
        const std::size_t iters = harness::resolve_config(doc).train.iterations;
        const std::vector<std::string> overrides = {"training.epochs=20*" + std::to_string(iters + 1),
                                                    "training.baseline_epochs=20"};
        std::string bytes[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = fs::path(opt.work) / "c12" / ("run" + std::to_string(rep));
            fs::remove_all(dir / p);
            Options o = opt;
            o.work = dir.string();
            o.profile = harness::Profile::Full;
            const PresetRun r = run_preset(o, "", p, 7, overrides);
            std::ifstream in(fs::path(r.directory) / "metrics.csv", std::ios::binary);
            std::stringstream s;
            s << in.rdbuf();
            bytes[rep] = s.str();
        }
        const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
        ok = ok && same;
        detail << (detail.tellp() ? ", " : "") << p << (same ? " identical" : " DIFFERENT");
    }
    return {ok, "epochs overridden to 20, seed 7: " + detail.str()};
}

// ---------------------------------------------------------------- 9

Outcome selection_oracles(const Options&)
{
    Rng rng(2024);
    std::size_t mismatches = 0;
    double worst_fit = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 1 + rng() % 3;
        std::vector<double> lo(d), hi(d);
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = uniform(rng, -3, 1);
            hi[j] = lo[j] + uniform(rng, 0.5, 4);
        }
        const pde::DomainBox box(lo, hi);
        // Coarse non-negative scores force plenty of ties.
        const double freq = uniform(rng, 1, 30);
        const int levels = 2 + int(rng() % 20);
        auto score_of = [=](std::span<const double> x) {
            double s = 0;
            for (std::size_t j = 0; j < x.size(); ++j) s += std::sin(freq * x[j] + double(j));
            return std::floor((s + double(x.size())) * levels);
        };
        const sampling::ScoreFn score = [&](const Tensor& x) {
            std::vector<double> v(x.rows());
            for (std::size_t i = 0; i < x.rows(); ++i) v[i] = score_of(x.values().subspan(i * d, d));
            return v;
        };

        // RAR.
        const std::size_t n = 1 + rng() % 40;
        const double K = 1.5 + uniform(rng, 0, 5);
        const std::uint64_t seed = rng();
        const sampling::SampleSet rar = sampling::rar_select(K, n, box, score, seed);
        const sampling::SampleSet cand = sampling::uniform(std::size_t(std::floor(K * double(n))), box, seed);
        const auto pick = brute_top(score(cand.points), n);
        bool same = rar.size() == n;
        for (std::size_t i = 0; same && i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) same = same && rar.row(i)[j] == cand.row(pick[i])[j];
        }
        mismatches += !same;

        // AT-PINN with a flat objective: the attack leaves every seed in place.
        const sampling::ObjectiveFn flat = [&](const Tensor& x) {
            sampling::ObjectiveEval ev;
            ev.values = score(x);
            ev.grad = Tensor(x.shape());
            return ev;
        };
        const std::size_t iters = 1 + rng() % 4;
        std::vector<sampling::SampleSet> history;
        for (std::size_t i = 0; i < iters; ++i) history.push_back(sampling::uniform(5 + rng() % 20, box, rng(), i));
        sampling::AttackConfig ac;
        ac.random_init = false;
        ac.steps = 1 + rng() % 3;
        ac.revisit = double(rng() % 3);
        Tensor extra;
        if (rng() % 2) extra = sampling::uniform(1 + rng() % 6, box, rng()).points;
        std::vector<double> rows;
        for (const auto& plan : sampling::revisit_plan(iters, ac.revisit)) {
            const auto& v = history[plan.iteration].points.values();
            rows.insert(rows.end(), v.begin(), v.end());
        }
        if (extra.rank() == 2) rows.insert(rows.end(), extra.values().begin(), extra.values().end());
        const std::size_t total = rows.size() / d;
        Tensor all({total, d});
        std::copy(rows.begin(), rows.end(), all.values().begin());
        const std::size_t nk = 1 + rng() % total;
        const auto res = sampling::at_pinn_candidates(history, ac, flat, box, nk, rng(), extra);
        const auto apick = brute_top(score(all), nk);
        same = res.candidate_count == total && res.selected.size() == nk;
        for (std::size_t i = 0; same && i < nk; ++i) {
            for (std::size_t j = 0; j < d; ++j) same = same && res.selected.row(i)[j] == all.at(apick[i], j);
        }
        mismatches += !same;

        // SAIS moment fit.
        const std::size_t m = d + 2 + rng() % 60;
        Tensor pts({m, d});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) pts.at(i, j) = uniform(rng, lo[j], hi[j]);
        const sampling::GaussianFit fit = sampling::fit_gaussian(pts);
        std::vector<long double> mean(d, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += pts.at(i, j);
        for (auto& v : mean) v /= (long double)m;
        for (std::size_t a = 0; a < d; ++a) {
            worst_fit = std::max(worst_fit, std::abs(fit.mean[a] - double(mean[a])));
            for (std::size_t b = 0; b < d; ++b) {
                long double c = 0;
                for (std::size_t i = 0; i < m; ++i) c += (pts.at(i, a) - mean[a]) * (pts.at(i, b) - mean[b]);
                c /= (long double)(m - 1);
                worst_fit = std::max(worst_fit, std::abs(fit.covariance[a * d + b] - double(c)));
            }
        }
    }
    return {mismatches == 0 && worst_fit < 1e-12, std::to_string(mismatches) +
                                                      " selection mismatches in 2000 brute-force comparisons, worst "
                                                      "moment error " +
                                                      short_fmt(worst_fit) + " (< 1e-12)"};
}

// ---------------------------------------------------------------- 10

Outcome adam_fixture(const Options&)
{
    nn::MlpParams p = nn::init_params(std::vector<std::size_t>{1, 1, 1}, 0);
    p.assign_flat(std::vector<double>{1.0, 0.0, 0.0, 0.0});
    training::TrainState state(p);
    const training::AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
    long double w = 1, m = 0, v = 0;
    double worst = 0;
    for (int t = 1; t <= 10; ++t) {
        const double g = 2.0 * state.params.flatten()[0];
        training::adam_step(state, std::vector<double>{g, 0.0, 0.0, 0.0}, cfg);
        const long double gl = 2 * w;
        m = 0.9L * m + 0.1L * gl;
        v = 0.999L * v + 0.001L * gl * gl;
        const long double mh = m / (1 - std::pow(0.9L, t));
        const long double vh = v / (1 - std::pow(0.999L, t));
        w -= 0.1L * mh / (std::sqrt(vh) + 1e-8L);
        worst = std::max(worst, std::abs(state.params.flatten()[0] - double(w)));
    }
    training::TrainState fresh(state.params);
    training::reset_momentum(state);
    const std::vector<double> g{0.7, -0.2, 0.1, 0.3};
    training::adam_step(state, g, cfg);
    training::adam_step(fresh, g, cfg);
    const bool reset_ok = state.params == fresh.params && state.adam_m == fresh.adam_m && state.adam_v == fresh.adam_v;
    return {worst < 1e-12 && reset_ok,
            "worst deviation " + short_fmt(worst) + " (< 1e-12), reset " + (reset_ok ? "matches" : "differs from") +
                " a fresh optimizer"};
}

// ---------------------------------------------------------------- 11

Outcome oracle_convergence(const Options&)
{
    // Allen-Cahn: halve the time step and refine the x grid.
    const oracle::AllenCahnOptions base{};
    const oracle::ReferenceGrid ac = oracle::allen_cahn_reference(base);
    const oracle::ReferenceGrid ac_t = oracle::allen_cahn_reference({base.output_points, base.x_refine, base.t_refine * 2});
    const oracle::ReferenceGrid ac_x = oracle::allen_cahn_reference({base.output_points, base.x_refine * 2, base.t_refine});
    double dt_delta = 0, dx_delta = 0;
    for (std::size_t i = 0; i < ac.values.values().size(); ++i) {
        dt_delta = std::max(dt_delta, std::abs(ac.values[i] - ac_t.values[i]));
        dx_delta = std::max(dx_delta, std::abs(ac.values[i] - ac_x.values[i]));
    }

    const oracle::ReferenceGrid ms = oracle::multiscale_reference(32768);
    const oracle::ReferenceGrid ms2 = oracle::multiscale_reference(65536);
    double ms_delta = 0;
    for (std::size_t i = 0; i < ms.values.values().size(); ++i) ms_delta = std::max(ms_delta, std::abs(ms.values[i] - ms2.values[2 * i]));

    const oracle::ReferenceGrid fd = oracle::burgers_finite_difference(4096, 16384, 1024);
    const oracle::BurgersColeHopf exact(100);
    double burgers_delta = 0;
    std::size_t probes = 0;
    for (double x : {-0.75, -0.5, -0.25, 0.25, 0.5}) {
        for (double t : {0.25, 0.5, 0.75, 1.0}) {
            burgers_delta = std::max(burgers_delta, std::abs(fd.interpolate(std::vector<double>{x, t}) - exact(x, t)));
            ++probes;
        }
    }
    const bool ok = std::max(dt_delta, dx_delta) < 1e-4 && ms_delta < 1e-7 && burgers_delta < 1e-4 && probes == 20;
    return {ok, "allen-cahn dt " + short_fmt(dt_delta) + " dx " + short_fmt(dx_delta) + " (< 1e-4), multiscale " +
                    short_fmt(ms_delta) + " (< 1e-7), burgers " + short_fmt(burgers_delta) + " at " +
                    std::to_string(probes) + " probes (< 1e-4)"};
}

using Criterion = Outcome (*)(const Options&);

const std::vector<std::pair<const char*, Criterion>> kCriteria = {
    {"derivative correctness", derivatives},
    {"parameter-gradient correctness", parameter_gradient},
    {"pgd toy trajectory", pgd_toy},
    {"attack ascent", ascent},
    {"poisson comparison", poisson_comparison},
    {"multiscale comparison", multiscale_comparison},
    {"burgers comparison", burgers_comparison},
    {"allen-cahn temporal causality", allen_cahn_causality},
    {"selection oracles", selection_oracles},
    {"adam fixture", adam_fixture},
    {"oracle self-convergence", oracle_convergence},
    {"end-to-end determinism", determinism},
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    Options opt;
    std::vector<std::size_t> criteria;
    std::string profile = "desk";
    app.add_option("--criteria", criteria, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 12));
    app.add_option("--profile", profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    app.add_option("--work", opt.work, "Directory for training runs");
    app.add_option("--cache-dir", opt.cache_dir, "Reference grid cache");
    app.add_option("--seeds", opt.seeds, "Seeds per comparison")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", opt.verbose, "Log progress to stderr");
    CLI11_PARSE(app, argc, argv);
    opt.profile = harness::profile_from_name(profile);
    if (criteria.empty()) {
        for (std::size_t i = 1; i <= kCriteria.size(); ++i) criteria.push_back(i);
    }

    int failures = 0;
    for (std::size_t c : criteria) {
        const auto& [name, fn] = kCriteria[c - 1];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = fn(opt);
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !out.pass;
        std::cout << "criterion " << c << " " << (out.pass ? "PASS" : "FAIL") << " " << name << ": " << out.detail
                  << " [" << short_fmt(secs) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
