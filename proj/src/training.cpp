#include "atpinn/training.hpp"

#include "atpinn/errors.hpp"
#include "atpinn/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace atpinn::training {

namespace {
constexpr const char* kStrategyNames[] = {"lhs_baseline", "uniform", "rar", "sais", "at_pinn"};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
}  // namespace

const char* strategy_name(Strategy s) { return kStrategyNames[static_cast<int>(s)]; }

Strategy strategy_from_name(const std::string& name)
{
    for (int i = 0; i < 5; ++i) {
        if (name == kStrategyNames[i]) return static_cast<Strategy>(i);
    }
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

void TrainConfig::validate() const
{
    if (hidden_layers < 1 || width < 1) throw std::invalid_argument("network needs at least one hidden layer of width >= 1");
    if (!(lambda_boundary > 0.0)) throw std::invalid_argument("lambda_boundary must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (epochs.size() != iterations + 1) {
        throw std::invalid_argument("epochs needs " + std::to_string(iterations + 1) + " entries, got " +
                                    std::to_string(epochs.size()));
    }
    if (samples.size() != iterations + 1) {
        throw std::invalid_argument("samples needs " + std::to_string(iterations + 1) + " entries, got " +
                                    std::to_string(samples.size()));
    }
    for (std::size_t n : samples) {
        if (n < 1) throw std::invalid_argument("sample counts must be >= 1");
    }
    if (n_boundary < 1) throw std::invalid_argument("n_boundary must be >= 1");
    if (chunk < 1) throw std::invalid_argument("chunk must be >= 1");
    if (strategy == Strategy::AtPinn) attack.validate();
    if (strategy == Strategy::Rar && !(rar_factor > 1.0)) throw std::invalid_argument("rar_factor must exceed 1");
    if (strategy == Strategy::Sais) {
        if (!(sais.p0 > 0.0 && sais.p0 < 1.0)) throw std::invalid_argument("sais p0 must lie in (0, 1)");
        if (sais.max_rounds < 1 || sais.n_per_round < 1) throw std::invalid_argument("sais rounds and size must be >= 1");
    }
    if (initial_time_max && !(*initial_time_max > 0.0)) throw std::invalid_argument("initial_time_max must be positive");
}

TrainState::TrainState(nn::MlpParams p) : params(std::move(p))
{
    const std::size_t n = params.weights.empty() ? 0 : params.num_parameters();
    adam_m.assign(n, 0.0);
    adam_v.assign(n, 0.0);
}

void adam_step(TrainState& state, std::span<const double> gradient, const AdamConfig& config)
{
    const std::size_t n = state.adam_m.size();
    if (gradient.size() != n || state.adam_v.size() != n) throw ShapeError("adam: gradient does not match parameters");
    for (double g : gradient) {
        if (!std::isfinite(g)) {
            ++state.skipped_steps;
            return;
        }
    }
    std::vector<double> theta = state.params.flatten();
    ++state.step_count;
    const double t = double(state.step_count);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gradient[i];
        state.adam_m[i] = config.beta1 * state.adam_m[i] + (1.0 - config.beta1) * g;
        state.adam_v[i] = config.beta2 * state.adam_v[i] + (1.0 - config.beta2) * g * g;
        const double mhat = state.adam_m[i] / c1;
        const double vhat = state.adam_v[i] / c2;
        theta[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.eps);
    }
    state.params.assign_flat(theta);
}

void reset_momentum(TrainState& state)
{
    std::fill(state.adam_m.begin(), state.adam_m.end(), 0.0);
    std::fill(state.adam_v.begin(), state.adam_v.end(), 0.0);
    state.step_count = 0;
}

namespace {

ad::Var boundary_sse(ad::Tape& tape, const nn::ParamVars& params, const pde::BoundaryData& boundary)
{
    const ad::Var xb = tape.leaf(boundary.points, false);
    const ad::Var target = tape.leaf(Tensor({boundary.targets.size(), 1}, boundary.targets), false);
    return ad::sum(ad::square(nn::forward(params, xb) - target));
}

}  // namespace

ad::Var pinn_loss(ad::Tape& tape, const pde::PdeProblem& problem, const nn::ParamVars& params,
                  const Tensor& collocation, const pde::BoundaryData& boundary, double lambda)
{
    if (collocation.rank() != 2 || collocation.rows() == 0) throw std::invalid_argument("pinn_loss: empty collocation set");
    const ad::Var x = tape.leaf(collocation, false);
    ad::Var loss = ad::mean(ad::square(pde::residual_batch(problem, params, x)));
    if (!boundary.targets.empty()) {
        const double w = lambda / double(boundary.targets.size());
        loss = loss + boundary_sse(tape, params, boundary) * w;
    }
    return loss;
}

LossGradient LossEvaluator::operator()(const pde::PdeProblem& problem, const nn::MlpParams& params,
                                       const Tensor& collocation, const pde::BoundaryData& boundary, double lambda)
{
    if (collocation.rank() != 2 || collocation.rows() == 0) throw std::invalid_argument("loss: empty collocation set");
    const std::size_t n = collocation.rows();
    const std::size_t d = collocation.cols();
    LossGradient out;
    out.gradient.assign(params.num_parameters(), 0.0);
    auto accumulate = [&](const nn::ParamVars& pv) {
        const std::vector<double> g = nn::collect_gradient(pv);
        for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] += g[i];
    };
    Tensor block;
    for (std::size_t begin = 0; begin < n; begin += chunk_) {
        const std::size_t len = std::min(chunk_, n - begin);
        block.resize({len, d});
        std::copy_n(collocation.data() + begin * d, len * d, block.data());
        tape_.clear();
        const nn::ParamVars pv = nn::bind_params(tape_, params, true);
        const ad::Var x = tape_.leaf(block, false);
        const ad::Var part = ad::sum(ad::square(pde::residual_batch(problem, pv, x))) * (1.0 / double(n));
        tape_.backward(part);
        out.residual_loss += part.value().item();
        accumulate(pv);
    }
    if (!boundary.targets.empty()) {
        tape_.clear();
        const nn::ParamVars pv = nn::bind_params(tape_, params, true);
        const ad::Var part = boundary_sse(tape_, pv, boundary) * (lambda / double(boundary.targets.size()));
        tape_.backward(part);
        out.boundary_loss = part.value().item();
        accumulate(pv);
    }
    out.loss = out.residual_loss + out.boundary_loss;
    return out;
}

Tensor pooled_points(std::span<const sampling::SampleSet> history)
{
    std::vector<double> data;
    std::size_t rows = 0, d = 0;
    for (const auto& s : history) {
        if (s.empty()) continue;
        if (d == 0) d = s.dim();
        if (s.dim() != d) throw ShapeError("sample sets differ in dimension");
        data.insert(data.end(), s.points.values().begin(), s.points.values().end());
        rows += s.size();
    }
    return Tensor({rows, d}, std::move(data));
}

namespace {

void train_epochs(const pde::PdeProblem& problem, const TrainConfig& config, TrainResult& result, std::size_t k,
                  std::size_t epochs, const TrainHooks& hooks)
{
    const Tensor pts = pooled_points(result.history);
    LossEvaluator eval(config.chunk);
    AdamConfig adam;
    adam.learning_rate = config.learning_rate;
    reset_momentum(result.state);
    double loss = 0.0;
    for (std::size_t e = 0; e < epochs; ++e) {
        const LossGradient lg = eval(problem, result.state.params, pts, result.boundary, config.lambda_boundary);
        if (!std::isfinite(lg.loss)) {
            throw NumericalError("non-finite loss at iteration " + std::to_string(k) + ", epoch " + std::to_string(e) +
                                 " (residual part " + std::to_string(lg.residual_loss) + ", boundary part " +
                                 std::to_string(lg.boundary_loss) + ")");
        }
        loss = lg.loss;
        result.state.loss_history.push_back(loss);
        adam_step(result.state, lg.gradient, adam);
        if (hooks.on_progress && hooks.progress_every > 0 && (e + 1) % hooks.progress_every == 0) {
            hooks.on_progress(k, e + 1, loss);
        }
    }
    // Loss of the final parameters.
    if (epochs > 0) {
        loss = eval(problem, result.state.params, pts, result.boundary, config.lambda_boundary).loss;
    }
    result.records.back().final_loss = loss;
    result.records.back().epochs = epochs;
}

}  // namespace

TrainResult run_iterative_training(const pde::PdeProblem& problem, const TrainConfig& config, const TrainHooks& hooks)
{
    config.validate();
    using clock = std::chrono::steady_clock;
    const std::size_t dim = problem.domain.dim();
    const auto layout = nn::mlp_layout(dim, config.hidden_layers, config.width);

    TrainResult result;
    result.state = TrainState(nn::init_params(layout, derive_seed(config.seed, 1)));
    result.boundary = problem.sample_boundary(config.n_boundary, derive_seed(config.seed, 2));

    auto residual_max = [&](const Tensor& pts, const nn::MlpParams& params) {
        return max_abs(pde::residual_values(problem, params, pts));
    };

    if (config.strategy == Strategy::LhsBaseline) {
        const std::size_t total = std::accumulate(config.samples.begin(), config.samples.end(), std::size_t{0});
        auto t0 = clock::now();
        result.history.push_back(sampling::lhs(total, problem.domain, derive_seed(config.seed, 100), 0));
        IterationRecord rec;
        rec.k = config.iterations;
        rec.cumulative_samples = rec.new_samples = total;
        rec.sampling_seconds = seconds_since(t0);
        result.records.push_back(rec);
        t0 = clock::now();
        train_epochs(problem, config, result, config.iterations, config.baseline_epochs, hooks);
        result.records.back().training_seconds = seconds_since(t0);
        result.records.back().max_new_sample_residual = residual_max(result.history[0].points, result.state.params);
        if (hooks.on_iteration) hooks.on_iteration(result);
        return result;
    }

    pde::DomainBox domain0 = problem.domain;
    if (config.initial_time_max && problem.time_dependent) {
        double& hi = domain0.hi.back();
        hi = std::min(hi, *config.initial_time_max);
        if (!(domain0.lo.back() < hi)) throw std::invalid_argument("initial_time_max leaves an empty time range");
    }

    for (std::size_t k = 0; k <= config.iterations; ++k) {
        IterationRecord rec;
        rec.k = k;
        auto t0 = clock::now();
        sampling::SampleSet fresh;
        if (k == 0) {
            fresh = sampling::lhs(config.samples[0], domain0, derive_seed(config.seed, 100), 0);
        } else if (hooks.sample_override) {
            fresh = hooks.sample_override(k, result);
        } else {
            const std::uint64_t sk = derive_seed(config.seed, 100 + k);
            const std::size_t n = config.samples[k];
            const nn::MlpParams& params = result.state.params;
            switch (config.strategy) {
            case Strategy::Uniform: fresh = sampling::uniform(n, problem.domain, sk, k); break;
            case Strategy::Rar:
                fresh = sampling::rar_select(config.rar_factor, n, problem.domain,
                                             sampling::abs_residual_score(problem, params), sk, k);
                break;
            case Strategy::Sais:
                fresh = sampling::sais_step(config.sais, problem.domain, sampling::abs_residual_score(problem, params),
                                            sk, k, n);
                break;
            case Strategy::AtPinn: {
                Tensor extra;
                if (problem.time_dependent && config.attack_boundary) extra = result.boundary.points;
                const auto cand = sampling::at_pinn_candidates(
                    result.history, config.attack, sampling::abs_residual_objective(problem, params, config.chunk),
                    problem.domain, n, sk, extra);
                fresh = cand.selected;
                rec.attack_candidates = cand.candidate_count;
                rec.skipped_attack_steps = cand.skipped_steps;
                break;
            }
            case Strategy::LhsBaseline: break;
            }
        }
        if (fresh.size() != config.samples[k]) throw std::logic_error("sampler returned the wrong number of points");
        for (auto& tag : fresh.iteration) tag = k;
        pde::check_in_domain(problem.domain, fresh.points);
        if (k > 0) rec.max_new_sample_residual = residual_max(fresh.points, result.state.params);
        rec.sampling_seconds = seconds_since(t0);
        rec.new_samples = fresh.size();
        result.history.push_back(std::move(fresh));
        rec.cumulative_samples = 0;
        for (const auto& s : result.history) rec.cumulative_samples += s.size();
        result.records.push_back(rec);

        t0 = clock::now();
        train_epochs(problem, config, result, k, config.epochs[k], hooks);
        result.records.back().training_seconds = seconds_since(t0);
        if (k == 0) {
            result.records.back().max_new_sample_residual = residual_max(result.history[0].points, result.state.params);
        }
        if (hooks.on_iteration) hooks.on_iteration(result);
    }
    return result;
}

}  // namespace atpinn::training
