#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atpinn/autodiff.hpp"
#include "atpinn/network.hpp"
#include "atpinn/pde.hpp"
#include "atpinn/sampling.hpp"

namespace atpinn::training {

enum class Strategy { LhsBaseline, Uniform, Rar, Sais, AtPinn };

const char* strategy_name(Strategy s);
// Accepts lhs_baseline, uniform, rar, sais, at_pinn.
Strategy strategy_from_name(const std::string& name);

struct TrainConfig {
    std::size_t hidden_layers = 8;
    std::size_t width = 20;
    double lambda_boundary = 1.0;
    double learning_rate = 1e-4;
    // ep_0..ep_K and N_0..N_K; both hold iterations + 1 entries.
    std::vector<std::size_t> epochs;
    std::vector<std::size_t> samples;
    std::size_t n_boundary = 100;
    std::size_t iterations = 0;
    Strategy strategy = Strategy::AtPinn;
    sampling::AttackConfig attack;
    double rar_factor = 2.0;
    sampling::SaisConfig sais;
    // The baseline trains once on sum(N_i) points for this many epochs.
    std::size_t baseline_epochs = 50000;
    // Upper bound on time for the k = 0 samples of evolution problems.
    std::optional<double> initial_time_max;
    // Also attack the supervised boundary/initial points (evolution problems).
    bool attack_boundary = true;
    std::uint64_t seed = 0;
    // Rows per loss/gradient shard.
    std::size_t chunk = 1024;

    void validate() const;
};

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainState {
    nn::MlpParams params;
    // First and second moments in MlpParams::flatten() order.
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::size_t step_count = 0;
    std::vector<double> loss_history;
    std::size_t skipped_steps = 0;

    explicit TrainState(nn::MlpParams p = {});
};

// Bias-corrected Adam. A non-finite gradient skips the step and bumps
// skipped_steps.
void adam_step(TrainState& state, std::span<const double> gradient, const AdamConfig& config);
void reset_momentum(TrainState& state);

// mean(r²) over the collocation rows + lambda · mean((u - target)²) over the
// boundary rows, as a scalar node. An empty boundary set drops its term.
ad::Var pinn_loss(ad::Tape& tape, const pde::PdeProblem& problem, const nn::ParamVars& params,
                  const Tensor& collocation, const pde::BoundaryData& boundary, double lambda);

struct LossGradient {
    double loss = 0.0;
    double residual_loss = 0.0;
    // Already multiplied by lambda.
    double boundary_loss = 0.0;
    std::vector<double> gradient;
};

// Same quantity as pinn_loss, evaluated in fixed row chunks with a
// deterministic summation order.
class LossEvaluator {
public:
    explicit LossEvaluator(std::size_t chunk = 1024) : chunk_(chunk) {}
    LossGradient operator()(const pde::PdeProblem& problem, const nn::MlpParams& params, const Tensor& collocation,
                            const pde::BoundaryData& boundary, double lambda);

private:
    std::size_t chunk_;
    ad::Tape tape_;
};

struct IterationRecord {
    std::size_t k = 0;
    std::size_t cumulative_samples = 0;
    std::size_t new_samples = 0;
    std::size_t epochs = 0;
    double final_loss = 0.0;
    // max |r| over the samples added at k, under the model that preceded
    // their selection (the k = 0 model for k <= 1).
    double max_new_sample_residual = 0.0;
    std::size_t attack_candidates = 0;
    std::size_t skipped_attack_steps = 0;
    double sampling_seconds = 0.0;
    double training_seconds = 0.0;
};

struct TrainResult {
    TrainState state;
    std::vector<sampling::SampleSet> history;
    pde::BoundaryData boundary;
    std::vector<IterationRecord> records;
};

struct TrainHooks {
    // Called after each iteration's training with the record just appended.
    std::function<void(const TrainResult&)> on_iteration;
    // Called every `progress_every` epochs.
    std::function<void(std::size_t k, std::size_t epoch, double loss)> on_progress;
    std::size_t progress_every = 1000;
    // Replaces strategy sampling for k >= 1 when set.
    std::function<sampling::SampleSet(std::size_t k, const TrainResult&)> sample_override;
};

// Runs k = 0 .. iterations: k = 0 trains on an LHS set for ep_0 epochs, each
// later iteration adds N_k points from the strategy, resets the optimizer
// moments and retrains on the union for ep_k epochs. A non-finite loss
// throws NumericalError.
TrainResult run_iterative_training(const pde::PdeProblem& problem, const TrainConfig& config,
                                   const TrainHooks& hooks = {});

// All samples in one matrix.
Tensor pooled_points(std::span<const sampling::SampleSet> history);

}  // namespace atpinn::training
