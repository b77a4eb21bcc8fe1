#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atpinn/network.hpp"
#include "atpinn/pde.hpp"
#include "atpinn/rng.hpp"
#include "atpinn/tensor.hpp"

namespace atpinn::sampling {

enum class Origin { Lhs, Uniform, Rar, Sais, Adversarial, Boundary };

const char* origin_name(Origin origin);
Origin origin_from_name(const std::string& name);

// Collocation points (n × dim) with the iteration that produced each row.
struct SampleSet {
    Tensor points;
    std::vector<std::size_t> iteration;
    std::vector<Origin> origin;

    SampleSet() = default;
    // Every row tagged with (k, origin).
    SampleSet(Tensor points, std::size_t k, Origin origin);

    std::size_t size() const { return iteration.size(); }
    std::size_t dim() const { return size() == 0 ? (points.rank() == 2 ? points.cols() : 0) : points.cols(); }
    bool empty() const { return size() == 0; }
    std::span<const double> row(std::size_t i) const { return points.values().subspan(i * dim(), dim()); }

    void append(const SampleSet& other);
    // Rows at `indices`, in that order.
    SampleSet subset(std::span<const std::size_t> indices) const;
    void validate() const;
};

struct AttackConfig {
    double epsilon = 0.1;
    double eta = 0.02;
    std::size_t steps = 20;
    double revisit = 1.0;
    // Uniform random start inside the epsilon box before the ascent steps.
    bool random_init = true;

    void validate() const;
};

// Scores a batch of points (one value per row).
using ScoreFn = std::function<std::vector<double>(const Tensor& points)>;

// Objective value and its gradient with respect to each point (n × dim).
// Rows are treated as independent.
struct ObjectiveEval {
    std::vector<double> values;
    Tensor grad;
};
using ObjectiveFn = std::function<ObjectiveEval(const Tensor& points)>;

// |r(x; θ)| of a problem under fixed parameters, with its input gradient.
// Both arguments are captured by reference.
ObjectiveFn abs_residual_objective(const pde::PdeProblem& problem, const nn::MlpParams& params,
                                   std::size_t chunk = 1024);
ScoreFn abs_residual_score(const pde::PdeProblem& problem, const nn::MlpParams& params, std::size_t chunk = 2048);

// Indices of the n largest scores in descending order; ties keep the lower
// index first. Throws NumericalError on a non-finite score.
std::vector<std::size_t> top_n(std::span<const double> scores, std::size_t n);

// Latin hypercube: each coordinate has exactly one point per stratum.
SampleSet lhs(std::size_t n, const pde::DomainBox& domain, std::uint64_t seed, std::size_t k = 0);
SampleSet uniform(std::size_t n, const pde::DomainBox& domain, std::uint64_t seed, std::size_t k = 0);

// Draws floor(K n) uniform candidates and keeps the n with the largest |score|.
SampleSet rar_select(double K, std::size_t n, const pde::DomainBox& domain, const ScoreFn& score,
                     std::uint64_t seed, std::size_t k = 0);

struct GaussianFit {
    std::vector<double> mean;
    // Row-major dim × dim.
    std::vector<double> covariance;
    bool regularized = false;
};

// Sample mean and unbiased sample covariance. When the covariance is not
// positive definite, 1e-6 is added to the diagonal.
GaussianFit fit_gaussian(const Tensor& elite);

// Draws n points from N(mean, cov) restricted to the box by rejection. After
// 1000·n rejected attempts the remaining draws are clipped to the box.
Tensor sample_truncated_gaussian(const GaussianFit& fit, std::size_t n, const pde::DomainBox& domain, Rng& rng);

struct SaisConfig {
    std::size_t n_per_round = 300;
    double p0 = 0.1;
    std::size_t max_rounds = 10;
};

// Self-adaptive importance sampling. Round 0 draws uniformly; each later
// round draws from the Gaussian fitted to the top ceil(p0·n_per_round)
// points of the previous round. The final round draws n_out points (0 means
// n_per_round) and is returned.
SampleSet sais_step(const SaisConfig& config, const pde::DomainBox& domain, const ScoreFn& score, std::uint64_t seed,
                    std::size_t k = 0, std::size_t n_out = 0);

struct PgdResult {
    Tensor points;
    // Per-row ascent steps skipped because the gradient was not finite.
    std::size_t skipped_steps = 0;
};

// Sign-gradient ascent on `objective` within an epsilon box around each row
// of x0, projected onto the domain.
PgdResult pinn_pgd(const Tensor& x0, const ObjectiveFn& objective, const AttackConfig& config,
                   const pde::DomainBox& domain, std::uint64_t seed);

// Iterations whose samples seed the attacks at iteration k, with the share
// of each one's samples that is used.
struct RevisitPlan {
    std::size_t iteration;
    double fraction;
};
std::vector<RevisitPlan> revisit_plan(std::size_t k, double revisit);

struct CandidateResult {
    SampleSet selected;
    std::size_t candidate_count = 0;
    std::size_t skipped_steps = 0;
};

// Attacks the samples of the revisited iterations and of iteration 0 (plus
// `extra_seeds` when non-empty), then keeps the n_k candidates with the
// largest objective value, tagged with iteration k.
// history[i] holds the samples produced at iteration i, i < k.
CandidateResult at_pinn_candidates(std::span<const SampleSet> history, const AttackConfig& config,
                                   const ObjectiveFn& objective, const pde::DomainBox& domain, std::size_t n_k,
                                   std::uint64_t seed, const Tensor& extra_seeds = {});

// Delimited text: one point per row, coordinate columns named by
// axis_names, then iteration and origin.
void write_samples_csv(std::ostream& out, const SampleSet& samples, std::span<const std::string> axis_names);
SampleSet read_samples_csv(std::istream& in, std::vector<std::string>* axis_names = nullptr);

}  // namespace atpinn::sampling
