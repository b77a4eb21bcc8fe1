#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atpinn/oracle.hpp"
#include "atpinn/pde.hpp"
#include "atpinn/training.hpp"

namespace atpinn::harness {

// Parsed key-value text with [section] headers. Keys are stored as
// "section.key"; later assignments replace earlier ones.
struct ConfigDoc {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> entries;

    bool has(const std::string& key) const { return entries.count(key) > 0; }
    void set(const std::string& key, const std::string& value, int line = 0) { entries[key] = {value, line}; }
};

// Throws ConfigError with the offending line number.
ConfigDoc parse_config(std::istream& in);
ConfigDoc parse_config_text(const std::string& text);

// Applies "section.key=value".
void apply_override(ConfigDoc& doc, const std::string& assignment);

// "500, 500, 1000*7" -> {500, 500, 1000, ...}.
std::vector<double> parse_list(const std::string& text);

std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
// Preset as config text.
std::string preset_text(const std::string& name);

enum class Profile { Full, Desk };
const char* profile_name(Profile p);
Profile profile_from_name(const std::string& name);

struct ExperimentConfig {
    std::string name;
    std::string problem;
    training::TrainConfig train;
    std::vector<std::uint64_t> seeds{0};
    Profile profile = Profile::Full;
    std::string output_dir = "runs";
    std::size_t grid_points = 256;
    std::string cache_dir = ".atpinn_cache";
    bool write_checkpoints = true;
    bool grid_every_iteration = false;
    std::size_t progress_every = 0;
};

// Resolves a document, starting from `[experiment] preset` when present.
// Unknown sections or keys, bad values and inconsistent counts throw
// ConfigError.
ExperimentConfig resolve_config(const ConfigDoc& doc);

// A config file path, or a builtin preset name when no such file exists.
ConfigDoc load_config_doc(const std::string& path_or_preset);

// Training settings actually run: the desk profile divides every epoch
// count by 10 (minimum 1); the config itself always holds full counts.
training::TrainConfig effective_train_config(const ExperimentConfig& config);

// Canonical config text of a resolved experiment; parses back to the same
// experiment.
std::string render_config(const ExperimentConfig& config);

// Interpretation notes written to every manifest.
std::vector<std::pair<std::string, std::string>> assumption_flags(const ExperimentConfig& config);

double relative_l2(const std::vector<double>& prediction, const std::vector<double>& reference);

// The 256-per-dimension test grid of a problem with its reference values.
struct Evaluator {
    pde::PdeProblem problem;
    std::vector<std::vector<double>> axes;
    Tensor points;
    // Empty for residual-metric problems.
    std::vector<double> reference;

    static Evaluator create(const pde::PdeProblem& problem, std::size_t grid_points, const std::string& cache_dir);

    struct Result {
        double metric = 0.0;
        double max_grid_residual = 0.0;
        std::vector<double> prediction;
        std::vector<double> residual;
    };
    Result evaluate(const nn::MlpParams& params) const;
};

struct MetricRow {
    std::size_t k = 0;
    std::size_t cumulative_samples = 0;
    std::size_t new_samples = 0;
    std::string metric_kind;
    double metric_value = 0.0;
    double max_grid_residual = 0.0;
    double max_new_sample_residual = 0.0;
    double final_loss = 0.0;
    std::size_t epochs = 0;
};

// Frozen column layout, see docs/formats.md.
extern const char* const kMetricsHeader;
void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& in);

using Logger = std::function<void(const std::string&)>;

struct RunSummary {
    std::string directory;
    std::vector<MetricRow> rows;
};

// Runs one seed into `directory`, writing metrics.csv, timing.csv,
// samples_<k>.csv, prediction_grid.csv, checkpoint_<k>.txt and manifest.txt.
// On failure the manifest is marked incomplete and the exception rethrown.
RunSummary run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& directory,
                    const Logger& log = {});

// Every seed of the config under output_dir/seed_<S>.
std::vector<RunSummary> run_experiment(const ExperimentConfig& config, const Logger& log = {});

// Parameters accepted by sweep: T, m, eta, epsilon, N, epochs, seed.
std::vector<std::string> sweep_parameters();
// Returns `doc` with one sweep value applied.
ConfigDoc apply_sweep_value(const ConfigDoc& doc, const std::string& param, const std::string& value);

// One run per value under output_dir/<param>_<value>, plus comparison.csv.
void run_sweep(const ConfigDoc& doc, const std::string& param, const std::vector<std::string>& values,
               const std::function<void(ExperimentConfig&)>& adjust, const Logger& log = {});

}  // namespace atpinn::harness
