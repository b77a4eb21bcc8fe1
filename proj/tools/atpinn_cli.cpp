#include "atpinn/errors.hpp"
#include "atpinn/harness.hpp"
#include "atpinn/oracle.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
    std::string config;
    std::string profile;
    std::string out;
    std::string cache_dir;
    std::vector<std::string> sets;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("config", o.config, "Config file or builtin preset name")->required();
    cmd->add_option("--profile", o.profile, "desk (epochs / 10) or full")->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--cache-dir", o.cache_dir, "Reference grid cache directory");
    cmd->add_option("--set", o.sets, "Override a config entry, section.key=value");
    cmd->add_flag("-q,--quiet", o.quiet, "Only print errors");
}

atpinn::harness::ConfigDoc build_doc(const CommonOptions& o)
{
    using namespace atpinn::harness;
    ConfigDoc doc = load_config_doc(o.config);
    for (const auto& s : o.sets) apply_override(doc, s);
    if (!o.profile.empty()) doc.set("experiment.profile", o.profile);
    if (!o.out.empty()) doc.set("experiment.output", o.out);
    if (!o.cache_dir.empty()) doc.set("evaluation.cache_dir", o.cache_dir);
    return doc;
}

atpinn::harness::Logger make_logger(bool quiet)
{
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << "[atpinn] " << msg << std::endl; };
}

}  // namespace

int main(int argc, char** argv)
{
    using namespace atpinn;
    CLI::App app{"Adversarial collocation sampling for physics-informed neural networks"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    std::vector<std::uint64_t> run_seeds;
    auto* run = app.add_subcommand("run", "Train every seed of an experiment");
    add_common(run, run_opts);
    run->add_option("--seed", run_seeds, "Seed(s) to run instead of the config's list");

    CommonOptions sweep_opts;
    std::string sweep_param;
    std::vector<std::string> sweep_values;
    auto* sweep = app.add_subcommand("sweep", "Run one experiment per parameter value");
    add_common(sweep, sweep_opts);
    sweep->add_option("--param", sweep_param, "T, m, eta, epsilon, N, epochs or seed")
        ->required()
        ->check(CLI::IsMember(harness::sweep_parameters()));
    sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');

    std::string oracle_problem;
    std::string oracle_cache = ".atpinn_cache";
    auto* oracle_cmd = app.add_subcommand("oracle", "Reference solution tools");
    auto* oracle_build = oracle_cmd->add_subcommand("build", "Build and cache a reference grid");
    oracle_cmd->require_subcommand(1);
    oracle_build->add_option("problem", oracle_problem, "burgers, allen_cahn or multiscale")
        ->required()
        ->check(CLI::IsMember({"burgers", "allen_cahn", "multiscale"}));
    oracle_build->add_option("--cache-dir", oracle_cache, "Cache directory");

    std::string show_preset;
    auto* presets = app.add_subcommand("presets", "List builtin presets or print one");
    presets->add_option("--show", show_preset, "Preset to print as config text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            harness::ConfigDoc doc = build_doc(run_opts);
            if (!run_seeds.empty()) {
                std::string list;
                for (std::size_t i = 0; i < run_seeds.size(); ++i) list += (i ? "," : "") + std::to_string(run_seeds[i]);
                doc.set("experiment.seeds", list);
            }
            const harness::ExperimentConfig cfg = harness::resolve_config(doc);
            harness::run_experiment(cfg, make_logger(run_opts.quiet));
        } else if (*sweep) {
            const harness::ConfigDoc doc = build_doc(sweep_opts);
            harness::run_sweep(doc, sweep_param, sweep_values, {}, make_logger(sweep_opts.quiet));
        } else if (*oracle_build) {
            const oracle::GridParams params = oracle::default_params(oracle_problem);
            const oracle::ReferenceGrid g = oracle::cached_reference(oracle_problem, oracle_cache);
            std::cout << (std::filesystem::path(oracle_cache) / oracle::cache_file_name(oracle_problem, params)).string()
                      << '\n';
            (void)g;
        } else if (*presets) {
            if (!show_preset.empty()) {
                std::cout << harness::preset_text(show_preset);
            } else {
                for (const auto& n : harness::preset_names()) std::cout << n << '\n';
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}
