#include "atpinn/harness.hpp"

#include "atpinn/errors.hpp"
#include "atpinn/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace atpinn::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- parsing

ConfigDoc parse_config(std::istream& in)
{
    ConfigDoc doc;
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        if (const auto hash = s.find_first_of("#;"); hash != std::string_view::npos) s = s.substr(0, hash);
        s = text::trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("unterminated section header", line);
            section = std::string(text::trim(s.substr(1, s.size() - 2)));
            if (section.empty() || section.find_first_of(" \t=.") != std::string::npos) {
                throw ConfigError("bad section name '" + section + "'", line);
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line);
        const std::string key(text::trim(s.substr(0, eq)));
        const std::string value(text::trim(s.substr(eq + 1)));
        if (key.empty() || key.find_first_of(" \t.") != std::string::npos) throw ConfigError("bad key '" + key + "'", line);
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line);
        doc.set(section + "." + key, value, line);
    }
    return doc;
}

ConfigDoc parse_config_text(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

void apply_override(ConfigDoc& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
    }
    const std::string key(text::trim(std::string_view(assignment).substr(0, eq)));
    doc.set(key, std::string(text::trim(std::string_view(assignment).substr(eq + 1))));
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> out;
    for (const std::string& item : text::split(s, ',')) {
        const std::string_view t = text::trim(item);
        if (t.empty()) throw std::invalid_argument("empty list item in '" + s + "'");
        const auto star = t.find('*');
        if (star == std::string_view::npos) {
            out.push_back(text::parse_double(t));
            continue;
        }
        const double v = text::parse_double(t.substr(0, star));
        const long long count = text::parse_int(t.substr(star + 1));
        if (count < 1) throw std::invalid_argument("repeat count must be >= 1 in '" + std::string(t) + "'");
        out.insert(out.end(), std::size_t(count), v);
    }
    return out;
}

// ---------------------------------------------------------------- presets

namespace {

struct ProblemPreset {
    const char* short_name;
    const char* problem;
    const char* body;
};

constexpr const char* kCommon = R"([network]
hidden_layers = 8
width = 20

[training]
learning_rate = 1e-4
baseline_epochs = 50000

[attack]
eta = 0.02
steps = 20
random_init = true
attack_boundary = true

[rar]
factor = 2

[sais]
n_per_round = 300
p0 = 0.1
max_rounds = 10
)";

const ProblemPreset kProblemPresets[] = {
    {"poisson", "poisson2d", R"([training]
lambda = 1
iterations = 8
samples = 500, 500, 1000*7
epochs = 200000, 50000*8
n_boundary = 200

[attack]
epsilon = 0.1
revisit = 1
)"},
    {"burgers", "burgers", R"([training]
lambda = 1
iterations = 3
samples = 500, 500, 1000*2
epochs = 100000, 200000, 100000*2
n_boundary = 100

[attack]
epsilon = 0.1
revisit = 1
)"},
    {"multiscale", "multiscale", R"([training]
lambda = 200
iterations = 29
samples = 200*30
epochs = 30000*30
n_boundary = 2

[attack]
epsilon = 0.2
steps = 2
revisit = 2
)"},
    {"allen-cahn", "allen_cahn", R"([training]
lambda = 1
iterations = 8
samples = 500*9
epochs = 1000000*9
n_boundary = 400
initial_time_max = 0.2

[attack]
epsilon = 0.2
revisit = 1.5
)"},
};

struct StrategyPreset {
    const char* suffix;
    const char* strategy;
};

const StrategyPreset kStrategyPresets[] = {
    {"at-pinn", "at_pinn"}, {"uniform", "uniform"}, {"rar", "rar"}, {"sais", "sais"}, {"lhs", "lhs_baseline"},
};

}  // namespace

std::vector<std::string> preset_names()
{
    std::vector<std::string> out;
    for (const auto& p : kProblemPresets) {
        for (const auto& s : kStrategyPresets) out.push_back(std::string(p.short_name) + "-" + s.suffix);
    }
    return out;
}

bool is_preset(const std::string& name)
{
    const auto names = preset_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string preset_text(const std::string& name)
{
    for (const auto& p : kProblemPresets) {
        for (const auto& s : kStrategyPresets) {
            if (name != std::string(p.short_name) + "-" + s.suffix) continue;
            std::string t = "[experiment]\nname = " + name + "\nproblem = " + p.problem + "\nstrategy = " + s.strategy +
                            "\nseeds = 0\nprofile = full\noutput = runs/" + name + "\n\n";
            return t + kCommon + "\n" + p.body;
        }
    }
    throw ConfigError("unknown preset '" + name + "'");
}

const char* profile_name(Profile p) { return p == Profile::Full ? "full" : "desk"; }

Profile profile_from_name(const std::string& name)
{
    if (name == "full") return Profile::Full;
    if (name == "desk") return Profile::Desk;
    throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
}

ConfigDoc load_config_doc(const std::string& path_or_preset)
{
    if (fs::is_regular_file(path_or_preset)) {
        std::ifstream in(path_or_preset);
        if (!in) throw ConfigError("cannot read config '" + path_or_preset + "'");
        return parse_config(in);
    }
    if (is_preset(path_or_preset)) {
        ConfigDoc doc;
        doc.set("experiment.preset", path_or_preset);
        return doc;
    }
    throw ConfigError("no config file or preset named '" + path_or_preset + "'");
}

namespace {

// Preset entries first, then the document's own entries on top.
ConfigDoc flatten_preset(const ConfigDoc& doc)
{
    const auto it = doc.entries.find("experiment.preset");
    if (it == doc.entries.end()) return doc;
    if (!is_preset(it->second.value)) throw ConfigError("unknown preset '" + it->second.value + "'", it->second.line);
    ConfigDoc base = parse_config_text(preset_text(it->second.value));
    for (const auto& [k, e] : doc.entries) {
        if (k != "experiment.preset") base.entries[k] = e;
    }
    return base;
}

const std::set<std::string> kKnownKeys = {
    "experiment.preset",         "experiment.name",         "experiment.problem",        "experiment.strategy",
    "experiment.seeds",          "experiment.profile",      "experiment.output",         "network.hidden_layers",
    "network.width",             "training.learning_rate",  "training.lambda",           "training.iterations",
    "training.samples",          "training.epochs",         "training.n_boundary",       "training.baseline_epochs",
    "training.initial_time_max", "training.chunk",          "attack.epsilon",            "attack.eta",
    "attack.steps",              "attack.revisit",          "attack.random_init",        "attack.attack_boundary",
    "rar.factor",                "sais.n_per_round",        "sais.p0",                   "sais.max_rounds",
    "evaluation.grid_points",    "evaluation.cache_dir",    "evaluation.checkpoints",    "evaluation.grid_every_iteration",
    "logging.progress_every",
};

class Reader {
public:
    explicit Reader(const ConfigDoc& doc) : doc_(doc) {}

    const ConfigDoc::Entry* find(const std::string& key) const
    {
        const auto it = doc_.entries.find(key);
        return it == doc_.entries.end() ? nullptr : &it->second;
    }

    std::string str(const std::string& key, const std::string& fallback) const
    {
        const auto* e = find(key);
        return e ? e->value : fallback;
    }

    std::string required(const std::string& key) const
    {
        const auto* e = find(key);
        if (!e || e->value.empty()) throw ConfigError("missing required key '" + key + "'");
        return e->value;
    }

    double num(const std::string& key, double fallback) const
    {
        const auto* e = find(key);
        if (!e) return fallback;
        try {
            return text::parse_double(e->value);
        } catch (const std::invalid_argument&) {
            throw ConfigError(key + ": expected a number, got '" + e->value + "'", e->line);
        }
    }

    std::size_t count(const std::string& key, std::size_t fallback) const
    {
        const auto* e = find(key);
        if (!e) return fallback;
        return to_count(key, *e, num(key, 0.0));
    }

    std::vector<std::size_t> counts(const std::string& key) const
    {
        const auto* e = find(key);
        if (!e) throw ConfigError("missing required key '" + key + "'");
        std::vector<double> v;
        try {
            v = parse_list(e->value);
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(key + ": " + ex.what(), e->line);
        }
        std::vector<std::size_t> out;
        for (double x : v) out.push_back(to_count(key, *e, x));
        return out;
    }

    bool flag(const std::string& key, bool fallback) const
    {
        const auto* e = find(key);
        if (!e) return fallback;
        if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
        if (e->value == "false" || e->value == "0" || e->value == "no") return false;
        throw ConfigError(key + ": expected true or false, got '" + e->value + "'", e->line);
    }

    int line(const std::string& key) const
    {
        const auto* e = find(key);
        return e ? e->line : 0;
    }

private:
    static std::size_t to_count(const std::string& key, const ConfigDoc::Entry& e, double x)
    {
        if (!(x >= 0.0) || x != std::floor(x) || x > 1e15) {
            throw ConfigError(key + ": expected a non-negative integer, got '" + e.value + "'", e.line);
        }
        return std::size_t(x);
    }

    const ConfigDoc& doc_;
};

}  // namespace

ExperimentConfig resolve_config(const ConfigDoc& raw)
{
    const ConfigDoc doc = flatten_preset(raw);
    for (const auto& [key, e] : doc.entries) {
        if (!kKnownKeys.count(key)) throw ConfigError("unknown key '" + key + "'", e.line);
    }
    const Reader r(doc);
    ExperimentConfig c;
    c.problem = r.required("experiment.problem");
    {
        const auto names = pde::problem_names();
        if (std::find(names.begin(), names.end(), c.problem) == names.end()) {
            throw ConfigError("unknown problem '" + c.problem + "'", r.line("experiment.problem"));
        }
    }
    try {
        c.train.strategy = training::strategy_from_name(r.required("experiment.strategy"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what(), r.line("experiment.strategy"));
    }
    c.name = r.str("experiment.name", c.problem + "-" + training::strategy_name(c.train.strategy));
    c.seeds.clear();
    for (std::size_t s : r.counts("experiment.seeds")) c.seeds.push_back(s);
    if (c.seeds.empty()) throw ConfigError("seed list is empty", r.line("experiment.seeds"));
    c.profile = profile_from_name(r.str("experiment.profile", "full"));
    c.output_dir = r.str("experiment.output", "runs/" + c.name);

    auto& t = c.train;
    t.hidden_layers = r.count("network.hidden_layers", t.hidden_layers);
    t.width = r.count("network.width", t.width);
    t.learning_rate = r.num("training.learning_rate", t.learning_rate);
    t.lambda_boundary = r.num("training.lambda", t.lambda_boundary);
    t.iterations = r.count("training.iterations", 0);
    t.samples = r.counts("training.samples");
    t.epochs = r.counts("training.epochs");
    t.n_boundary = r.count("training.n_boundary", t.n_boundary);
    t.baseline_epochs = r.count("training.baseline_epochs", t.baseline_epochs);
    t.chunk = r.count("training.chunk", t.chunk);
    if (const auto* e = r.find("training.initial_time_max"); e && e->value != "none") {
        t.initial_time_max = r.num("training.initial_time_max", 0.0);
    }
    t.attack.epsilon = r.num("attack.epsilon", t.attack.epsilon);
    t.attack.eta = r.num("attack.eta", t.attack.eta);
    t.attack.steps = r.count("attack.steps", t.attack.steps);
    t.attack.revisit = r.num("attack.revisit", t.attack.revisit);
    t.attack.random_init = r.flag("attack.random_init", t.attack.random_init);
    t.attack_boundary = r.flag("attack.attack_boundary", t.attack_boundary);
    t.rar_factor = r.num("rar.factor", t.rar_factor);
    t.sais.n_per_round = r.count("sais.n_per_round", t.sais.n_per_round);
    t.sais.p0 = r.num("sais.p0", t.sais.p0);
    t.sais.max_rounds = r.count("sais.max_rounds", t.sais.max_rounds);

    c.grid_points = r.count("evaluation.grid_points", c.grid_points);
    if (c.grid_points < 2) throw ConfigError("evaluation.grid_points must be >= 2", r.line("evaluation.grid_points"));
    c.cache_dir = r.str("evaluation.cache_dir", c.cache_dir);
    c.write_checkpoints = r.flag("evaluation.checkpoints", c.write_checkpoints);
    c.grid_every_iteration = r.flag("evaluation.grid_every_iteration", c.grid_every_iteration);
    c.progress_every = r.count("logging.progress_every", c.progress_every);

    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

training::TrainConfig effective_train_config(const ExperimentConfig& config)
{
    training::TrainConfig t = config.train;
    if (config.profile == Profile::Desk) {
        auto shrink = [](std::size_t e) { return std::max<std::size_t>(1, e / 10); };
        for (auto& e : t.epochs) e = shrink(e);
        t.baseline_epochs = shrink(t.baseline_epochs);
    }
    return t;
}

namespace {

std::string join_counts(const std::vector<std::size_t>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s;
}

const char* bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string render_config(const ExperimentConfig& c)
{
    using text::format_double;
    const auto& t = c.train;
    std::ostringstream o;
    o << "[experiment]\n"
      << "name = " << c.name << "\nproblem = " << c.problem << "\nstrategy = " << training::strategy_name(t.strategy)
      << "\nseeds = ";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? ", " : "") << c.seeds[i];
    o << "\nprofile = " << profile_name(c.profile) << "\noutput = " << c.output_dir << "\n\n";
    o << "[network]\nhidden_layers = " << t.hidden_layers << "\nwidth = " << t.width << "\n\n";
    o << "[training]\nlearning_rate = " << format_double(t.learning_rate)
      << "\nlambda = " << format_double(t.lambda_boundary) << "\niterations = " << t.iterations
      << "\nsamples = " << join_counts(t.samples) << "\nepochs = " << join_counts(t.epochs)
      << "\nn_boundary = " << t.n_boundary << "\nbaseline_epochs = " << t.baseline_epochs
      << "\ninitial_time_max = " << (t.initial_time_max ? format_double(*t.initial_time_max) : "none")
      << "\nchunk = " << t.chunk << "\n\n";
    o << "[attack]\nepsilon = " << format_double(t.attack.epsilon) << "\neta = " << format_double(t.attack.eta)
      << "\nsteps = " << t.attack.steps << "\nrevisit = " << format_double(t.attack.revisit)
      << "\nrandom_init = " << bool_str(t.attack.random_init) << "\nattack_boundary = " << bool_str(t.attack_boundary)
      << "\n\n";
    o << "[rar]\nfactor = " << format_double(t.rar_factor) << "\n\n";
    o << "[sais]\nn_per_round = " << t.sais.n_per_round << "\np0 = " << format_double(t.sais.p0)
      << "\nmax_rounds = " << t.sais.max_rounds << "\n\n";
    o << "[evaluation]\ngrid_points = " << c.grid_points << "\ncache_dir = " << c.cache_dir
      << "\ncheckpoints = " << bool_str(c.write_checkpoints)
      << "\ngrid_every_iteration = " << bool_str(c.grid_every_iteration) << "\n\n";
    o << "[logging]\nprogress_every = " << c.progress_every << "\n";
    return o.str();
}

std::vector<std::pair<std::string, std::string>> assumption_flags(const ExperimentConfig& c)
{
    const pde::PdeProblem p = pde::problem_by_name(c.problem);
    std::vector<std::pair<std::string, std::string>> f;
    if (p.metric == pde::MetricKind::RelativeL2) {
        f.emplace_back("metric", "relative L2, ||u_pred - u_ref||_2 / ||u_ref||_2 over the test grid");
    } else {
        f.emplace_back("metric", "mean of squared residual over the test grid");
    }
    f.emplace_back("epochs", "full-batch Adam steps (beta1 0.9, beta2 0.999, eps 1e-8), moments reset before each retrain");
    f.emplace_back("loss", "mean(r^2) + lambda * mean((u - g)^2) over all samples so far");
    f.emplace_back("boundary", "drawn once at k = 0 and kept fixed");
    f.emplace_back("revisit", "floor(m)+1 most recent iterations in full, the next older one with a fraction frac(m) of "
                              "its samples, and iteration 0");
    f.emplace_back("attack_gradient", "taken at the current perturbed point, projected onto the domain");
    f.emplace_back("ties", "top-N selection keeps the lowest candidate index first");
    f.emplace_back("sais_output", "final round draws N_k points from the last fitted Gaussian");
    f.emplace_back("profile", std::string(profile_name(c.profile)) +
                                  (c.profile == Profile::Desk ? " (every epoch count divided by 10)" : " (full epoch counts)"));
    if (c.problem == "multiscale") f.emplace_back("multiscale_boundary", "the two endpoints whatever n_boundary says");
    if (p.time_dependent) {
        f.emplace_back("corners", "t = 0 corner points are initial-condition points only");
        if (c.train.initial_time_max && c.train.strategy != training::Strategy::LhsBaseline) {
            f.emplace_back("initial_samples", "k = 0 samples restricted to t <= " + text::format_double(*c.train.initial_time_max));
        }
        if (c.train.strategy == training::Strategy::AtPinn && c.train.attack_boundary) {
            f.emplace_back("attack_seeds", "boundary and initial points are attacked as well");
        }
    }
    return f;
}

// ---------------------------------------------------------------- evaluation

double relative_l2(const std::vector<double>& prediction, const std::vector<double>& reference)
{
    if (prediction.size() != reference.size() || reference.empty()) throw ShapeError("relative_l2: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = prediction[i] - reference[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    if (den == 0.0) throw NumericalError("relative_l2: reference is identically zero");
    return std::sqrt(num / den);
}

Evaluator Evaluator::create(const pde::PdeProblem& problem, std::size_t grid_points, const std::string& cache_dir)
{
    Evaluator ev;
    ev.problem = problem;
    const std::size_t d = problem.domain.dim();
    for (std::size_t j = 0; j < d; ++j) {
        ev.axes.push_back(oracle::linspace(problem.domain.lo[j], problem.domain.hi[j], grid_points));
    }
    std::size_t n = 1;
    for (const auto& a : ev.axes) n *= a.size();
    ev.points = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i;
        for (std::size_t j = d; j-- > 0;) {
            ev.points.at(i, j) = ev.axes[j][rem % grid_points];
            rem /= grid_points;
        }
    }
    if (problem.exact_solution) {
        ev.reference.resize(n);
        for (std::size_t i = 0; i < n; ++i) ev.reference[i] = (*problem.exact_solution)(ev.points.values().subspan(i * d, d));
    } else {
        const oracle::ReferenceGrid g = oracle::cached_reference(problem.name, cache_dir);
        ev.reference.resize(n);
        for (std::size_t i = 0; i < n; ++i) ev.reference[i] = g.interpolate(ev.points.values().subspan(i * d, d));
    }
    return ev;
}

Evaluator::Result Evaluator::evaluate(const nn::MlpParams& params) const
{
    Result r;
    r.prediction = nn::forward(params, points);
    r.residual = pde::residual_values(problem, params, points);
    double sq = 0.0;
    for (double v : r.residual) {
        r.max_grid_residual = std::max(r.max_grid_residual, std::abs(v));
        sq += v * v;
    }
    if (problem.metric == pde::MetricKind::RelativeL2) {
        r.metric = relative_l2(r.prediction, reference);
    } else {
        r.metric = sq / double(r.residual.size());
    }
    if (!std::isfinite(r.metric) || !std::isfinite(r.max_grid_residual)) throw NumericalError("non-finite metric");
    return r;
}

// ---------------------------------------------------------------- csv

const char* const kMetricsHeader =
    "k,cumulative_samples,new_samples,metric_kind,metric_value,max_grid_residual,max_new_sample_residual,final_loss,"
    "epochs";

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows)
{
    using text::format_double;
    out << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        out << r.k << ',' << r.cumulative_samples << ',' << r.new_samples << ',' << r.metric_kind << ','
            << format_double(r.metric_value) << ',' << format_double(r.max_grid_residual) << ','
            << format_double(r.max_new_sample_residual) << ',' << format_double(r.final_loss) << ',' << r.epochs
            << '\n';
    }
}

std::vector<MetricRow> read_metrics_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("metrics csv: unexpected header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 9) throw std::runtime_error("metrics csv: expected 9 fields in '" + line + "'");
        MetricRow r;
        r.k = std::size_t(text::parse_int(f[0]));
        r.cumulative_samples = std::size_t(text::parse_int(f[1]));
        r.new_samples = std::size_t(text::parse_int(f[2]));
        r.metric_kind = f[3];
        r.metric_value = text::parse_double(f[4]);
        r.max_grid_residual = text::parse_double(f[5]);
        r.max_new_sample_residual = text::parse_double(f[6]);
        r.final_loss = text::parse_double(f[7]);
        r.epochs = std::size_t(text::parse_int(f[8]));
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

void write_file(const fs::path& path, const std::string& content)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string prediction_csv(const Evaluator& ev, const Evaluator::Result& res)
{
    std::ostringstream o;
    for (const auto& a : ev.problem.axis_names) o << a << ',';
    o << "u_pred,u_ref,residual\n";
    const std::size_t d = ev.points.cols();
    for (std::size_t i = 0; i < ev.points.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) o << text::format_double(ev.points.at(i, j)) << ',';
        o << text::format_double(res.prediction[i]) << ',' << text::format_double(ev.reference[i]) << ','
          << text::format_double(res.residual[i]) << '\n';
    }
    return o.str();
}

std::string manifest_text(const ExperimentConfig& c, std::uint64_t seed, const std::string& status,
                          const std::string& detail, std::size_t iterations_done)
{
    const training::TrainConfig eff = effective_train_config(c);
    std::ostringstream o;
    o << "# atpinn run manifest\n";
    o << "[run]\nstatus = " << status << "\nseed = " << seed << "\niterations_completed = " << iterations_done
      << "\neffective_epochs = " << join_counts(eff.epochs) << "\neffective_baseline_epochs = " << eff.baseline_epochs
      << '\n';
    if (!detail.empty()) o << "error = " << detail << '\n';
    o << "\n[assumptions]\n";
    for (const auto& [key, note] : assumption_flags(c)) o << key << " = " << note << '\n';
    ExperimentConfig single = c;
    single.seeds = {seed};
    o << "\n" << render_config(single);
    return o.str();
}

}  // namespace

RunSummary run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& directory, const Logger& log)
{
    const pde::PdeProblem problem = pde::problem_by_name(config.problem);
    training::TrainConfig tc = effective_train_config(config);
    tc.seed = seed;
    tc.validate();

    const fs::path dir(directory);
    fs::create_directories(dir);
    write_file(dir / "manifest.txt", manifest_text(config, seed, "running", "", 0));

    RunSummary summary;
    summary.directory = directory;
    std::ostringstream timing;
    timing << "k,sampling_seconds,training_seconds,evaluation_seconds\n";
    std::size_t done = 0;
    try {
        if (log) log("preparing evaluation grid for " + problem.name);
        const Evaluator ev = Evaluator::create(problem, config.grid_points, config.cache_dir);
        const std::string metric_kind = pde::metric_name(problem.metric);
        Evaluator::Result last;

        training::TrainHooks hooks;
        hooks.progress_every = config.progress_every;
        if (log && config.progress_every > 0) {
            hooks.on_progress = [&](std::size_t k, std::size_t epoch, double loss) {
                log("k=" + std::to_string(k) + " epoch " + std::to_string(epoch) + " loss " + text::format_double(loss));
            };
        }
        hooks.on_iteration = [&](const training::TrainResult& tr) {
            const training::IterationRecord& rec = tr.records.back();
            const auto t0 = std::chrono::steady_clock::now();
            last = ev.evaluate(tr.state.params);
            const double eval_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            MetricRow row;
            row.k = rec.k;
            row.cumulative_samples = rec.cumulative_samples;
            row.new_samples = rec.new_samples;
            row.metric_kind = metric_kind;
            row.metric_value = last.metric;
            row.max_grid_residual = last.max_grid_residual;
            row.max_new_sample_residual = rec.max_new_sample_residual;
            row.final_loss = rec.final_loss;
            row.epochs = rec.epochs;
            summary.rows.push_back(row);
            timing << rec.k << ',' << text::format_double(rec.sampling_seconds) << ','
                   << text::format_double(rec.training_seconds) << ',' << text::format_double(eval_s) << '\n';

            std::ostringstream m;
            write_metrics_csv(m, summary.rows);
            write_file(dir / "metrics.csv", m.str());
            write_file(dir / "timing.csv", timing.str());
            std::ostringstream s;
            sampling::write_samples_csv(s, tr.history.back(), problem.axis_names);
            write_file(dir / ("samples_" + std::to_string(tr.history.size() - 1) + ".csv"), s.str());
            if (config.write_checkpoints) {
                std::ostringstream ck;
                nn::save_params(ck, tr.state.params);
                write_file(dir / ("checkpoint_" + std::to_string(rec.k) + ".txt"), ck.str());
            }
            if (config.grid_every_iteration) {
                write_file(dir / ("prediction_grid_" + std::to_string(rec.k) + ".csv"), prediction_csv(ev, last));
            }
            ++done;
            if (log) {
                log("k=" + std::to_string(rec.k) + " samples=" + std::to_string(rec.cumulative_samples) + " " +
                    metric_kind + "=" + text::format_double(last.metric) +
                    " max_grid_residual=" + text::format_double(last.max_grid_residual));
            }
        };
        const training::TrainResult tr = training::run_iterative_training(problem, tc, hooks);
        {
            std::ostringstream b;
            sampling::SampleSet bs(tr.boundary.points, 0, sampling::Origin::Boundary);
            sampling::write_samples_csv(b, bs, problem.axis_names);
            write_file(dir / "boundary.csv", b.str());
        }
        write_file(dir / "prediction_grid.csv", prediction_csv(ev, last));
        write_file(dir / "manifest.txt", manifest_text(config, seed, "complete", "", done));
    } catch (const std::exception& e) {
        write_file(dir / "manifest.txt", manifest_text(config, seed, "incomplete", e.what(), done));
        throw;
    }
    return summary;
}

std::vector<RunSummary> run_experiment(const ExperimentConfig& config, const Logger& log)
{
    std::vector<RunSummary> out;
    for (std::uint64_t seed : config.seeds) {
        const std::string dir = (fs::path(config.output_dir) / ("seed_" + std::to_string(seed))).string();
        if (log) log("run " + config.name + " seed " + std::to_string(seed) + " -> " + dir);
        out.push_back(run_seed(config, seed, dir, log));
    }
    return out;
}

// ---------------------------------------------------------------- sweeps

std::vector<std::string> sweep_parameters() { return {"T", "m", "eta", "epsilon", "N", "epochs", "seed"}; }

ConfigDoc apply_sweep_value(const ConfigDoc& raw, const std::string& param, const std::string& value)
{
    ConfigDoc doc = flatten_preset(raw);
    auto fill_list = [&](const std::string& key) {
        const ExperimentConfig c = resolve_config(doc);
        std::string list = value + "*" + std::to_string(c.train.iterations + 1);
        doc.set(key, list);
    };
    try {
        (void)text::parse_double(value);
    } catch (const std::invalid_argument&) {
        throw ConfigError("sweep value '" + value + "' is not a number");
    }
    if (param == "T") {
        doc.set("attack.steps", value);
    } else if (param == "m") {
        doc.set("attack.revisit", value);
    } else if (param == "eta") {
        doc.set("attack.eta", value);
    } else if (param == "epsilon") {
        doc.set("attack.epsilon", value);
    } else if (param == "N") {
        fill_list("training.samples");
    } else if (param == "epochs") {
        fill_list("training.epochs");
        doc.set("training.baseline_epochs", value);
    } else if (param == "seed") {
        doc.set("experiment.seeds", value);
    } else {
        throw ConfigError("unknown sweep parameter '" + param + "' (expected T, m, eta, epsilon, N, epochs or seed)");
    }
    return doc;
}

void run_sweep(const ConfigDoc& doc, const std::string& param, const std::vector<std::string>& values,
               const std::function<void(ExperimentConfig&)>& adjust, const Logger& log)
{
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    // Resolve everything before running anything.
    std::vector<ExperimentConfig> configs;
    const ExperimentConfig base = resolve_config(doc);
    for (const auto& v : values) {
        ExperimentConfig c = resolve_config(apply_sweep_value(doc, param, v));
        if (adjust) adjust(c);
        c.output_dir = (fs::path(base.output_dir) / (param + "_" + v)).string();
        c.name = base.name + "-" + param + "_" + v;
        configs.push_back(std::move(c));
    }
    ExperimentConfig root = base;
    if (adjust) adjust(root);
    fs::create_directories(root.output_dir);
    std::ostringstream cmp;
    cmp << "param,value,seed," << kMetricsHeader << '\n';
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto runs = run_experiment(configs[i], log);
        for (std::size_t s = 0; s < runs.size(); ++s) {
            std::ostringstream rows;
            write_metrics_csv(rows, runs[s].rows);
            std::istringstream lines(rows.str());
            std::string line;
            std::getline(lines, line);
            while (std::getline(lines, line)) {
                cmp << param << ',' << values[i] << ',' << configs[i].seeds[s] << ',' << line << '\n';
            }
        }
        write_file(fs::path(root.output_dir) / "comparison.csv", cmp.str());
    }
}

}  // namespace atpinn::harness
