#include "atpinn/errors.hpp"
#include "atpinn/harness.hpp"
#include "atpinn/network.hpp"
#include "atpinn/oracle.hpp"
#include "atpinn/pde.hpp"
#include "atpinn/sampling.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace atpinn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a)
{
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array of points");
    const auto n = std::size_t(a.shape(0)), d = std::size_t(a.shape(1));
    return Tensor({n, d}, std::vector<double>(a.data(), a.data() + n * d));
}

Array to_array(const Tensor& t)
{
    Array out({t.rows(), t.cols()});
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

Array to_array(const std::vector<double>& v)
{
    Array out(py::ssize_t(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

harness::ConfigDoc make_doc(const std::string& config, const std::vector<std::string>& overrides)
{
    harness::ConfigDoc doc = harness::load_config_doc(config);
    for (const auto& o : overrides) harness::apply_override(doc, o);
    return doc;
}

py::dict row_dict(const harness::MetricRow& r)
{
    py::dict d;
    d["k"] = r.k;
    d["cumulative_samples"] = r.cumulative_samples;
    d["new_samples"] = r.new_samples;
    d["metric_kind"] = r.metric_kind;
    d["metric_value"] = r.metric_value;
    d["max_grid_residual"] = r.max_grid_residual;
    d["max_new_sample_residual"] = r.max_new_sample_residual;
    d["final_loss"] = r.final_loss;
    d["epochs"] = r.epochs;
    return d;
}

}  // namespace

PYBIND11_MODULE(_atpinn, m)
{
    m.doc() = "Adversarial collocation sampling for physics-informed neural networks";

    auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    (void)config_error;

    m.def("problem_names", &pde::problem_names);
    m.def("preset_names", &harness::preset_names);
    m.def("preset_text", &harness::preset_text, py::arg("name"));

    m.def(
        "resolve_config",
        [](const std::string& config, const std::vector<std::string>& overrides) {
            return harness::render_config(harness::resolve_config(make_doc(config, overrides)));
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        "Canonical config text of a file or preset after applying section.key=value overrides.");

    m.def(
        "run",
        [](const std::string& config, const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
           std::optional<std::string> out, std::optional<std::string> profile) {
            harness::ConfigDoc doc = make_doc(config, overrides);
            if (seed) doc.set("experiment.seeds", std::to_string(*seed));
            if (out) doc.set("experiment.output", *out);
            if (profile) doc.set("experiment.profile", *profile);
            const harness::ExperimentConfig c = harness::resolve_config(doc);
            std::vector<harness::RunSummary> runs;
            {
                py::gil_scoped_release release;
                runs = harness::run_experiment(c);
            }
            py::list result;
            for (std::size_t i = 0; i < runs.size(); ++i) {
                py::dict r;
                r["seed"] = c.seeds[i];
                r["directory"] = runs[i].directory;
                py::list rows;
                for (const auto& row : runs[i].rows) rows.append(row_dict(row));
                r["metrics"] = rows;
                result.append(r);
            }
            return result;
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("seed") = py::none(),
        py::arg("out") = py::none(), py::arg("profile") = py::none(),
        "Runs every seed of an experiment and returns the per-iteration metrics.");

    py::class_<nn::MlpParams>(m, "Network")
        .def_property_readonly("layer_sizes", [](const nn::MlpParams& p) { return p.layer_sizes; })
        .def_property_readonly("num_parameters", &nn::MlpParams::num_parameters)
        .def("forward", [](const nn::MlpParams& p, const Array& x) { return to_array(nn::forward(p, to_tensor(x))); })
        .def("save", [](const nn::MlpParams& p, const std::string& path) { nn::save_params(path, p); });

    m.def(
        "load_checkpoint", [](const std::string& path) { return nn::load_params(path); }, py::arg("path"));
    m.def(
        "residual",
        [](const std::string& problem, const nn::MlpParams& p, const Array& x) {
            return to_array(pde::residual_values(pde::problem_by_name(problem), p, to_tensor(x)));
        },
        py::arg("problem"), py::arg("network"), py::arg("points"));

    m.def(
        "lhs",
        [](std::size_t n, std::vector<double> lo, std::vector<double> hi, std::uint64_t seed) {
            return to_array(sampling::lhs(n, pde::DomainBox(std::move(lo), std::move(hi)), seed).points);
        },
        py::arg("n"), py::arg("lo"), py::arg("hi"), py::arg("seed"));
    m.def(
        "uniform",
        [](std::size_t n, std::vector<double> lo, std::vector<double> hi, std::uint64_t seed) {
            return to_array(sampling::uniform(n, pde::DomainBox(std::move(lo), std::move(hi)), seed).points);
        },
        py::arg("n"), py::arg("lo"), py::arg("hi"), py::arg("seed"));

    m.def("burgers_reference", &oracle::burgers_reference, py::arg("x"), py::arg("t"));
    m.def(
        "reference_grid",
        [](const std::string& problem, const std::string& cache_dir) {
            oracle::ReferenceGrid g;
            {
                py::gil_scoped_release release;
                g = oracle::cached_reference(problem, cache_dir);
            }
            py::list axes;
            for (const auto& a : g.axes) axes.append(to_array(a));
            Array values(g.values.shape());
            std::copy(g.values.values().begin(), g.values.values().end(), values.mutable_data());
            return py::make_tuple(axes, values);
        },
        py::arg("problem"), py::arg("cache_dir") = ".atpinn_cache",
        "Axes and values of a problem's cached reference grid, building it when missing.");
    m.def("relative_l2", &harness::relative_l2, py::arg("prediction"), py::arg("reference"));
}
