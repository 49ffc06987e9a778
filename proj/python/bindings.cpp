#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "lure/checkpoint.hpp"
#include "lure/config.hpp"
#include "lure/metrics.hpp"
#include "lure/runner.hpp"
#include "lure/trainer.hpp"

namespace py = pybind11;
using namespace lure;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw InputError("expected a 2-d float array");
    Tensor t = Tensor::zeros({static_cast<std::size_t>(arr.shape(0)),
                              static_cast<std::size_t>(arr.shape(1))});
    std::copy(arr.data(), arr.data() + arr.size(), t.data.begin());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    py::array_t<double> arr({t.rows(), t.cols()});
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

Dataset dataset_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                            const std::vector<int>& y, int class_count) {
    Dataset d;
    d.inputs = tensor_from_array(x);
    d.labels = y;
    d.class_count = class_count;
    d.validate();
    return d;
}

py::dict record_to_dict(const MetricsRecord& r) {
    py::dict d;
    d["megabatch"] = r.megabatch_index;
    d["test_acc"] = r.test_accuracy;
    d["err_count"] = r.error_count;
    d["cer"] = r.cumulative_cer;
    d["train_acc"] = r.train_accuracy;
    d["val_acc"] = r.val_accuracy;
    d["gap"] = r.generalization_gap;
    d["ece"] = r.ece;
    d["wall_s"] = r.wall_time_s;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Anytime-learning lab core: mega-batch training with selective reinitialization";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<InputError>(m, "InputError");
    py::register_exception<ParseError>(m, "ParseError");
    py::register_exception<ProtocolError>(m, "ProtocolError");

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&dataset_from_arrays), py::arg("inputs"), py::arg("labels"),
             py::arg("class_count"))
        .def_property_readonly("inputs", [](const Dataset& d) { return array_from_tensor(d.inputs); })
        .def_readonly("labels", &Dataset::labels)
        .def_readonly("class_count", &Dataset::class_count)
        .def("__len__", &Dataset::size);

    m.def(
        "synth_blobs",
        [](int classes, std::size_t per_class, std::size_t dim, double separation, std::uint64_t seed) {
            Rng rng(seed);
            return synth_blobs(classes, per_class, dim, separation, rng);
        },
        py::arg("classes"), py::arg("per_class"), py::arg("dim"), py::arg("separation"),
        py::arg("seed"));

    m.def(
        "corrupt_labels",
        [](const Dataset& d, double rate, std::uint64_t seed) {
            Rng rng(seed);
            return corrupt_labels(d, rate, rng);
        },
        py::arg("data"), py::arg("rate"), py::arg("seed"));

    m.def(
        "cap_per_class",
        [](const Dataset& d, std::size_t cap, std::uint64_t seed) {
            Rng rng(seed);
            return cap_per_class(d, cap, rng);
        },
        py::arg("data"), py::arg("cap"), py::arg("seed"));

    m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));
    m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_column"));

    py::class_<Network>(m, "Network")
        .def(py::init([](const std::vector<std::size_t>& dims, std::uint64_t seed) {
                 Rng rng(seed);
                 return Network(NetworkSpec{dims}, rng);
             }),
             py::arg("layer_dims"), py::arg("seed"))
        .def("forward",
             [](const Network& net, const py::array_t<double, py::array::c_style |
                                                                  py::array::forcecast>& x) {
                 return array_from_tensor(net.forward_pure(tensor_from_array(x)));
             })
        .def("evaluate",
             [](const Network& net, const Dataset& d) {
                 const EvalResult r = evaluate(net, d);
                 py::dict out;
                 out["accuracy"] = r.accuracy;
                 out["error_count"] = r.error_count;
                 out["confidences"] = r.confidences;
                 out["correctness"] = std::vector<int>(r.correctness.begin(), r.correctness.end());
                 return out;
             })
        .def_property_readonly("layer_dims",
                               [](const Network& net) { return net.spec().layer_dims; });

    m.def(
        "snip_scores",
        [](Network& net, const Dataset& subset, std::size_t batch_size, bool include_biases) {
            const MaskableLayout layout(net.params(), include_biases);
            return snip_sensitivity(net, subset, batch_size, layout);
        },
        py::arg("net"), py::arg("subset"), py::arg("batch_size") = 64,
        py::arg("include_biases") = true);

    m.def("normalize_saliency", &normalize_saliency, py::arg("scores"));

    m.def(
        "topk_mask",
        [](const std::vector<double>& saliencies, double retain) {
            const SensitivityMask mask = topk_mask(saliencies, retain);
            py::dict out;
            out["bits"] = std::vector<int>(mask.bits.begin(), mask.bits.end());
            out["retained"] = mask.retained_count;
            return out;
        },
        py::arg("saliencies"), py::arg("retain"));

    m.def("cer", [](const std::vector<std::size_t>& counts) { return cer(counts); });

    m.def(
        "ece",
        [](const std::vector<double>& conf, const std::vector<int>& correct, std::size_t bins) {
            return ece(conf, std::vector<std::uint8_t>(correct.begin(), correct.end()), bins);
        },
        py::arg("confidences"), py::arg("correctness"), py::arg("bins") = 15);

    m.def(
        "pgd_attack",
        [](Network& net, const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const std::vector<int>& labels, double epsilon, std::size_t steps, double step_size,
           bool clip01, std::uint64_t seed) {
            PgdConfig cfg;
            cfg.epsilon = epsilon;
            cfg.steps = steps;
            cfg.step_size = step_size;
            cfg.clip01 = clip01;
            Rng rng(seed);
            return array_from_tensor(pgd_attack(net, tensor_from_array(x), labels, cfg, rng));
        },
        py::arg("net"), py::arg("inputs"), py::arg("labels"), py::arg("epsilon"),
        py::arg("steps") = 10, py::arg("step_size") = 0.0, py::arg("clip01") = false,
        py::arg("seed") = 0);

    m.def(
        "perturb_parameters",
        [](const Network& net, double noise_std, std::uint64_t seed) {
            Rng rng(seed);
            return perturb_parameters(net, noise_std, rng);
        },
        py::arg("net"), py::arg("noise_std"), py::arg("seed"));

    m.def(
        "corrupt_inputs",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const std::string& kind, int severity, std::uint64_t seed) {
            Rng rng(seed);
            return array_from_tensor(
                corrupt_inputs(tensor_from_array(x), corruption_kind_from_name(kind), severity, rng));
        },
        py::arg("inputs"), py::arg("kind"), py::arg("severity"), py::arg("seed"));

    m.def(
        "run_experiment",
        [](const std::string& config_json, std::uint64_t master_seed, const std::string& out_root) {
            const ExperimentConfig config =
                parse_experiment_config(nlohmann::json::parse(config_json));
            const RunOutput out = run_single(config, master_seed, out_root);
            py::list records;
            for (const auto& r : out.result.records) records.append(record_to_dict(r));
            py::dict d;
            d["run_dir"] = out.run_dir;
            d["run_id"] = out.run_id;
            d["records"] = records;
            return d;
        },
        py::arg("config_json"), py::arg("master_seed"), py::arg("out_root"),
        "Run one seeded experiment and write the run directory; returns the per-mega-batch records.");

    m.def("validate_config", [](const std::string& config_json) {
        parse_experiment_config(nlohmann::json::parse(config_json));
        return true;
    });

    m.def("config_hash", [](const std::string& config_json) {
        return config_hash(parse_experiment_config(nlohmann::json::parse(config_json)));
    });

    m.attr("__version__") = "1.0.0";
}
