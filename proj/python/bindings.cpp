// Copyright 2026 The tilegene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "commands.hpp"
#include "tilegene/bag.hpp"
#include "tilegene/checkpoint.hpp"
#include "tilegene/config.hpp"
#include "tilegene/dataset.hpp"
#include "tilegene/errors.hpp"
#include "tilegene/metrics.hpp"
#include "tilegene/model.hpp"
#include "tilegene/synth.hpp"

namespace py = pybind11;
using namespace tilegene;

namespace {

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  py::array_t<T> out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

template <typename T>
Tensor<T> from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  Tensor<T> t({std::size_t(a.shape(0)), std::size_t(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

py::dict bag_to_dict(const Bag& b) {
  py::dict d;
  d["instances"] = to_numpy(b.instances);
  d["slide_id"] = b.slide_id;
  d["case_id"] = b.case_id;
  d["label"] = b.label;
  py::array_t<float> genes(std::vector<py::ssize_t>{static_cast<py::ssize_t>(b.gene_target.size())});
  std::copy(b.gene_target.begin(), b.gene_target.end(), genes.mutable_data());
  d["gene_target"] = genes;
  return d;
}

nlohmann::json json_of(const py::object& o) {
  auto dumps = py::module_::import("json").attr("dumps");
  return nlohmann::json::parse(dumps(o).cast<std::string>());
}

py::object py_of(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig config_with(const py::dict& overrides) {
  ConfigBuilder b;
  b.merge(json_of(overrides), "python");
  return b.resolve();
}

py::dict output_to_dict(const ForwardOutput<float>& o) {
  py::dict d;
  d["c"] = to_numpy(o.c);
  d["logits"] = to_numpy(o.logits);
  d["s"] = to_numpy(o.s);
  d["S"] = to_numpy(o.S);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "tilegene core bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "tilegene");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        py::gil_scoped_release release;
        return cli::run_cli(static_cast<int>(args.size()), argv.data());
      },
      py::arg("args"), "Run a tilegene subcommand; returns the exit code.");

  m.def("read_bag", [](const std::string& path) { return bag_to_dict(read_bag(path)); }, py::arg("path"));
  m.def(
      "write_bag",
      [](const std::string& path, const py::array_t<float, py::array::c_style | py::array::forcecast>& instances,
         const std::string& slide_id, const std::string& case_id, std::uint32_t label,
         std::vector<float> gene_target) {
        Bag b;
        b.instances = from_numpy<float>(instances);
        b.slide_id = slide_id;
        b.case_id = case_id;
        b.label = label;
        b.gene_target = std::move(gene_target);
        write_bag(path, b);
      },
      py::arg("path"), py::arg("instances"), py::arg("slide_id"), py::arg("case_id"), py::arg("label"),
      py::arg("gene_target") = std::vector<float>{});
  m.def(
      "validate_bag",
      [](const std::string& path, std::optional<std::size_t> k, std::optional<std::size_t> d,
         std::optional<std::size_t> genes, std::optional<std::size_t> classes) {
        try {
          return validate_bag(read_bag(path), {k, d, genes, classes});
        } catch (const std::exception& e) {
          return std::vector<std::string>{e.what()};
        }
      },
      py::arg("path"), py::arg("k") = py::none(), py::arg("d") = py::none(), py::arg("genes") = py::none(),
      py::arg("classes") = py::none(), "Problems found in a bag file (empty when valid).");
  m.def("validate_dataset", &validate_dataset, py::arg("dir"), py::arg("workers") = 1);

  m.def("default_config", [] { return py_of(config_to_json(RunConfig{})); });

  m.def(
      "synth",
      [](const std::string& out, const py::dict& spec) {
        ConfigBuilder b;
        b.merge({{"synth", json_of(spec)}}, "python");
        auto data = generate(b.resolve().synth);
        write_dataset(out, data);
        py::dict d;
        d["slides"] = data.manifest.slides.size();
        d["bags"] = data.manifest.bag_count();
        d["genes"] = data.manifest.genes;
        return d;
      },
      py::arg("out"), py::arg("spec") = py::dict());
  m.def(
      "bayes_accuracy",
      [](const py::dict& spec, std::size_t draws) {
        ConfigBuilder b;
        b.merge({{"synth", json_of(spec)}}, "python");
        const auto e = oracle_bayes_accuracy(b.resolve().synth, draws);
        return py::make_tuple(e.accuracy, e.ci_low, e.ci_high);
      },
      py::arg("spec") = py::dict(), py::arg("draws") = 100000);

  py::class_<Model<float>>(m, "Model")
      .def(py::init([](const py::dict& config) {
             ConfigBuilder b;
             b.merge({{"model", json_of(config)}}, "python");
             auto c = b.resolve().model;
             c.validate();
             return Model<float>(c);
           }),
           py::arg("config"))
      .def("initialize", &Model<float>::initialize, py::arg("seed"))
      .def_property_readonly("config", [](const Model<float>& mdl) { return py_of(mdl.config()); })
      .def_property_readonly("parameter_count", &Model<float>::parameter_count)
      .def(
          "infer",
          [](Model<float>& mdl, const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
             const std::string& aggregation) {
            return output_to_dict(mdl.infer(from_numpy<float>(x), parse_aggregation(aggregation)));
          },
          py::arg("instances"), py::arg("aggregation") = "mean")
      .def("parameters", [](Model<float>& mdl) {
        py::dict d;
        for (auto* p : mdl.parameters()) d[py::str(p->name)] = to_numpy(p->value);
        return d;
      });

  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        auto ck = load_checkpoint(path);
        return py::make_tuple(std::move(ck.model), py_of(ck.meta));
      },
      py::arg("path"), "Returns (model, meta).");

  m.def(
      "pearson",
      [](std::vector<double> x, std::vector<double> y) {
        const auto c = pearson(x, y);
        return py::make_tuple(c.r, c.p);
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "spearman",
      [](std::vector<double> x, std::vector<double> y) {
        const auto c = spearman(x, y);
        return py::make_tuple(c.r, c.p);
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "adjust_pvalues",
      [](std::vector<double> p, const std::string& method, double alpha) {
        Correction c;
        if (method == "hs") c = Correction::kHolmSidak;
        else if (method == "bh") c = Correction::kBenjaminiHochberg;
        else throw ConfigError("method must be hs or bh");
        return adjust_pvalues(p, c, alpha).rejected;
      },
      py::arg("p"), py::arg("method"), py::arg("alpha") = 0.01);
  m.def(
      "prediction_errors",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& truth) {
        const auto r = prediction_errors(from_numpy<double>(pred), from_numpy<double>(truth));
        py::dict d;
        std::vector<double> mae, rmse, rrmse;
        for (const auto& g : r.genes) {
          mae.push_back(g.mae);
          rmse.push_back(g.rmse);
          rrmse.push_back(g.rrmse_defined ? g.rrmse : std::nan(""));
        }
        d["mae"] = mae;
        d["rmse"] = rmse;
        d["rrmse"] = rrmse;
        return d;
      },
      py::arg("pred"), py::arg("truth"));
  m.def(
      "average_precision_at",
      [](std::vector<int> rel, std::size_t K, bool by_relevant) {
        return average_precision_at(rel, K, by_relevant ? ApNormalization::kRelevant : ApNormalization::kK);
      },
      py::arg("relevance"), py::arg("k"), py::arg("by_relevant") = false);
  m.def("slide_vote", [](std::vector<std::size_t> votes) { return slide_vote(votes); }, py::arg("votes"));
}
