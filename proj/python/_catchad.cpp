#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "catchad/checkpoint.hpp"
#include "catchad/cli.hpp"
#include "catchad/metrics.hpp"
#include "catchad/synthgen.hpp"

#include <sstream>

namespace py = pybind11;
using namespace catchad;

namespace {

py::dict score_dict(const ScoreSeries& s) {
  py::dict d;
  d["time_score"] = s.time_score;
  d["freq_score"] = s.freq_score;
  d["final_score"] = s.final_score;
  if (s.predictions) d["prediction"] = *s.predictions;
  if (s.labels) d["label"] = *s.labels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_catchad, m) {
  m.doc() = "Bindings for the catchad anomaly detector";
  m.attr("__version__") = cli::kToolVersion;

  m.def("rfft", [](const Matrix& x) {
    const auto s = rfft(x);
    return py::make_tuple(s.real_part, s.imag_part);
  }, py::arg("x"));
  m.def("irfft", [](const Matrix& re, const Matrix& im, Eigen::Index length) {
    return irfft(Spectrum{re, im, length}, length);
  }, py::arg("real"), py::arg("imag"), py::arg("length"));

  m.def("synthesize", [](const std::string& type, std::uint64_t seed, Eigen::Index train_length,
                         Eigen::Index test_length) {
    SynthConfig cfg;
    cfg.train_length = train_length;
    cfg.test_length = test_length;
    const auto ds = synthesize(parse_anomaly_type(type), seed, cfg);
    py::dict d;
    d["train"] = ds.train.values;
    d["test"] = ds.test.values;
    d["labels"] = *ds.test.labels;
    return d;
  }, py::arg("type"), py::arg("seed") = 0, py::arg("train_length") = 20000, py::arg("test_length") = 5000);

  m.def("time_score", &time_score, py::arg("target"), py::arg("recon"));
  m.def("frequency_point_score", &frequency_point_score, py::arg("target"), py::arg("recon"),
        py::arg("patch"), py::arg("stride") = 1);
  m.def("combine_scores", &combine_scores, py::arg("time"), py::arg("freq"), py::arg("score_lambda"));
  m.def("apply_threshold", &apply_threshold, py::arg("scores"), py::arg("ratio"));

  m.def("auc_roc", &auc_roc, py::arg("scores"), py::arg("labels"));
  m.def("auc_pr", &auc_pr, py::arg("scores"), py::arg("labels"));
  m.def("affiliation_prf", [](const Labels& pred, const Labels& labels) {
    const auto a = affiliation_prf(pred, labels);
    return py::make_tuple(a.precision, a.recall, a.f1);
  }, py::arg("predictions"), py::arg("labels"));

  m.def("load_checkpoint", [](const std::filesystem::path& path) {
    const auto ck = load_checkpoint(path);
    py::dict tensors;
    for (const auto& t : ck.params.tensors()) tensors[py::str(t.name)] = t.value;
    return py::make_tuple(tensors, to_config_text(ck.config));
  }, py::arg("path"));

  m.def("score", [](const std::filesystem::path& checkpoint, const Matrix& values) {
    const auto ck = load_checkpoint(checkpoint);
    LabeledSeries s;
    s.values = values;
    py::gil_scoped_release release;
    const auto out = score_series(ck.params, s, ck.config.model, ck.config.score);
    py::gil_scoped_acquire acquire;
    return score_dict(out);
  }, py::arg("checkpoint"), py::arg("values"));
  m.def("read_scores", [](const std::filesystem::path& p) { return score_dict(read_score_csv(p)); },
        py::arg("path"));

  m.def("run", [](std::vector<std::string> args) {
    args.insert(args.begin(), "catchad");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int rc;
    {
      py::gil_scoped_release release;
      rc = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(rc, out.str(), err.str());
  }, py::arg("args"), "Runs a CLI command; returns (exit_code, stdout, stderr).");
}
