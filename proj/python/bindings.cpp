#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vvcguard/errors.hpp"
#include "vvcguard/evaluation.hpp"
#include "vvcguard/pipeline.hpp"
#include "vvcguard/powerflow.hpp"
#include "vvcguard/scenarios.hpp"
#include "vvcguard/simulator.hpp"
#include "vvcguard/trace_io.hpp"

namespace py = pybind11;
using namespace vvcguard;

namespace {

py::dict trace_to_dict(const sim::SimTrace& t) {
  std::vector<double> time, v, i, q, vd, vq, id, iq;
  std::vector<int> curve;
  for (const auto& r : t.rows) {
    time.push_back(r.t);
    v.push_back(r.v_mag[0]);
    i.push_back(r.i_mag[0]);
    q.push_back(r.q);
    vd.push_back(r.vd);
    vq.push_back(r.vq);
    id.push_back(r.id);
    iq.push_back(r.iq);
    curve.push_back(r.curve_id);
  }
  py::dict d;
  d["t"] = time;
  d["v"] = v;
  d["i"] = i;
  d["q"] = q;
  d["vd"] = vd;
  d["vq"] = vq;
  d["id"] = id;
  d["iq"] = iq;
  d["curve_id"] = curve;
  d["attack_time"] = t.attack_time;
  d["dt"] = t.dt;
  return d;
}

py::dict metrics_to_dict(const eval::MetricsReport& r) {
  py::dict d;
  d["tp"] = r.counts.tp;
  d["tn"] = r.counts.tn;
  d["fp"] = r.counts.fp;
  d["fn"] = r.counts.fn;
  d["accuracy"] = r.accuracy;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Volt-VAr curve-update simulation and detection";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<MalformedCurveError>(m, "MalformedCurveError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ReferenceError>(m, "ReferenceError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());

  py::class_<vvc::DroopCurve>(m, "DroopCurve")
      .def(py::init([](double va, double vb, double vc, double vd, int orientation) {
             return vvc::DroopCurve{va, vb, vc, vd, orientation};
           }),
           py::arg("va"), py::arg("vb"), py::arg("vc"), py::arg("vd"), py::arg("orientation") = 1)
      .def_readwrite("va", &vvc::DroopCurve::va)
      .def_readwrite("vb", &vvc::DroopCurve::vb)
      .def_readwrite("vc", &vvc::DroopCurve::vc)
      .def_readwrite("vd", &vvc::DroopCurve::vd)
      .def_readwrite("orientation", &vvc::DroopCurve::orientation)
      .def("is_well_formed", [](const vvc::DroopCurve& c) { return vvc::is_well_formed(c); })
      .def("__eq__", [](const vvc::DroopCurve& a, const vvc::DroopCurve& b) { return a == b; })
      .def("__repr__", [](const vvc::DroopCurve& c) { return "DroopCurve(" + vvc::format_curve(c) + ")"; });

  m.attr("DEFAULT_CURVE") = vvc::kDefaultCurve;
  m.def("parse_curve", [](const std::string& s) { return vvc::parse_curve(s); });
  m.def("q_max", py::overload_cast<double, double>(&vvc::q_max), py::arg("s_max"), py::arg("p_ref"));
  m.def("droop_qref", &vvc::droop_qref, py::arg("curve"), py::arg("v"), py::arg("q_max"));
  m.def("segment_slopes", &vvc::segment_slopes, py::arg("curve"), py::arg("q_max"));
  m.def("chord_slope", &vvc::chord_slope, py::arg("curve"), py::arg("q_max"));

  m.def(
      "pcc_thevenin_reactance",
      [](int dg) { return grid::pcc_thevenin_impedance(grid::default_benchmark_network(), dg).imag(); },
      py::arg("dg") = 4);

  m.def(
      "simulate",
      [](const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve, int dg, double p_ref,
         double duration, double attack_time, std::uint64_t seed, double noise) {
        vvc::InverterParams p;
        p.p_ref = p_ref;
        sim::ClosedLoopConfig cfg;
        cfg.duration = duration;
        cfg.attack_time = attack_time;
        cfg.seed = seed;
        cfg.measurement_noise = noise;
        const auto model = grid::default_benchmark_network();
        return trace_to_dict(sim::run_closed_loop(model, dg, p, old_curve, new_curve, cfg));
      },
      py::arg("old_curve"), py::arg("new_curve"), py::arg("dg") = 4, py::arg("p_ref") = 0.05,
      py::arg("duration") = 13.0, py::arg("attack_time") = 3.0, py::arg("seed") = 0, py::arg("noise") = 1e-5);

  m.def(
      "predicts_oscillation",
      [](const vvc::DroopCurve& curve, int dg) {
        const auto model = grid::default_benchmark_network();
        const auto op = scenarios::operating_condition(model, dg, vvc::InverterParams{},
                                                       sim::default_background(model, dg));
        return py::make_tuple(scenarios::predicts_oscillation(curve, op), scenarios::equilibrium_gain(curve, op));
      },
      py::arg("curve"), py::arg("dg") = 4,
      "(oscillates, gain) from the linearized loop at the equilibrium.");

  m.def("zeta", &features::zeta, py::arg("v"), py::arg("v_n"), py::arg("c") = 100.0, py::arg("p") = 2);
  m.def("feature_names", [](const std::string& mode) { return features::feature_names(features::parse_mode(mode)); },
        py::arg("mode") = "monitored");
  m.def("schema_hash", [](const std::string& mode) { return features::schema_hash(features::parse_mode(mode)); },
        py::arg("mode") = "monitored");

  m.def(
      "metrics",
      [](long tp, long tn, long fp, long fn) { return metrics_to_dict(eval::metrics(eval::Counts{tp, tn, fp, fn})); },
      py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));
  m.def(
      "confusion",
      [](const std::vector<int>& labels, const std::vector<int>& predictions) {
        return metrics_to_dict(eval::metrics(eval::confusion(labels, predictions)));
      },
      py::arg("labels"), py::arg("predictions"));

  py::class_<mlp::MlpModel>(m, "Model")
      .def_static("load", [](const std::string& path) { return mlp::load_model(path); })
      .def_readonly("layer_sizes", &mlp::MlpModel::layer_sizes)
      .def_readonly("feature_mode", &mlp::MlpModel::feature_mode)
      .def_readonly("schema_hash", &mlp::MlpModel::schema_hash)
      .def_readonly("manifest", &mlp::MlpModel::manifest)
      .def("predict_proba", [](const mlp::MlpModel& model, const std::vector<double>& x) { return mlp::forward(model, x); });

  m.def(
      "run_pipeline",
      [](const std::string& out_dir, std::size_t n_legit, std::size_t n_malicious, std::uint64_t seed, int trials,
         int search_epochs, int final_epochs) {
        pipeline::RunConfig cfg;
        cfg.out_dir = out_dir;
        cfg.n_legit = n_legit;
        cfg.n_malicious = n_malicious;
        cfg.seed = seed;
        cfg.search.trials = trials;
        cfg.search_train.epochs = search_epochs;
        cfg.final_train.epochs = final_epochs;
        py::gil_scoped_release release;
        const auto gen = pipeline::cmd_gen_dataset(cfg);
        const auto trained = pipeline::cmd_train(cfg, gen.dataset_path);
        const auto ev = pipeline::cmd_eval(cfg, trained.model_path, gen.dataset_path);
        py::gil_scoped_acquire acquire;
        py::dict out = metrics_to_dict(ev.result.report);
        out["model_path"] = trained.model_path;
        out["dataset_path"] = gen.dataset_path;
        out["report_path"] = ev.report_path;
        return out;
      },
      py::arg("out_dir"), py::arg("n_legit") = 2000, py::arg("n_malicious") = 2000, py::arg("seed") = 7,
      py::arg("trials") = 30, py::arg("search_epochs") = 100, py::arg("final_epochs") = 300,
      "Generate, train and evaluate; returns the test metrics and output paths.");

  m.def(
      "detect",
      [](const std::string& model_path, const std::string& trace_path, const vvc::DroopCurve& curve,
         const vvc::DroopCurve& old_curve, const std::string& policy) {
        pipeline::RunConfig cfg;
        cfg.policy = eval::parse_policy(policy);
        const auto v = pipeline::cmd_detect(cfg, model_path, trace_path, old_curve, curve);
        py::dict d;
        d["decision"] = std::string(eval::decision_name(v.decision));
        d["probability"] = v.probability;
        d["exit_code"] = eval::exit_code(v.decision);
        d["reason"] = v.reason;
        return d;
      },
      py::arg("model_path"), py::arg("trace_path"), py::arg("curve"), py::arg("old_curve") = vvc::kDefaultCurve,
      py::arg("policy") = "revert-last-stable");

  m.def(
      "save_trace",
      [](const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve, const std::string& path) {
        const auto model = grid::default_benchmark_network();
        sim::save_trace(path, sim::run_closed_loop(model, 4, vvc::InverterParams{}, old_curve, new_curve,
                                                   sim::ClosedLoopConfig{}));
      },
      py::arg("old_curve"), py::arg("new_curve"), py::arg("path"));
}
