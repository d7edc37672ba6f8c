#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vvcguard/errors.hpp"
#include "vvcguard/pipeline.hpp"
#include "vvcguard/trace_io.hpp"

using namespace vvcguard;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

pipeline::RunConfig resolve(const Globals& g) {
  pipeline::RunConfig cfg = g.config.empty() ? pipeline::RunConfig{} : pipeline::load_run_config(g.config);
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

std::string or_default(const std::string& value, const pipeline::RunConfig& cfg, const char* name) {
  return value.empty() ? pipeline::join_path(cfg.out_dir, name) : value;
}

void print_verdict(const eval::DetectionVerdict& v) {
  std::printf("decision %s\n", std::string(eval::decision_name(v.decision)).c_str());
  std::printf("probability %.6f\n", v.probability);
  std::printf("fallback %s\n", v.fallback_applied ? std::string(eval::policy_name(*v.fallback_applied)).c_str() : "none");
  std::printf("reason %s\n", v.reason.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volt-VAr curve-update simulator and intrusion detector"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");

  std::string preset = "demo-attack";
  std::string old_text;
  std::string new_text;
  std::string trace_out;
  auto* simulate = app.add_subcommand("simulate", "Run one curve update through the closed loop");
  simulate->add_option("--preset", preset, "demo-attack or demo-legit");
  simulate->add_option("--old-curve", old_text, "va,vb,vc,vd[,inverted]");
  simulate->add_option("--new-curve", new_text, "va,vb,vc,vd[,inverted]");
  simulate->add_option("--trace", trace_out, "Trace file (default <out>/trace.csv)");

  auto* export_trace = app.add_subcommand("export-trace", "Write the trace of a preset for plotting");
  export_trace->add_option("--preset", preset, "demo-attack or demo-legit");
  export_trace->add_option("--trace", trace_out, "Trace file (default <out>/trace.csv)");

  auto* gen = app.add_subcommand("gen-dataset", "Generate the labeled scenario dataset");

  std::string dataset;
  auto* train = app.add_subcommand("train", "Random search with k-fold CV, then final training");
  train->add_option("--dataset", dataset, "Dataset file (default <out>/dataset.csv)");

  std::string model;
  auto* evaluate = app.add_subcommand("eval", "Score a model on the held-out split");
  evaluate->add_option("--model", model, "Model file (default <out>/model.json)");
  evaluate->add_option("--dataset", dataset, "Dataset file (default <out>/dataset.csv)");

  std::string trace_in;
  std::string curve_text;
  std::string detect_old = vvc::format_curve(vvc::kDefaultCurve);
  std::string policy;
  auto* detect = app.add_subcommand("detect", "Gate a received curve using a recorded trace");
  detect->add_option("--model", model, "Model file")->required();
  detect->add_option("--trace", trace_in, "Trace file")->required();
  detect->add_option("--curve", curve_text, "Received curve va,vb,vc,vd[,inverted]")->required();
  detect->add_option("--old-curve", detect_old, "Curve active before the update");
  detect->add_option("--policy", policy, "Fallback policy on rejection");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    pipeline::RunConfig cfg = resolve(g);
    if (*simulate || *export_trace) {
      auto [old_curve, new_curve] = pipeline::preset(preset);
      if (!old_text.empty()) old_curve = vvc::parse_curve(old_text);
      if (!new_text.empty()) new_curve = vvc::parse_curve(new_text);
      const std::string path = or_default(trace_out, cfg, "trace.csv");
      std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                              ? std::filesystem::path(".")
                                              : std::filesystem::path(path).parent_path());
      const auto trace = pipeline::cmd_simulate(cfg, old_curve, new_curve, path);
      std::printf("wrote %zu rows to %s\n", trace.rows.size(), path.c_str());
      return 0;
    }
    if (*gen) {
      const auto s = pipeline::cmd_gen_dataset(cfg);
      std::printf("wrote %zu scenarios to %s (%zu draws, %zu discarded)\n", s.rows, s.dataset_path.c_str(),
                  s.stats.draws, s.stats.discarded);
      return 0;
    }
    if (*train) {
      const auto s = pipeline::cmd_train(cfg, or_default(dataset, cfg, "dataset.csv"));
      std::string arch;
      for (int n : s.search.best_hidden) arch += (arch.empty() ? "" : ",") + std::to_string(n);
      std::printf("best hidden layers (%s), lambda %.6g, cv accuracy %.4f\n", arch.c_str(), s.search.best_lambda,
                  s.search.log[static_cast<std::size_t>(s.search.best_trial)].cv.mean_accuracy);
      std::printf("wrote %s and %s\n", s.model_path.c_str(), s.log_path.c_str());
      return 0;
    }
    if (*evaluate) {
      const auto s = pipeline::cmd_eval(cfg, or_default(model, cfg, "model.json"), or_default(dataset, cfg, "dataset.csv"));
      std::fputs(s.report_text.c_str(), stdout);
      return 0;
    }
    if (*detect) {
      if (!policy.empty()) cfg.policy = eval::parse_policy(policy);
      const auto curve = vvc::parse_curve(curve_text);
      const auto v = pipeline::cmd_detect(cfg, model, trace_in, vvc::parse_curve(detect_old), curve);
      print_verdict(v);
      return eval::exit_code(v.decision);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
