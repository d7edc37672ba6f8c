#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vvcguard/evaluation.hpp"
#include "vvcguard/features.hpp"
#include "vvcguard/grid.hpp"
#include "vvcguard/scenarios.hpp"
#include "vvcguard/simulator.hpp"
#include "vvcguard/training.hpp"

namespace vvcguard::pipeline {

struct RunConfig {
  std::string network_config;  // empty: bundled benchmark
  std::size_t n_legit = 2000;
  std::size_t n_malicious = 2000;
  std::uint64_t seed = 7;

  grid::BusId dg = 4;
  double duration = 13.0;
  double dt = 0.01;
  double tau = 0.1;
  double control_period = 0.5;
  double attack_time = 3.0;
  double record_pre = 2.0;
  double measurement_noise = 1e-5;
  double post_window = 10.0;

  features::FeatureMode mode = features::FeatureMode::monitored;
  mlp::SearchSpace search;
  mlp::TrainConfig search_train;  // per-trial training inside cross-validation
  mlp::TrainConfig final_train;
  int folds = 5;
  mlp::FoldProtocol protocol = mlp::FoldProtocol::fit_one_fold;
  double threshold = 0.5;
  eval::FallbackPolicy policy = eval::FallbackPolicy::revert_last_stable;

  std::string out_dir = ".";

  RunConfig();
  void validate() const;
  scenarios::GeneratorConfig generator() const;
  sim::ClosedLoopConfig closed_loop() const;
  vvc::InverterParams inverter() const;
  grid::NetworkModel network() const;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
/// Hash of everything that influences outputs (the output directory excluded).
std::uint64_t config_hash(const RunConfig& cfg);

struct DatasetRow {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  bool test = false;
  int label = 0;
  std::string kind = "none";
  double gain = 0.0;
  features::FeatureVector features;  // monitored layout
};

std::vector<DatasetRow> to_rows(const std::vector<scenarios::Scenario>& scenarios);
void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows);
std::vector<DatasetRow> read_dataset(const std::string& path);
/// Rows of one split projected onto `mode`.
mlp::Dataset to_training_set(const std::vector<DatasetRow>& rows, bool test, features::FeatureMode mode);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
std::string join_path(const std::string& dir, const std::string& name);

struct GenSummary {
  std::string dataset_path;
  std::string manifest_path;
  scenarios::GenerationStats stats;
  std::size_t rows = 0;
};
GenSummary cmd_gen_dataset(const RunConfig& cfg);

struct TrainSummary {
  std::string model_path;
  std::string log_path;
  mlp::SearchResult search;
  double train_accuracy = 0.0;
};
TrainSummary cmd_train(const RunConfig& cfg, const std::string& dataset_path);

struct EvalSummary {
  std::string report_path;
  eval::EvalResult result;
  std::string report_text;
  // recall restricted to each attack kind present in the test split
  std::vector<std::pair<std::string, eval::MetricsReport>> per_kind;
};
EvalSummary cmd_eval(const RunConfig& cfg, const std::string& model_path, const std::string& dataset_path);

/// Named curve updates for `simulate`: demo-attack, demo-legit.
std::pair<vvc::DroopCurve, vvc::DroopCurve> preset(const std::string& name);

sim::SimTrace cmd_simulate(const RunConfig& cfg, const vvc::DroopCurve& old_curve,
                           const vvc::DroopCurve& new_curve, const std::string& trace_path);

/// Runs the gate on a recorded trace. The switch instant is read from the
/// curve_id column.
eval::DetectionVerdict cmd_detect(const RunConfig& cfg, const std::string& model_path,
                                  const std::string& trace_path, const vvc::DroopCurve& old_curve,
                                  const vvc::DroopCurve& new_curve);

}  // namespace vvcguard::pipeline
