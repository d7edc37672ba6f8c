#include "vvcguard/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "vvcguard/errors.hpp"
#include "vvcguard/trace_io.hpp"

namespace vvcguard::pipeline {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json train_to_json(const mlp::TrainConfig& t) {
  return {{"epochs", t.epochs},         {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate}, {"momentum", t.momentum},
          {"seed", t.seed},             {"validation_fraction", t.validation_fraction},
          {"standardize", t.standardize}};
}

mlp::TrainConfig train_from_json(const json& j, mlp::TrainConfig t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.momentum = j.value("momentum", t.momentum);
  t.seed = j.value("seed", t.seed);
  t.validation_fraction = j.value("validation_fraction", t.validation_fraction);
  t.standardize = j.value("standardize", t.standardize);
  return t;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string manifest_text(const std::map<std::string, std::string>& entries) {
  ordered_json j(entries);
  return j.dump(1) + "\n";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("bad number '" + s + "' on dataset line " + std::to_string(line));
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("bad integer '" + s + "' on dataset line " + std::to_string(line));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace

RunConfig::RunConfig() {
  search.trials = 30;
  search.seed = 1;
  search_train.epochs = 100;
}

void RunConfig::validate() const {
  if (!network_config.empty() && !std::filesystem::exists(network_config)) {
    throw Error("network config " + network_config + " does not exist");
  }
  if (n_legit < 1 || n_malicious < 1) throw DomainError("scenario counts must be at least 1");
  closed_loop().validate();
  inverter().validate();
  if (!(post_window >= 2.0 && attack_time + post_window <= duration + 1e-9)) {
    throw DomainError("post-update window must be at least 2 s and fit in the run");
  }
  search.validate();
  search_train.validate();
  final_train.validate();
  if (folds < 2) throw DomainError("at least two folds are required");
  if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("threshold must lie in (0, 1)");
}

sim::ClosedLoopConfig RunConfig::closed_loop() const {
  sim::ClosedLoopConfig c;
  c.duration = duration;
  c.dt = dt;
  c.attack_time = attack_time;
  c.record_pre = record_pre;
  c.seed = seed;
  c.measurement_noise = measurement_noise;
  return c;
}

vvc::InverterParams RunConfig::inverter() const {
  vvc::InverterParams p;
  p.tau = tau;
  p.dt = control_period;
  return p;
}

grid::NetworkModel RunConfig::network() const {
  if (!network_config.empty()) return grid::NetworkModel(grid::load_network_config(network_config));
  const std::string bundled = grid::bundled_network_config();
  if (std::filesystem::exists(bundled)) return grid::NetworkModel(grid::load_network_config(bundled));
  return grid::default_benchmark_network();
}

scenarios::GeneratorConfig RunConfig::generator() const {
  scenarios::GeneratorConfig g;
  g.dg = dg;
  g.params = inverter();
  g.sim = closed_loop();
  g.oracle.window = post_window;
  return g;
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json j;
  j["network_config"] = c.network_config;
  j["n_legit"] = c.n_legit;
  j["n_malicious"] = c.n_malicious;
  j["seed"] = c.seed;
  j["dg"] = c.dg;
  j["simulator"] = {{"duration", c.duration},         {"dt", c.dt},
                    {"tau", c.tau},                   {"control_period", c.control_period},
                    {"attack_time", c.attack_time},   {"record_pre", c.record_pre},
                    {"measurement_noise", c.measurement_noise}, {"post_window", c.post_window}};
  j["feature_mode"] = std::string(features::mode_name(c.mode));
  j["search"] = {{"min_layers", c.search.min_layers}, {"max_layers", c.search.max_layers},
                 {"min_nodes", c.search.min_nodes},   {"max_nodes", c.search.max_nodes},
                 {"lambda_lo", c.search.lambda_lo},   {"lambda_hi", c.search.lambda_hi},
                 {"trials", c.search.trials},         {"seed", c.search.seed},
                 {"fixed_hidden", c.search.fixed_hidden}};
  j["search_train"] = train_to_json(c.search_train);
  j["final_train"] = train_to_json(c.final_train);
  j["folds"] = c.folds;
  j["fold_protocol"] = mlp::fold_protocol_name(c.protocol);
  j["threshold"] = c.threshold;
  j["policy"] = std::string(eval::policy_name(c.policy));
  j["out_dir"] = c.out_dir;
  return j.dump(1) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    c.network_config = j.value("network_config", c.network_config);
    c.n_legit = j.value("n_legit", c.n_legit);
    c.n_malicious = j.value("n_malicious", c.n_malicious);
    c.seed = j.value("seed", c.seed);
    c.dg = j.value("dg", c.dg);
    if (j.contains("simulator")) {
      const auto& s = j["simulator"];
      c.duration = s.value("duration", c.duration);
      c.dt = s.value("dt", c.dt);
      c.tau = s.value("tau", c.tau);
      c.control_period = s.value("control_period", c.control_period);
      c.attack_time = s.value("attack_time", c.attack_time);
      c.record_pre = s.value("record_pre", c.record_pre);
      c.measurement_noise = s.value("measurement_noise", c.measurement_noise);
      c.post_window = s.value("post_window", c.post_window);
    }
    c.mode = features::parse_mode(j.value("feature_mode", std::string(features::mode_name(c.mode))));
    if (j.contains("search")) {
      const auto& s = j["search"];
      c.search.min_layers = s.value("min_layers", c.search.min_layers);
      c.search.max_layers = s.value("max_layers", c.search.max_layers);
      c.search.min_nodes = s.value("min_nodes", c.search.min_nodes);
      c.search.max_nodes = s.value("max_nodes", c.search.max_nodes);
      c.search.lambda_lo = s.value("lambda_lo", c.search.lambda_lo);
      c.search.lambda_hi = s.value("lambda_hi", c.search.lambda_hi);
      c.search.trials = s.value("trials", c.search.trials);
      c.search.seed = s.value("seed", c.search.seed);
      c.search.fixed_hidden = s.value("fixed_hidden", c.search.fixed_hidden);
    }
    if (j.contains("search_train")) c.search_train = train_from_json(j["search_train"], c.search_train);
    if (j.contains("final_train")) c.final_train = train_from_json(j["final_train"], c.final_train);
    c.folds = j.value("folds", c.folds);
    c.protocol = mlp::parse_fold_protocol(j.value("fold_protocol", mlp::fold_protocol_name(c.protocol)));
    c.threshold = j.value("threshold", c.threshold);
    c.policy = eval::parse_policy(j.value("policy", std::string(eval::policy_name(c.policy))));
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(read_file(path)); }

std::uint64_t config_hash(const RunConfig& cfg) {
  RunConfig copy = cfg;
  copy.out_dir.clear();
  return features::fnv1a(run_config_to_json(copy));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::vector<DatasetRow> to_rows(const std::vector<scenarios::Scenario>& list) {
  std::vector<DatasetRow> rows;
  rows.reserve(list.size());
  for (const auto& s : list) {
    rows.push_back(DatasetRow{s.id, s.seed, s.test, static_cast<int>(s.label),
                              std::string(scenarios::kind_name(s.attack.kind)), s.gain, s.features});
  }
  return rows;
}

void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows) {
  std::ostringstream out;
  out << "id,seed,split,label,kind,gain";
  for (const auto& name : features::feature_names(features::FeatureMode::monitored)) out << ',' << name;
  out << '\n';
  for (const auto& r : rows) {
    if (r.features.size() != features::kMonitoredDim) throw SchemaError("dataset row has the wrong width");
    out << r.id << ',' << r.seed << ',' << (r.test ? "test" : "train") << ',' << r.label << ',' << r.kind << ','
        << fmt(r.gain);
    for (double v : r.features) out << ',' << fmt(v);
    out << '\n';
  }
  write_file(path, out.str());
}

std::vector<DatasetRow> read_dataset(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset is empty");
  const auto header = split_csv(line);
  const auto& names = features::feature_names(features::FeatureMode::monitored);
  if (header.size() != 6 + names.size() || !std::equal(names.begin(), names.end(), header.begin() + 6)) {
    throw SchemaError("dataset columns do not match the feature schema");
  }
  std::vector<DatasetRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw FormatError("dataset line " + std::to_string(lineno) + " has the wrong width");
    DatasetRow r;
    r.id = parse_u64(cells[0], lineno);
    r.seed = parse_u64(cells[1], lineno);
    if (cells[2] != "train" && cells[2] != "test") throw FormatError("bad split on line " + std::to_string(lineno));
    r.test = cells[2] == "test";
    r.label = static_cast<int>(parse_u64(cells[3], lineno));
    if (r.label != 0 && r.label != 1) throw FormatError("bad label on line " + std::to_string(lineno));
    r.kind = cells[4];
    r.gain = parse_double(cells[5], lineno);
    for (std::size_t k = 6; k < cells.size(); ++k) r.features.push_back(parse_double(cells[k], lineno));
    rows.push_back(std::move(r));
  }
  return rows;
}

mlp::Dataset to_training_set(const std::vector<DatasetRow>& rows, bool test, features::FeatureMode mode) {
  std::vector<const DatasetRow*> picked;
  for (const auto& r : rows) {
    if (r.test == test) picked.push_back(&r);
  }
  mlp::Dataset d;
  d.x.resize(static_cast<Eigen::Index>(features::dimension(mode)), static_cast<Eigen::Index>(picked.size()));
  d.y.resize(static_cast<Eigen::Index>(picked.size()));
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto x = features::project(picked[i]->features, mode);
    d.x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const mlp::Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    d.y(static_cast<Eigen::Index>(i)) = picked[i]->label;
    d.ids.push_back(picked[i]->id);
  }
  return d;
}

GenSummary cmd_gen_dataset(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const grid::NetworkModel model = cfg.network();
  GenSummary s;
  const auto list = scenarios::generate_dataset(model, cfg.n_legit, cfg.n_malicious, cfg.seed, cfg.generator(), &s.stats);
  const auto rows = to_rows(list);
  s.rows = rows.size();
  s.dataset_path = join_path(cfg.out_dir, "dataset.csv");
  s.manifest_path = join_path(cfg.out_dir, "dataset.manifest.json");
  write_dataset(s.dataset_path, rows);

  std::map<std::string, std::size_t> per_kind;
  std::size_t n_test = 0;
  for (const auto& r : rows) {
    if (r.label == 1) ++per_kind[r.kind];
    n_test += r.test ? 1 : 0;
  }
  std::map<std::string, std::string> m;
  m["seed"] = std::to_string(cfg.seed);
  m["config_hash"] = features::hex64(config_hash(cfg));
  m["schema_hash"] = features::hex64(features::schema_hash(features::FeatureMode::monitored));
  m["dataset_hash"] = features::hex64(features::fnv1a(read_file(s.dataset_path)));
  m["n_legitimate"] = std::to_string(cfg.n_legit);
  m["n_malicious"] = std::to_string(cfg.n_malicious);
  m["n_train"] = std::to_string(rows.size() - n_test);
  m["n_test"] = std::to_string(n_test);
  m["draws"] = std::to_string(s.stats.draws);
  m["discarded"] = std::to_string(s.stats.discarded);
  m["collapsed"] = std::to_string(s.stats.collapsed);
  for (const auto& [kind, n] : per_kind) m["malicious_" + kind] = std::to_string(n);
  write_file(s.manifest_path, manifest_text(m));
  write_file(join_path(cfg.out_dir, "run_config.json"), run_config_to_json(cfg));
  return s;
}

TrainSummary cmd_train(const RunConfig& cfg, const std::string& dataset_path) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const auto rows = read_dataset(dataset_path);
  const mlp::Dataset train_set = to_training_set(rows, false, cfg.mode);
  if (train_set.size() == 0) throw DomainError("dataset has no training rows");

  mlp::SearchSpace space = cfg.search;
  space.seed = scenarios::derive_seed(cfg.seed, space.seed);
  mlp::TrainConfig search_cfg = cfg.search_train;
  search_cfg.seed = scenarios::derive_seed(cfg.seed, 1000 + search_cfg.seed);

  TrainSummary s;
  s.search = mlp::random_search(train_set, space, search_cfg, cfg.folds, cfg.protocol);

  const int dim = static_cast<int>(features::dimension(cfg.mode));
  mlp::MlpModel init = mlp::make_model(mlp::architecture(dim, s.search.best_hidden), s.search.best_lambda);
  mlp::init_weights(init, scenarios::derive_seed(cfg.seed, 2000));
  mlp::TrainConfig final_cfg = cfg.final_train;
  final_cfg.seed = scenarios::derive_seed(cfg.seed, 3000 + final_cfg.seed);
  mlp::MlpModel model = mlp::train(init, train_set, final_cfg).model;
  s.train_accuracy = mlp::accuracy(model, train_set, cfg.threshold);

  model.schema_hash = features::schema_hash(cfg.mode);
  model.feature_mode = std::string(features::mode_name(cfg.mode));
  model.manifest["seed"] = std::to_string(cfg.seed);
  model.manifest["config_hash"] = features::hex64(config_hash(cfg));
  model.manifest["dataset_hash"] = features::hex64(features::fnv1a(read_file(dataset_path)));
  model.manifest["best_trial"] = std::to_string(s.search.best_trial);
  model.manifest["fold_protocol"] = mlp::fold_protocol_name(cfg.protocol);

  s.model_path = join_path(cfg.out_dir, "model.json");
  s.log_path = join_path(cfg.out_dir, "search_log.csv");
  mlp::save_model(s.model_path, model);
  write_file(s.log_path, mlp::format_search_log(s.search));
  return s;
}

EvalSummary cmd_eval(const RunConfig& cfg, const std::string& model_path, const std::string& dataset_path) {
  ensure_dir(cfg.out_dir);
  const auto rows = read_dataset(dataset_path);
  const mlp::MlpModel model = mlp::load_model(model_path);
  const features::FeatureMode mode = features::parse_mode(model.feature_mode);
  if (model.schema_hash != features::schema_hash(mode)) throw SchemaError("model schema hash is not recognized");

  const mlp::Dataset train_set = to_training_set(rows, false, mode);
  const mlp::Dataset test_set = to_training_set(rows, true, mode);
  EvalSummary s;
  s.result = eval::evaluate(model, test_set, train_set.ids, cfg.threshold);

  std::map<std::uint64_t, const DatasetRow*> by_id;
  for (const auto& r : rows) by_id[r.id] = &r;
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> kinds;
  for (std::size_t i = 0; i < test_set.ids.size(); ++i) {
    const DatasetRow& r = *by_id.at(test_set.ids[i]);
    if (r.label != 1) continue;
    kinds[r.kind].first.push_back(1);
    kinds[r.kind].second.push_back(s.result.predictions[i]);
  }
  for (const auto& [kind, lp] : kinds) s.per_kind.emplace_back(kind, eval::metrics(eval::confusion(lp.first, lp.second)));

  std::ostringstream out;
  out << "# detection report\n";
  out << "seed " << cfg.seed << "\n";
  out << "config_hash " << features::hex64(config_hash(cfg)) << "\n";
  out << "model_hash " << features::hex64(features::fnv1a(read_file(model_path))) << "\n";
  out << "dataset_hash " << features::hex64(features::fnv1a(read_file(dataset_path))) << "\n";
  out << "feature_mode " << model.feature_mode << "\n";
  out << "test_samples " << test_set.size() << "\n\n";
  out << eval::format_report(s.result.report) << '\n';
  out << "recall by attack kind\n";
  for (const auto& [kind, rep] : s.per_kind) {
    char buf[96];
    char recall[32] = "undefined";
    if (rep.recall) std::snprintf(recall, sizeof recall, "%.4f%%", 100.0 * *rep.recall);
    std::snprintf(buf, sizeof buf, "%-14s %5ld / %-5ld %s\n", kind.c_str(), rep.counts.tp,
                  rep.counts.tp + rep.counts.fn, recall);
    out << buf;
  }
  out << "\nmisclassified ids";
  for (auto id : s.result.misclassified) out << ' ' << id;
  out << '\n';
  s.report_text = out.str();
  s.report_path = join_path(cfg.out_dir, "report.txt");
  write_file(s.report_path, s.report_text);
  return s;
}

std::pair<vvc::DroopCurve, vvc::DroopCurve> preset(const std::string& name) {
  if (name == "demo-attack") return {vvc::kDefaultCurve, vvc::DroopCurve{0.95, 1.02, 1.04, 1.05, +1}};
  if (name == "demo-legit") return {vvc::kDefaultCurve, vvc::kDefaultCurve};
  throw FormatError("unknown preset '" + name + "' (expected demo-attack or demo-legit)");
}

sim::SimTrace cmd_simulate(const RunConfig& cfg, const vvc::DroopCurve& old_curve,
                           const vvc::DroopCurve& new_curve, const std::string& trace_path) {
  cfg.validate();
  const grid::NetworkModel model = cfg.network();
  sim::SimTrace trace = sim::run_closed_loop(model, cfg.dg, cfg.inverter(), old_curve, new_curve, cfg.closed_loop());
  if (!trace_path.empty()) sim::save_trace(trace_path, trace);
  return trace;
}

eval::DetectionVerdict cmd_detect(const RunConfig& cfg, const std::string& model_path,
                                  const std::string& trace_path, const vvc::DroopCurve& old_curve,
                                  const vvc::DroopCurve& new_curve) {
  eval::GateConfig gate_cfg;
  gate_cfg.policy = cfg.policy;
  gate_cfg.threshold = cfg.threshold;
  if (auto defect = vvc::curve_defect(new_curve)) {
    return eval::DetectionVerdict{eval::Decision::malformed, 0.0, std::nullopt, *defect};
  }
  const mlp::MlpModel model = mlp::load_model(model_path);
  gate_cfg.mode = features::parse_mode(model.feature_mode);
  const sim::SimTrace trace = sim::load_trace(trace_path);
  const double after = std::min(cfg.post_window, trace.end_time() - trace.attack_time);
  if (gate_cfg.mode == features::FeatureMode::monitored && !(after > 0.0)) {
    throw RangeError("trace has no rows after the curve update");
  }
  const auto [pre, post] = sim::extract_window(trace, trace.attack_time, cfg.record_pre, std::max(after, 0.0));
  return eval::gate(model, old_curve, new_curve, pre, post, gate_cfg);
}

}  // namespace vvcguard::pipeline
