#include "vvcguard/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <execution>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "vvcguard/errors.hpp"

namespace vvcguard::mlp {

namespace {

using Rng = std::mt19937_64;

std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  // Explicit Fisher-Yates so the order does not depend on the library.
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

void fit_standardization(MlpModel& m, const Matrix& x) {
  const auto n = static_cast<double>(x.cols());
  m.input_mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - m.input_mean;
  m.input_scale = (centered.array().square().rowwise().sum() / n).sqrt().matrix();
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) {
    if (!(m.input_scale(i) > 1e-12)) m.input_scale(i) = 1.0;
  }
}

bool single_class(const Vector& labels, const std::vector<std::size_t>& fold) {
  if (fold.empty()) return true;
  const double first = labels(static_cast<Eigen::Index>(fold.front()));
  return std::all_of(fold.begin(), fold.end(),
                     [&](std::size_t i) { return labels(static_cast<Eigen::Index>(i)) == first; });
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& columns) const {
  Dataset out;
  out.x.resize(x.rows(), static_cast<Eigen::Index>(columns.size()));
  out.y.resize(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(columns[k]);
    out.x.col(static_cast<Eigen::Index>(k)) = x.col(c);
    out.y(static_cast<Eigen::Index>(k)) = y(c);
    if (!ids.empty()) out.ids.push_back(ids[columns[k]]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("epochs must be at least 1");
  if (batch_size < 1) throw DomainError("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw DomainError("validation fraction must lie in [0, 1)");
  }
}

TrainResult train(const MlpModel& init, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  if (data.size() == 0) throw DomainError("training data is empty");
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    if (data.y(i) != 0.0 && data.y(i) != 1.0) throw DomainError("labels must be 0 or 1");
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
  if (n_val >= data.size()) n_val = 0;
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  const Dataset train_set = data.subset(train_idx);
  const Dataset val_set = n_val > 0 ? data.subset(val_idx) : train_set;

  TrainResult result;
  MlpModel model = init;
  if (cfg.standardize) fit_standardization(model, train_set.x);

  std::vector<Matrix> vel_w;
  std::vector<Vector> vel_b;
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    vel_w.push_back(Matrix::Zero(model.weights[j].rows(), model.weights[j].cols()));
    vel_b.push_back(Vector::Zero(model.biases[j].size()));
  }

  double best = std::numeric_limits<double>::infinity();
  result.model = model;
  std::vector<std::size_t> perm(train_set.size());
  std::iota(perm.begin(), perm.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(perm, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += bs) {
      const std::size_t end = std::min(start + bs, perm.size());
      const std::vector<std::size_t> cols(perm.begin() + static_cast<long>(start), perm.begin() + static_cast<long>(end));
      const Dataset batch = train_set.subset(cols);
      const Gradients g = gradients(model, batch.x, batch.y);
      if (!std::isfinite(g.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                            std::to_string(start) + " (learning rate " + std::to_string(cfg.learning_rate) + ")");
      }
      epoch_loss += g.loss * static_cast<double>(end - start);
      for (std::size_t j = 0; j < model.weights.size(); ++j) {
        vel_w[j] = cfg.momentum * vel_w[j] - cfg.learning_rate * g.weights[j];
        vel_b[j] = cfg.momentum * vel_b[j] - cfg.learning_rate * g.biases[j];
        model.weights[j] += vel_w[j];
        model.biases[j] += vel_b[j];
      }
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(perm.size()));
    const double v = loss(model, val_set.x, val_set.y);
    if (!std::isfinite(v)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    result.val_loss.push_back(v);
    if (v < best) {
      best = v;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

double accuracy(const MlpModel& model, const Dataset& data, double threshold) {
  if (data.size() == 0) throw DomainError("cannot score an empty dataset");
  const Vector p = forward_batch(model, data.x);
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    hit += static_cast<std::size_t>((p(i) >= threshold ? 1.0 : 0.0) == data.y(i));
  }
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

std::string fold_protocol_name(FoldProtocol p) {
  return p == FoldProtocol::fit_one_fold ? "fit-one-fold" : "conventional";
}

FoldProtocol parse_fold_protocol(const std::string& text) {
  if (text == "fit-one-fold") return FoldProtocol::fit_one_fold;
  if (text == "conventional") return FoldProtocol::conventional;
  throw FormatError("unknown fold protocol '" + text + "'");
}

std::vector<std::vector<std::size_t>> make_folds(const Vector& labels, int k, std::uint64_t seed,
                                                 bool* resampled) {
  const auto n = static_cast<std::size_t>(labels.size());
  if (k < 2) throw DomainError("k must be at least 2");
  if (n < static_cast<std::size_t>(k)) throw DomainError("dataset is smaller than the fold count");
  const auto kk = static_cast<std::size_t>(k);

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> folds(kk);
  for (std::size_t i = 0; i < n; ++i) folds[i % kk].push_back(order[i]);

  const bool degenerate = std::any_of(folds.begin(), folds.end(),
                                      [&](const auto& f) { return single_class(labels, f); });
  if (resampled) *resampled = degenerate;
  if (!degenerate) return folds;

  std::cerr << "warning: a fold holds a single class; resampling with stratification\n";
  std::vector<std::size_t> stratified;
  for (double cls : {0.0, 1.0}) {
    for (std::size_t i : order) {
      if (labels(static_cast<Eigen::Index>(i)) == cls) stratified.push_back(i);
    }
  }
  for (auto& f : folds) f.clear();
  for (std::size_t i = 0; i < n; ++i) folds[i % kk].push_back(stratified[i]);
  return folds;
}

CvResult kfold_cv(const Dataset& data, int k, const std::vector<int>& hidden, double lambda,
                  const TrainConfig& cfg, FoldProtocol protocol) {
  const auto folds = make_folds(data.y, k, mix(cfg.seed, 0xf01d));
  CvResult out;
  out.fold_accuracy.resize(folds.size());
  std::vector<std::size_t> which(folds.size());
  std::iota(which.begin(), which.end(), 0);
  std::for_each(std::execution::par, which.begin(), which.end(), [&](std::size_t f) {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> score;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      const bool is_fit = protocol == FoldProtocol::fit_one_fold ? g == f : g != f;
      auto& dst = is_fit ? fit : score;
      dst.insert(dst.end(), folds[g].begin(), folds[g].end());
    }
    MlpModel model = make_model(architecture(static_cast<int>(data.x.rows()), hidden), lambda);
    init_weights(model, mix(cfg.seed, 100 + f));
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = mix(cfg.seed, 200 + f);
    const TrainResult r = train(model, data.subset(fit), fold_cfg);
    out.fold_accuracy[f] = accuracy(r.model, data.subset(score));
  });
  out.mean_accuracy = std::accumulate(out.fold_accuracy.begin(), out.fold_accuracy.end(), 0.0) /
                      static_cast<double>(out.fold_accuracy.size());
  return out;
}

void SearchSpace::validate() const {
  if (trials < 1) throw DomainError("trial budget must be at least 1");
  if (fixed_hidden.empty()) {
    if (min_layers < 1 || max_layers < min_layers) throw DomainError("empty hidden-layer range");
    if (min_nodes < 1 || max_nodes < min_nodes) throw DomainError("empty node range");
  }
  if (!(lambda_lo > 0.0 && lambda_hi >= lambda_lo)) throw DomainError("empty lambda range");
}

SearchResult random_search(const Dataset& data, const SearchSpace& space, const TrainConfig& cfg,
                           int k, FoldProtocol protocol) {
  space.validate();
  SearchResult result;
  result.log.resize(static_cast<std::size_t>(space.trials));

  // Hyperparameters are drawn serially so the log does not depend on scheduling.
  Rng rng(space.seed);
  for (int t = 0; t < space.trials; ++t) {
    Trial& trial = result.log[static_cast<std::size_t>(t)];
    trial.index = t;
    if (!space.fixed_hidden.empty()) {
      trial.hidden = space.fixed_hidden;
    } else {
      const int layers = space.min_layers + static_cast<int>(rng() % static_cast<std::uint64_t>(space.max_layers - space.min_layers + 1));
      for (int l = 0; l < layers; ++l) {
        trial.hidden.push_back(space.min_nodes + static_cast<int>(rng() % static_cast<std::uint64_t>(space.max_nodes - space.min_nodes + 1)));
      }
    }
    if (space.lambda_lo == space.lambda_hi) {
      trial.lambda = space.lambda_lo;
    } else {
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      trial.lambda = std::exp(std::log(space.lambda_lo) + u * (std::log(space.lambda_hi) - std::log(space.lambda_lo)));
    }
  }

  std::for_each(std::execution::par, result.log.begin(), result.log.end(), [&](Trial& trial) {
    TrainConfig trial_cfg = cfg;
    trial_cfg.seed = mix(cfg.seed, static_cast<std::uint64_t>(trial.index));
    trial.cv = kfold_cv(data, k, trial.hidden, trial.lambda, trial_cfg, protocol);
  });

  for (const Trial& trial : result.log) {
    if (trial.index == 0 || trial.cv.mean_accuracy > result.log[static_cast<std::size_t>(result.best_trial)].cv.mean_accuracy) {
      result.best_trial = trial.index;
    }
  }
  const Trial& best = result.log[static_cast<std::size_t>(result.best_trial)];
  result.best_hidden = best.hidden;
  result.best_lambda = best.lambda;
  return result;
}

std::string format_search_log(const SearchResult& result) {
  std::ostringstream out;
  out << "trial,hidden,lambda,mean_accuracy,fold_accuracies\n";
  char buf[64];
  for (const Trial& t : result.log) {
    out << t.index << ',';
    for (std::size_t i = 0; i < t.hidden.size(); ++i) out << (i ? "-" : "") << t.hidden[i];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", t.lambda, t.cv.mean_accuracy);
    out << buf;
    for (std::size_t i = 0; i < t.cv.fold_accuracy.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? ";" : "", t.cv.fold_accuracy[i]);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace vvcguard::mlp
