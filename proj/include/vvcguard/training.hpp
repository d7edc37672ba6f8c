#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vvcguard/mlp.hpp"

namespace vvcguard::mlp {

/// Samples are columns of `x`.
struct Dataset {
  Matrix x;
  Vector y;
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
  Dataset subset(const std::vector<std::size_t>& columns) const;
};

struct TrainConfig {
  int epochs = 300;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;  // held out from the training data to pick the best epoch
  bool standardize = true;

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch (training loss when no holdout)
  int best_epoch = 0;
};

/// Mini-batch gradient descent with momentum from `init`. Returns the
/// parameters with the lowest validation loss seen.
TrainResult train(const MlpModel& init, const Dataset& data, const TrainConfig& cfg);

double accuracy(const MlpModel& model, const Dataset& data, double threshold = 0.5);

/// fit_one_fold: train on one fold, validate on the other k-1.
/// conventional: train on k-1 folds, validate on the held-out one.
enum class FoldProtocol { fit_one_fold, conventional };
std::string fold_protocol_name(FoldProtocol p);
FoldProtocol parse_fold_protocol(const std::string& text);

/// Disjoint, exhaustive folds whose sizes differ by at most one. Falls back
/// to stratified assignment (with a warning) if a fold would hold one class.
std::vector<std::vector<std::size_t>> make_folds(const Vector& labels, int k, std::uint64_t seed,
                                                 bool* resampled = nullptr);

struct CvResult {
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

CvResult kfold_cv(const Dataset& data, int k, const std::vector<int>& hidden, double lambda,
                  const TrainConfig& cfg, FoldProtocol protocol = FoldProtocol::fit_one_fold);

struct SearchSpace {
  int min_layers = 1, max_layers = 3;
  int min_nodes = 4, max_nodes = 200;
  double lambda_lo = 1e-8, lambda_hi = 1e-2;  // log-uniform
  int trials = 50;
  std::uint64_t seed = 0;
  std::vector<int> fixed_hidden;  // non-empty pins the architecture

  void validate() const;
};

struct Trial {
  int index = 0;
  std::vector<int> hidden;
  double lambda = 0.0;
  CvResult cv;
};

struct SearchResult {
  std::vector<int> best_hidden;
  double best_lambda = 0.0;
  int best_trial = 0;
  std::vector<Trial> log;
};

/// Trials are scored by k-fold mean accuracy; ties go to the earlier trial.
SearchResult random_search(const Dataset& data, const SearchSpace& space, const TrainConfig& cfg,
                           int k = 5, FoldProtocol protocol = FoldProtocol::fit_one_fold);

std::string format_search_log(const SearchResult& result);

}  // namespace vvcguard::mlp
