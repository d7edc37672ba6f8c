#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "vvcguard/errors.hpp"
#include "vvcguard/training.hpp"

using namespace vvcguard;
using namespace vvcguard::mlp;

namespace {

// Two Gaussian blobs split by the line x0 + x1 = 0 with a margin.
Dataset blobs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.4);
  Dataset d;
  d.x.resize(2, static_cast<Eigen::Index>(n));
  d.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double cls = static_cast<double>(i % 2);
    const double c = cls > 0.5 ? 1.5 : -1.5;
    double a, b;
    do {
      a = c + g(rng);
      b = c + g(rng);
    } while (std::abs(a + b) < 0.5);
    if ((a + b > 0.0) != (cls > 0.5)) std::swap(a, b), a = -a, b = -b;
    d.x(0, static_cast<Eigen::Index>(i)) = a;
    d.x(1, static_cast<Eigen::Index>(i)) = b;
    d.y(static_cast<Eigen::Index>(i)) = cls;
    d.ids.push_back(i);
  }
  return d;
}

}  // namespace

TEST_CASE("folds are disjoint, exhaustive and balanced") {
  for (int n : {10, 37, 100, 1001}) {
    Vector labels(n);
    for (int i = 0; i < n; ++i) labels(i) = i % 2;
    for (int k : {2, 3, 5}) {
      const auto folds = make_folds(labels, k, 5);
      REQUIRE(folds.size() == static_cast<std::size_t>(k));
      std::set<std::size_t> all;
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        for (auto i : f) CHECK(all.insert(i).second);
      }
      CHECK(all.size() == static_cast<std::size_t>(n));
      CHECK(hi - lo <= 1);
    }
  }
  Vector skewed = Vector::Zero(20);
  skewed(3) = 1.0;
  skewed(11) = 1.0;
  bool resampled = false;
  std::uint64_t seed = 0;
  for (; seed < 100 && !resampled; ++seed) make_folds(skewed, 2, seed, &resampled);
  REQUIRE(resampled);
  const auto folds = make_folds(skewed, 2, seed - 1, &resampled);
  for (const auto& f : folds) {
    CHECK(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return skewed(static_cast<Eigen::Index>(i)) == 1.0; }) == 1);
  }
  CHECK_THROWS_AS(make_folds(skewed, 1, 1), DomainError);
  CHECK_THROWS_AS(make_folds(skewed, 50, 1), DomainError);
}

TEST_CASE("separable data is learned") {
  const auto d = blobs(400, 2);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.01;
  cfg.seed = 3;
  auto m = make_model(architecture(2, {8}), 1e-6);
  init_weights(m, 4);
  const auto r = train(m, d, cfg);
  CHECK(accuracy(r.model, d) == 1.0);
  REQUIRE(r.train_loss.size() == 200);
  // Smoothed training loss decreases.
  auto window = [&](std::size_t from) {
    return std::accumulate(r.train_loss.begin() + static_cast<long>(from),
                           r.train_loss.begin() + static_cast<long>(from + 20), 0.0) / 20.0;
  };
  for (std::size_t w = 20; w + 20 <= r.train_loss.size(); w += 20) CHECK(window(w) <= window(w - 20) * 1.001);
  CHECK(r.val_loss[static_cast<std::size_t>(r.best_epoch)] ==
        *std::min_element(r.val_loss.begin(), r.val_loss.end()));

  const auto again = train(m, d, cfg);
  CHECK(again.model.weights[0] == r.model.weights[0]);
  CHECK(again.train_loss == r.train_loss);
}

TEST_CASE("training input checks") {
  auto d = blobs(20, 1);
  auto m = make_model(architecture(2, {3}), 0.0);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(m, d, cfg), DomainError);
  cfg = TrainConfig{};
  d.y(0) = 0.5;
  CHECK_THROWS_AS(train(m, d, cfg), DomainError);
  d = blobs(20, 1);
  cfg.learning_rate = 1e200;
  cfg.epochs = 5;
  init_weights(m, 1);
  CHECK_THROWS_AS(train(m, d, cfg), TrainingError);
}

TEST_CASE("cross-validation protocols") {
  const auto d = blobs(200, 9);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.01;
  for (auto protocol : {FoldProtocol::fit_one_fold, FoldProtocol::conventional}) {
    const auto cv = kfold_cv(d, 5, {6}, 1e-5, cfg, protocol);
    REQUIRE(cv.fold_accuracy.size() == 5);
    CHECK(cv.mean_accuracy > 0.95);
    CHECK(kfold_cv(d, 5, {6}, 1e-5, cfg, protocol).fold_accuracy == cv.fold_accuracy);
    CHECK(parse_fold_protocol(fold_protocol_name(protocol)) == protocol);
  }
  CHECK(fold_protocol_name(FoldProtocol::fit_one_fold) == "fit-one-fold");
}

TEST_CASE("random search") {
  const auto d = blobs(120, 4);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.01;

  SearchSpace one;
  one.trials = 1;
  one.seed = 5;
  const auto r1 = random_search(d, one, cfg);
  REQUIRE(r1.log.size() == 1);
  CHECK(r1.best_trial == 0);
  CHECK(r1.best_hidden == r1.log[0].hidden);

  SearchSpace pinned;
  pinned.trials = 2;
  pinned.fixed_hidden = {7, 159};
  pinned.lambda_lo = pinned.lambda_hi = 5.2128e-7;
  const auto rp = random_search(d, pinned, cfg);
  for (const auto& t : rp.log) {
    CHECK(t.hidden == std::vector<int>{7, 159});
    CHECK(t.lambda == 5.2128e-7);
  }

  SearchSpace space;
  space.trials = 4;
  space.seed = 12;
  const auto a = random_search(d, space, cfg);
  const auto b = random_search(d, space, cfg);
  CHECK(format_search_log(a) == format_search_log(b));
  for (const auto& t : a.log) {
    CHECK(t.hidden.size() >= 1);
    CHECK(t.hidden.size() <= 3);
    for (int n : t.hidden) CHECK((n >= 4 && n <= 200));
    CHECK(t.lambda >= 1e-8);
    CHECK(t.lambda <= 1e-2);
    CHECK(t.cv.mean_accuracy <= a.log[static_cast<std::size_t>(a.best_trial)].cv.mean_accuracy);
  }
  SearchSpace bad;
  bad.trials = 0;
  CHECK_THROWS_AS(random_search(d, bad, cfg), DomainError);
}
