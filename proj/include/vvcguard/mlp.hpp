#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vvcguard::mlp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Feedforward binary classifier: rectified hidden layers, sigmoid output.
/// weights[j] maps layer j to layer j+1 and has shape (sizes[j+1], sizes[j]).
struct MlpModel {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double lambda = 0.0;

  // Per-input affine standardization applied before the first layer. Empty
  // vectors mean identity.
  Vector input_mean;
  Vector input_scale;

  std::uint64_t schema_hash = 0;
  std::string feature_mode = "monitored";
  std::map<std::string, std::string> manifest;

  void validate() const;
  int input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  std::size_t parameter_count() const;
};

/// Zero-initialized model with the given layer sizes (input, hidden..., 1).
MlpModel make_model(const std::vector<int>& layer_sizes, double lambda);
/// Input size, hidden sizes, then the single sigmoid output.
std::vector<int> architecture(int input_dim, const std::vector<int>& hidden);
/// Symmetric uniform weights with limit sqrt(6 / fan_in); zero biases.
void init_weights(MlpModel& model, std::uint64_t seed);

double sigmoid(double z);

/// Probability of the malicious class for a single input.
double forward(const MlpModel& model, std::span<const double> x);
/// Column-per-sample batch version.
Vector forward_batch(const MlpModel& model, const Matrix& x);
/// 1 iff forward(x) >= threshold.
int predict(const MlpModel& model, std::span<const double> x, double threshold = 0.5);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double loss = 0.0;
};

/// Mean binary cross-entropy plus lambda * sum of squared weights.
double loss(const MlpModel& model, const Matrix& x, const Vector& y);
/// Exact gradient of `loss` with respect to every weight and bias.
Gradients gradients(const MlpModel& model, const Matrix& x, const Vector& y);

void save_model(const std::string& path, const MlpModel& model);
/// Throws FormatError for a corrupt file and SchemaError if `expected_schema`
/// is given and differs from the stored hash.
MlpModel load_model(const std::string& path, std::optional<std::uint64_t> expected_schema = std::nullopt);
std::string model_to_string(const MlpModel& model);
MlpModel model_from_string(const std::string& text);

}  // namespace vvcguard::mlp
