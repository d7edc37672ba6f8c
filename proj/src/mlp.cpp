#include "vvcguard/mlp.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "vvcguard/errors.hpp"
#include "vvcguard/features.hpp"

namespace vvcguard::mlp {

namespace {

using nlohmann::json;

Matrix standardized(const MlpModel& m, const Matrix& x) {
  if (m.input_mean.size() == 0) return x;
  return (x.colwise() - m.input_mean).array().colwise() / m.input_scale.array();
}

void check_input(const MlpModel& m, Eigen::Index rows) {
  if (rows != m.input_dim()) {
    throw SchemaError("input has " + std::to_string(rows) + " features, model expects " +
                      std::to_string(m.input_dim()));
  }
}

// Stable log(1 + exp(z)).
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct Activations {
  std::vector<Matrix> a;  // a[0] = input, a[j] = output of layer j
  std::vector<Matrix> z;  // z[j-1] = pre-activation of layer j
};

Activations run(const MlpModel& m, const Matrix& x) {
  Activations act;
  const std::size_t layers = m.weights.size();
  act.a.reserve(layers + 1);
  act.z.reserve(layers);
  act.a.push_back(standardized(m, x));
  for (std::size_t j = 0; j < layers; ++j) {
    Matrix z = (m.weights[j] * act.a.back()).colwise() + m.biases[j];
    Matrix a = (j + 1 < layers) ? Matrix(z.cwiseMax(0.0)) : Matrix(z);
    act.z.push_back(std::move(z));
    act.a.push_back(std::move(a));
  }
  return act;
}

double penalty(const MlpModel& m) {
  double s = 0.0;
  for (const auto& w : m.weights) s += w.squaredNorm();
  return m.lambda * s;
}

std::vector<double> flatten_row_major(const Matrix& w) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
  return out;
}

}  // namespace

void MlpModel::validate() const {
  if (layer_sizes.size() < 2) throw SchemaError("model needs an input and an output layer");
  if (layer_sizes.back() != 1) throw SchemaError("output layer must have one node");
  for (int n : layer_sizes) {
    if (n < 1) throw SchemaError("layer sizes must be positive");
  }
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw SchemaError("parameter count does not match the layer list");
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j].rows() != layer_sizes[j + 1] || weights[j].cols() != layer_sizes[j] ||
        biases[j].size() != layer_sizes[j + 1]) {
      throw SchemaError("weight shapes do not chain at layer " + std::to_string(j + 1));
    }
  }
  if (input_mean.size() != input_scale.size() ||
      (input_mean.size() != 0 && input_mean.size() != layer_sizes.front())) {
    throw SchemaError("standardization vectors do not match the input size");
  }
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    n += static_cast<std::size_t>(weights[j].size() + biases[j].size());
  }
  return n;
}

MlpModel make_model(const std::vector<int>& layer_sizes, double lambda) {
  MlpModel m;
  m.layer_sizes = layer_sizes;
  m.lambda = lambda;
  for (std::size_t j = 0; j + 1 < layer_sizes.size(); ++j) {
    m.weights.push_back(Matrix::Zero(std::max(layer_sizes[j + 1], 0), std::max(layer_sizes[j], 0)));
    m.biases.push_back(Vector::Zero(std::max(layer_sizes[j + 1], 0)));
  }
  m.validate();
  return m;
}

std::vector<int> architecture(int input_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void init_weights(MlpModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    const double limit = std::sqrt(6.0 / static_cast<double>(model.layer_sizes[j]));
    std::uniform_real_distribution<double> u(-limit, limit);
    auto& w = model.weights[j];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    model.biases[j].setZero();
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector forward_batch(const MlpModel& model, const Matrix& x) {
  check_input(model, x.rows());
  const Activations act = run(model, x);
  return act.z.back().row(0).transpose().unaryExpr([](double z) { return sigmoid(z); });
}

double forward(const MlpModel& model, std::span<const double> x) {
  const Eigen::Map<const Matrix> col(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return forward_batch(model, col)(0);
}

int predict(const MlpModel& model, std::span<const double> x, double threshold) {
  return forward(model, x) >= threshold ? 1 : 0;
}

double loss(const MlpModel& model, const Matrix& x, const Vector& y) {
  check_input(model, x.rows());
  if (x.cols() == 0) throw DomainError("empty batch");
  const Activations act = run(model, x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double z = act.z.back()(0, i);
    s += softplus(z) - y(i) * z;
  }
  return s / static_cast<double>(x.cols()) + penalty(model);
}

Gradients gradients(const MlpModel& model, const Matrix& x, const Vector& y) {
  check_input(model, x.rows());
  if (x.cols() == 0 || y.size() != x.cols()) throw DomainError("batch must be non-empty with one label per sample");
  const auto n = static_cast<double>(x.cols());
  const Activations act = run(model, x);
  const std::size_t layers = model.weights.size();

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  double data_loss = 0.0;
  Matrix delta(1, x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double z = act.z.back()(0, i);
    data_loss += softplus(z) - y(i) * z;
    delta(0, i) = (sigmoid(z) - y(i)) / n;
  }
  g.loss = data_loss / n + penalty(model);

  for (std::size_t j = layers; j-- > 0;) {
    g.weights[j] = delta * act.a[j].transpose() + 2.0 * model.lambda * model.weights[j];
    g.biases[j] = delta.rowwise().sum();
    if (j > 0) {
      delta = (model.weights[j].transpose() * delta).cwiseProduct(
          (act.z[j - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

std::string model_to_string(const MlpModel& model) {
  model.validate();
  json j;
  j["format"] = "vvcguard-mlp";
  j["version"] = 1;
  j["layer_sizes"] = model.layer_sizes;
  j["lambda"] = model.lambda;
  j["hidden_activation"] = "relu";
  j["output_activation"] = "sigmoid";
  j["feature_mode"] = model.feature_mode;
  j["schema_hash"] = features::hex64(model.schema_hash);
  json layers = json::array();
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    layers.push_back({{"weights", flatten_row_major(model.weights[k])},
                      {"biases", std::vector<double>(model.biases[k].data(),
                                                     model.biases[k].data() + model.biases[k].size())}});
  }
  j["layers"] = layers;
  j["input_mean"] = std::vector<double>(model.input_mean.data(), model.input_mean.data() + model.input_mean.size());
  j["input_scale"] = std::vector<double>(model.input_scale.data(), model.input_scale.data() + model.input_scale.size());
  j["manifest"] = model.manifest;
  return j.dump(1) + "\n";
}

MlpModel model_from_string(const std::string& text) {
  MlpModel m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "vvcguard-mlp") throw FormatError("not a model file");
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    m.lambda = j.at("lambda").get<double>();
    m.feature_mode = j.at("feature_mode").get<std::string>();
    m.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != m.layer_sizes.size()) throw FormatError("layer count mismatch");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const int rows = m.layer_sizes[k + 1];
      const int cols = m.layer_sizes[k];
      const auto w = layers[k].at("weights").get<std::vector<double>>();
      const auto b = layers[k].at("biases").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) ||
          b.size() != static_cast<std::size_t>(rows)) {
        throw FormatError("parameter block " + std::to_string(k) + " has the wrong size");
      }
      Matrix wm(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) wm(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      m.weights.push_back(std::move(wm));
      m.biases.push_back(Eigen::Map<const Vector>(b.data(), rows));
    }
    const auto mean = j.at("input_mean").get<std::vector<double>>();
    const auto scale = j.at("input_scale").get<std::vector<double>>();
    m.input_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.input_scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    m.manifest = j.at("manifest").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("corrupt model file: bad schema hash");
  } catch (const std::out_of_range&) {
    throw FormatError("corrupt model file: bad schema hash");
  }
  try {
    m.validate();
  } catch (const SchemaError& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
  return m;
}

void save_model(const std::string& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << model_to_string(model);
}

MlpModel load_model(const std::string& path, std::optional<std::uint64_t> expected_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  MlpModel m = model_from_string(buf.str());
  if (expected_schema && *expected_schema != m.schema_hash) {
    throw SchemaError("model feature schema " + features::hex64(m.schema_hash) +
                      " does not match " + features::hex64(*expected_schema));
  }
  return m;
}

}  // namespace vvcguard::mlp
