#include "adfi/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adfi/errors.hpp"

namespace adfi {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

LinearClassifier::LinearClassifier(std::size_t dimension)
    : weights_(dimension, 0.0), mean_(dimension, 0.0), scale_(dimension, 1.0) {}

TrainReport LinearClassifier::train(const std::vector<LabeledState>& dataset,
                                    const TrainConfig& config) {
  if (dataset.empty()) throw DatasetError("training set is empty");
  const std::size_t dim = dataset.front().features.size();
  for (const LabeledState& s : dataset)
    if (s.features.size() != dim)
      throw DatasetError("inconsistent feature dimension in training set");
  if (config.epochs < 1 || config.learning_rate <= 0.0 || config.l2 < 0.0)
    throw ParameterError("train: epochs >= 1, learning_rate > 0, l2 >= 0 required");

  weights_.assign(dim, 0.0);
  bias_ = 0.0;
  mean_.assign(dim, 0.0);
  scale_.assign(dim, 1.0);

  // Standardize features for stable gradient descent.
  const double n = static_cast<double>(dataset.size());
  for (const LabeledState& s : dataset)
    for (std::size_t j = 0; j < dim; ++j) mean_[j] += s.features[j] / n;
  std::vector<double> var(dim, 0.0);
  for (const LabeledState& s : dataset)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = s.features[j] - mean_[j];
      var[j] += d * d / n;
    }
  for (std::size_t j = 0; j < dim; ++j) scale_[j] = var[j] > 1e-12 ? std::sqrt(var[j]) : 1.0;

  std::vector<std::vector<double>> x(dataset.size(), std::vector<double>(dim));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j)
      x[i][j] = (dataset[i].features[j] - mean_[j]) / scale_[j];

  TrainReport report;
  report.loss_per_epoch.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<double> grad_w(dim, 0.0);
    double grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      double z = bias_;
      for (std::size_t j = 0; j < dim; ++j) z += weights_[j] * x[i][j];
      const double p = sigmoid(z);
      const double y = static_cast<double>(dataset[i].label);
      const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
      loss += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc)) / n;
      const double err = (p - y) / n;
      for (std::size_t j = 0; j < dim; ++j) grad_w[j] += err * x[i][j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      loss += 0.5 * config.l2 * weights_[j] * weights_[j];
      grad_w[j] += config.l2 * weights_[j];
      weights_[j] -= config.learning_rate * grad_w[j];
    }
    bias_ -= config.learning_rate * grad_b;
    report.loss_per_epoch.push_back(loss);
  }
  report.final_loss = report.loss_per_epoch.back();
  report.train_accuracy = accuracy(dataset);
  return report;
}

double LinearClassifier::score(const std::vector<double>& features) const {
  if (features.size() != weights_.size())
    throw DatasetError("feature dimension does not match the trained model");
  double z = bias_;
  for (std::size_t j = 0; j < weights_.size(); ++j)
    z += weights_[j] * (features[j] - mean_[j]) / scale_[j];
  return sigmoid(z);
}

int LinearClassifier::predict(const std::vector<double>& features) const {
  return score(features) >= 0.5 ? 1 : 0;
}

double LinearClassifier::accuracy(const std::vector<LabeledState>& dataset) const {
  if (dataset.empty()) throw DatasetError("accuracy over an empty set is undefined");
  int correct = 0;
  for (const LabeledState& s : dataset)
    if (predict(s.features) == s.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::string LinearClassifier::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << weights_.size() << '\n' << bias_ << '\n';
  for (double w : weights_) os << w << ' ';
  os << '\n';
  for (double m : mean_) os << m << ' ';
  os << '\n';
  for (double s : scale_) os << s << ' ';
  os << '\n';
  return os.str();
}

LinearClassifier LinearClassifier::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::size_t dim = 0;
  if (!(is >> dim)) throw DatasetError("malformed classifier data");
  LinearClassifier c(dim);
  if (!(is >> c.bias_)) throw DatasetError("malformed classifier data");
  for (std::size_t j = 0; j < dim; ++j)
    if (!(is >> c.weights_[j])) throw DatasetError("malformed classifier data");
  for (std::size_t j = 0; j < dim; ++j)
    if (!(is >> c.mean_[j])) throw DatasetError("malformed classifier data");
  for (std::size_t j = 0; j < dim; ++j)
    if (!(is >> c.scale_[j])) throw DatasetError("malformed classifier data");
  return c;
}

}  // namespace adfi
