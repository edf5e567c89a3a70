#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adfi/planner.hpp"

namespace adfi {

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> loss_per_epoch;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

// Logistic-regression classifier over unloading decision features.
// Predicts 1 (pick) when sigma(w.x + b) >= 0.5.
class LinearClassifier {
 public:
  LinearClassifier() = default;
  explicit LinearClassifier(std::size_t dimension);

  TrainReport train(const std::vector<LabeledState>& dataset, const TrainConfig& config = {});

  double score(const std::vector<double>& features) const;  // probability of pick
  int predict(const std::vector<double>& features) const;
  double accuracy(const std::vector<LabeledState>& dataset) const;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  std::size_t dimension() const { return weights_.size(); }

  std::string serialize() const;
  static LinearClassifier deserialize(const std::string& text);

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace adfi
