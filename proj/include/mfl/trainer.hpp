#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mfl/graph.hpp"
#include "mfl/params.hpp"
#include "mfl/types.hpp"
#include "mfl/value.hpp"

namespace mfl {

enum class Loss { Mse, CrossEntropy };
enum class Optimizer { Sgd, Adam };

Loss parse_loss(std::string_view name);
Optimizer parse_optimizer(std::string_view name);

struct Example {
  Value x;
  std::vector<double> target;  // regression target
  std::size_t label = 0;       // 0-based class index
};

struct Dataset {
  std::vector<Example> items;
  bool classification = false;
  /// Regression target length, or the number of classes (max label + 1).
  std::size_t target_dim = 0;
};

/// Parses line-delimited {"x": <value>, "y": [reals] | {"class": k}} records
/// and checks every input against t. Blank lines and '#' lines are skipped.
Dataset parse_dataset(std::string_view text, const TypeExpr& t, const SchemaEnv& env);
Dataset load_dataset(const std::filesystem::path& path, const TypeExpr& t, const SchemaEnv& env);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
  Loss loss = Loss::Mse;
};

/// Appends a Dense readout from the encoder output to target_dim; the head
/// becomes the graph output.
EncoderGraph attach_head(const EncoderGraph& encoder, std::size_t target_dim);

/// Loss of one prediction and its gradient with respect to the prediction.
/// Mean squared error averages over components; cross entropy applies a
/// softmax to the prediction.
double loss_value(Loss loss, const Yector& y, const Example& e, Yector* grad = nullptr);

struct Metrics {
  double loss = 0.0;
  std::optional<double> accuracy;  // classification only
  std::size_t count = 0;
};

Metrics evaluate(const Model& model, const Dataset& data, Loss loss);

struct TrainResult {
  Model model;                  // parameters of the best epoch
  std::vector<double> history;  // full training loss after each epoch
  std::size_t best_epoch = 0;   // 1-based
  double best_loss = 0.0;
};

/// Minibatch training with a fixed shuffle order per seed. Batch gradients are
/// item means. Throws NumericError naming the batch on a non-finite loss.
TrainResult train(const Model& initial, const Dataset& data, const TrainConfig& cfg);

/// One optimiser step on a fixed batch; used for descent checks.
Model sgd_step(const Model& m, std::span<const Example> batch, Loss loss, double lr);

}  // namespace mfl
