#include "mfl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mfl/error.hpp"
#include "mfl/runtime.hpp"
#include "mfl/wire.hpp"

namespace mfl {

Loss parse_loss(std::string_view name) {
  if (name == "mse") return Loss::Mse;
  if (name == "cross_entropy") return Loss::CrossEntropy;
  throw ValueError("unknown loss '" + std::string(name) + "'");
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "adam") return Optimizer::Adam;
  throw ValueError("unknown optimizer '" + std::string(name) + "'");
}

Dataset parse_dataset(std::string_view text, const TypeExpr& t, const SchemaEnv& env) {
  Dataset data;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool kind_known = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto where = [&] { return "data line " + std::to_string(lineno) + ": "; };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValueError(where() + "malformed JSON");
    }
    if (!j.is_object() || !j.contains("x") || !j.contains("y")) {
      throw ValueError(where() + "expected an object with \"x\" and \"y\"");
    }
    Example ex;
    try {
      ex.x = value_from_json(j["x"]);
    } catch (const ValueError& e) {
      throw ValueError(where() + e.what());
    }
    if (auto diag = check_value(t, ex.x, env)) throw ValueError(where() + *diag);
    const auto& y = j["y"];
    bool is_class = y.is_object();
    if (is_class) {
      if (!y.contains("class") || !y["class"].is_number_integer() || y["class"].get<long long>() < 0) {
        throw ValueError(where() + "\"class\" must be a non-negative integer");
      }
      ex.label = y["class"].get<std::size_t>();
    } else if (y.is_array()) {
      for (const auto& v : y) {
        if (!v.is_number()) throw ValueError(where() + "targets must be numbers");
        ex.target.push_back(v.get<double>());
      }
    } else {
      throw ValueError(where() + "\"y\" must be an array or {\"class\": k}");
    }
    if (!kind_known) {
      data.classification = is_class;
      data.target_dim = is_class ? 0 : ex.target.size();
      kind_known = true;
    } else if (is_class != data.classification) {
      throw ValueError(where() + "mixes class labels and real targets");
    } else if (!is_class && ex.target.size() != data.target_dim) {
      throw ValueError(where() + "target length " + std::to_string(ex.target.size()) +
                       " differs from " + std::to_string(data.target_dim));
    }
    if (is_class) data.target_dim = std::max(data.target_dim, ex.label + 1);
    data.items.push_back(std::move(ex));
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& path, const TypeExpr& t, const SchemaEnv& env) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot read data file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), t, env);
}

EncoderGraph attach_head(const EncoderGraph& encoder, std::size_t target_dim) {
  if (target_dim == 0) throw ShapeError("head needs a positive output width");
  EncoderGraph g = encoder;
  Node head = make_dense(encoder.out_dim(), target_dim, encoder.output());
  head.source = "head";
  g.set_output(g.add(std::move(head)));
  g.validate();
  return g;
}

double loss_value(Loss loss, const Yector& y, const Example& e, Yector* grad) {
  if (grad) *grad = Yector(y.dim());
  if (loss == Loss::Mse) {
    if (e.target.size() != y.dim()) {
      throw ShapeError("target has length " + std::to_string(e.target.size()) + ", output has " +
                       std::to_string(y.dim()));
    }
    const double d = static_cast<double>(y.dim());
    double total = 0.0;
    for (std::size_t k = 0; k < y.dim(); ++k) {
      const double r = y[k] - e.target[k];
      total += r * r;
      if (grad) (*grad)[k] = 2.0 * r / d;
    }
    return total / d;
  }
  if (e.label >= y.dim()) {
    throw ShapeError("class " + std::to_string(e.label) + " out of range for " +
                     std::to_string(y.dim()) + " outputs");
  }
  const double mx = *std::max_element(y.values().begin(), y.values().end());
  double z = 0.0;
  for (double v : y.values()) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  if (grad) {
    for (std::size_t k = 0; k < y.dim(); ++k) (*grad)[k] = std::exp(y[k] - log_z);
    (*grad)[e.label] -= 1.0;
  }
  return log_z - y[e.label];
}

Metrics evaluate(const Model& model, const Dataset& data, Loss loss) {
  Metrics m;
  m.count = data.items.size();
  std::size_t correct = 0;
  for (const auto& e : data.items) {
    const Yector y = mfl::evaluate(model.graph, model.params, e.x);
    m.loss += loss_value(loss, y, e);
    if (loss == Loss::CrossEntropy) {
      auto best = std::max_element(y.values().begin(), y.values().end()) - y.values().begin();
      if (static_cast<std::size_t>(best) == e.label) ++correct;
    }
  }
  if (m.count) m.loss /= static_cast<double>(m.count);
  if (loss == Loss::CrossEntropy && m.count) {
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.count);
  }
  return m;
}

namespace {

// Mean loss and mean gradient over a batch.
double batch_gradient(const Model& m, std::span<const Example> batch, Loss loss, ParamStore& grad) {
  grad = ParamStore::zeros(m.graph);
  double total = 0.0;
  for (const auto& e : batch) {
    auto ev = forward(m.graph, m.params, e.x);
    Yector dy;
    total += loss_value(loss, ev.output, e, &dy);
    grad.axpy(1.0, backward(m.graph, m.params, ev.tape, dy));
  }
  const double n = static_cast<double>(batch.size());
  grad.scale(1.0 / n);
  return total / n;
}

}  // namespace

Model sgd_step(const Model& m, std::span<const Example> batch, Loss loss, double lr) {
  ParamStore grad;
  batch_gradient(m, batch, loss, grad);
  Model next = m;
  next.params.axpy(-lr, grad);
  return next;
}

TrainResult train(const Model& initial, const Dataset& data, const TrainConfig& cfg) {
  if (data.items.empty()) throw ValueError("training set is empty");
  if (cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0)) {
    throw ValueError("epochs, batch size and learning rate must be positive");
  }
  if ((cfg.loss == Loss::CrossEntropy) != data.classification) {
    throw ValueError(cfg.loss == Loss::CrossEntropy ? "cross_entropy needs class labels"
                                                    : "mse needs real-valued targets");
  }
  if (initial.graph.out_dim() < data.target_dim ||
      (!data.classification && initial.graph.out_dim() != data.target_dim)) {
    throw ShapeError("model output has width " + std::to_string(initial.graph.out_dim()) +
                     ", targets need " + std::to_string(data.target_dim));
  }
  initial.params.check_against(initial.graph);

  Model model = initial;
  TrainResult result{model, {}, 0, 0.0};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.items.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t nparams = model.params.size();
  std::vector<double> m1(nparams, 0.0), m2(nparams, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t step = 0;
  std::size_t batch_index = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      std::vector<Example> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(data.items[order[i]]);
      }
      ParamStore grad;
      const double loss = batch_gradient(model, batch, cfg.loss, grad);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss in batch " + std::to_string(batch_index) +
                           " (epoch " + std::to_string(epoch) + ")");
      }
      if (cfg.optimizer == Optimizer::Sgd) {
        model.params.axpy(-cfg.learning_rate, grad);
        continue;
      }
      ++step;
      std::vector<double> theta = model.params.flatten();
      const std::vector<double> g = grad.flatten();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < nparams; ++k) {
        m1[k] = beta1 * m1[k] + (1.0 - beta1) * g[k];
        m2[k] = beta2 * m2[k] + (1.0 - beta2) * g[k] * g[k];
        theta[k] -= cfg.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + adam_eps);
      }
      model.params.assign(theta);
    }
    const double full = evaluate(model, data, cfg.loss).loss;
    if (!std::isfinite(full)) {
      throw NumericError("non-finite loss after batch " + std::to_string(batch_index - 1) +
                         " (epoch " + std::to_string(epoch) + ")");
    }
    result.history.push_back(full);
    if (result.best_epoch == 0 || full < result.best_loss) {
      result.best_epoch = epoch;
      result.best_loss = full;
      result.model = model;
    }
  }
  return result;
}

}  // namespace mfl
