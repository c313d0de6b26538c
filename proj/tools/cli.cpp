#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "mfl/error.hpp"
#include "mfl/graph.hpp"
#include "mfl/params.hpp"
#include "mfl/passes.hpp"
#include "mfl/relations.hpp"
#include "mfl/runtime.hpp"
#include "mfl/trainer.hpp"
#include "mfl/types.hpp"
#include "mfl/value.hpp"

namespace mflc {

namespace {

struct Options {
  std::string schema;
  std::string type;
  std::size_t out_dim = 4;
  std::size_t max_order = 2;
  std::size_t width = 0;
  bool normalized_pool = false;
  std::string activation = "none";
  bool simplify = false;
  std::string data;
  std::size_t epochs = 100;
  double lr = 0.01;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  double tol = 1e-5;
  double epsilon = 1e-5;
  std::size_t samples = 8;
  std::string out;
  std::string params;
  std::string relation = "product-tensor";
  std::string optimizer = "adam";
  std::string loss;
};

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", x);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mfl::ValueError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Loaded {
  mfl::SchemaEnv env;
  mfl::TypeExpr type;
};

Loaded load_schema(const Options& o) {
  Loaded l{mfl::parse_schema(read_file(o.schema)), {}};
  if (l.env.contains(o.type)) {
    l.type = mfl::TypeExpr::ref(o.type);
  } else {
    l.type = mfl::parse_type(o.type, l.env);
  }
  return l;
}

mfl::CompileOptions compile_options(const Options& o) {
  mfl::CompileOptions c;
  c.out_dim = o.out_dim;
  c.max_order = o.max_order;
  c.intermediate_width = o.width;
  c.normalized_pool = o.normalized_pool;
  c.activation = mfl::parse_activation(o.activation);
  return c;
}

mfl::Model build(const Loaded& l, const Options& o) {
  mfl::EncoderGraph g = mfl::compile(l.type, compile_options(o), l.env);
  mfl::ParamStore p = mfl::init_params(g, o.seed);
  if (o.simplify) return mfl::simplify(g, p);
  return {std::move(g), std::move(p)};
}

void write_text(const Options& o, const std::string& text, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw mfl::ValueError("cannot write " + o.out);
  f << text;
}

void add_compile_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--schema", o.schema, "Schema file")->required();
  cmd->add_option("--type", o.type, "Definition name or type expression")->required();
  cmd->add_option("--out-dim", o.out_dim, "Output yector width")->check(CLI::PositiveNumber);
  cmd->add_option("--max-order", o.max_order, "Product interaction order")->check(CLI::PositiveNumber);
  cmd->add_option("--width", o.width, "Intermediate yector width (0: out-dim)");
  cmd->add_flag("--normalized-pool", o.normalized_pool, "Mean instead of sum pooling");
  cmd->add_option("--activation", o.activation, "none, tanh, relu, sigmoid")
      ->check(CLI::IsMember({"none", "tanh", "relu", "sigmoid"}));
  cmd->add_option("--seed", o.seed, "Random seed");
}

int cmd_parse(const Options& o, std::ostream& out) {
  mfl::SchemaEnv env = mfl::parse_schema(read_file(o.schema));
  if (!o.type.empty()) {
    mfl::TypeExpr t = env.contains(o.type) ? mfl::TypeExpr::ref(o.type) : mfl::parse_type(o.type, env);
    out << env.expand(t).to_string() << "\n";
    return 0;
  }
  for (const auto& name : env.user_names()) {
    out << name << " = " << env.expand(env.definition(name)).to_string() << "\n";
  }
  return 0;
}

int cmd_params(const Options& o, std::ostream& out) {
  Loaded l = load_schema(o);
  mfl::Model m = build(l, o);
  const auto& g = m.graph;
  for (mfl::NodeId id = 0; id < g.size(); ++id) {
    for (const auto& s : g.node(id).slots) {
      out << "node " << id << " " << mfl::kind_name(g.node(id).kind) << " " << s.name << " [";
      for (std::size_t i = 0; i < s.shape.size(); ++i) out << (i ? "," : "") << s.shape[i];
      out << "] " << s.size() << "\n";
    }
  }
  out << "param_count: " << mfl::param_count(g) << "\n";
  if (!o.out.empty()) {
    mfl::save_params(m.params, g, o.out);
    out << "wrote " << o.out << "\n";
  }
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  Loaded l = load_schema(o);
  mfl::Model m = build(l, o);
  std::vector<mfl::Value> values;
  if (!o.data.empty()) {
    for (auto& e : mfl::load_dataset(o.data, l.type, l.env).items) values.push_back(e.x);
  } else {
    std::mt19937_64 rng(o.seed);
    for (std::size_t i = 0; i < o.samples; ++i) values.push_back(mfl::random_value(l.type, l.env, rng));
  }
  // Move off the initial point so biases and weight vectors are generic.
  std::mt19937_64 rng(o.seed + 1);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (std::size_t id = 0; id < m.params.node_count(); ++id) {
    for (auto& t : m.params.node(id)) {
      for (double& x : t.data()) x += nd(rng);
    }
  }
  auto report = mfl::grad_check(m.graph, m.params, values, o.epsilon, o.seed);
  out << "values: " << values.size() << "\n";
  out << "slots checked: " << report.slots.size() << "\n";
  if (!report.slots.empty()) {
    const auto& w = report.worst_slot();
    out << "worst slot: node " << w.node << " " << mfl::kind_name(m.graph.node(w.node).kind) << " "
        << w.slot << "\n";
  }
  out << "max relative error: " << sci(report.max_error) << "\n";
  out << "tolerance: " << sci(o.tol) << "\n";
  if (!(report.max_error <= o.tol)) {
    err << "error: gradcheck max relative error " << sci(report.max_error) << " exceeds tolerance "
        << sci(o.tol) << "\n";
    return 3;
  }
  return 0;
}

mfl::Loss pick_loss(const Options& o, const mfl::Dataset& d) {
  if (!o.loss.empty()) return mfl::parse_loss(o.loss);
  return d.classification ? mfl::Loss::CrossEntropy : mfl::Loss::Mse;
}

int cmd_train(const Options& o, std::ostream& out) {
  Loaded l = load_schema(o);
  mfl::Dataset data = mfl::load_dataset(o.data, l.type, l.env);
  if (data.items.empty()) throw mfl::ValueError("data file has no records");
  mfl::EncoderGraph enc = mfl::compile(l.type, compile_options(o), l.env);
  mfl::EncoderGraph g = mfl::attach_head(enc, data.target_dim);
  mfl::Model model{g, mfl::init_params(g, o.seed)};
  mfl::TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.learning_rate = o.lr;
  cfg.optimizer = mfl::parse_optimizer(o.optimizer);
  cfg.seed = o.seed;
  cfg.loss = pick_loss(o, data);
  auto result = mfl::train(model, data, cfg);
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    out << "epoch " << e + 1 << " loss " << sci(result.history[e]) << "\n";
  }
  out << "best epoch: " << result.best_epoch << "\n";
  auto metrics = mfl::evaluate(result.model, data, cfg.loss);
  out << "loss: " << sci(metrics.loss) << "\n";
  if (metrics.accuracy) out << "accuracy: " << sci(*metrics.accuracy) << "\n";
  if (!o.out.empty()) {
    mfl::save_params(result.model.params, result.model.graph, o.out);
    out << "wrote " << o.out << "\n";
  }
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  Loaded l = load_schema(o);
  mfl::Dataset data = mfl::load_dataset(o.data, l.type, l.env);
  mfl::EncoderGraph enc = mfl::compile(l.type, compile_options(o), l.env);
  // The head width is read back from the checkpoint's last Dense matrix.
  auto records = mfl::read_checkpoint(o.params);
  std::size_t head = 0;
  mfl::NodeId last = 0;
  for (const auto& r : records) {
    if (r.slot == "L" && r.node >= last) {
      last = r.node;
      head = r.data.shape().at(0);
    }
  }
  if (head == 0) throw mfl::ShapeError("checkpoint has no readout head");
  mfl::EncoderGraph g = mfl::attach_head(enc, head);
  mfl::Model model{g, mfl::load_params(g, o.params)};
  auto metrics = mfl::evaluate(model, data, pick_loss(o, data));
  out << "items: " << metrics.count << "\n";
  out << "loss: " << sci(metrics.loss) << "\n";
  if (metrics.accuracy) out << "accuracy: " << sci(*metrics.accuracy) << "\n";
  return 0;
}

int cmd_relate(const Options& o, std::ostream& out, std::ostream& err) {
  constexpr double kTolerance = 1e-12;
  auto which = mfl::parse_relation_case(o.relation);
  auto r = mfl::run_relation(which, o.seed);
  out << "case: " << mfl::relation_case_name(which) << "\n";
  out << "trials: " << r.trials << "\n";
  out << "max deviation: " << sci(r.max_deviation) << "\n";
  out << "tolerance: " << sci(kTolerance) << "\n";
  out << "witness: " << (r.witness_ok ? "ok" : "failed") << " (" << r.witness << ")\n";
  if (!(r.max_deviation <= kTolerance) || !r.witness_ok) {
    err << "error: relation " << mfl::relation_case_name(which) << " deviates by "
        << sci(r.max_deviation) << "\n";
    return 3;
  }
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compile algebraic data types into multilinear flattening encoders", "mflc"};
  app.require_subcommand(1);
  Options o;

  auto* parse = app.add_subcommand("parse", "Print expanded type definitions");
  parse->add_option("--schema", o.schema, "Schema file")->required();
  parse->add_option("--type", o.type, "Only this definition or expression");

  auto* compile = app.add_subcommand("compile", "Write the graph manifest");
  add_compile_flags(compile, o);
  compile->add_flag("--simplify", o.simplify, "Merge affine chains first");
  compile->add_option("--out", o.out, "Output file");

  auto* dot = app.add_subcommand("dot", "Write the graph in Graphviz format");
  add_compile_flags(dot, o);
  dot->add_flag("--simplify", o.simplify, "Merge affine chains first");
  dot->add_option("--out", o.out, "Output file");

  auto* params = app.add_subcommand("params", "List parameter slots; optionally save an initial checkpoint");
  add_compile_flags(params, o);
  params->add_flag("--simplify", o.simplify, "Merge affine chains first");
  params->add_option("--out", o.out, "Checkpoint file");

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare gradients with central differences");
  add_compile_flags(gradcheck, o);
  gradcheck->add_option("--tol", o.tol, "Maximum relative error");
  gradcheck->add_option("--epsilon", o.epsilon, "Finite-difference step")->check(CLI::Range(1e-7, 1e-3));
  gradcheck->add_option("--data", o.data, "Inputs from a data file instead of random values");
  gradcheck->add_option("--samples", o.samples, "Number of random values")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train encoder and readout head");
  add_compile_flags(train, o);
  train->add_option("--data", o.data, "Data file")->required();
  train->add_option("--epochs", o.epochs, "Epochs")->check(CLI::PositiveNumber);
  train->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber);
  train->add_option("--optimizer", o.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  train->add_option("--loss", o.loss, "mse or cross_entropy (default: from targets)")
      ->check(CLI::IsMember({"mse", "cross_entropy"}));
  train->add_option("--out", o.out, "Checkpoint file");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained checkpoint");
  add_compile_flags(eval, o);
  eval->add_option("--data", o.data, "Data file")->required();
  eval->add_option("--params", o.params, "Checkpoint file")->required();
  eval->add_option("--loss", o.loss, "mse or cross_entropy (default: from targets)")
      ->check(CLI::IsMember({"mse", "cross_entropy"}));

  auto* relate = app.add_subcommand("relate", "Check the type-relation weight constructions");
  relate->add_option("--case", o.relation, "product-tensor, tensor-multiset, product-multiset")
      ->check(CLI::IsMember({"product-tensor", "tensor-multiset", "product-multiset"}));
  relate->add_option("--seed", o.seed, "Random seed");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (parse->parsed()) return cmd_parse(o, out);
    if (compile->parsed() || dot->parsed()) {
      Loaded l = load_schema(o);
      mfl::Model m = build(l, o);
      write_text(o, compile->parsed() ? mfl::graph_manifest(m.graph) : mfl::graph_dot(m.graph, o.type), out);
      return 0;
    }
    if (params->parsed()) return cmd_params(o, out);
    if (gradcheck->parsed()) return cmd_gradcheck(o, out, err);
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (relate->parsed()) return cmd_relate(o, out, err);
  } catch (const mfl::NumericError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const mfl::Error& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mflc
