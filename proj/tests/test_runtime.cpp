#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>

#include "mfl/error.hpp"
#include "mfl/graph.hpp"
#include "mfl/params.hpp"
#include "mfl/passes.hpp"
#include "mfl/relations.hpp"
#include "mfl/runtime.hpp"
#include "support.hpp"

namespace mfl {
namespace {

using test::rel_dev;

CompileOptions width(std::size_t out, std::size_t order = 2) {
  CompileOptions o;
  o.out_dim = out;
  o.max_order = order;
  return o;
}

std::vector<Value> samples(const test::Compiled& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Value> vs;
  for (std::size_t i = 0; i < n; ++i) vs.push_back(random_value(c.type, c.env, rng));
  return vs;
}

// ------------------------------------------------------------------- init

TEST(InitParams, DeterministicAndScheme) {
  const auto c = test::compile_text("Prod[Tensor[2,3], Option[Scal], MSet[Vector[2]]]", width(3));
  const ParamStore a = init_params(c.graph, 5), b = init_params(c.graph, 5), d = init_params(c.graph, 6);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_NE(a.flatten(), d.flatten());
  EXPECT_EQ(a.seed(), 5u);
  for (NodeId id = 0; id < c.graph.size(); ++id) {
    const auto& decls = c.graph.node(id).slots;
    for (std::size_t s = 0; s < decls.size(); ++s) {
      const auto& t = a.node(id)[s];
      EXPECT_EQ(t.shape(), decls[s].shape);
      if (decls[s].role == SlotRole::Bias) {
        for (double x : t.values()) EXPECT_EQ(x, 0.0);
      } else if (decls[s].role == SlotRole::Weight) {
        for (double x : t.values()) EXPECT_EQ(x, 1.0);
      } else {
        const std::size_t fan_out = decls[s].shape[0];
        const std::size_t fan_in = t.size() / fan_out;
        const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double x : t.values()) EXPECT_LE(std::abs(x), lim);
      }
    }
  }
}

TEST(InitParams, TensorStartsAsSumOfAxisMaps) {
  const auto c = test::compile_text("Tensor[2,3]", width(2));
  const ParamStore p = init_params(c.graph, 1);
  const DenseTensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  // With w = 1: y = L1 (row sums of N) + L2 (column sums of N).
  const std::vector<double> rows = {6, 15}, cols = {5, 7, 9};
  const DenseTensor zero(Shape{2});
  const auto a = test::affine(p.slot(c.graph, 0, "L1"), zero, rows);
  const auto b = test::affine(p.slot(c.graph, 0, "L2"), zero, cols);
  const Yector y = evaluate(c.graph, p, Value::tensor(x));
  for (std::size_t k = 0; k < 2; ++k) EXPECT_LE(rel_dev(y[k], a[k] + b[k]), 1e-14);
}

// ---------------------------------------------------------------- forward

TEST(Forward, UnitIsBias) {
  const auto c = test::compile_text("Unit", width(3));
  const auto m = test::random_model(c.graph, 2);
  EXPECT_EQ(evaluate(m.graph, m.params, Value::unit()).values(), m.params.slot(m.graph, 0, "b").values());
}

TEST(Forward, OptionFeatureMissingTrue) {
  const auto c = test::compile_text("Prod[Option[Scal], Option[Bool]]", width(3));
  const auto m = test::random_model(c.graph, 3);
  const auto& g = m.graph;
  const NodeId pi = g.output();
  const NodeId missing_scal = g.node(g.node(pi).inputs[0]).inputs[0];
  const NodeId bool_dense = g.node(g.node(pi).inputs[1]).inputs[1];
  const NodeId table = g.node(bool_dense).inputs[0];
  const auto b1 = m.params.slot(g, missing_scal, "b").values();
  const auto y2 = test::affine(m.params.slot(g, bool_dense, "L"), m.params.slot(g, bool_dense, "b"),
                               m.params.slot(g, table, "b1").data());
  const auto expect = test::naive_product_layer(g.node(pi), m.params.node(pi), {b1, y2});
  const Value v = Value::tuple({Value::tagged(1, Value::unit()),
                                Value::tagged(2, Value::tagged(1, Value::unit()))});
  EXPECT_LE(rel_dev(evaluate(g, m.params, v).data(), expect), 1e-12);
}

TEST(Forward, ListOfTwo) {
  const auto c = test::compile_text("List[Scal]", width(3));
  const auto m = test::random_model(c.graph, 4);
  const auto rnn = test::list_rnn_from(m.graph, m.params);
  EXPECT_LE(rel_dev(evaluate(m.graph, m.params, make_list(std::vector<Value>{Value::scalar(1.0), Value::scalar(2.0)})).data(),
                    rnn.run({1.0, 2.0})),
            1e-12);
}

TEST(Forward, RejectsNonconformingValues) {
  const auto c = test::compile_text("Prod[Scal, Bool]", width(3));
  const auto m = test::random_model(c.graph, 5);
  EXPECT_THROW(evaluate(m.graph, m.params, Value::scalar(1)), ValueError);
  EXPECT_THROW(evaluate(m.graph, m.params, Value::tuple({Value::vector({1, 2}), Value::tagged(1, Value::unit())})),
               Error);
}

TEST(Forward, DeterministicAndReplayable) {
  for (const auto& entry : test::graph_corpus()) {
    const auto c = test::compile_text(entry.type, entry.opts);
    const auto m = test::random_model(c.graph, 6);
    for (const Value& v : samples(c, 5, 7)) {
      const Evaluation e = forward(m.graph, m.params, v);
      EXPECT_EQ(e.output, forward(m.graph, m.params, v).output) << entry.name;
      EXPECT_EQ(e.output, e.tape.output()) << entry.name;
      EXPECT_EQ(replay(m.graph, m.params, e.tape), e.output) << entry.name;
    }
  }
}

// --------------------------------------------------------------- backward

TEST(Backward, BiasGradientIsBasisVector) {
  for (const char* type : {"Unit", "Vector[3]", "Tensor[2,2]", "Prod[Scal, Scal]", "MSet[Scal]", "Bool"}) {
    const auto c = test::compile_text(type, width(3));
    const auto m = test::random_model(c.graph, 8);
    const auto vs = samples(c, 1, 9);
    Value v = vs[0];
    if (std::string(type) == "MSet[Scal]") v = Value::bag({Value::scalar(0.5)});
    const Evaluation e = forward(m.graph, m.params, v);
    const NodeId out = m.graph.output();
    const std::string bias = m.graph.node(out).kind == NodeKind::EnumTable ? "b" + std::to_string(v.tag()) : "b";
    for (std::size_t k = 0; k < 3; ++k) {
      Yector ek(3);
      ek[k] = 1.0;
      const ParamStore grad = backward(m.graph, m.params, e.tape, ek);
      std::vector<double> expect(3, 0.0);
      expect[k] = 1.0;
      EXPECT_EQ(grad.slot(m.graph, out, bias).values(), expect) << type;
    }
  }
}

TEST(Backward, PoolMatrixGradientSumsElements) {
  const auto c = test::compile_text("MSet[Vector[2]]", width(3));
  const auto m = test::random_model(c.graph, 10);
  const Value bag = Value::bag({Value::vector({1, 2}), Value::vector({-3, 0.5}), Value::vector({4, 4})});
  const Evaluation e = forward(m.graph, m.params, bag);
  Yector ek(3);
  ek[1] = 1.0;
  const DenseTensor gl = backward(m.graph, m.params, e.tape, ek).slot(m.graph, 0, "L");
  const std::vector<double> expect = {0, 0, 1 - 3 + 4, 2 + 0.5 + 4, 0, 0};
  EXPECT_EQ(gl.values(), expect);
}

TEST(Backward, CotangentDimensionChecked) {
  const auto c = test::compile_text("Scal", width(3));
  const auto m = test::random_model(c.graph, 11);
  const Evaluation e = forward(m.graph, m.params, Value::scalar(1));
  EXPECT_THROW(backward(m.graph, m.params, e.tape, Yector(2)), ShapeError);
}

TEST(Backward, LinearInCotangent) {
  std::mt19937_64 rng(12);
  for (const auto& entry : test::graph_corpus()) {
    const auto c = test::compile_text(entry.type, entry.opts);
    const auto m = test::random_model(c.graph, 13);
    for (const Value& v : samples(c, 3, 14)) {
      const Evaluation e = forward(m.graph, m.params, v);
      const std::size_t d = e.output.dim();
      const Yector u(test::normals(d, rng)), w(test::normals(d, rng));
      const double a = 0.7, b = -1.3;
      Yector mix(d);
      for (std::size_t k = 0; k < d; ++k) mix[k] = a * u[k] + b * w[k];
      ParamStore expect = backward(m.graph, m.params, e.tape, u);
      expect.scale(a);
      expect.axpy(b, backward(m.graph, m.params, e.tape, w));
      EXPECT_LE(rel_dev(backward(m.graph, m.params, e.tape, mix).flatten(), expect.flatten()), 1e-12)
          << entry.name;
    }
  }
}

TEST(Backward, UnusedBranchesGetZeroGradient) {
  const auto c = test::compile_text("Sum[Vector[2], Tensor[2,2], Prod[Scal, Bool], Unit]", width(3));
  const auto m = test::random_model(c.graph, 15);
  const auto& g = m.graph;
  const Node& sd = g.node(g.output());
  ASSERT_EQ(sd.kind, NodeKind::SumDispatch);
  std::mt19937_64 rng(16);
  // Nodes reachable from each branch.
  std::vector<std::vector<bool>> owned(sd.inputs.size(), std::vector<bool>(g.size(), false));
  std::function<void(NodeId, std::size_t)> mark = [&](NodeId id, std::size_t b) {
    owned[b][id] = true;
    for (NodeId ch : g.node(id).inputs) mark(ch, b);
  };
  for (std::size_t b = 0; b < sd.inputs.size(); ++b) mark(sd.inputs[b], b);
  for (int i = 0; i < 20; ++i) {
    const Value v = random_value(c.type, c.env, rng);
    const Evaluation e = forward(g, m.params, v);
    const ParamStore grad = backward(g, m.params, e.tape, Yector(test::normals(3, rng)));
    for (std::size_t b = 0; b < sd.inputs.size(); ++b) {
      if (b + 1 == v.tag()) continue;
      for (NodeId id = 0; id < g.size(); ++id) {
        if (!owned[b][id] || owned[v.tag() - 1][id]) continue;
        for (const auto& t : grad.node(id)) {
          for (double x : t.values()) EXPECT_EQ(x, 0.0);
        }
      }
    }
  }
}

// --------------------------------------------------------------- gradcheck

TEST(GradCheck, LinearGraphIsExactToRounding) {
  const auto c = test::compile_text("Vector[3]", width(4));
  const auto m = test::random_model(c.graph, 17);
  const auto report = grad_check(m.graph, m.params, samples(c, 5, 18), 1e-5);
  EXPECT_LE(report.max_error, 1e-8);
}

TEST(GradCheck, FullOrderThreeProduct) {
  const auto c = test::compile_text("Prod[Vector[2], Scal, Bool]", width(3, 3));
  ASSERT_EQ(c.graph.node(c.graph.output()).max_order, 3u);
  const auto m = test::random_model(c.graph, 19);
  EXPECT_LE(grad_check(m.graph, m.params, samples(c, 5, 20), 1e-5).max_error, 1e-5);
}

TEST(GradCheck, DepthFiveList) {
  const auto c = test::compile_text("List[Scal]", width(3));
  const auto m = test::random_model(c.graph, 21);
  std::vector<Value> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(Value::scalar(0.3 * i - 0.5));
  const std::vector<Value> vals = {make_list(xs)};
  EXPECT_LE(grad_check(m.graph, m.params, vals, 1e-5).max_error, 1e-5);
}

TEST(GradCheck, Corpus) {
  for (const auto& entry : test::graph_corpus()) {
    const auto c = test::compile_text(entry.type, entry.opts);
    const auto m = test::random_model(c.graph, 22);
    const auto report = grad_check(m.graph, m.params, samples(c, 4, 23), 1e-5);
    EXPECT_LE(report.max_error, 1e-5) << entry.name << " worst " << report.worst_slot().slot;
  }
}

TEST(GradCheck, ConstrainedConstructions) {
  std::mt19937_64 rng(24);
  Model mset = multiset_side(3, 2);
  test::randomize(mset.params, rng);
  const Model models[] = {relate_product_to_tensor(test::random_model(tensor_side(2, 3, 2).graph, 25)),
                          relate_tensor_to_multiset(mset, 2), relate_product_to_multiset(mset, 2)};
  for (const Model& m : models) {
    std::vector<Value> vals;
    const Node& out = m.graph.node(m.graph.output());
    for (int i = 0; i < 3; ++i) {
      std::vector<Value> rows;
      for (int r = 0; r < 2; ++r) rows.push_back(Value::vector(test::normals(3, rng)));
      const Value tup = Value::tuple(rows);
      vals.push_back(out.kind == NodeKind::TensorMFL ? tuple_to_tensor(tup) : tup);
    }
    EXPECT_LE(grad_check(m.graph, m.params, vals, 1e-5).max_error, 1e-5);
  }
}

TEST(GradCheck, EpsilonRange) {
  const auto c = test::compile_text("Scal", width(2));
  const auto m = test::random_model(c.graph, 26);
  const auto vals = samples(c, 1, 27);
  EXPECT_THROW(grad_check(m.graph, m.params, vals, 1e-2), ValueError);
  EXPECT_THROW(grad_check(m.graph, m.params, vals, 1e-9), ValueError);
}

// ------------------------------------------------ image spans output space

TEST(Jacobian, FullRowRankForEveryLayerKind) {
  for (const char* type : {"Unit", "Vector[2]", "Tensor[2,3]", "Enum[3]", "Option[Scal]",
                           "Prod[Scal, Vector[2]]", "MSet[Vector[2]]", "List[Scal]"}) {
    const auto c = test::compile_text(type, width(4));
    const auto m = test::random_model(c.graph, 28);
    const Value v = samples(c, 1, 29)[0];
    const Evaluation e = forward(m.graph, m.params, v);
    const std::size_t np = m.params.size();
    Eigen::MatrixXd jac(4, static_cast<Eigen::Index>(np));
    for (std::size_t k = 0; k < 4; ++k) {
      Yector ek(4);
      ek[k] = 1.0;
      const auto row = backward(m.graph, m.params, e.tape, ek).flatten();
      for (std::size_t j = 0; j < np; ++j) jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = row[j];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    lu.setThreshold(1e-8);
    EXPECT_EQ(lu.rank(), 4) << type;
  }
}

// -------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTrip) {
  const auto c = test::compile_text("Prod[Tensor[2,2], List[Bool]]", width(3));
  const auto m = test::random_model(c.graph, 30);
  const auto path = std::filesystem::temp_directory_path() / "mfl_checkpoint_roundtrip.bin";
  save_params(m.params, m.graph, path);
  const ParamStore back = load_params(m.graph, path);
  EXPECT_EQ(back.flatten(), m.params.flatten());
  const auto records = read_checkpoint(path);
  std::size_t slots = 0;
  for (const auto& n : c.graph.nodes()) slots += n.slots.size();
  EXPECT_EQ(records.size(), slots);
  // A different architecture refuses the file.
  const auto other = test::compile_text("Prod[Tensor[2,2], List[Bool]]", width(4));
  EXPECT_THROW(load_params(other.graph, path), ShapeError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_params(m.graph, path), ValueError);
}

TEST(Checkpoint, LittleEndianHeader) {
  const auto c = test::compile_text("Scal", width(1));
  const auto m = test::random_model(c.graph, 31);
  const auto path = std::filesystem::temp_directory_path() / "mfl_checkpoint_header.bin";
  save_params(m.params, m.graph, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MFLP");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  EXPECT_EQ(bytes[8], 2);  // two slot records: L and b
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace mfl
