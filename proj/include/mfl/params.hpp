#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfl/graph.hpp"
#include "mfl/tensor.hpp"

namespace mfl {

/// Learnable arrays for one graph: one tensor per declared slot, laid out per
/// node in slot order. Nodes aliased by weight sharing are a single node, so
/// their slots appear once.
class ParamStore {
 public:
  ParamStore() = default;

  /// Zero-filled arrays matching every slot of g.
  static ParamStore zeros(const EncoderGraph& g);

  std::size_t node_count() const { return slots_.size(); }
  const std::vector<DenseTensor>& node(NodeId id) const { return slots_.at(id); }
  std::vector<DenseTensor>& node(NodeId id) { return slots_.at(id); }

  DenseTensor& slot(const EncoderGraph& g, NodeId id, std::string_view name);
  const DenseTensor& slot(const EncoderGraph& g, NodeId id, std::string_view name) const;

  /// Total number of scalars.
  std::size_t size() const;

  std::uint64_t seed() const { return seed_; }
  const std::string& scheme() const { return scheme_; }
  void set_origin(std::uint64_t seed, std::string scheme) {
    seed_ = seed;
    scheme_ = std::move(scheme);
  }

  /// Flat views in (node, slot, element) order.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  /// this += a * x
  void axpy(double a, const ParamStore& x);
  void scale(double a);

  /// Adds arrays for a node appended to the graph.
  void append(std::vector<DenseTensor> node_slots) { slots_.push_back(std::move(node_slots)); }

  /// Store for a renumbered graph: entry i takes the arrays of old_ids[i].
  ParamStore select(const std::vector<NodeId>& old_ids) const;

  /// Throws ShapeError unless every array matches the graph's declarations.
  void check_against(const EncoderGraph& g) const;

 private:
  std::vector<std::vector<DenseTensor>> slots_;
  std::uint64_t seed_ = 0;
  std::string scheme_ = "zeros";
};

/// A graph together with values for all of its slots.
struct Model {
  EncoderGraph graph;
  ParamStore params;
};

/// Deterministic initialisation: matrices and interaction tensors uniform in
/// (-a, a) with a = sqrt(6 / (fan_in + fan_out)), weight vectors one, biases
/// zero.
ParamStore init_params(const EncoderGraph& g, std::uint64_t seed);

/// Little-endian checkpoint: "MFLP", version, record count, then per slot the
/// node id, slot name, shape, and raw doubles.
void save_params(const ParamStore& params, const EncoderGraph& g,
                 const std::filesystem::path& path);
ParamStore load_params(const EncoderGraph& g, const std::filesystem::path& path);

struct CheckpointRecord {
  NodeId node = kNoNode;
  std::string slot;
  DenseTensor data;
};

/// Raw records of a checkpoint, in file order.
std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);

}  // namespace mfl
