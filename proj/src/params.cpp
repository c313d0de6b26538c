#include "mfl/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "mfl/error.hpp"

namespace mfl {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T x{};
  if (!in.read(reinterpret_cast<char*>(&x), sizeof(T))) {
    throw ValueError("checkpoint truncated");
  }
  return x;
}

}  // namespace

ParamStore ParamStore::zeros(const EncoderGraph& g) {
  ParamStore p;
  p.slots_.resize(g.size());
  for (NodeId id = 0; id < g.size(); ++id) {
    for (const auto& s : g.node(id).slots) p.slots_[id].emplace_back(s.shape);
  }
  return p;
}

DenseTensor& ParamStore::slot(const EncoderGraph& g, NodeId id, std::string_view name) {
  return slots_.at(id).at(g.node(id).slot_index(name));
}

const DenseTensor& ParamStore::slot(const EncoderGraph& g, NodeId id,
                                    std::string_view name) const {
  return slots_.at(id).at(g.node(id).slot_index(name));
}

std::size_t ParamStore::size() const {
  std::size_t n = 0;
  for (const auto& node : slots_) {
    for (const auto& t : node) n += t.size();
  }
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const auto& node : slots_) {
    for (const auto& t : node) flat.insert(flat.end(), t.values().begin(), t.values().end());
  }
  return flat;
}

void ParamStore::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw ShapeError("parameter vector has the wrong length");
  std::size_t k = 0;
  for (auto& node : slots_) {
    for (auto& t : node) {
      for (double& x : t.data()) x = flat[k++];
    }
  }
}

void ParamStore::axpy(double a, const ParamStore& x) {
  if (x.slots_.size() != slots_.size()) throw ShapeError("parameter stores differ in layout");
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (x.slots_[i].size() != slots_[i].size()) throw ShapeError("parameter stores differ in layout");
    for (std::size_t s = 0; s < slots_[i].size(); ++s) {
      auto dst = slots_[i][s].data();
      auto src = x.slots_[i][s].data();
      if (dst.size() != src.size()) throw ShapeError("parameter stores differ in layout");
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += a * src[k];
    }
  }
}

void ParamStore::scale(double a) {
  for (auto& node : slots_) {
    for (auto& t : node) {
      for (double& x : t.data()) x *= a;
    }
  }
}

ParamStore ParamStore::select(const std::vector<NodeId>& old_ids) const {
  ParamStore p;
  p.seed_ = seed_;
  p.scheme_ = scheme_;
  for (NodeId id : old_ids) p.slots_.push_back(slots_.at(id));
  return p;
}

void ParamStore::check_against(const EncoderGraph& g) const {
  if (slots_.size() != g.size()) {
    throw ShapeError("parameter store has " + std::to_string(slots_.size()) +
                     " nodes, graph has " + std::to_string(g.size()));
  }
  for (NodeId id = 0; id < g.size(); ++id) {
    const auto& decl = g.node(id).slots;
    if (decl.size() != slots_[id].size()) {
      throw ShapeError("node " + std::to_string(id) + ": slot count mismatch");
    }
    for (std::size_t s = 0; s < decl.size(); ++s) {
      if (decl[s].shape != slots_[id][s].shape()) {
        throw ShapeError("node " + std::to_string(id) + ": slot " + decl[s].name +
                         " has the wrong shape");
      }
    }
  }
}

ParamStore init_params(const EncoderGraph& g, std::uint64_t seed) {
  ParamStore p = ParamStore::zeros(g);
  std::mt19937_64 rng(seed);
  for (NodeId id = 0; id < g.size(); ++id) {
    const auto& decl = g.node(id).slots;
    for (std::size_t s = 0; s < decl.size(); ++s) {
      DenseTensor& t = p.node(id)[s];
      switch (decl[s].role) {
        case SlotRole::Bias:
          break;
        case SlotRole::Weight:
          for (double& x : t.data()) x = 1.0;
          break;
        case SlotRole::Matrix:
        case SlotRole::Interaction: {
          const Shape& sh = decl[s].shape;
          std::size_t fan_out = sh[0];
          std::size_t fan_in = 1;
          for (std::size_t a = 1; a < sh.size(); ++a) fan_in *= sh[a];
          double a = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in + fan_out, 1)));
          std::uniform_real_distribution<double> dist(-a, a);
          for (double& x : t.data()) x = dist(rng);
          break;
        }
      }
    }
  }
  p.set_origin(seed, "glorot-uniform");
  return p;
}

void save_params(const ParamStore& params, const EncoderGraph& g,
                 const std::filesystem::path& path) {
  params.check_against(g);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  std::uint64_t records = 0;
  for (NodeId id = 0; id < g.size(); ++id) records += g.node(id).slots.size();
  put<std::uint64_t>(out, records);
  for (NodeId id = 0; id < g.size(); ++id) {
    const auto& decl = g.node(id).slots;
    for (std::size_t s = 0; s < decl.size(); ++s) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(id));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(decl[s].name.size()));
      out.write(decl[s].name.data(), static_cast<std::streamsize>(decl[s].name.size()));
      const DenseTensor& t = params.node(id)[s];
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.order()));
      for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
      for (double x : t.values()) put<double>(out, x);
    }
  }
  if (!out) throw ValueError("failed writing checkpoint " + path.string());
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueError("cannot read checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValueError("not a parameter checkpoint: " + path.string());
  }
  auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw ValueError("unsupported checkpoint version " + std::to_string(version));
  }
  auto records = get<std::uint64_t>(in);
  std::vector<CheckpointRecord> out;
  for (std::uint64_t r = 0; r < records; ++r) {
    CheckpointRecord rec;
    rec.node = get<std::uint32_t>(in);
    auto len = get<std::uint32_t>(in);
    rec.slot.assign(len, '\0');
    if (!in.read(rec.slot.data(), len)) throw ValueError("checkpoint truncated");
    auto ndims = get<std::uint32_t>(in);
    Shape shape(ndims);
    for (auto& d : shape) d = get<std::uint64_t>(in);
    std::vector<double> data(element_count(shape));
    for (double& x : data) x = get<double>(in);
    rec.data = DenseTensor(std::move(shape), std::move(data));
    out.push_back(std::move(rec));
  }
  return out;
}

ParamStore load_params(const EncoderGraph& g, const std::filesystem::path& path) {
  auto records = read_checkpoint(path);
  std::size_t expected = 0;
  for (NodeId id = 0; id < g.size(); ++id) expected += g.node(id).slots.size();
  if (records.size() != expected) {
    throw ShapeError("checkpoint has " + std::to_string(records.size()) +
                     " slots, graph expects " + std::to_string(expected));
  }
  ParamStore p = ParamStore::zeros(g);
  for (auto& rec : records) {
    if (rec.node >= g.size()) {
      throw ShapeError("checkpoint names unknown node " + std::to_string(rec.node));
    }
    DenseTensor& t = p.slot(g, rec.node, rec.slot);
    if (t.shape() != rec.data.shape()) {
      throw ShapeError("checkpoint slot " + rec.slot + " of node " + std::to_string(rec.node) +
                       " has the wrong shape");
    }
    t = std::move(rec.data);
  }
  return p;
}

}  // namespace mfl
