#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mamo/meta.hpp"

namespace mamo {

// Checkpoint file: one JSON header line, then raw little-endian 64-bit float
// blocks in a fixed order: phi_u, phi_i, phi_r, profile memory, gradient
// slots, task slots. Round-trips bit-exactly.

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  int version = kCheckpointVersion;
  std::string schema_id;
  std::uint64_t seed = 0;
  int epoch = 0;  // completed epochs
};

namespace detail {

inline std::uint64_t to_le_bits(double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return bits;
}

inline double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return std::bit_cast<double>(bits);
}

inline void write_block(std::ostream& out, const Vec& v) {
  for (double x : v) {
    const std::uint64_t bits = to_le_bits(x);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

inline void read_block(std::istream& in, Vec& v) {
  for (double& x : v) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    x = from_le_bits(bits);
  }
}

inline void write_stack(std::ostream& out, const LayerStack& s) {
  for (const auto& layer : s) {
    write_block(out, layer.w.data);
    write_block(out, layer.b);
  }
}

inline void read_stack(std::istream& in, LayerStack& s) {
  for (auto& layer : s) {
    read_block(in, layer.w.data);
    read_block(in, layer.b);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const MetaState& state,
                            const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  nlohmann::json header{{"format", "mamo-checkpoint"},
                        {"version", meta.version},
                        {"d_u", state.dims.d_u},
                        {"d_i", state.dims.d_i},
                        {"d_e", state.dims.d_e},
                        {"layers", state.dims.layers},
                        {"k", state.k_slots},
                        {"seed", meta.seed},
                        {"epoch", meta.epoch},
                        {"schema_id", meta.schema_id}};
  out << header.dump() << '\n';
  detail::write_stack(out, state.global.user);
  detail::write_stack(out, state.global.item);
  detail::write_stack(out, state.global.rating);
  detail::write_block(out, state.feature.profiles.data);
  for (const auto& slot : state.feature.grads) detail::write_stack(out, slot);
  for (const auto& slot : state.task.slots) detail::write_block(out, slot.data);
  if (!out) throw DataError("write failed for checkpoint " + path);
}

struct LoadedCheckpoint {
  MetaState state;  // hyper is left at defaults; supply it from the run config
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("checkpoint " + path + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": bad header: " + e.what());
  }
  if (header.value("format", "") != "mamo-checkpoint") {
    throw DataError("checkpoint " + path + ": not a mamo checkpoint");
  }
  LoadedCheckpoint loaded;
  try {
    loaded.meta.version = header.at("version").get<int>();
    if (loaded.meta.version != kCheckpointVersion) {
      throw DataError("checkpoint " + path + ": format version " +
                      std::to_string(loaded.meta.version) + ", expected " +
                      std::to_string(kCheckpointVersion));
    }
    loaded.state.dims.d_u = header.at("d_u").get<std::size_t>();
    loaded.state.dims.d_i = header.at("d_i").get<std::size_t>();
    loaded.state.dims.d_e = header.at("d_e").get<std::size_t>();
    loaded.state.dims.layers = header.at("layers").get<int>();
    loaded.state.k_slots = header.at("k").get<std::size_t>();
    loaded.meta.seed = header.at("seed").get<std::uint64_t>();
    loaded.meta.epoch = header.at("epoch").get<int>();
    loaded.meta.schema_id = header.at("schema_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": incomplete header: " + e.what());
  }

  // Rebuild the parameter shapes, then overwrite every value from the file.
  MetaState& state = loaded.state;
  Rng scratch(0);
  state.global = make_param_set(state.dims, scratch);
  state.feature.profiles = Matrix(state.k_slots, state.dims.d_u);
  state.feature.grads.assign(state.k_slots, zeros_like(state.global.user));
  state.task.slots.assign(state.k_slots, Matrix(state.dims.d_e, 2 * state.dims.d_e));

  detail::read_stack(in, state.global.user);
  detail::read_stack(in, state.global.item);
  detail::read_stack(in, state.global.rating);
  detail::read_block(in, state.feature.profiles.data);
  for (auto& slot : state.feature.grads) detail::read_stack(in, slot);
  for (auto& slot : state.task.slots) detail::read_block(in, slot.data);
  if (!in) throw DataError("checkpoint " + path + ": truncated payload");
  char extra = 0;
  if (in.read(&extra, 1)) throw DataError("checkpoint " + path + ": trailing bytes");
  return loaded;
}

}  // namespace mamo
