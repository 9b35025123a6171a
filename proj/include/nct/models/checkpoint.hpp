#pragma once

// Checkpoint file: uint64 little-endian manifest length, the UTF-8 JSON
// manifest, then every parameter part as little-endian float64 in manifest
// order. The manifest carries format_version, model_kind, specs, schedule,
// rng_seed, step, blob_crc32 and the part/segment layout.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "nct/error.hpp"
#include "nct/models/adapter.hpp"
#include "nct/models/condition.hpp"
#include "nct/models/ema.hpp"
#include "nct/models/generator.hpp"
#include "nct/noise/schedule.hpp"

namespace nct {

using Json = nlohmann::json;

inline constexpr int kCheckpointFormatVersion = 1;

// ---- spec serialization --------------------------------------------------

inline Json to_json(const MlpSpec& s) {
  return {{"input_dim", s.input_dim},
          {"hidden_dims", s.hidden_dims},
          {"output_dim", s.output_dim},
          {"activation", to_string(s.activation)}};
}

inline MlpSpec mlp_spec_from_json(const Json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  s.output_dim = j.at("output_dim").get<std::size_t>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.validate();
  return s;
}

inline Json to_json(const AdapterSpec& s) {
  return {{"latent_dim", s.latent_dim},
          {"base_hidden", s.base_hidden},
          {"cond", to_json(s.cond_spec)},
          {"control_dims", s.control_dims},
          {"activation", to_string(s.activation)}};
}

inline AdapterSpec adapter_spec_from_json(const Json& j) {
  AdapterSpec s;
  s.latent_dim = j.at("latent_dim").get<std::size_t>();
  s.base_hidden = j.at("base_hidden").get<std::vector<std::size_t>>();
  s.cond_spec = mlp_spec_from_json(j.at("cond"));
  s.control_dims = j.at("control_dims").get<std::vector<std::size_t>>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.validate();
  return s;
}

inline Json to_json(const ConditionModel& c) {
  return {{"kind", to_string(c.kind)},     {"data_dim", c.data_dim},
          {"grid_cell", c.grid_cell},      {"projection", c.projection},
          {"noise_scale", c.noise_scale},  {"flip_prob", c.flip_prob}};
}

inline ConditionModel condition_model_from_json(const Json& j) {
  ConditionModel c;
  c.kind = parse_condition_kind(j.at("kind").get<std::string>());
  c.data_dim = j.at("data_dim").get<std::size_t>();
  c.grid_cell = j.at("grid_cell").get<double>();
  c.projection = j.at("projection").get<std::vector<double>>();
  c.noise_scale = j.at("noise_scale").get<double>();
  c.flip_prob = j.at("flip_prob").get<double>();
  c.validate();
  return c;
}

inline Json to_json(const NoiseSchedule& s) {
  return {{"N", s.intervals}, {"kind", to_string(s.kind)}};
}

inline Json layout_to_json(const Layout& layout) {
  Json out = Json::array();
  for (const auto& seg : layout) out.push_back({{"name", seg.name}, {"shape", seg.shape}});
  return out;
}

inline Layout layout_from_json(const Json& j) {
  Layout layout;
  for (const auto& s : j) {
    layout.push_back({s.at("name").get<std::string>(), s.at("shape").get<std::vector<std::size_t>>()});
  }
  return layout;
}

// ---- checkpoint ----------------------------------------------------------

struct Checkpoint {
  std::string model_kind;
  Json specs = Json::object();
  Json schedule = nullptr;
  std::uint64_t rng_seed = 0;
  std::uint64_t step = 0;
  Json metadata = Json::object();
  std::vector<std::pair<std::string, ParameterVector>> parts;

  const ParameterVector& part(const std::string& name) const {
    for (const auto& [n, p] : parts) {
      if (n == name) return p;
    }
    throw LoadError("checkpoint has no parameter part '" + name + "'");
  }
  bool has_part(const std::string& name) const {
    for (const auto& [n, p] : parts) {
      if (n == name) return true;
    }
    return false;
  }
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a half-written checkpoint.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string blob;
  Json parts = Json::array();
  for (const auto& [name, p] : ck.parts) {
    parts.push_back({{"name", name}, {"count", p.size()}, {"segments", layout_to_json(p.layout())}});
    for (double v : p.values()) detail::put_u64(blob, std::bit_cast<std::uint64_t>(v));
  }
  Json manifest = {{"format_version", kCheckpointFormatVersion},
                   {"model_kind", ck.model_kind},
                   {"specs", ck.specs},
                   {"schedule", ck.schedule},
                   {"rng_seed", ck.rng_seed},
                   {"step", ck.step},
                   {"blob_bytes", blob.size()},
                   {"blob_crc32", detail::crc32_of(blob)},
                   {"parts", parts},
                   {"metadata", ck.metadata}};
  const std::string text = manifest.dump(2);
  std::string out;
  out.reserve(8 + text.size() + blob.size());
  detail::put_u64(out, text.size());
  out += text;
  out += blob;
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>") {
  auto fail = [&](const std::string& why) { return LoadError("checkpoint '" + origin + "': " + why); };
  if (bytes.size() < 8) throw fail("file is shorter than the manifest length prefix");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t mlen = detail::get_u64(raw);
  if (mlen > bytes.size() - 8) throw fail("manifest length exceeds file size");
  Json manifest;
  try {
    manifest = Json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(mlen));
  } catch (const Json::exception& e) {
    throw fail(std::string("manifest is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw fail("format_version " + std::to_string(version) + " is not supported (expected " +
                 std::to_string(kCheckpointFormatVersion) + ")");
    }
    ck.model_kind = manifest.at("model_kind").get<std::string>();
    ck.specs = manifest.at("specs");
    ck.schedule = manifest.at("schedule");
    ck.rng_seed = manifest.at("rng_seed").get<std::uint64_t>();
    ck.step = manifest.at("step").get<std::uint64_t>();
    ck.metadata = manifest.value("metadata", Json::object());

    const std::string blob = bytes.substr(8 + mlen);
    const auto declared = manifest.at("blob_bytes").get<std::uint64_t>();
    std::uint64_t expected = 0;
    for (const auto& p : manifest.at("parts")) expected += 8 * p.at("count").get<std::uint64_t>();
    if (declared != expected) throw fail("manifest blob size disagrees with its parameter counts");
    if (blob.size() != expected) {
      throw fail("parameter blob has " + std::to_string(blob.size()) + " bytes, manifest requires " +
                 std::to_string(expected));
    }
    if (detail::crc32_of(blob) != manifest.at("blob_crc32").get<std::uint32_t>()) {
      throw fail("parameter blob checksum mismatch");
    }
    std::size_t off = 0;
    const auto* b = reinterpret_cast<const unsigned char*>(blob.data());
    for (const auto& p : manifest.at("parts")) {
      Layout layout = layout_from_json(p.at("segments"));
      const auto count = p.at("count").get<std::size_t>();
      if (layout_size(layout) != count) throw fail("segment layout disagrees with part size");
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i, off += 8) values[i] = std::bit_cast<double>(detail::get_u64(b + off));
      ck.parts.emplace_back(p.at("name").get<std::string>(), ParameterVector(std::move(layout), std::move(values)));
    }
  } catch (const Json::exception& e) {
    throw fail(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw fail(std::string("inconsistent manifest: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

// ---- model <-> checkpoint --------------------------------------------------

inline Checkpoint generator_checkpoint(const GeneratorModel& gen, std::uint64_t seed,
                                       std::uint64_t step, Json metadata = Json::object()) {
  Checkpoint ck;
  ck.model_kind = "generator";
  ck.specs = {{"generator", to_json(gen.spec)}};
  ck.rng_seed = seed;
  ck.step = step;
  ck.metadata = std::move(metadata);
  ck.parts.emplace_back("theta", gen.theta);
  return ck;
}

inline GeneratorModel generator_from_checkpoint(const Checkpoint& ck) {
  if (ck.model_kind != "generator" && ck.model_kind != "adapter") {
    throw LoadError("checkpoint holds a '" + ck.model_kind + "', not a generator");
  }
  try {
    GeneratorModel gen{mlp_spec_from_json(ck.specs.at("generator")), ck.part("theta")};
    if (gen.theta.layout() != mlp_layout(gen.spec)) throw LoadError("generator parameters do not match its spec");
    return gen;
  } catch (const Json::exception& e) {
    throw LoadError(std::string("generator spec is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("generator spec is invalid: ") + e.what());
  }
}

/// A trained adapter together with its frozen base generator, condition model
/// and EMA shadow: everything evaluation needs.
struct AdapterBundle {
  GeneratorModel generator;
  AdapterModel adapter;
  EmaState ema;
  ConditionModel condition;
  NoiseSchedule schedule;
};

inline Checkpoint adapter_checkpoint(const AdapterBundle& b, std::uint64_t seed, std::uint64_t step,
                                     Json metadata = Json::object()) {
  Checkpoint ck;
  ck.model_kind = "adapter";
  ck.specs = {{"generator", to_json(b.generator.spec)},
              {"adapter", to_json(b.adapter.spec)},
              {"condition", to_json(b.condition)},
              {"ema_decay", b.ema.decay}};
  ck.schedule = to_json(b.schedule);
  ck.rng_seed = seed;
  ck.step = step;
  ck.metadata = std::move(metadata);
  ck.parts.emplace_back("theta", b.generator.theta);
  ck.parts.emplace_back("phi", b.adapter.phi);
  ck.parts.emplace_back("ema", b.ema.shadow);
  return ck;
}

inline AdapterBundle adapter_from_checkpoint(const Checkpoint& ck) {
  if (ck.model_kind != "adapter") {
    throw LoadError("checkpoint holds a '" + ck.model_kind + "', not an adapter");
  }
  try {
    AdapterBundle b;
    b.generator = generator_from_checkpoint(ck);
    b.adapter.spec = adapter_spec_from_json(ck.specs.at("adapter"));
    b.adapter.phi = ck.part("phi");
    if (b.adapter.phi.layout() != adapter_layout(b.adapter.spec)) {
      throw LoadError("adapter parameters do not match its spec");
    }
    check_adapter_fits(b.generator, b.adapter.spec);
    b.ema.shadow = ck.part("ema");
    b.ema.decay = ck.specs.at("ema_decay").get<double>();
    if (!b.ema.shadow.same_layout(b.adapter.phi)) throw LoadError("EMA layout differs from the adapter");
    b.condition = condition_model_from_json(ck.specs.at("condition"));
    b.schedule = make_schedule(ck.schedule.at("N").get<std::size_t>(),
                               parse_schedule_kind(ck.schedule.at("kind").get<std::string>()));
    return b;
  } catch (const Json::exception& e) {
    throw LoadError(std::string("adapter manifest is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("adapter manifest is invalid: ") + e.what());
  }
}

}  // namespace nct
