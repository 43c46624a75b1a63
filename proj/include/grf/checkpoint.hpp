#pragma once

// Checkpoint file: "GRFCP1", u32 manifest length, JSON manifest (config echo,
// vocabulary, relations, parameter names and shapes), then every parameter as
// little-endian f32 in manifest order.

#include <string>
#include <string_view>

#include <json.hpp>

#include "grf/config.hpp"
#include "grf/io.hpp"
#include "grf/model.hpp"

namespace grf {

inline constexpr std::string_view kCheckpointMagic = "GRFCP1";

template <class T>
std::string serialize_checkpoint(GrfModel<T>& m, const RunConfig& cfg) {
  nlohmann::json params = nlohmann::json::array();
  m.for_each([&](ad::Parameter<T>& p) { params.push_back({{"name", p.name}, {"shape", p.value.shape}}); });
  std::vector<std::string> words(m.vocab.tokens().begin() + Vocab::kNumSpecials, m.vocab.tokens().end());
  nlohmann::json manifest = {{"format", std::string(kCheckpointMagic)},
                             {"version", 1},
                             {"config", to_json(cfg)},
                             {"vocab", words},
                             {"relations", m.relations.canonical()},
                             {"params", params}};
  const std::string h = manifest.dump();
  std::string out(kCheckpointMagic);
  io::put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  m.for_each([&](ad::Parameter<T>& p) {
    for (T v : p.value.data) io::put_f32(out, static_cast<float>(v));
  });
  return out;
}

template <class T>
struct Checkpoint {
  RunConfig config;
  GrfModel<T> model;
};

template <class T>
Checkpoint<T> deserialize_checkpoint(std::string_view bytes, const std::string& origin = "checkpoint") {
  io::ByteReader rd(bytes, origin);
  if (bytes.empty()) rd.fail("empty file");
  if (rd.take(kCheckpointMagic.size()) != kCheckpointMagic)
    throw Error(ErrorCode::Version, origin + ": bad magic/version (expected GRFCP1) at byte offset 0");
  const std::uint32_t hlen = rd.u32();
  const std::size_t hoff = rd.offset();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(rd.take(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, origin + ": bad JSON manifest at byte offset " + std::to_string(hoff) + ": " + e.what());
  }
  Checkpoint<T> ck;
  nlohmann::json params;
  try {
    if (manifest.at("version").get<int>() != 1) throw Error(ErrorCode::Version, origin + ": unsupported checkpoint version");
    ck.config = run_config_from_json(manifest.at("config"));
    ck.model = GrfModel<T>::init(ck.config.model, ck.config.flow, Vocab(manifest.at("vocab").get<std::vector<std::string>>()),
                                 RelationVocab(manifest.at("relations").get<std::vector<std::string>>()), 0);
    params = manifest.at("params");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, origin + ": incomplete manifest: " + e.what());
  }
  std::size_t k = 0;
  ck.model.for_each([&](ad::Parameter<T>& p) {
    if (k >= params.size())
      throw Error(ErrorCode::Format, origin + ": checkpoint/config mismatch: parameter '" + p.name + "' missing from manifest");
    const auto name = params[k].at("name").get<std::string>();
    const auto shape = params[k].at("shape").get<ad::Shape>();
    if (name != p.name || shape != p.value.shape)
      throw Error(ErrorCode::Format, origin + ": checkpoint/config mismatch at parameter " + std::to_string(k) + ": manifest has " +
                                         name + ad::shape_str(shape) + ", model expects " + p.name + ad::shape_str(p.value.shape));
    for (auto& v : p.value.data) v = static_cast<T>(rd.f32());
    ++k;
  });
  if (k != params.size())
    throw Error(ErrorCode::Format, origin + ": checkpoint/config mismatch: manifest lists " + std::to_string(params.size()) +
                                       " parameters, model has " + std::to_string(k));
  if (!rd.at_end()) rd.fail("trailing bytes");
  return ck;
}

template <class T>
void save_checkpoint(const std::string& path, GrfModel<T>& m, const RunConfig& cfg) {
  io::write_file(path, serialize_checkpoint(m, cfg));
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  return deserialize_checkpoint<T>(io::read_file(path), path);
}

}  // namespace grf
