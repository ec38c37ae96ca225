#pragma once

#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sociotag/error.hpp"
#include "sociotag/rng.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

/// FNV-1a of the compact JSON dump, as 16 hex digits.
inline std::string config_hash(const nlohmann::json& config) {
  return text::hex64(detail::fnv1a(config.dump()));
}

inline nlohmann::json load_json(const std::string& path) {
  auto in = text::open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path, 0, std::string("invalid JSON: ") + e.what());
  }
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
  auto out = text::open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError(path, 0, "write failed");
}

/// Checkpoint container: the model's named arrays and metadata, the config
/// it was trained with and that config's hash.
inline nlohmann::json make_checkpoint(const std::string& kind, nlohmann::json model, const nlohmann::json& config,
                                      int precision = 64) {
  return {{"kind", kind},
          {"precision", precision},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"model", std::move(model)}};
}

/// Loads a checkpoint and checks its kind and config hash.
inline nlohmann::json load_checkpoint(const std::string& path, const std::string& expected_kind) {
  auto j = load_json(path);
  if (!j.is_object() || !j.contains("kind") || !j.contains("model") || !j.contains("config_hash")) {
    throw DataError(path, 0, "not a checkpoint");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind != expected_kind) throw DataError(path, 0, "checkpoint holds a '" + kind + "' model, expected '" + expected_kind + "'");
  if (config_hash(j.at("config")) != j.at("config_hash").get<std::string>()) {
    throw DataError(path, 0, "config hash mismatch");
  }
  return j;
}

inline std::string checkpoint_kind(const std::string& path) {
  auto j = load_json(path);
  if (!j.is_object() || !j.contains("kind")) throw DataError(path, 0, "not a checkpoint");
  return j.at("kind").get<std::string>();
}

}  // namespace sociotag
