#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "sociotag/checkpoint.hpp"

namespace sociotag {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json make_report(const std::string& experiment, const nlohmann::json& config, std::uint64_t seed,
                                  nlohmann::json metrics) {
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", experiment},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"seed", seed},
          {"metrics", std::move(metrics)}};
}

}  // namespace sociotag
