#pragma once

// JSON views of library results shared by the CLI and the HTTP service.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "idtrace/coreset.hpp"
#include "idtrace/tracer.hpp"

namespace idtrace {

// C99 hex-float spelling ("0x1.8p+1"): exact binary value of a double.
[[nodiscard]] std::string hexfloat(double value);
[[nodiscard]] double parse_hexfloat(std::string_view text);

[[nodiscard]] nlohmann::json observation_json(const Universe& universe, const Observation& obs);
[[nodiscard]] nlohmann::json to_json(const Universe& universe, const CoreSetReport& report);
[[nodiscard]] nlohmann::json to_json(const Universe& universe, const Recommendation& rec);
[[nodiscard]] nlohmann::json to_json(const Universe& universe, const TraceResult& result);

// `name=value` pairs, comma separated. Names may also be attribute indices.
// ValidationError on unknown names/values or malformed pairs; UsageError on
// repeated attributes.
[[nodiscard]] ObservationSet parse_known(const Universe& universe, std::string_view text);
[[nodiscard]] ObservationSet parse_known(const Universe& universe, const std::vector<std::string>& pairs);

}  // namespace idtrace
