#include "idtrace/json_io.hpp"

#include <cstdio>
#include <cstdlib>

#include "idtrace/errors.hpp"

namespace idtrace {

std::string hexfloat(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", value);
    return buf;
}

double parse_hexfloat(std::string_view text) {
    const std::string s(text);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) {
        throw ValidationError("not a hex-float: '" + s + "'");
    }
    return v;
}

nlohmann::json observation_json(const Universe& universe, const Observation& obs) {
    return {{"attribute", universe.schema()[obs.attribute].name},
            {"value", universe.schema().value_name(obs.attribute, obs.value)}};
}

nlohmann::json to_json(const Universe& universe, const CoreSetReport& report) {
    nlohmann::json attrs = nlohmann::json::array();
    for (AttributeId a : report.attribute_ids) {
        attrs.push_back(universe.schema()[a].name);
    }
    nlohmann::json trace = nlohmann::json::array();
    for (Bits b : report.entropy_trace) {
        trace.push_back(b.value);
    }
    return {{"target", universe.object_id(report.target)},
            {"attributes", attrs},
            {"is_identifying", report.is_identifying},
            {"is_minimal", report.is_minimal},
            {"entropy_trace", trace}};
}

nlohmann::json to_json(const Universe& universe, const Recommendation& rec) {
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& r : rec.ranking) {
        ranking.push_back({{"attribute", universe.schema()[r.attribute].name}, {"bits", r.bits.value}});
    }
    return {{"chosen", universe.schema()[rec.chosen].name}, {"ranking", ranking}};
}

nlohmann::json to_json(const Universe& universe, const TraceResult& result) {
    nlohmann::json path = nlohmann::json::array();
    for (const auto& obs : result.path) {
        path.push_back(observation_json(universe, obs));
    }
    nlohmann::json history = nlohmann::json::array();
    for (Bits b : result.entropy_history) {
        history.push_back(b.value);
    }
    nlohmann::json out = {{"strategy", to_string(result.strategy)},
                          {"status", to_string(result.status)},
                          {"acquisitions", result.acquisitions},
                          {"path", path},
                          {"entropy_history", history},
                          {"elapsed_ms", static_cast<double>(result.elapsed.count()) / 1e6}};
    if (result.target < universe.object_count()) {
        out["target"] = universe.object_id(result.target);
    }
    if (result.status == SessionStatus::identified && result.target_found.size() == 1) {
        out["target_found"] = result.target_found.front();
    } else {
        out["target_found"] = result.target_found;
    }
    return out;
}

ObservationSet parse_known(const Universe& universe, const std::vector<std::string>& pairs) {
    ObservationSet out;
    for (const auto& pair : pairs) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ValidationError("expected name=value, got '" + pair + "'");
        }
        const AttributeId a = universe.schema().require(std::string_view(pair).substr(0, eq));
        const ValueCode v = universe.schema().require_value(a, std::string_view(pair).substr(eq + 1));
        out.insert({a, v});
    }
    return out;
}

ObservationSet parse_known(const Universe& universe, std::string_view text) {
    std::vector<std::string> pairs;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (!piece.empty()) {
            pairs.emplace_back(piece);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return parse_known(universe, pairs);
}

}  // namespace idtrace
