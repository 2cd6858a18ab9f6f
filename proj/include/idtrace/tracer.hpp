#pragma once

// Identity tracing sessions. A session narrows the search space one acquired
// attribute at a time; the TITF strategy always acquires the attribute
// category with the largest average conditional discriminability over the
// current candidates, the random baseline picks uniformly.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idtrace/entropy.hpp"
#include "idtrace/universe.hpp"

namespace idtrace {

enum class SessionStatus { active, identified, ambiguous, inconsistent };
enum class Strategy { titf, random };

[[nodiscard]] std::string_view to_string(SessionStatus status) noexcept;
[[nodiscard]] std::string_view to_string(Strategy strategy) noexcept;
[[nodiscard]] std::optional<Strategy> parse_strategy(std::string_view text) noexcept;

struct RankedAttribute {
    AttributeId attribute = 0;
    Bits bits;
};

struct Recommendation {
    std::vector<RankedAttribute> ranking;  // bits descending, attribute id ascending on ties
    AttributeId chosen = 0;                // ranking.front().attribute
};

struct WhatIfOutcome {
    std::size_t count = 0;
    Bits entropy;
};

class Session {
public:
    // Filters the universe by `known`. ValidationError on invalid observations;
    // a contradictory `known` yields status inconsistent.
    Session(std::shared_ptr<const Universe> universe, ObservationSet known);

    [[nodiscard]] const Universe& universe() const noexcept { return *universe_; }
    [[nodiscard]] const std::shared_ptr<const Universe>& universe_ptr() const noexcept { return universe_; }
    [[nodiscard]] const ObservationSet& known() const noexcept { return known_; }
    [[nodiscard]] const CandidateSet& candidates() const noexcept { return candidates_; }
    [[nodiscard]] const std::vector<Observation>& path() const noexcept { return path_; }
    // log2 of the candidate count after each acquisition, starting with the
    // seed. No entry is appended once the set is empty.
    [[nodiscard]] const std::vector<Bits>& entropy_history() const noexcept { return entropy_history_; }
    [[nodiscard]] const std::vector<std::size_t>& count_history() const noexcept { return count_history_; }
    [[nodiscard]] const std::vector<AttributeId>& unavailable() const noexcept { return unavailable_; }
    [[nodiscard]] SessionStatus status() const noexcept { return status_; }

    // Attribute is in known, in the path, or marked unavailable.
    [[nodiscard]] bool is_settled(AttributeId attribute) const noexcept;
    [[nodiscard]] std::vector<AttributeId> remaining_attributes() const;

    // Ranks every remaining attribute by average discriminability over the
    // current candidates; attributes MISSING on all candidates are omitted.
    // UsageError unless active, ExhaustedError if nothing is rankable.
    [[nodiscard]] Recommendation recommend() const;

    // Appends the observation to the path and filters the candidates.
    void observe(const Observation& obs);

    // Counterfactual candidate count and entropy for every value of the
    // attribute present among the candidates. Does not mutate.
    [[nodiscard]] std::map<ValueCode, WhatIfOutcome> whatif(AttributeId attribute) const;

    // The target cannot supply this attribute; it leaves the recommendation pool.
    void mark_unavailable(AttributeId attribute);

    // Ends an active session whose remaining attributes carry no information.
    void conclude_ambiguous();

private:
    void require_active(const char* action) const;
    void update_status();

    std::shared_ptr<const Universe> universe_;
    ObservationSet known_;
    CandidateSet candidates_;
    std::vector<Observation> path_;
    std::vector<Bits> entropy_history_;
    std::vector<std::size_t> count_history_;
    std::vector<AttributeId> unavailable_;
    SessionStatus status_ = SessionStatus::active;
};

[[nodiscard]] inline Session start_session(std::shared_ptr<const Universe> universe, ObservationSet known = {}) {
    return Session(std::move(universe), std::move(known));
}

// Simulated cost of obtaining an attribute, added to TraceResult::elapsed.
struct AcquisitionLatency {
    std::chrono::nanoseconds fixed{0};
    std::vector<std::chrono::nanoseconds> per_attribute;  // overrides `fixed` where present

    [[nodiscard]] std::chrono::nanoseconds of(AttributeId attribute) const {
        return attribute < per_attribute.size() ? per_attribute[attribute] : fixed;
    }
};

struct TraceOptions {
    // Keep acquiring zero-information attributes until none remain instead of
    // stopping as ambiguous.
    bool literal_loop = false;
    AcquisitionLatency latency;
};

struct TraceResult {
    Strategy strategy = Strategy::titf;
    SessionStatus status = SessionStatus::active;
    ObjectIndex target = 0;
    std::vector<std::string> target_found;  // the identified id, or every survivor
    std::size_t acquisitions = 0;           // == path.size()
    std::vector<Observation> path;
    std::vector<Bits> entropy_history;
    std::chrono::nanoseconds elapsed{0};  // measured loop time plus simulated latency
    std::chrono::nanoseconds simulated_latency{0};
};

// Answers each recommendation with the target's stored value.
// InvalidSetError if `known` excludes the target.
[[nodiscard]] TraceResult run_titf(const std::shared_ptr<const Universe>& universe, ObjectIndex target,
                                   const ObservationSet& known, const TraceOptions& options = {});

[[nodiscard]] TraceResult run_random_baseline(const std::shared_ptr<const Universe>& universe, ObjectIndex target,
                                              const ObservationSet& known, std::uint64_t rng_seed,
                                              const TraceOptions& options = {});

// The target's true values on every attribute it has, as a known set.
[[nodiscard]] ObservationSet observations_of(const Universe& universe, ObjectIndex object,
                                             const std::vector<AttributeId>& attributes);

}  // namespace idtrace
