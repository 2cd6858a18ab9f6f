#pragma once

// Identification sets: attribute sets whose values (taken from the target)
// narrow a search space down to the target alone. A core identification set
// is an identification set with no identifying proper subset.

#include <cstddef>
#include <span>
#include <vector>

#include "idtrace/entropy.hpp"
#include "idtrace/universe.hpp"

namespace idtrace {

// Which proper subsets a core set must fail to identify.
enum class Minimality {
    target,  // no proper subset identifies the target
    strict,  // no proper subset identifies any object of the search space
};

struct CoreSetReport {
    ObjectIndex target = 0;
    std::vector<AttributeId> attribute_ids;
    bool is_identifying = false;
    bool is_minimal = false;
    std::vector<Bits> entropy_trace;  // H after each greedy addition; empty for plain checks
};

// True iff filtering cand0 by the target's values on `attributes` leaves only
// the target. InvalidSetError if the target is outside cand0 or MISSING on
// any listed attribute.
[[nodiscard]] bool is_identification_set(const Universe& universe, const CandidateSet& cand0, ObjectIndex target,
                                         std::span<const AttributeId> attributes);

// Fills both flags. Minimality only needs the drop-one subsets: filtering is
// monotone, so any identifying proper subset extends to an identifying
// drop-one subset.
[[nodiscard]] CoreSetReport is_core_identification_set(const Universe& universe, const CandidateSet& cand0,
                                                       ObjectIndex target, std::span<const AttributeId> attributes,
                                                       Minimality minimality = Minimality::target);

// Greedy optimal core identification set. The search space is cand0 filtered
// by seed_obs; each round adds the unused attribute with the largest average
// conditional discriminability (lowest id on ties) and filters by the
// target's value, until the target is isolated. A reverse-order drop-one pass
// then removes attributes that later additions made redundant.
// NotDistinguishableError when attributes run out first.
[[nodiscard]] CoreSetReport greedy_core_set(const Universe& universe, const CandidateSet& cand0, ObjectIndex target,
                                            const ObservationSet& seed_obs = {});

// Guard for enumerate_core_sets: C(M, max_set_size) must not exceed this.
inline constexpr double kEnumerationLimit = 1e7;

// Every core identification set of at most max_set_size attributes, sorted by
// size then lexicographically. ResourceLimitError if the guard is exceeded.
[[nodiscard]] std::vector<std::vector<AttributeId>> enumerate_core_sets(const Universe& universe,
                                                                        const CandidateSet& cand0, ObjectIndex target,
                                                                        std::size_t max_set_size,
                                                                        Minimality minimality = Minimality::target);

}  // namespace idtrace
