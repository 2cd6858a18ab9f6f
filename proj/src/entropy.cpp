#include "idtrace/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "idtrace/errors.hpp"

namespace idtrace {

namespace {

// -log2(count / total) from exact integer counts.
double surprisal(std::size_t count, std::size_t total) {
    return std::log2(static_cast<double>(total) / static_cast<double>(count));
}

}  // namespace

ObservationSet::ObservationSet(std::initializer_list<Observation> observations) {
    for (const auto& obs : observations) {
        insert(obs);
    }
}

void ObservationSet::insert(const Observation& obs) {
    auto it = std::lower_bound(items_.begin(), items_.end(), obs.attribute,
                               [](const Observation& o, AttributeId a) { return o.attribute < a; });
    if (it != items_.end() && it->attribute == obs.attribute) {
        throw UsageError("attribute " + std::to_string(obs.attribute) + " is already observed");
    }
    items_.insert(it, obs);
}

void ObservationSet::erase(AttributeId attribute) {
    std::erase_if(items_, [&](const Observation& o) { return o.attribute == attribute; });
}

bool ObservationSet::contains(AttributeId attribute) const noexcept { return value_of(attribute).has_value(); }

std::optional<ValueCode> ObservationSet::value_of(AttributeId attribute) const noexcept {
    auto it = std::lower_bound(items_.begin(), items_.end(), attribute,
                               [](const Observation& o, AttributeId a) { return o.attribute < a; });
    if (it != items_.end() && it->attribute == attribute) {
        return it->value;
    }
    return std::nullopt;
}

CandidateSet apply_observations(const Universe& universe, CandidateSet base, std::span<const Observation> obs) {
    if (obs.empty()) {
        return base;
    }
    Bitmask mask = base.mask();
    for (const auto& o : obs) {
        mask &= universe.value_mask(o.attribute, o.value);
    }
    return CandidateSet(std::move(mask));
}

CandidateSet apply_observations(const Universe& universe, CandidateSet base, const ObservationSet& obs) {
    return apply_observations(universe, std::move(base), std::span<const Observation>(obs.items()));
}

Bits identity_entropy(std::size_t n) {
    if (n == 0) {
        throw DomainError("identity entropy of an empty search space is undefined");
    }
    return Bits{std::log2(static_cast<double>(n))};
}

Bits conditional_identity_entropy(const Universe& universe, const CandidateSet& cand0, const ObservationSet& obs) {
    if (cand0.empty()) {
        throw DomainError("initial search space is empty");
    }
    const CandidateSet survivors = apply_observations(universe, cand0, obs);
    if (survivors.empty()) {
        throw InconsistentObservationsError("no candidate matches every known observation");
    }
    return identity_entropy(survivors.size());
}

Bits attribute_discriminability(const Universe& universe, const CandidateSet& cand, const Observation& obs) {
    if (cand.empty()) {
        throw DomainError("candidate set is empty");
    }
    const std::size_t count = cand.mask().count_and(universe.value_mask(obs.attribute, obs.value));
    if (count == 0) {
        throw ProbabilityZeroError(obs.attribute, "value '" + universe.schema().value_name(obs.attribute, obs.value) +
                                                      "' of attribute '" + universe.schema()[obs.attribute].name +
                                                      "' does not occur in the candidate set");
    }
    return Bits{surprisal(count, cand.size())};
}

Bits conditional_discriminability(const Universe& universe, const CandidateSet& cand, const ObservationSet& given,
                                  const Observation& obs) {
    const CandidateSet conditioned = apply_observations(universe, cand, given);
    if (conditioned.empty()) {
        throw DomainError("conditioning observations leave no candidates");
    }
    return attribute_discriminability(universe, conditioned, obs);
}

Bits average_discriminability(const Universe& universe, const CandidateSet& cand, AttributeId attribute) {
    const std::size_t k = universe.schema().cardinality(attribute);
    std::vector<std::size_t> counts;
    counts.reserve(k);
    std::size_t defined = 0;
    for (ValueCode v = 0; v < k; ++v) {
        const std::size_t c = cand.mask().count_and(universe.value_mask(attribute, v));
        if (c > 0) {
            counts.push_back(c);
            defined += c;
        }
    }
    if (defined == 0) {
        throw UndefinedAttributeError(attribute, "attribute '" + universe.schema()[attribute].name +
                                                     "' is MISSING for every candidate");
    }
    // Summation order fixed by count so equal distributions give identical bits.
    std::sort(counts.begin(), counts.end());
    const double total = static_cast<double>(defined);
    double h = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    // A single value can leave -0.0 behind.
    return Bits{h <= 0.0 ? 0.0 : h};
}

Bits avg_conditional_discriminability(const Universe& universe, const CandidateSet& cand, const ObservationSet& given,
                                      AttributeId attribute) {
    const CandidateSet conditioned = apply_observations(universe, cand, given);
    if (conditioned.empty()) {
        throw DomainError("conditioning observations leave no candidates");
    }
    return average_discriminability(universe, conditioned, attribute);
}

Bits set_discriminability(const Universe& universe, const CandidateSet& cand, std::span<const Observation> ordered) {
    if (cand.empty()) {
        throw DomainError("candidate set is empty");
    }
    Bits total{0.0};
    CandidateSet current = cand;
    std::vector<AttributeId> seen;
    for (const auto& obs : ordered) {
        if (std::find(seen.begin(), seen.end(), obs.attribute) != seen.end()) {
            throw UsageError("attribute " + std::to_string(obs.attribute) + " appears twice");
        }
        seen.push_back(obs.attribute);
        total = total + attribute_discriminability(universe, current, obs);
        current = filter(universe, current, obs);
    }
    return total;
}

}  // namespace idtrace
