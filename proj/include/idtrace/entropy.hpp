#pragma once

// Identity entropy and attribute discriminability measures, all in bits.
//
// Every probability is a ratio of exact integer counts inside a candidate set;
// the conversion to floating point happens only at the final logarithm.
// Conditioning on known observations is done by filtering the candidate set
// first and then applying the unconditional formula.

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "idtrace/universe.hpp"

namespace idtrace {

// An amount of information in bits (log base 2). Non-negative.
struct Bits {
    double value = 0.0;

    constexpr Bits() = default;
    constexpr explicit Bits(double v) : value(v) {}

    friend constexpr Bits operator+(Bits a, Bits b) { return Bits{a.value + b.value}; }
    friend constexpr Bits operator-(Bits a, Bits b) { return Bits{a.value - b.value}; }
    friend constexpr auto operator<=>(const Bits&, const Bits&) = default;
};

// At most one observation per attribute, kept sorted by attribute id.
class ObservationSet {
public:
    ObservationSet() = default;
    ObservationSet(std::initializer_list<Observation> observations);

    // Throws UsageError when the attribute is already observed.
    void insert(const Observation& obs);
    void erase(AttributeId attribute);

    [[nodiscard]] bool contains(AttributeId attribute) const noexcept;
    [[nodiscard]] std::optional<ValueCode> value_of(AttributeId attribute) const noexcept;
    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
    [[nodiscard]] auto begin() const noexcept { return items_.begin(); }
    [[nodiscard]] auto end() const noexcept { return items_.end(); }
    [[nodiscard]] const std::vector<Observation>& items() const noexcept { return items_; }

    friend bool operator==(const ObservationSet&, const ObservationSet&) = default;

private:
    std::vector<Observation> items_;
};

// base filtered by every observation in obs.
[[nodiscard]] CandidateSet apply_observations(const Universe& universe, CandidateSet base,
                                              std::span<const Observation> obs);
[[nodiscard]] CandidateSet apply_observations(const Universe& universe, CandidateSet base,
                                              const ObservationSet& obs);

// log2(n); DomainError for n = 0.
[[nodiscard]] Bits identity_entropy(std::size_t n);

// log2 |cand0 filtered by obs|. DomainError if cand0 is empty,
// InconsistentObservationsError if the filtered set is empty.
[[nodiscard]] Bits conditional_identity_entropy(const Universe& universe, const CandidateSet& cand0,
                                                const ObservationSet& obs);

// -log2 p(value) within cand. ProbabilityZeroError when the value is absent.
[[nodiscard]] Bits attribute_discriminability(const Universe& universe, const CandidateSet& cand,
                                              const Observation& obs);

[[nodiscard]] Bits conditional_discriminability(const Universe& universe, const CandidateSet& cand,
                                                const ObservationSet& given, const Observation& obs);

// Shannon entropy of the attribute's value distribution in cand filtered by
// `given`. MISSING cells are excluded from both numerator and denominator;
// 0 log 0 = 0. UndefinedAttributeError if every survivor is MISSING.
[[nodiscard]] Bits avg_conditional_discriminability(const Universe& universe, const CandidateSet& cand,
                                                    const ObservationSet& given, AttributeId attribute);

// Same quantity over an already-conditioned candidate set.
[[nodiscard]] Bits average_discriminability(const Universe& universe, const CandidateSet& cand,
                                            AttributeId attribute);

// Chain rule: I(a1) + I(a2 | a1) + ... evaluated left to right.
// ProbabilityZeroError names the first attribute whose value is absent.
[[nodiscard]] Bits set_discriminability(const Universe& universe, const CandidateSet& cand,
                                        std::span<const Observation> ordered);

}  // namespace idtrace
