#include "idtrace/coreset.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "idtrace/errors.hpp"

namespace idtrace {

namespace {

void require_target(const Universe& universe, const CandidateSet& cand0, ObjectIndex target) {
    if (target >= universe.object_count() || !cand0.contains(target)) {
        throw InvalidSetError("target is not in the search space");
    }
}

// cand0 restricted to objects agreeing with the target on `attributes`.
Bitmask matching(const Universe& universe, const CandidateSet& cand0, ObjectIndex target,
                 std::span<const AttributeId> attributes) {
    Bitmask mask = cand0.mask();
    for (AttributeId a : attributes) {
        if (a >= universe.attribute_count()) {
            throw InvalidSetError("attribute index " + std::to_string(a) + " out of range");
        }
        const ValueCode v = universe.cell(target, a);
        if (v == kMissing) {
            throw InvalidSetError("target is MISSING on attribute '" + universe.schema()[a].name + "'");
        }
        mask &= universe.value_mask(a, v);
    }
    return mask;
}

// Does `attributes` single out at least one object of cand0 (one with no
// MISSING value on those attributes)?
bool identifies_any(const Universe& universe, const CandidateSet& cand0, std::span<const AttributeId> attributes) {
    std::map<std::vector<ValueCode>, std::size_t> groups;
    std::vector<ValueCode> key(attributes.size());
    cand0.mask().for_each([&](ObjectIndex i) {
        for (std::size_t j = 0; j < attributes.size(); ++j) {
            const ValueCode v = universe.cell(i, attributes[j]);
            if (v == kMissing) {
                return;
            }
            key[j] = v;
        }
        ++groups[key];
    });
    return std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.second == 1; });
}

std::vector<AttributeId> without(std::span<const AttributeId> attributes, std::size_t skip) {
    std::vector<AttributeId> out;
    out.reserve(attributes.size());
    for (std::size_t j = 0; j < attributes.size(); ++j) {
        if (j != skip) {
            out.push_back(attributes[j]);
        }
    }
    return out;
}

double binomial(std::size_t n, std::size_t k) {
    if (k > n) {
        return 0.0;
    }
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

}  // namespace

bool is_identification_set(const Universe& universe, const CandidateSet& cand0, ObjectIndex target,
                           std::span<const AttributeId> attributes) {
    require_target(universe, cand0, target);
    return matching(universe, cand0, target, attributes).count() == 1;
}

CoreSetReport is_core_identification_set(const Universe& universe, const CandidateSet& cand0, ObjectIndex target,
                                         std::span<const AttributeId> attributes, Minimality minimality) {
    CoreSetReport report;
    report.target = target;
    report.attribute_ids.assign(attributes.begin(), attributes.end());
    report.is_identifying = is_identification_set(universe, cand0, target, attributes);

    bool minimal = true;
    for (std::size_t j = 0; j < attributes.size() && minimal; ++j) {
        const auto subset = without(attributes, j);
        if (matching(universe, cand0, target, subset).count() == 1) {
            minimal = false;
        } else if (minimality == Minimality::strict && identifies_any(universe, cand0, subset)) {
            minimal = false;
        }
    }
    report.is_minimal = minimal;
    return report;
}

CoreSetReport greedy_core_set(const Universe& universe, const CandidateSet& cand0, ObjectIndex target,
                              const ObservationSet& seed_obs) {
    require_target(universe, cand0, target);
    for (const auto& obs : seed_obs) {
        universe.validate(obs);
    }
    CandidateSet space = apply_observations(universe, cand0, seed_obs);
    if (!space.contains(target)) {
        throw InvalidSetError("seed observations exclude the target");
    }

    CoreSetReport report;
    report.target = target;
    std::vector<bool> used(universe.attribute_count(), false);
    for (const auto& obs : seed_obs) {
        used[obs.attribute] = true;
    }

    CandidateSet current = space;
    while (current.size() > 1) {
        std::optional<AttributeId> best;
        Bits best_bits{-1.0};
        for (AttributeId a = 0; a < universe.attribute_count(); ++a) {
            if (used[a] || universe.cell(target, a) == kMissing) {
                continue;
            }
            Bits bits;
            try {
                bits = average_discriminability(universe, current, a);
            } catch (const UndefinedAttributeError&) {
                continue;
            }
            if (bits > best_bits) {
                best_bits = bits;
                best = a;
            }
        }
        if (!best) {
            throw NotDistinguishableError(current.members(), "attributes exhausted before the target '" +
                                                                 universe.object_id(target) + "' was isolated");
        }
        used[*best] = true;
        report.attribute_ids.push_back(*best);
        current = filter(universe, current, Observation{*best, universe.cell(target, *best)});
        report.entropy_trace.push_back(identity_entropy(current.size()));
    }

    // Reverse-order pruning. Removing an attribute only shrinks the set, so
    // attributes kept earlier stay necessary.
    for (std::size_t j = report.attribute_ids.size(); j-- > 0;) {
        const auto subset = without(report.attribute_ids, j);
        if (matching(universe, space, target, subset).count() == 1) {
            report.attribute_ids = subset;
        }
    }
    report.is_identifying = true;
    report.is_minimal = true;
    return report;
}

std::vector<std::vector<AttributeId>> enumerate_core_sets(const Universe& universe, const CandidateSet& cand0,
                                                          ObjectIndex target, std::size_t max_set_size,
                                                          Minimality minimality) {
    require_target(universe, cand0, target);
    const std::size_t m = universe.attribute_count();
    if (binomial(m, std::min(max_set_size, m)) > kEnumerationLimit) {
        throw ResourceLimitError("C(" + std::to_string(m) + ", " + std::to_string(max_set_size) +
                                 ") subsets exceed the enumeration limit");
    }

    std::vector<AttributeId> eligible;
    std::vector<Bitmask> masks;
    for (AttributeId a = 0; a < m; ++a) {
        const ValueCode v = universe.cell(target, a);
        if (v != kMissing) {
            eligible.push_back(a);
            masks.push_back(cand0.mask() & universe.value_mask(a, v));
        }
    }

    std::vector<std::vector<AttributeId>> found;
    if (cand0.size() == 1) {
        // The empty set already identifies; no nonempty set is minimal.
        return found;
    }

    // DFS over irredundant sets only: if some member adds nothing to the
    // match of the others, every superset keeps that redundancy and cannot
    // be minimal. An identifying irredundant set is exactly a core set.
    std::vector<std::size_t> chosen;  // positions into `eligible`
    auto irredundant_with = [&](std::size_t last, std::size_t match_count) {
        for (std::size_t skip = 0; skip < chosen.size(); ++skip) {
            Bitmask mask = cand0.mask() & masks[last];
            for (std::size_t j = 0; j < chosen.size(); ++j) {
                if (j != skip) {
                    mask &= masks[chosen[j]];
                }
            }
            if (mask.count() == match_count) {
                return false;
            }
        }
        return true;
    };
    auto strict_ok = [&](std::size_t last) {
        std::vector<AttributeId> attrs;
        for (std::size_t p : chosen) {
            attrs.push_back(eligible[p]);
        }
        attrs.push_back(eligible[last]);
        for (std::size_t skip = 0; skip < attrs.size(); ++skip) {
            if (identifies_any(universe, cand0, without(attrs, skip))) {
                return false;
            }
        }
        return true;
    };

    auto dfs = [&](auto& self, std::size_t start, const Bitmask& mask, std::size_t mask_count) -> void {
        for (std::size_t p = start; p < eligible.size(); ++p) {
            Bitmask next = mask & masks[p];
            const std::size_t next_count = next.count();
            if (next_count == mask_count || !irredundant_with(p, next_count)) {
                continue;
            }
            if (next_count == 1) {
                if (minimality == Minimality::target || strict_ok(p)) {
                    std::vector<AttributeId> set;
                    for (std::size_t q : chosen) {
                        set.push_back(eligible[q]);
                    }
                    set.push_back(eligible[p]);
                    found.push_back(std::move(set));
                }
                continue;
            }
            if (chosen.size() + 1 < max_set_size) {
                chosen.push_back(p);
                self(self, p + 1, next, next_count);
                chosen.pop_back();
            }
        }
    };
    dfs(dfs, 0, cand0.mask(), cand0.size());

    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) {
            return a.size() < b.size();
        }
        return a < b;
    });
    return found;
}

}  // namespace idtrace
