#pragma once

// Fixtures and brute-force oracles shared by the test suites. The oracles
// scan raw cells row by row and never touch the inverted index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "idtrace/entropy.hpp"
#include "idtrace/universe.hpp"

namespace idtrace::testing {

// Rows of small integer codes; -1 is MISSING. Attribute i is named
// names[i] (or x0, x1, ...) and declares values "0".."k-1" with k one past
// the largest code in its column (or `declared` if larger).
inline Universe make_universe(const std::vector<std::vector<int>>& rows, std::vector<std::string> names = {},
                              std::size_t declared = 0) {
    const std::size_t m = rows.front().size();
    if (names.empty()) {
        for (std::size_t a = 0; a < m; ++a) {
            names.push_back("x" + std::to_string(a));
        }
    }
    std::vector<Attribute> attrs(m);
    for (std::size_t a = 0; a < m; ++a) {
        int max_code = 0;
        for (const auto& r : rows) {
            max_code = std::max(max_code, r[a]);
        }
        attrs[a].name = names[a];
        const std::size_t k = std::max<std::size_t>(static_cast<std::size_t>(max_code) + 1, declared);
        for (std::size_t v = 0; v < k; ++v) {
            attrs[a].values.push_back(std::to_string(v));
        }
    }
    std::vector<std::string> ids;
    std::vector<ValueCode> cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ids.push_back("o" + std::to_string(i));
        for (int c : rows[i]) {
            cells.push_back(c < 0 ? kMissing : static_cast<ValueCode>(c));
        }
    }
    return Universe(AttributeSchema(std::move(attrs)), std::move(ids), std::move(cells));
}

inline std::shared_ptr<const Universe> share(Universe u) { return std::make_shared<const Universe>(std::move(u)); }

inline Universe random_universe(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t max_k,
                                double missing = 0.0) {
    std::uniform_int_distribution<std::size_t> pick_k(1, max_k);
    std::vector<std::size_t> ks(m);
    for (auto& k : ks) {
        k = pick_k(rng);
    }
    std::bernoulli_distribution miss(missing);
    std::vector<std::vector<int>> rows(n, std::vector<int>(m));
    for (auto& row : rows) {
        for (std::size_t a = 0; a < m; ++a) {
            row[a] = miss(rng) ? -1 : static_cast<int>(std::uniform_int_distribution<std::size_t>(0, ks[a] - 1)(rng));
        }
    }
    // Make sure every column declares at least one value.
    for (std::size_t a = 0; a < m; ++a) {
        rows[0][a] = std::max(rows[0][a], 0);
    }
    return make_universe(rows);
}

inline std::vector<ObjectIndex> scan_filter(const Universe& u, const std::vector<ObjectIndex>& base,
                                            const std::vector<Observation>& obs) {
    std::vector<ObjectIndex> out;
    for (ObjectIndex i : base) {
        bool keep = true;
        for (const auto& o : obs) {
            keep = keep && u.cell(i, o.attribute) == o.value;
        }
        if (keep) {
            out.push_back(i);
        }
    }
    return out;
}

inline std::vector<ObjectIndex> all_indices(const Universe& u) {
    std::vector<ObjectIndex> out(u.object_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = i;
    }
    return out;
}

inline std::map<ValueCode, std::size_t> scan_counts(const Universe& u, const std::vector<ObjectIndex>& members,
                                                    AttributeId a) {
    std::map<ValueCode, std::size_t> counts;
    for (ObjectIndex i : members) {
        ++counts[u.cell(i, a)];
    }
    return counts;
}

// Direct summation of -sum p log2 p over non-missing cells.
inline double scan_entropy(const Universe& u, const std::vector<ObjectIndex>& members, AttributeId a) {
    auto counts = scan_counts(u, members, a);
    counts.erase(kMissing);
    double total = 0;
    for (auto& [v, c] : counts) {
        total += static_cast<double>(c);
    }
    double h = 0;
    for (auto& [v, c] : counts) {
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

// A random observation on a random attribute, value drawn from a random row
// (so it usually, not always, survives earlier filters).
inline Observation random_observation(std::mt19937_64& rng, const Universe& u, AttributeId a) {
    std::uniform_int_distribution<std::size_t> pick(0, u.object_count() - 1);
    for (int tries = 0; tries < 64; ++tries) {
        const ValueCode v = u.cell(pick(rng), a);
        if (v != kMissing) {
            return {a, v};
        }
    }
    return {a, 0};
}

inline bool scan_identifies(const Universe& u, const std::vector<ObjectIndex>& space, ObjectIndex target,
                            const std::vector<AttributeId>& attrs) {
    std::vector<Observation> obs;
    for (AttributeId a : attrs) {
        obs.push_back({a, u.cell(target, a)});
    }
    return scan_filter(u, space, obs).size() == 1;
}

// Every subset of the target's non-missing attributes that identifies it and
// has no identifying proper subset, by checking all 2^M subsets.
inline std::vector<std::vector<AttributeId>> naive_core_sets(const Universe& u, const std::vector<ObjectIndex>& space,
                                                            ObjectIndex target) {
    const std::size_t m = u.attribute_count();
    std::vector<bool> identifying(std::size_t{1} << m, false);
    for (std::size_t s = 1; s < identifying.size(); ++s) {
        std::vector<AttributeId> attrs;
        bool usable = true;
        for (AttributeId a = 0; a < m; ++a) {
            if (s >> a & 1) {
                usable = usable && u.cell(target, a) != kMissing;
                attrs.push_back(a);
            }
        }
        identifying[s] = usable && scan_identifies(u, space, target, attrs);
    }
    std::vector<std::vector<AttributeId>> out;
    for (std::size_t s = 1; s < identifying.size(); ++s) {
        if (!identifying[s]) {
            continue;
        }
        bool minimal = true;
        for (std::size_t sub = (s - 1) & s; sub > 0 && minimal; sub = (sub - 1) & s) {
            minimal = !identifying[sub];
        }
        if (minimal) {
            std::vector<AttributeId> attrs;
            for (AttributeId a = 0; a < m; ++a) {
                if (s >> a & 1) {
                    attrs.push_back(a);
                }
            }
            out.push_back(attrs);
        }
    }
    std::sort(out.begin(), out.end(), [](const std::vector<AttributeId>& a, const std::vector<AttributeId>& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

}  // namespace idtrace::testing
