#pragma once

// Seeded synthetic population tables standing in for a census extract.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "idtrace/universe.hpp"

namespace idtrace {

enum class Skew { uniform, zipf };

[[nodiscard]] std::optional<Skew> parse_skew(std::string_view text) noexcept;

struct GeneratorConfig {
    std::size_t n_objects = 5000;
    std::vector<std::size_t> cardinalities;  // one k_i per attribute
    Skew skew = Skew::zipf;
    double zipf_exponent = 1.1;
    std::uint64_t rng_seed = 1990;
    bool unique_rows = true;
    std::size_t max_resample = 1000;  // attempts per row before giving up on uniqueness

    // Attribute dependence. Each object draws one of `latent_profiles`
    // prototype rows uniformly; each cell copies the prototype value with
    // probability `profile_fidelity` and is otherwise drawn independently.
    // Prototype values follow the same per-attribute distribution, so the
    // marginals are unchanged. 0 profiles = independent attributes.
    std::size_t latent_profiles = 0;
    double profile_fidelity = 0.0;

    [[nodiscard]] std::size_t n_attributes() const noexcept { return cardinalities.size(); }

    // 5000 objects, 20 attributes with cardinalities spread over 2..12,
    // zipf(1.1) value frequencies, latent-profile dependence, all rows distinct.
    [[nodiscard]] static GeneratorConfig default_profile();

    // Cardinalities spread evenly over [lo, hi] for n attributes.
    [[nodiscard]] static std::vector<std::size_t> spread_cardinalities(std::size_t n, std::size_t lo, std::size_t hi);

    // ValidationError on n_objects < 2, k_i < 1, no attributes, or an
    // unreachable uniqueness requirement (product of k_i < n_objects).
    void validate() const;
};

// Deterministic per seed. Attribute names are a01..aM, values are "0".."k-1"
// with "0" the most frequent under zipf skew, object ids are p00001...
// GenerationError if a distinct row cannot be drawn within max_resample tries.
[[nodiscard]] Universe generate_universe(const GeneratorConfig& config);

}  // namespace idtrace
