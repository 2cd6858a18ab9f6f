#include "idtrace/generator.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>

#include "idtrace/errors.hpp"

namespace idtrace {

std::optional<Skew> parse_skew(std::string_view text) noexcept {
    if (text == "uniform") {
        return Skew::uniform;
    }
    if (text == "zipf") {
        return Skew::zipf;
    }
    return std::nullopt;
}

GeneratorConfig GeneratorConfig::default_profile() {
    GeneratorConfig config;
    config.n_objects = 5000;
    config.cardinalities = spread_cardinalities(20, 2, 12);
    config.skew = Skew::zipf;
    config.zipf_exponent = 1.1;
    config.rng_seed = 1990;
    config.unique_rows = true;
    config.latent_profiles = 50;
    config.profile_fidelity = 0.8;
    return config;
}

std::vector<std::size_t> GeneratorConfig::spread_cardinalities(std::size_t n, std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(n == 1 ? lo : lo + (i * (hi - lo) + (n - 1) / 2) / (n - 1));
    }
    return out;
}

void GeneratorConfig::validate() const {
    if (n_objects < 2) {
        throw ValidationError("generator needs at least 2 objects");
    }
    if (cardinalities.empty()) {
        throw ValidationError("generator needs at least 1 attribute");
    }
    double product = 1.0;
    for (std::size_t k : cardinalities) {
        if (k < 1) {
            throw ValidationError("every attribute cardinality must be >= 1");
        }
        product *= static_cast<double>(k);
    }
    if (skew == Skew::zipf && !(zipf_exponent >= 0.0)) {
        throw ValidationError("zipf exponent must be non-negative");
    }
    if (!(profile_fidelity >= 0.0 && profile_fidelity <= 1.0)) {
        throw ValidationError("profile fidelity must be in [0, 1]");
    }
    if (unique_rows && product < static_cast<double>(n_objects)) {
        throw ValidationError("distinct rows requested but the product of cardinalities is below n_objects");
    }
}

Universe generate_universe(const GeneratorConfig& config) {
    config.validate();
    const std::size_t m = config.n_attributes();
    std::mt19937_64 rng(config.rng_seed);

    std::vector<std::discrete_distribution<ValueCode>> dists;
    dists.reserve(m);
    for (std::size_t k : config.cardinalities) {
        std::vector<double> weights(k, 1.0);
        if (config.skew == Skew::zipf) {
            for (std::size_t r = 0; r < k; ++r) {
                weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), config.zipf_exponent);
            }
        }
        dists.emplace_back(weights.begin(), weights.end());
    }

    std::vector<Attribute> attrs(m);
    for (std::size_t a = 0; a < m; ++a) {
        char name[32];
        std::snprintf(name, sizeof(name), "a%02zu", a + 1);
        attrs[a].name = name;
        for (std::size_t v = 0; v < config.cardinalities[a]; ++v) {
            attrs[a].values.push_back(std::to_string(v));
        }
    }

    std::vector<std::vector<ValueCode>> prototypes(config.latent_profiles, std::vector<ValueCode>(m));
    for (auto& proto : prototypes) {
        for (std::size_t a = 0; a < m; ++a) {
            proto[a] = dists[a](rng);
        }
    }
    std::uniform_int_distribution<std::size_t> pick_profile(0, std::max<std::size_t>(config.latent_profiles, 1) - 1);
    std::bernoulli_distribution copy(config.profile_fidelity);

    std::vector<std::string> ids;
    ids.reserve(config.n_objects);
    std::vector<ValueCode> cells;
    cells.reserve(config.n_objects * m);
    std::set<std::vector<ValueCode>> seen;
    std::vector<ValueCode> row(m);
    for (std::size_t i = 0; i < config.n_objects; ++i) {
        std::size_t attempts = 0;
        while (true) {
            if (prototypes.empty()) {
                for (std::size_t a = 0; a < m; ++a) {
                    row[a] = dists[a](rng);
                }
            } else {
                const auto& proto = prototypes[pick_profile(rng)];
                for (std::size_t a = 0; a < m; ++a) {
                    row[a] = copy(rng) ? proto[a] : dists[a](rng);
                }
            }
            if (!config.unique_rows || seen.insert(row).second) {
                break;
            }
            if (++attempts >= config.max_resample) {
                throw GenerationError("could not draw a distinct row for object " + std::to_string(i + 1) + " after " +
                                      std::to_string(attempts) + " attempts");
            }
        }
        cells.insert(cells.end(), row.begin(), row.end());
        char id[32];
        std::snprintf(id, sizeof(id), "p%05zu", i + 1);
        ids.emplace_back(id);
    }
    return Universe(AttributeSchema(std::move(attrs)), std::move(ids), std::move(cells));
}

}  // namespace idtrace
