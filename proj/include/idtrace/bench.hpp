#pragma once

// Seeded experiment drivers: core-set multiplicity across observation spaces,
// per-object and per-space attribute discriminability, and TITF against the
// random acquisition baseline under simulated missing attributes.
//
// Every table is deterministic given (dataset, seed). Wall-clock figures are
// kept out of those tables and written to a separate timing table.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "idtrace/generator.hpp"
#include "idtrace/tracer.hpp"
#include "idtrace/universe.hpp"

namespace idtrace::bench {

// Column-named string table with deterministic CSV output.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream& out) const;
    [[nodiscard]] std::string to_csv() const;
    // ValidationError if a row has the wrong width or an empty cell.
    void validate() const;
};

// Shortest round-trip decimal form of a double.
[[nodiscard]] std::string format_number(double value);

// splitmix64-mixed seed for one (base, parts...) coordinate.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

struct Grouping {
    std::size_t group_count = 10;
    std::size_t group_size = 500;
};

// Disjoint groups from a seeded shuffle of all objects.
// ValidationError if group_count * group_size exceeds N.
[[nodiscard]] std::vector<CandidateSet> make_groups(const Universe& universe, const Grouping& grouping,
                                                    std::uint64_t seed);

// `count` distinct object indices drawn without replacement, ascending.
[[nodiscard]] std::vector<ObjectIndex> sample_objects(std::size_t n, std::size_t count, std::uint64_t seed);

[[nodiscard]] CandidateSet with_member(const CandidateSet& group, ObjectIndex object);

// ---- core-set multiplicity -------------------------------------------------

enum class CellStatus { ok, censored, indistinguishable };
[[nodiscard]] std::string_view to_string(CellStatus status) noexcept;

struct MultiplicityRow {
    ObjectIndex probe = 0;
    std::size_t group = 0;
    CellStatus status = CellStatus::ok;
    std::size_t core_sets = 0;
    std::size_t min_size = 0;
    std::size_t max_size = 0;
};

// For each probe placed into each group (group plus the probe), counts the
// core identification sets of at most max_set_size attributes.
[[nodiscard]] std::vector<MultiplicityRow> coreset_multiplicity(const Universe& universe,
                                                                std::span<const CandidateSet> groups,
                                                                std::span<const ObjectIndex> probes,
                                                                std::size_t max_set_size, unsigned threads = 0);
[[nodiscard]] Table multiplicity_table(const Universe& universe, std::span<const MultiplicityRow> rows);

// ---- discriminability across objects ---------------------------------------

struct ObjectProfiles {
    Table values;   // group, object_id, attribute, bits
    Table profile;  // group, object_id, rank, attribute, bits (descending)
};

// Own-value attribute discriminability of every member within its group.
// Cells where the object is MISSING carry bits = "missing".
[[nodiscard]] ObjectProfiles discriminability_across_objects(const Universe& universe,
                                                             std::span<const CandidateSet> groups);

// ---- discriminability across spaces ----------------------------------------

// One row per group: the probe's own-value discriminability per attribute
// within that group as given. "inf" marks a value absent from the group.
[[nodiscard]] Table discriminability_across_spaces(const Universe& universe, std::span<const CandidateSet> groups,
                                                   ObjectIndex probe);

// ---- TITF against random ----------------------------------------------------

enum class MissingProtocol {
    bernoulli,    // hide each attribute independently with probability S
    fixed_count,  // hide exactly ceil(S * M) attributes chosen uniformly
};
[[nodiscard]] std::optional<MissingProtocol> parse_protocol(std::string_view text) noexcept;

// The target's values on the attributes that survive hiding.
[[nodiscard]] ObservationSet simulate_known(const Universe& universe, ObjectIndex object, double missing_rate,
                                            MissingProtocol protocol, std::mt19937_64& rng);

struct EfficiencyConfig {
    std::vector<double> missing_rates{0.2, 0.4, 0.6, 0.8};
    std::size_t objects = 100;
    std::size_t baseline_repetitions = 20;
    MissingProtocol protocol = MissingProtocol::bernoulli;
    std::uint64_t seed = 2024;
    TraceOptions trace;
    unsigned threads = 0;

    void validate(std::size_t n_objects) const;
};

struct EfficiencyObjectRow {
    double missing_rate = 0.0;
    ObjectIndex object = 0;
    std::size_t known_count = 0;
    std::size_t titf_acquisitions = 0;
    SessionStatus titf_status = SessionStatus::identified;
    double random_mean_acquisitions = 0.0;
    double titf_time_ms = 0.0;
    double random_mean_time_ms = 0.0;
};

struct EfficiencySummary {
    std::optional<double> missing_rate;  // nullopt for the pooled row
    std::size_t objects = 0;
    double titf_mean_acquisitions = 0.0;
    double random_mean_acquisitions = 0.0;
    double acquisition_reduction_pct = 0.0;  // (random - titf) / random, 0 when random is 0
    double titf_mean_time_ms = 0.0;
    double random_mean_time_ms = 0.0;
    double time_reduction_pct = 0.0;
};

struct EfficiencyResult {
    std::vector<EfficiencyObjectRow> rows;
    std::vector<EfficiencySummary> per_rate;
    EfficiencySummary pooled;

    [[nodiscard]] Table summary_table() const;
    [[nodiscard]] Table object_table(const Universe& universe) const;
    [[nodiscard]] Table timing_table() const;
};

[[nodiscard]] EfficiencyResult titf_vs_random(const std::shared_ptr<const Universe>& universe,
                                              const EfficiencyConfig& config);

// ---- whole-run driver ------------------------------------------------------

struct BenchConfig {
    std::optional<std::filesystem::path> dataset;  // CSV or binary index; generator otherwise
    GeneratorConfig generator = GeneratorConfig::default_profile();
    std::uint64_t seed = 2024;
    std::vector<std::string> experiments{"q1", "q2", "q3", "q4"};
    Grouping q1_grouping{10, 500};
    std::size_t q1_probes = 10;
    std::size_t q1_max_set_size = 0;  // 0 = all attributes
    Grouping q2_grouping{10, 100};
    Grouping q3_grouping{10, 100};
    std::optional<std::string> q3_probe;
    EfficiencyConfig q4;
    bool charts = true;
    unsigned threads = 0;
};

// Relative dataset paths resolve against base_dir.
[[nodiscard]] BenchConfig parse_bench_config(const nlohmann::json& json,
                                             const std::filesystem::path& base_dir = {});

struct BenchReport {
    std::vector<std::filesystem::path> files;
    nlohmann::json meta;
    std::optional<EfficiencyResult> efficiency;
};

// Writes q1.csv .. q4.csv, companion tables, meta.json and optional SVG charts.
[[nodiscard]] BenchReport run_bench(const BenchConfig& config, const std::filesystem::path& out_dir);

}  // namespace idtrace::bench
