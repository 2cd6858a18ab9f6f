#pragma once

// Population table of N objects x M categorical attributes with a per-value
// inverted index of membership masks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idtrace/bitmask.hpp"

namespace idtrace {

using AttributeId = std::size_t;
using ObjectIndex = std::size_t;
using ValueCode = std::uint32_t;

// Reserved cell code for an unknown value. Never a declared value code.
inline constexpr ValueCode kMissing = 0xFFFFFFFFu;

struct Attribute {
    std::string name;
    std::vector<std::string> values;  // index == value code
};

class AttributeSchema {
public:
    AttributeSchema() = default;
    explicit AttributeSchema(std::vector<Attribute> attributes);

    [[nodiscard]] std::size_t size() const noexcept { return attributes_.size(); }
    [[nodiscard]] const Attribute& operator[](AttributeId id) const { return attributes_.at(id); }
    [[nodiscard]] const std::vector<Attribute>& attributes() const noexcept { return attributes_; }
    [[nodiscard]] std::size_t cardinality(AttributeId id) const { return attributes_.at(id).values.size(); }

    [[nodiscard]] std::optional<AttributeId> find(std::string_view name) const;
    [[nodiscard]] std::optional<ValueCode> find_value(AttributeId id, std::string_view value) const;

    // Resolves a name or a decimal attribute index; throws ValidationError.
    [[nodiscard]] AttributeId require(std::string_view name) const;
    [[nodiscard]] ValueCode require_value(AttributeId id, std::string_view value) const;

    [[nodiscard]] std::string value_name(AttributeId id, ValueCode code) const;

private:
    std::vector<Attribute> attributes_;
};

struct Observation {
    AttributeId attribute = 0;
    ValueCode value = 0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

// Membership mask over object indices together with its cached population count.
class CandidateSet {
public:
    CandidateSet() = default;
    explicit CandidateSet(Bitmask mask) : mask_(std::move(mask)), size_(mask_.count()) {}

    static CandidateSet all(std::size_t n) { return CandidateSet(Bitmask(n, true)); }
    static CandidateSet none(std::size_t n) { return CandidateSet(Bitmask(n, false)); }
    static CandidateSet of(std::size_t n, std::span<const ObjectIndex> members);

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] bool empty() const noexcept { return size_ == 0; }
    [[nodiscard]] std::size_t capacity() const noexcept { return mask_.capacity(); }
    [[nodiscard]] bool contains(ObjectIndex i) const noexcept { return i < mask_.capacity() && mask_.test(i); }
    [[nodiscard]] const Bitmask& mask() const noexcept { return mask_; }
    [[nodiscard]] std::vector<ObjectIndex> members() const { return mask_.indices(); }

    [[nodiscard]] CandidateSet intersect(const Bitmask& other) const { return CandidateSet(mask_ & other); }

    friend bool operator==(const CandidateSet& a, const CandidateSet& b) { return a.mask_ == b.mask_; }

private:
    Bitmask mask_;
    std::size_t size_ = 0;
};

class Universe {
public:
    // cells is row-major: cells[object * M + attribute]. Throws ValidationError.
    Universe(AttributeSchema schema, std::vector<std::string> object_ids, std::vector<ValueCode> cells);

    [[nodiscard]] std::size_t object_count() const noexcept { return object_ids_.size(); }
    [[nodiscard]] std::size_t attribute_count() const noexcept { return schema_.size(); }
    [[nodiscard]] const AttributeSchema& schema() const noexcept { return schema_; }

    [[nodiscard]] const std::string& object_id(ObjectIndex i) const { return object_ids_.at(i); }
    [[nodiscard]] const std::vector<std::string>& object_ids() const noexcept { return object_ids_; }
    [[nodiscard]] std::optional<ObjectIndex> find_object(std::string_view id) const;

    [[nodiscard]] ValueCode cell(ObjectIndex object, AttributeId attribute) const {
        return cells_[object * schema_.size() + attribute];
    }
    [[nodiscard]] std::span<const ValueCode> row(ObjectIndex object) const {
        return {cells_.data() + object * schema_.size(), schema_.size()};
    }
    [[nodiscard]] const std::vector<ValueCode>& cells() const noexcept { return cells_; }

    [[nodiscard]] const Bitmask& value_mask(AttributeId attribute, ValueCode value) const {
        return index_.at(attribute).at(value);
    }
    [[nodiscard]] const Bitmask& missing_mask(AttributeId attribute) const { return missing_.at(attribute); }

    [[nodiscard]] CandidateSet all() const { return CandidateSet::all(object_count()); }

    // Throws ValidationError unless obs names a declared attribute and value.
    void validate(const Observation& obs) const;

private:
    AttributeSchema schema_;
    std::vector<std::string> object_ids_;
    std::vector<ValueCode> cells_;
    std::vector<std::vector<Bitmask>> index_;
    std::vector<Bitmask> missing_;
};

// CSV with header `object_id,<attr1>,...,<attrM>`. Empty field or `?` is MISSING.
// Value codes are assigned in first-seen order per column.
[[nodiscard]] Universe parse_csv(std::istream& in);
[[nodiscard]] Universe parse_csv_text(std::string_view text);
[[nodiscard]] Universe load_csv(const std::filesystem::path& path);
void save_csv(const Universe& universe, std::ostream& out);
void save_csv(const Universe& universe, const std::filesystem::path& path);

// Compact binary snapshot of schema, ids and cells; the inverted index is
// rebuilt on load.
void save_index(const Universe& universe, const std::filesystem::path& path);
[[nodiscard]] Universe load_index(const std::filesystem::path& path);

// Loads either a binary index or a CSV file, detected by the index magic.
[[nodiscard]] Universe load_dataset(const std::filesystem::path& path);

[[nodiscard]] CandidateSet filter(const Universe& universe, const CandidateSet& base, const Observation& obs);

// Per-value counts within cand; MISSING cells are reported under kMissing.
// Values with zero count are omitted.
[[nodiscard]] std::map<ValueCode, std::size_t> value_counts(const Universe& universe, const CandidateSet& cand,
                                                            AttributeId attribute);

}  // namespace idtrace
