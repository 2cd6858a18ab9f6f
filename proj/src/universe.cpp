#include "idtrace/universe.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "idtrace/errors.hpp"

namespace idtrace {

namespace {

constexpr char kIndexMagic[8] = {'I', 'D', 'T', 'R', 'I', 'D', 'X', '\x01'};

bool is_missing_token(std::string_view field) { return field.empty() || field == "?"; }

// Splits one CSV record. Handles RFC 4180 quoting within a single line.
std::vector<std::string> split_record(std::string_view line, std::size_t row) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"' && current.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
            was_quoted = false;
        } else {
            current.push_back(c);
        }
    }
    if (quoted) {
        throw ParseError(row, "unterminated quoted field");
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string quote_field(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw ValidationError("truncated index file");
    }
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) {
        throw ValidationError("truncated index file");
    }
    return s;
}

}  // namespace

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    std::unordered_set<std::string> names;
    for (const auto& attr : attributes_) {
        if (!names.insert(attr.name).second) {
            throw ValidationError("duplicate attribute name '" + attr.name + "'");
        }
        if (attr.values.empty()) {
            throw ValidationError("attribute '" + attr.name + "' declares no values");
        }
        std::unordered_set<std::string> seen;
        for (const auto& v : attr.values) {
            if (!seen.insert(v).second) {
                throw ValidationError("attribute '" + attr.name + "' declares value '" + v + "' twice");
            }
        }
    }
}

std::optional<AttributeId> AttributeSchema::find(std::string_view name) const {
    for (AttributeId i = 0; i < attributes_.size(); ++i) {
        if (attributes_[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<ValueCode> AttributeSchema::find_value(AttributeId id, std::string_view value) const {
    const auto& values = attributes_.at(id).values;
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (values[j] == value) {
            return static_cast<ValueCode>(j);
        }
    }
    return std::nullopt;
}

AttributeId AttributeSchema::require(std::string_view name) const {
    if (auto id = find(name)) {
        return *id;
    }
    AttributeId index = 0;
    const auto* end = name.data() + name.size();
    auto [ptr, ec] = std::from_chars(name.data(), end, index);
    if (ec == std::errc{} && ptr == end && index < attributes_.size()) {
        return index;
    }
    throw ValidationError("unknown attribute '" + std::string(name) + "'");
}

ValueCode AttributeSchema::require_value(AttributeId id, std::string_view value) const {
    if (auto code = find_value(id, value)) {
        return *code;
    }
    throw ValidationError("attribute '" + attributes_.at(id).name + "' has no value '" + std::string(value) + "'");
}

std::string AttributeSchema::value_name(AttributeId id, ValueCode code) const {
    if (code == kMissing) {
        return "?";
    }
    return attributes_.at(id).values.at(code);
}

CandidateSet CandidateSet::of(std::size_t n, std::span<const ObjectIndex> members) {
    Bitmask mask(n);
    for (ObjectIndex i : members) {
        mask.set(i);
    }
    return CandidateSet(std::move(mask));
}

Universe::Universe(AttributeSchema schema, std::vector<std::string> object_ids, std::vector<ValueCode> cells)
    : schema_(std::move(schema)), object_ids_(std::move(object_ids)), cells_(std::move(cells)) {
    const std::size_t n = object_ids_.size();
    const std::size_t m = schema_.size();
    if (n == 0) {
        throw ValidationError("universe has no objects");
    }
    if (m == 0) {
        throw ValidationError("universe has no attributes");
    }
    if (cells_.size() != n * m) {
        throw ValidationError("cell matrix size does not match N x M");
    }
    std::unordered_set<std::string_view> ids;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ids.insert(object_ids_[i]).second) {
            throw ValidationError("duplicate object_id '" + object_ids_[i] + "'", i + 2);
        }
    }

    index_.resize(m);
    missing_.assign(m, Bitmask(n));
    for (AttributeId a = 0; a < m; ++a) {
        index_[a].assign(schema_.cardinality(a), Bitmask(n));
    }
    for (ObjectIndex i = 0; i < n; ++i) {
        for (AttributeId a = 0; a < m; ++a) {
            const ValueCode v = cells_[i * m + a];
            if (v == kMissing) {
                missing_[a].set(i);
            } else if (v < index_[a].size()) {
                index_[a][v].set(i);
            } else {
                throw ValidationError("cell code out of range for attribute '" + schema_[a].name + "'", i + 2);
            }
        }
    }
}

std::optional<ObjectIndex> Universe::find_object(std::string_view id) const {
    const auto it = std::find(object_ids_.begin(), object_ids_.end(), id);
    if (it == object_ids_.end()) {
        return std::nullopt;
    }
    return static_cast<ObjectIndex>(it - object_ids_.begin());
}

void Universe::validate(const Observation& obs) const {
    if (obs.attribute >= schema_.size()) {
        throw ValidationError("attribute index " + std::to_string(obs.attribute) + " out of range");
    }
    if (obs.value == kMissing || obs.value >= schema_.cardinality(obs.attribute)) {
        throw ValidationError("invalid value code for attribute '" + schema_[obs.attribute].name + "'");
    }
}

Universe parse_csv(std::istream& in) {
    std::string line;
    std::size_t row = 1;
    if (!std::getline(in, line)) {
        throw ValidationError("empty input: missing header row");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    auto header = split_record(line, row);
    if (header.size() < 2) {
        throw ParseError(row, "header needs object_id and at least one attribute column");
    }
    if (header.front() != "object_id") {
        throw ParseError(row, "first header column must be 'object_id'");
    }
    const std::size_t m = header.size() - 1;

    std::vector<Attribute> attrs(m);
    std::vector<std::unordered_map<std::string, ValueCode>> codes(m);
    for (std::size_t a = 0; a < m; ++a) {
        attrs[a].name = header[a + 1];
    }
    std::vector<std::string> ids;
    std::vector<ValueCode> cells;

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_record(line, row);
        if (fields.size() != m + 1) {
            throw ParseError(row, "expected " + std::to_string(m + 1) + " fields, found " +
                                      std::to_string(fields.size()));
        }
        ids.push_back(std::move(fields[0]));
        for (std::size_t a = 0; a < m; ++a) {
            std::string& field = fields[a + 1];
            if (is_missing_token(field)) {
                cells.push_back(kMissing);
                continue;
            }
            auto [it, inserted] = codes[a].try_emplace(field, static_cast<ValueCode>(attrs[a].values.size()));
            if (inserted) {
                attrs[a].values.push_back(field);
            }
            cells.push_back(it->second);
        }
    }
    if (ids.empty()) {
        throw ValidationError("no data rows");
    }
    // k_i >= 1: an all-MISSING column cannot be declared.
    for (auto& attr : attrs) {
        if (attr.values.empty()) {
            throw ValidationError("attribute '" + attr.name + "' has no observed values");
        }
    }
    return Universe(AttributeSchema(std::move(attrs)), std::move(ids), std::move(cells));
}

Universe parse_csv_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_csv(in);
}

Universe load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    return parse_csv(in);
}

void save_csv(const Universe& universe, std::ostream& out) {
    const auto& schema = universe.schema();
    out << "object_id";
    for (const auto& attr : schema.attributes()) {
        out << ',' << quote_field(attr.name);
    }
    out << '\n';
    for (ObjectIndex i = 0; i < universe.object_count(); ++i) {
        out << quote_field(universe.object_id(i));
        for (AttributeId a = 0; a < schema.size(); ++a) {
            const ValueCode v = universe.cell(i, a);
            out << ',';
            if (v == kMissing) {
                out << '?';
            } else {
                out << quote_field(schema[a].values[v]);
            }
        }
        out << '\n';
    }
}

void save_csv(const Universe& universe, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write '" + path.string() + "'");
    }
    save_csv(universe, out);
}

void save_index(const Universe& universe, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write '" + path.string() + "'");
    }
    out.write(kIndexMagic, sizeof(kIndexMagic));
    write_pod<std::uint64_t>(out, universe.object_count());
    write_pod<std::uint64_t>(out, universe.attribute_count());
    for (const auto& attr : universe.schema().attributes()) {
        write_string(out, attr.name);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(attr.values.size()));
        for (const auto& v : attr.values) {
            write_string(out, v);
        }
    }
    for (const auto& id : universe.object_ids()) {
        write_string(out, id);
    }
    const auto& cells = universe.cells();
    out.write(reinterpret_cast<const char*>(cells.data()),
              static_cast<std::streamsize>(cells.size() * sizeof(ValueCode)));
}

Universe load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    char magic[sizeof(kIndexMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kIndexMagic, sizeof(kIndexMagic)) != 0) {
        throw ValidationError("'" + path.string() + "' is not an idtrace index");
    }
    const auto n = read_pod<std::uint64_t>(in);
    const auto m = read_pod<std::uint64_t>(in);
    std::vector<Attribute> attrs(m);
    for (auto& attr : attrs) {
        attr.name = read_string(in);
        const auto k = read_pod<std::uint32_t>(in);
        attr.values.reserve(k);
        for (std::uint32_t j = 0; j < k; ++j) {
            attr.values.push_back(read_string(in));
        }
    }
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        ids.push_back(read_string(in));
    }
    std::vector<ValueCode> cells(n * m);
    in.read(reinterpret_cast<char*>(cells.data()), static_cast<std::streamsize>(cells.size() * sizeof(ValueCode)));
    if (!in) {
        throw ValidationError("truncated index file");
    }
    return Universe(AttributeSchema(std::move(attrs)), std::move(ids), std::move(cells));
}

Universe load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    char magic[sizeof(kIndexMagic)] = {};
    in.read(magic, sizeof(magic));
    if (in && std::memcmp(magic, kIndexMagic, sizeof(kIndexMagic)) == 0) {
        return load_index(path);
    }
    return load_csv(path);
}

CandidateSet filter(const Universe& universe, const CandidateSet& base, const Observation& obs) {
    return base.intersect(universe.value_mask(obs.attribute, obs.value));
}

std::map<ValueCode, std::size_t> value_counts(const Universe& universe, const CandidateSet& cand,
                                              AttributeId attribute) {
    std::map<ValueCode, std::size_t> counts;
    const std::size_t k = universe.schema().cardinality(attribute);
    for (ValueCode v = 0; v < k; ++v) {
        const std::size_t c = cand.mask().count_and(universe.value_mask(attribute, v));
        if (c > 0) {
            counts.emplace(v, c);
        }
    }
    const std::size_t missing = cand.mask().count_and(universe.missing_mask(attribute));
    if (missing > 0) {
        counts.emplace(kMissing, missing);
    }
    return counts;
}

}  // namespace idtrace
