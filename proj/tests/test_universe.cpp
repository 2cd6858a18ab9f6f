#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "idtrace/errors.hpp"
#include "idtrace/generator.hpp"
#include "idtrace/universe.hpp"
#include "support.hpp"

using namespace idtrace;
using namespace idtrace::testing;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("idtrace_test_" + name);
}

std::string csv_of(const Universe& u) {
    std::ostringstream out;
    save_csv(u, out);
    return out.str();
}

}  // namespace

TEST_CASE("load_csv reads a 4x2 binary table") {
    const auto u = parse_csv_text("object_id,x,y\na,0,0\nb,0,1\nc,1,0\nd,1,1\n");
    CHECK(u.object_count() == 4);
    CHECK(u.attribute_count() == 2);
    CHECK(u.schema().cardinality(0) == 2);
    CHECK(u.schema().cardinality(1) == 2);
    CHECK(u.object_id(2) == "c");
    CHECK(u.schema().value_name(0, u.cell(2, 0)) == "1");
}

TEST_CASE("missing sentinel: '?' and empty fields") {
    const auto u = parse_csv_text("object_id,sex,age\na,0,3\nb,1,\nc,?,5\n");
    CHECK(u.schema().cardinality(0) == 2);
    CHECK(u.cell(2, 0) == kMissing);
    CHECK(u.cell(1, 1) == kMissing);
    CHECK(u.missing_mask(0).count() == 1);
    // Value masks partition the non-missing objects.
    CHECK(u.value_mask(0, 0).count() + u.value_mask(0, 1).count() + u.missing_mask(0).count() == 3);
}

TEST_CASE("value codes follow first-seen order") {
    const auto u = parse_csv_text("object_id,c\na,red\nb,blue\nc,red\nd,green\n");
    CHECK(u.schema()[0].values == std::vector<std::string>{"red", "blue", "green"});
    CHECK(u.cell(3, 0) == 2);
}

TEST_CASE("quoted fields round-trip") {
    const std::string text = "object_id,city\n\"x,1\",\"New York, NY\"\ny,\"say \"\"hi\"\"\"\n";
    const auto u = parse_csv_text(text);
    CHECK(u.object_id(0) == "x,1");
    CHECK(u.schema()[0].values[1] == "say \"hi\"");
    CHECK(csv_of(u) == text);
}

TEST_CASE("load_csv errors") {
    SUBCASE("wrong arity names the row") {
        try {
            (void)parse_csv_text("object_id,x,y\na,0,0\nb,1\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.row() == 3);
        }
    }
    SUBCASE("duplicate object id") { CHECK_THROWS_AS((void)parse_csv_text("object_id,x\na,0\na,1\n"), ValidationError); }
    SUBCASE("no data rows") { CHECK_THROWS_AS((void)parse_csv_text("object_id,x\n"), ValidationError); }
    SUBCASE("bad header") { CHECK_THROWS_AS((void)parse_csv_text("id,x\na,0\n"), ParseError); }
    SUBCASE("duplicate attribute name") {
        CHECK_THROWS_AS((void)parse_csv_text("object_id,x,x\na,0,1\n"), ValidationError);
    }
    SUBCASE("all-missing column") { CHECK_THROWS_AS((void)parse_csv_text("object_id,x\na,?\n"), ValidationError); }
    SUBCASE("unterminated quote") { CHECK_THROWS_AS((void)parse_csv_text("object_id,x\n\"a,0\n"), ParseError); }
    SUBCASE("missing file") { CHECK_THROWS_AS((void)load_csv("/nonexistent/file.csv"), ValidationError); }
}

TEST_CASE("synthetic 5000x20 table round-trips through save_csv byte-identically") {
    const auto generated = generate_universe(GeneratorConfig::default_profile());
    const auto path = temp_path("roundtrip.csv");
    save_csv(generated, path);
    const auto loaded = load_csv(path);
    CHECK(loaded.object_count() == 5000);
    CHECK(loaded.attribute_count() == 20);
    CHECK(csv_of(loaded) == csv_of(generated));
    std::filesystem::remove(path);
}

TEST_CASE("binary index round-trip and format detection") {
    std::mt19937_64 rng(5);
    const auto u = random_universe(rng, 100, 7, 5, 0.1);
    const auto idx = temp_path("index.bin");
    const auto csv = temp_path("index.csv");
    save_index(u, idx);
    save_csv(u, csv);
    const auto from_index = load_dataset(idx);
    const auto from_csv = load_dataset(csv);
    CHECK(from_index.cells() == u.cells());
    CHECK(csv_of(from_index) == csv_of(u));
    CHECK(csv_of(from_csv) == csv_of(u));
    CHECK_THROWS_AS((void)load_index(csv), ValidationError);
    std::filesystem::remove(idx);
    std::filesystem::remove(csv);
}

TEST_CASE("universe construction validates cells") {
    AttributeSchema schema({{"x", {"0", "1"}}});
    CHECK_THROWS_AS(Universe(schema, {"a"}, {2}), ValidationError);
    CHECK_THROWS_AS(Universe(schema, {}, {}), ValidationError);
    CHECK_THROWS_AS(AttributeSchema(std::vector<Attribute>{Attribute{"x", {}}}), ValidationError);
    CHECK_THROWS_AS(AttributeSchema({{"x", {"0", "0"}}}), ValidationError);
    CHECK_NOTHROW(Universe(schema, {"a", "b"}, {1, kMissing}));
}

TEST_CASE("filter examples") {
    const auto u = make_universe({{0}, {0}, {1}, {1}}, {"X"}, 3);
    const auto all = u.all();
    CHECK(filter(u, all, {0, 1}).size() == 2);
    // Value 2 is declared but held by nobody.
    CHECK(filter(u, all, {0, 2}).size() == 0);
    CHECK(all.size() == 4);
}

TEST_CASE("filter drops objects missing the attribute") {
    const auto u = make_universe({{0}, {-1}, {0}});
    CHECK(filter(u, u.all(), {0, 0}).members() == std::vector<ObjectIndex>{0, 2});
    CHECK_THROWS_AS(u.validate({0, kMissing}), ValidationError);
}

TEST_CASE("filter agrees with a row scan on random universes") {
    std::mt19937_64 rng(64);
    for (int round = 0; round < 10; ++round) {
        const auto u = random_universe(rng, 64, 6, 4, 0.05);
        std::vector<ObjectIndex> base;
        std::bernoulli_distribution keep(0.7);
        for (ObjectIndex i = 0; i < 64; ++i) {
            if (keep(rng)) {
                base.push_back(i);
            }
        }
        const auto cand = CandidateSet::of(64, base);
        std::uniform_int_distribution<AttributeId> pick_attr(0, 5);
        for (int t = 0; t < 100; ++t) {
            const auto obs = random_observation(rng, u, pick_attr(rng));
            CHECK(filter(u, cand, obs).members() == scan_filter(u, base, {obs}));
        }
    }
}

TEST_CASE("value_counts examples") {
    SUBCASE("uniform 8-valued attribute") {
        const auto u = make_universe({{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}});
        const auto counts = value_counts(u, u.all(), 0);
        CHECK(counts.size() == 8);
        for (const auto& [v, c] : counts) {
            CHECK(c == 1);
        }
    }
    SUBCASE("singleton") {
        const auto u = make_universe({{0}, {1}, {1}});
        const std::vector<ObjectIndex> one{1};
        const auto counts = value_counts(u, CandidateSet::of(3, one), 0);
        CHECK(counts == std::map<ValueCode, std::size_t>{{1, 1}});
    }
    SUBCASE("missing has its own key") {
        const auto u = make_universe({{0}, {-1}, {-1}});
        const auto counts = value_counts(u, u.all(), 0);
        CHECK(counts.at(kMissing) == 2);
        CHECK(counts.at(0) == 1);
    }
}

TEST_CASE("value_counts matches a brute-force tally and sums to the set size") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 30; ++round) {
        const std::size_t n = 1 + rng() % 256;
        const auto u = random_universe(rng, n, 5, 6, 0.1);
        std::vector<ObjectIndex> members;
        for (ObjectIndex i = 0; i < n; ++i) {
            if (rng() % 3 != 0) {
                members.push_back(i);
            }
        }
        const auto cand = CandidateSet::of(n, members);
        for (AttributeId a = 0; a < 5; ++a) {
            const auto counts = value_counts(u, cand, a);
            CHECK(counts == scan_counts(u, members, a));
            std::size_t total = 0;
            for (const auto& [v, c] : counts) {
                total += c;
            }
            CHECK(total == cand.size());
        }
    }
}

TEST_CASE("filter is idempotent and commutes across attributes") {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 1 + rng() % 256;
        const auto u = random_universe(rng, n, 4, 4, 0.1);
        const auto o1 = random_observation(rng, u, 0);
        const auto o2 = random_observation(rng, u, 1 + rng() % 3);
        const auto once = filter(u, u.all(), o1);
        CHECK(filter(u, once, o1) == once);
        CHECK(filter(u, filter(u, u.all(), o1), o2) == filter(u, filter(u, u.all(), o2), o1));
        CHECK(once.size() <= n);
        CHECK(once.size() == once.mask().count());
    }
}
