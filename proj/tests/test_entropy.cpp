#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "idtrace/entropy.hpp"
#include "idtrace/errors.hpp"
#include "support.hpp"

using namespace idtrace;
using namespace idtrace::testing;

namespace {

// 4 objects: X = {0,0,1,1}, Y = {0,1,0,1}.
Universe truth_table() { return make_universe({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {"X", "Y"}); }

// Random ordered observation list on distinct attributes, values taken from
// one random row so most lists are jointly satisfiable.
std::vector<Observation> random_ordered(std::mt19937_64& rng, const Universe& u, std::size_t k) {
    std::vector<AttributeId> attrs(u.attribute_count());
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        attrs[a] = a;
    }
    std::shuffle(attrs.begin(), attrs.end(), rng);
    const ObjectIndex row = rng() % u.object_count();
    std::vector<Observation> out;
    for (std::size_t j = 0; j < k && j < attrs.size(); ++j) {
        ValueCode v = u.cell(row, attrs[j]);
        if (v == kMissing) {
            v = 0;
        }
        out.push_back({attrs[j], v});
    }
    return out;
}

}  // namespace

TEST_CASE("identity_entropy") {
    CHECK(identity_entropy(1).value == 0.0);
    CHECK(identity_entropy(1024).value == 10.0);
    // mpmath, 40 digits: log2(1000) = 9.965784284662087043610958...
    CHECK(identity_entropy(1000).value == doctest::Approx(9.965784284662087043).epsilon(1e-15));
    CHECK_THROWS_AS((void)identity_entropy(0), DomainError);
}

TEST_CASE("conditional_identity_entropy examples") {
    const auto u = truth_table();
    CHECK(conditional_identity_entropy(u, u.all(), {}).value == 2.0);
    CHECK(conditional_identity_entropy(u, u.all(), {{0, 0}}).value == 1.0);
    CHECK(conditional_identity_entropy(u, u.all(), {{0, 0}, {1, 1}}).value == 0.0);
    CHECK_THROWS_AS((void)conditional_identity_entropy(u, CandidateSet::none(4), {}), DomainError);

    const auto v = make_universe({{0, 0}, {1, 1}});
    CHECK_THROWS_AS((void)conditional_identity_entropy(v, v.all(), {{0, 0}, {1, 1}}), InconsistentObservationsError);
}

TEST_CASE("conditional_identity_entropy equals log2 of a row-scan count") {
    std::mt19937_64 rng(128);
    int checked = 0;
    for (int round = 0; round < 10; ++round) {
        const auto u = random_universe(rng, 128, 8, 4);
        for (int t = 0; t < 50; ++t) {
            const auto ordered = random_ordered(rng, u, 1 + rng() % 5);
            ObservationSet obs;
            for (const auto& o : ordered) {
                obs.insert(o);
            }
            const auto survivors = scan_filter(u, all_indices(u), ordered);
            if (survivors.empty()) {
                CHECK_THROWS_AS((void)conditional_identity_entropy(u, u.all(), obs), InconsistentObservationsError);
            } else {
                CHECK(conditional_identity_entropy(u, u.all(), obs).value ==
                      doctest::Approx(std::log2(static_cast<double>(survivors.size()))).epsilon(1e-12));
            }
            ++checked;
        }
    }
    CHECK(checked == 500);
}

TEST_CASE("attribute_discriminability examples") {
    SUBCASE("value held by every candidate") {
        const auto u = make_universe({{1}, {1}, {1}});
        CHECK(attribute_discriminability(u, u.all(), {0, 1}).value == 0.0);
    }
    SUBCASE("uniform 8-valued attribute") {
        const auto u = make_universe({{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}});
        CHECK(attribute_discriminability(u, u.all(), {0, 5}).value == 3.0);
    }
    SUBCASE("1000 candidates, value count 10") {
        std::vector<std::vector<int>> rows(1000, std::vector<int>{0});
        for (int i = 0; i < 10; ++i) {
            rows[static_cast<std::size_t>(i * 97)][0] = 1;
        }
        const auto u = make_universe(rows);
        // mpmath: log2(100) = 6.643856189774724695740638...
        CHECK(attribute_discriminability(u, u.all(), {0, 1}).value ==
              doctest::Approx(6.643856189774724696).epsilon(1e-15));
    }
    SUBCASE("absent value") {
        const auto u = make_universe({{0}, {0}}, {}, 2);
        try {
            (void)attribute_discriminability(u, u.all(), {0, 1});
            FAIL("expected ProbabilityZeroError");
        } catch (const ProbabilityZeroError& e) {
            CHECK(e.attribute() == 0);
        }
    }
}

TEST_CASE("conditional_discriminability examples") {
    const auto u = truth_table();
    // Brute force over the truth table: given X=0 the survivors are rows 0,1;
    // Y=1 holds for one of them, p = 1/2.
    CHECK(conditional_discriminability(u, u.all(), {{0, 0}}, {1, 1}).value == 1.0);

    const auto d = make_universe({{0, 5}, {0, 5}, {1, 2}});
    CHECK(conditional_discriminability(d, d.all(), {{0, 0}}, {1, 5}).value == 0.0);
    CHECK_THROWS_AS((void)conditional_discriminability(d, d.all(), {{0, 0}}, {1, 2}), ProbabilityZeroError);

    const auto e = make_universe({{0, 0}, {1, 1}}, {}, 3);
    CHECK_THROWS_AS((void)conditional_discriminability(e, e.all(), {{0, 2}}, {1, 0}), DomainError);
}

TEST_CASE("chain check: I(x) + I(y|x) = I({x,y}) against joint counts") {
    std::mt19937_64 rng(4);
    for (int round = 0; round < 200; ++round) {
        const auto u = random_universe(rng, 1 + rng() % 64, 3, 3);
        const auto obs = random_ordered(rng, u, 2);
        const auto joint = scan_filter(u, all_indices(u), obs);
        if (joint.empty()) {
            continue;
        }
        const double lhs = attribute_discriminability(u, u.all(), obs[0]).value +
                           conditional_discriminability(u, u.all(), {obs[0]}, obs[1]).value;
        const double rhs =
            -std::log2(static_cast<double>(joint.size()) / static_cast<double>(u.object_count()));
        CHECK(std::abs(lhs - rhs) <= 1e-9);
    }
}

TEST_CASE("avg_conditional_discriminability examples") {
    SUBCASE("constant attribute") {
        const auto u = make_universe({{3}, {3}, {3}});
        CHECK(avg_conditional_discriminability(u, u.all(), {}, 0).value == 0.0);
    }
    SUBCASE("uniform 4-valued attribute is exactly 2 bits") {
        const auto u = make_universe({{0}, {1}, {2}, {3}, {3}, {2}, {1}, {0}});
        CHECK(avg_conditional_discriminability(u, u.all(), {}, 0).value == 2.0);
    }
    SUBCASE("distribution 1/2, 1/4, 1/4") {
        const auto u = make_universe({{0}, {0}, {1}, {2}});
        CHECK(avg_conditional_discriminability(u, u.all(), {}, 0).value == 1.5);
    }
    SUBCASE("MISSING excluded from the distribution") {
        const auto u = make_universe({{0}, {1}, {-1}, {-1}, {-1}});
        CHECK(avg_conditional_discriminability(u, u.all(), {}, 0).value == 1.0);
    }
    SUBCASE("all survivors MISSING") {
        const auto u = make_universe({{0, 0}, {1, -1}, {1, -1}});
        CHECK_THROWS_AS((void)avg_conditional_discriminability(u, u.all(), {{0, 1}}, 1), UndefinedAttributeError);
    }
    SUBCASE("conditioning") {
        const auto u = truth_table();
        CHECK(avg_conditional_discriminability(u, u.all(), {{0, 1}}, 1).value == 1.0);
        CHECK(avg_conditional_discriminability(u, u.all(), {{0, 1}, {1, 0}}, 1).value == 0.0);
    }
}

TEST_CASE("uniform k-valued attribute gives log2 k, bit-exact for powers of two") {
    for (int k : {1, 2, 4, 8, 16, 32, 64}) {
        std::vector<std::vector<int>> rows;
        for (int r = 0; r < 3; ++r) {
            for (int v = 0; v < k; ++v) {
                rows.push_back({v});
            }
        }
        const auto u = make_universe(rows);
        CHECK(average_discriminability(u, u.all(), 0).value == std::log2(static_cast<double>(k)));
    }
    for (int k : {3, 5, 6, 7, 12}) {
        std::vector<std::vector<int>> rows;
        for (int v = 0; v < k; ++v) {
            rows.push_back({v});
        }
        const auto u = make_universe(rows);
        CHECK(average_discriminability(u, u.all(), 0).value ==
              doctest::Approx(std::log2(static_cast<double>(k))).epsilon(1e-14));
    }
}

TEST_CASE("avg discriminability bounds and direct-summation agreement") {
    std::mt19937_64 rng(55);
    for (int round = 0; round < 300; ++round) {
        const auto u = random_universe(rng, 1 + rng() % 100, 3, 9, 0.1);
        const auto members = all_indices(u);
        for (AttributeId a = 0; a < 3; ++a) {
            auto counts = scan_counts(u, members, a);
            counts.erase(kMissing);
            if (counts.empty()) {
                continue;
            }
            const double h = average_discriminability(u, u.all(), a).value;
            CHECK(h >= 0.0);
            CHECK(h <= std::log2(static_cast<double>(counts.size())) + 1e-12);
            CHECK(h == doctest::Approx(scan_entropy(u, members, a)).epsilon(1e-12));
        }
    }
}

TEST_CASE("set_discriminability examples") {
    const auto u = make_universe({{0, 7, 1}, {0, 7, 2}, {1, 7, 1}, {2, 7, 2}});
    const std::vector<Observation> one{{0, 0}};
    CHECK(set_discriminability(u, u.all(), one).value == attribute_discriminability(u, u.all(), {0, 0}).value);
    const std::vector<Observation> with_constant{{0, 0}, {1, 7}};
    CHECK(set_discriminability(u, u.all(), with_constant).value == set_discriminability(u, u.all(), one).value);

    const std::vector<Observation> impossible{{0, 1}, {2, 2}};
    try {
        (void)set_discriminability(u, u.all(), impossible);
        FAIL("expected ProbabilityZeroError");
    } catch (const ProbabilityZeroError& e) {
        CHECK(e.attribute() == 2);
    }
    const std::vector<Observation> repeated{{0, 0}, {0, 0}};
    CHECK_THROWS_AS((void)set_discriminability(u, u.all(), repeated), UsageError);
}

TEST_CASE("set_discriminability equals -log2(joint count / n) and is order invariant") {
    std::mt19937_64 rng(64064);
    int compared = 0;
    for (int round = 0; round < 1000; ++round) {
        const auto u = random_universe(rng, 2 + rng() % 63, 6, 4);
        auto obs = random_ordered(rng, u, 1 + rng() % 4);
        const auto joint = scan_filter(u, all_indices(u), obs);
        if (joint.empty()) {
            CHECK_THROWS_AS((void)set_discriminability(u, u.all(), obs), ProbabilityZeroError);
            continue;
        }
        const double expected =
            -std::log2(static_cast<double>(joint.size()) / static_cast<double>(u.object_count()));
        const double value = set_discriminability(u, u.all(), obs).value;
        CHECK(std::abs(value - expected) <= 1e-9);
        std::sort(obs.begin(), obs.end(), [](auto& a, auto& b) { return a.attribute < b.attribute; });
        do {
            CHECK(std::abs(set_discriminability(u, u.all(), obs).value - value) <= 1e-9);
        } while (std::next_permutation(obs.begin(), obs.end(),
                                       [](auto& a, auto& b) { return a.attribute < b.attribute; }));
        ++compared;
    }
    CHECK(compared > 500);
}

TEST_CASE("H0 - H(U|A) equals I(A) and adding observations never raises H") {
    std::mt19937_64 rng(421);
    for (int round = 0; round < 300; ++round) {
        const auto u = random_universe(rng, 2 + rng() % 63, 6, 3);
        const auto obs = random_ordered(rng, u, 1 + rng() % 5);
        ObservationSet set;
        double previous = identity_entropy(u.object_count()).value;
        bool defined = true;
        for (const auto& o : obs) {
            set.insert(o);
            try {
                const double h = conditional_identity_entropy(u, u.all(), set).value;
                CHECK(h <= previous);
                previous = h;
            } catch (const InconsistentObservationsError&) {
                defined = false;
                break;
            }
        }
        if (defined) {
            const double lhs = identity_entropy(u.object_count()).value -
                               conditional_identity_entropy(u, u.all(), set).value;
            CHECK(std::abs(lhs - set_discriminability(u, u.all(), obs).value) <= 1e-9);
        }
    }
}

TEST_CASE("ObservationSet keeps one observation per attribute") {
    ObservationSet set{{3, 1}, {1, 0}};
    CHECK(set.items().front().attribute == 1);
    CHECK(set.value_of(3) == 1u);
    CHECK_FALSE(set.contains(2));
    CHECK_THROWS_AS(set.insert({1, 2}), UsageError);
    set.erase(1);
    CHECK(set.size() == 1);
}
