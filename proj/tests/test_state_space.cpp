#include "catch_amalgamated.hpp"

#include "starrisk/state_space.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace starrisk;
using Catch::Matchers::WithinAbs;

namespace {

LossProfile prof(const SpacePtr& s, std::vector<double> v) { return LossProfile(s, std::move(v)); }

}  // namespace

TEST_CASE("state space rejects bad probabilities") {
    CHECK_THROWS_AS(StateSpace::make({}), ArgumentError);
    CHECK_THROWS_AS(StateSpace::make({0.5, 0.0, 0.5}), DomainError);
    CHECK_THROWS_AS(StateSpace::make({0.5, -0.1, 0.6}), DomainError);
    CHECK_THROWS_AS(StateSpace::make({0.5, 0.4}), ValidationError);
    CHECK_NOTHROW(StateSpace::make({0.3, 0.7}));
    CHECK(StateSpace::uniform(4)->size() == 4);
    CHECK(StateSpace::uniform(4)->same_as(*StateSpace::make({0.25, 0.25, 0.25, 0.25})));
}

TEST_CASE("loss profiles check length and finiteness") {
    auto s = StateSpace::uniform(3);
    CHECK_THROWS_AS(prof(s, {1, 2}), DimensionError);
    CHECK_THROWS_AS(prof(s, {1, 2, std::nan("")}), DomainError);
    const auto x = prof(s, {1, -2, 3});
    CHECK(x.min() == -2);
    CHECK(x.max() == 3);
    CHECK((x + 1.0)[1] == -1);
    CHECK((2.0 * x)[2] == 6);
    CHECK((-x)[0] == -1);
}

TEST_CASE("pointwise_leq") {
    auto s = StateSpace::uniform(2);
    CHECK(pointwise_leq(prof(s, {1, 2}), prof(s, {1, 2})));
    CHECK_FALSE(pointwise_leq(prof(s, {0, 3}), prof(s, {1, 2})));
    CHECK(pointwise_leq(prof(s, {-1, 2}), prof(s, {0, 2})));
    CHECK_THROWS_AS(pointwise_leq(prof(s, {1, 2}), prof(StateSpace::uniform(3), {1, 2, 3})), DimensionError);
    CHECK_THROWS_AS(pointwise_leq(prof(s, {1, 2}), prof(StateSpace::make({0.3, 0.7}), {1, 2})), DimensionError);
}

TEST_CASE("distribution_of merges equal values") {
    auto d = distribution_of(prof(StateSpace::make({0.25, 0.25, 0.5}), {2, 2, 5}));
    REQUIRE(d.atoms().size() == 2);
    CHECK(d.atoms()[0].value == 2);
    CHECK_THAT(d.atoms()[0].prob, WithinAbs(0.5, 1e-15));
    CHECK(d.atoms()[1].value == 5);
    CHECK_THAT(d.atoms()[1].prob, WithinAbs(0.5, 1e-15));

    auto c = distribution_of(LossProfile::constant(StateSpace::uniform(3), 3.0));
    REQUIRE(c.atoms().size() == 1);
    CHECK(c.atoms()[0].value == 3);
    CHECK(c.atoms()[0].prob == 1.0);

    auto u = distribution_of(prof(StateSpace::uniform(4), {4, 1, 3, 2}));
    REQUIRE(u.atoms().size() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(u.atoms()[j].value == static_cast<double>(j + 1));
        CHECK_THAT(u.atoms()[j].prob, WithinAbs(0.25, 1e-15));
    }
}

TEST_CASE("values closer than the merge tolerance collapse") {
    LossDistribution d({{1.0, 0.5}, {1.0 + 1e-13, 0.25}, {2.0, 0.25}});
    CHECK(d.atoms().size() == 2);
    CHECK_THAT(d.atoms()[0].prob, WithinAbs(0.75, 1e-15));
}

TEST_CASE("quantile_breakpoints") {
    auto u = distribution_of(prof(StateSpace::uniform(4), {1, 2, 3, 4}));
    const auto b = quantile_breakpoints(u);
    REQUIRE(b.size() == 3);
    CHECK_THAT(b[0], WithinAbs(0.25, 1e-15));
    CHECK_THAT(b[1], WithinAbs(0.5, 1e-15));
    CHECK_THAT(b[2], WithinAbs(0.75, 1e-15));
    CHECK(quantile_breakpoints(LossDistribution::constant(7.0)).empty());
    const auto one = quantile_breakpoints(LossDistribution({{0.0, 0.1}, {10.0, 0.9}}));
    REQUIRE(one.size() == 1);
    CHECK_THAT(one[0], WithinAbs(0.1, 1e-15));
}

TEST_CASE("distribution is invariant under matched state permutations") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> val(-5, 5), w(0.1, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
        std::vector<double> p(n), v(n);
        for (auto& q : p) q = w(gen);
        const double tot = std::accumulate(p.begin(), p.end(), 0.0);
        for (auto& q : p) q /= tot;
        p.back() = 1.0 - std::accumulate(p.begin(), p.end() - 1, 0.0);
        for (auto& x : v) x = std::round(val(gen));  // rounding forces ties
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<double> pp(n), vp(n);
        for (std::size_t i = 0; i < n; ++i) {
            pp[i] = p[perm[i]];
            vp[i] = v[perm[i]];
        }
        const auto a = distribution_of(prof(StateSpace::make(p), v));
        const auto b = distribution_of(prof(StateSpace::make(pp), vp));
        REQUIRE(a.atoms().size() == b.atoms().size());
        double mass = 0.0;
        for (std::size_t j = 0; j < a.atoms().size(); ++j) {
            CHECK(a.atoms()[j].value == b.atoms()[j].value);
            CHECK_THAT(a.atoms()[j].prob, WithinAbs(b.atoms()[j].prob, 1e-12));
            mass += a.atoms()[j].prob;
        }
        CHECK_THAT(mass, WithinAbs(1.0, 1e-12));
        // Breakpoints are the strict partial sums of atom masses.
        const auto br = quantile_breakpoints(a);
        CHECK(br.size() + 1 == a.atoms().size());
        double acc = 0.0;
        for (std::size_t j = 0; j < br.size(); ++j) {
            acc += a.atoms()[j].prob;
            CHECK_THAT(br[j], WithinAbs(acc, 1e-12));
            CHECK(br[j] > 0.0);
            CHECK(br[j] < 1.0);
        }
    }
}

TEST_CASE("merge_levels unions and collapses near duplicates") {
    const auto m = merge_levels({0.25, 0.5}, std::vector<double>{0.5 + 1e-14, 0.1});
    REQUIRE(m.size() == 3);
    CHECK(m[0] == 0.1);
    CHECK(m[1] == 0.25);
    CHECK(m[2] == 0.5);
}

TEST_CASE("expectation under weights") {
    const auto x = prof(StateSpace::uniform(2), {1, 3});
    CHECK(expectation(x) == 2.0);
    CHECK(expectation(x, std::vector<double>{0.25, 0.75}) == 2.5);
    CHECK_THROWS_AS(expectation(x, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("capacity validation") {
    CHECK_THROWS_AS(Capacity(0, {0.0}), ArgumentError);
    CHECK_THROWS_AS(Capacity(17, {}), ArgumentError);
    CHECK_THROWS_AS(Capacity(2, {0, 0.5, 1}), ArgumentError);
    CHECK_THROWS_AS(Capacity(2, {0.1, 0.5, 0.5, 1}), ValidationError);
    CHECK_THROWS_AS(Capacity(2, {0, 0.5, 0.5, 0.9}), ValidationError);
    CHECK_THROWS_AS(Capacity(2, {0, 1.5, 0.5, 1}), ValidationError);
    // {0,1} sits at 0.3, below its subset {0} at 0.6.
    CHECK_THROWS_AS(Capacity(3, {0, 0.6, 0.2, 0.3, 0.1, 0.7, 0.3, 1}), ValidationError);
    CHECK_NOTHROW(Capacity(2, {0, 0.3, 0.7, 1}));
}

TEST_CASE("capacity factories") {
    const std::vector<double> w{0.3, 0.7};
    const auto a = Capacity::additive(w);
    CHECK(a(0b00) == 0.0);
    CHECK_THAT(a(0b01), WithinAbs(0.3, 1e-15));
    CHECK_THAT(a(0b10), WithinAbs(0.7, 1e-15));
    CHECK_THAT(a(0b11), WithinAbs(1.0, 1e-15));
    const auto s = Capacity::sup(3);
    CHECK(s(0b001) == 1.0);
    CHECK(s(0) == 0.0);
    const auto i = Capacity::inf(3);
    CHECK(i(0b011) == 0.0);
    CHECK(i(0b111) == 1.0);
    const auto o = order_statistic_capacity(3, 2);
    CHECK(o(0b001) == 0.0);
    CHECK(o(0b011) == 1.0);
    CHECK_THROWS_AS(order_statistic_capacity(3, 0), ArgumentError);
    CHECK_THROWS_AS(order_statistic_capacity(3, 4), ArgumentError);
    CHECK(order_statistic_capacity(1, 1)(1) == 1.0);
}
