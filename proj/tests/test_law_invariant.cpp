#include "catch_amalgamated.hpp"

#include "oracles.hpp"
#include "starrisk/aggregate.hpp"
#include "starrisk/axioms.hpp"
#include "starrisk/law_invariant.hpp"
#include "starrisk/measures.hpp"

#include <numeric>
#include <random>

using namespace starrisk;
using Catch::Matchers::WithinAbs;

namespace {

LossDistribution uni(std::vector<double> v) {
    auto s = StateSpace::uniform(v.size());
    return distribution_of(LossProfile(s, std::move(v)));
}

std::vector<double> vals(const LossProfile& x) { return {x.values().begin(), x.values().end()}; }

std::vector<double> probs(const LossProfile& x) {
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = x.space()->prob(i);
    return p;
}

const std::vector<RiskEvaluator>& var_family_targets() {
    static const std::vector<RiskEvaluator> r{var_measure(0.5), var_measure(0.75),
                                              lvar_measure(LossBenchmark({{0.0, 0.5}, {1.0, 0.75}}))};
    return r;
}

RiskEvaluator median_of_es() { return make_median({es_measure(0.25), es_measure(0.5), es_measure(0.8)}); }

}  // namespace

TEST_CASE("generator curves") {
    const GeneratorCurve g(CurveKind::var, uni({-3, -1, 0, 0}));
    CHECK(g.levels() == std::vector<double>{0.25, 0.5});
    CHECK(g.values() == std::vector<double>{-3, -1, 0});
    CHECK(g(0.1) == -3);
    CHECK(g(0.9) == 0);
    CHECK(g.at_zero() == -3);
    CHECK(g.at_one() == 0);
    const GeneratorCurve h(CurveKind::var, {0.25, 0.5}, {-3, -1, 0});
    for (double a : {0.1, 0.25, 0.3, 0.5, 0.7}) CHECK(h(a) == g(a));
    CHECK_THROWS_AS(GeneratorCurve(CurveKind::var, uni({1, 2})), ValidationError);
    CHECK_THROWS_AS(GeneratorCurve(CurveKind::es, uni({-1, 2})), ValidationError);
    CHECK_NOTHROW(GeneratorCurve(CurveKind::es, uni({-2, 1})));
    CHECK_THROWS_AS(GeneratorCurve(CurveKind::var, {0.5}, {1.0}), ValidationError);
    CHECK_THROWS_AS(GeneratorCurve(CurveKind::var, {0.5}, {0.0, -1.0}), ValidationError);
    CHECK(parse_curve_kind("es") == CurveKind::es);
    CHECK_THROWS_AS(parse_curve_kind("cvar"), ArgumentError);
}

TEST_CASE("scaled generators scale pointwise") {
    const auto probes = uniform_probe_set(4, 100, 12);
    for (const auto& x : probes.profiles) {
        const auto y = x - x.max();
        for (auto kind : {CurveKind::var, CurveKind::es}) {
            const GeneratorCurve g(kind, y);
            for (double lam : {0.1, 0.5, 0.9}) {
                const GeneratorCurve gl(kind, lam * y);
                for (double a : {0.05, 0.25, 0.4, 0.5, 0.75, 0.99}) {
                    CHECK_THAT(gl(a), WithinAbs(lam * g(a), 1e-12));
                }
            }
        }
    }
}

TEST_CASE("stochastic dominance examples") {
    const auto y = uni({4, 5});
    CHECK(fsd_dominates(y, y));
    CHECK(fsd_dominates(uni({1, 2}), uni({2, 3})));
    CHECK_FALSE(fsd_dominates(uni({0, 3}), uni({1, 2})));
    CHECK(ssd_dominates(y, y));
    CHECK(ssd_dominates(LossDistribution::constant(4.5), y));
    CHECK_FALSE(ssd_dominates(uni({0, 10}), y));
    CHECK_FALSE(ssd_dominates(uni({0, 3}), uni({1, 2})));
    CHECK(ssd_dominates(uni({1, 2}), uni({0, 3})));
}

TEST_CASE("dominance tests agree with brute-force oracles") {
    std::mt19937_64 gen(2023);
    std::uniform_int_distribution<int> val(-4, 4);
    int ssd_true = 0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(t % 4);
        const std::size_t m = 1 + static_cast<std::size_t>((t / 4) % 4);
        std::vector<double> xv(n), yv(m);
        for (auto& v : xv) v = val(gen);
        for (auto& v : yv) v = val(gen);
        if (t % 3 == 0) {
            // Mean-preserving contraction of y, so many pairs are comparable.
            const double mu = std::accumulate(yv.begin(), yv.end(), 0.0) / static_cast<double>(m);
            xv.assign(m, 0.0);
            for (std::size_t i = 0; i < m; ++i) xv[i] = 0.5 * (yv[i] + mu);
        }
        const auto px = oracle::uniform_probs(xv.size()), py = oracle::uniform_probs(yv.size());
        const auto dx = uni(xv), dy = uni(yv);
        const bool ssd = ssd_dominates(dx, dy);
        INFO(t);
        CHECK(ssd == oracle::ssd_by_utilities(xv, px, yv, py, 1000 + static_cast<std::uint64_t>(t), 1e-9));
        const bool fsd = fsd_dominates(dx, dy);
        CHECK(fsd == oracle::fsd_by_survival(xv, px, yv, py));
        if (fsd) CHECK(ssd);
        ssd_true += ssd ? 1 : 0;
    }
    CHECK(ssd_true > 50);
}

TEST_CASE("envelope examples") {
    const auto s4 = StateSpace::uniform(4);
    const LossProfile x(s4, {-1, 0.5, 2, 3});
    const auto d = distribution_of(x);
    CHECK(var_envelope_eval({GeneratorCurve::zero(CurveKind::var)}, d) == 3);
    CHECK(es_envelope_eval({GeneratorCurve::zero(CurveKind::es)}, d) == 3);
    const auto rho = var_measure(0.5);
    CHECK_THAT(var_envelope_eval({GeneratorCurve(CurveKind::var, x - rho(x))}, d), WithinAbs(rho(x), 1e-12));
    const auto e = es_measure(0.5);
    CHECK_THAT(es_envelope_eval({GeneratorCurve(CurveKind::es, x - e(x))}, d), WithinAbs(e(x), 1e-12));
    CHECK_THROWS_AS(var_envelope_eval({}, d), ArgumentError);
    CHECK_THROWS_AS(es_envelope_eval({}, d), ArgumentError);
    CHECK_THROWS_AS(es_envelope_eval({GeneratorCurve::zero(CurveKind::var)}, d), ArgumentError);
}

TEST_CASE("var envelope is tight at the canonical generator and dominates elsewhere") {
    const auto probes = uniform_probe_set(4, 100, 60);
    const auto extra = uniform_probe_set(4, 30, 61);
    for (const auto& rho : var_family_targets()) {
        INFO(rho.name());
        const auto gens = acceptable_generators(rho, extra.profiles, CurveKind::var);
        for (const auto& x : probes.profiles) {
            const auto d = distribution_of(x);
            const double r = rho(x);
            CHECK_THAT(var_envelope_eval({GeneratorCurve(CurveKind::var, x - r)}, d), WithinAbs(r, 1e-12));
            for (const auto& g : gens) CHECK(var_envelope_sup(g, d) >= r - 1e-9);
        }
    }
}

TEST_CASE("es envelope is tight at the canonical generator and dominates elsewhere") {
    const auto probes = uniform_probe_set(4, 100, 70);
    const auto extra = uniform_probe_set(4, 30, 71);
    for (const auto& rho : {es_measure(0.5), median_of_es()}) {
        INFO(rho.name());
        const auto gens = acceptable_generators(rho, extra.profiles, CurveKind::es);
        for (const auto& x : probes.profiles) {
            const auto d = distribution_of(x);
            const double r = rho(x);
            auto all = gens;
            all.emplace_back(CurveKind::es, x - r);
            CHECK_THAT(es_envelope_eval(all, d), WithinAbs(r, 1e-9));
            for (const auto& g : gens) CHECK(es_envelope_sup(g, d) >= r - 1e-9);
        }
    }
}

TEST_CASE("tail events") {
    const auto s4 = StateSpace::uniform(4);
    CHECK(tail_event(LossProfile(s4, {1, 2, 3, 4}), 0.5) == std::vector<std::size_t>{2, 3});
    CHECK(tail_event(LossProfile(s4, {4, 3, 2, 1}), 0.5) == std::vector<std::size_t>{0, 1});
    CHECK(tail_event(LossProfile(s4, {1, 2, 3, 4}), 0.0) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(tail_event(LossProfile(s4, {1, 2, 2, 3}), 0.5) == std::vector<std::size_t>{1, 3});
    CHECK(tail_event(LossProfile(s4, {2, 2, 2, 2}), 0.75) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(tail_event(LossProfile(s4, {1, 2, 3, 4}), 0.6), PrecisionError);
    CHECK_THROWS_AS(tail_event(LossProfile(s4, {1, 2, 3, 4}), 1.0), ArgumentError);
    CHECK_THROWS_AS(tail_event(LossProfile(s4, {1, 2, 3, 4}), -0.1), ArgumentError);
    try {
        tail_event(LossProfile(s4, {1, 2, 3, 4}), 0.6);
    } catch (const PrecisionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("0.5") != std::string::npos);
        CHECK(msg.find("0.75") != std::string::npos);
    }
}

TEST_CASE("minimality witness examples") {
    const auto s4 = StateSpace::uniform(4);
    CHECK_THROWS_AS(es_minimality_witness(LossProfile(s4, {-3, -1, 1, 5}), 0.7, 0.5), ArgumentError);
    // VaR_0.8 picks the top atom on four equiprobable states, so the published level 0.8 is rejected.
    CHECK_THROWS_AS(es_minimality_witness(LossProfile(s4, {-4, -2, 0, 4}), 0.8, 0.5), ArgumentError);
    const auto w = es_minimality_witness(LossProfile(s4, {-4, -2, 0, 4}), 0.75, 0.5);
    CHECK(vals(w.y) == std::vector<double>{-4, -2, 2, 2});
    CHECK(w.tail == std::vector<std::size_t>{2, 3});
    CHECK(w.tail_mean == 2);
    CHECK(w.var_alpha_x == 0);
    CHECK(w.var_alpha_y == 2);
    CHECK(w.ssd_ok);
    CHECK(w.var_positive);
    CHECK(w.valid());
    CHECK_THROWS_AS(es_minimality_witness(LossProfile(s4, {-4, -3, -2, -1}), 0.75, 0.5), ArgumentError);
    CHECK_THROWS_AS(es_minimality_witness(LossProfile(s4, {-4, -2, 0, 4}), 0.5, 0.75), ArgumentError);
    try {
        es_minimality_witness(LossProfile(s4, {-3, -1, 1, 5}), 0.7, 0.5);
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("VaR_alpha") != std::string::npos);
    }
}

TEST_CASE("minimality witnesses on random profiles") {
    const auto s10 = StateSpace::uniform(10);
    std::mt19937_64 gen(8);
    std::uniform_int_distribution<int> val(-10, 6);
    int used = 0;
    for (int t = 0; t < 400; ++t) {
        std::vector<double> v(10);
        for (auto& z : v) z = val(gen);
        const LossProfile x(s10, v);
        const auto d = distribution_of(x);
        CHECK(es(d, 0.8) >= var(d, 0.8));
        if (!(var(d, 0.8) <= 0.0 && es(d, 0.5) > 0.0)) continue;
        ++used;
        const auto w = es_minimality_witness(x, 0.8, 0.5);
        CHECK(w.valid());
        CHECK(oracle::ssd_by_utilities(vals(w.y), probs(x), v, probs(x), static_cast<std::uint64_t>(t), 1e-9));
    }
    CHECK(used >= 20);
}

TEST_CASE("choquet aggregates of law-invariant members are law invariant") {
    const MeasureFamily fam{var_measure(0.5), es_measure(0.75), entropic_measure(2.0)};
    const std::vector<RiskEvaluator> aggs{make_choquet(fam, Capacity::additive(std::vector<double>{0.2, 0.3, 0.5})),
                                          make_sup(fam), make_inf(fam), make_median(fam)};
    std::mt19937_64 gen(14);
    std::uniform_real_distribution<double> val(-5, 5), w(0.1, 1.0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + static_cast<std::size_t>(t % 3);
        std::vector<double> p(n), v(n);
        for (auto& q : p) q = w(gen);
        const double tot = std::accumulate(p.begin(), p.end(), 0.0);
        for (auto& q : p) q /= tot;
        p.back() = 1.0 - std::accumulate(p.begin(), p.end() - 1, 0.0);
        for (auto& z : v) z = val(gen);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<double> pp(n), vp(n);
        for (std::size_t i = 0; i < n; ++i) {
            pp[i] = p[perm[i]];
            vp[i] = v[perm[i]];
        }
        const LossProfile a(StateSpace::make(p), v), b(StateSpace::make(pp), vp);
        for (const auto& agg : aggs) {
            CHECK_THAT(agg(a), WithinAbs(agg(b), 1e-12));
        }
    }
}
