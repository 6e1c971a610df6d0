#pragma once

#include "starrisk/errors.hpp"
#include "starrisk/measures.hpp"
#include "starrisk/random.hpp"
#include "starrisk/state_space.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace starrisk {

/// Sampling domain for universally quantified axioms.
struct ProbeSet {
    std::vector<LossProfile> profiles;
    std::vector<double> scalars;
    std::uint64_t seed = 0;
};

inline std::vector<double> default_dilation_grid() {
    return {1.0 / 8, 1.0 / 4, 1.0 / 2, 3.0 / 4, 1.0, 4.0 / 3, 2.0, 4.0, 8.0};
}

inline void validate_scalars(const std::vector<double>& scalars) {
    bool below = false, above = false, one = false;
    for (double s : scalars) {
        if (!(s > 0.0)) {
            throw DomainError("dilation grid entries must be positive");
        }
        below |= s < 1.0;
        above |= s > 1.0;
        one |= s == 1.0;
    }
    if (!(below && above && one)) {
        throw ArgumentError("dilation grid must contain 1 and values on both sides of it");
    }
}

/// Random profile with values in [-5, 5]; every fourth draw is snapped to a 0.5 grid so ties occur.
inline LossProfile random_profile(const SpacePtr& space, Rng& rng, std::size_t draw = 1) {
    std::vector<double> v(space->size());
    for (double& x : v) {
        x = rng.uniform(-5.0, 5.0);
        if (draw % 4 == 0) {
            x = std::round(2.0 * x) / 2.0;
        }
    }
    return LossProfile(space, std::move(v));
}

/// Probability vector with entries bounded away from zero.
inline std::vector<double> random_weights(std::size_t n, Rng& rng) {
    std::vector<double> w(n);
    double total = 0.0;
    for (double& x : w) {
        x = rng.uniform(0.2, 1.2);
        total += x;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        w[i] /= total;
        acc += w[i];
    }
    w[n - 1] = 1.0 - acc;
    return w;
}

/// Profiles spread round-robin over the given spaces.
inline ProbeSet make_probe_set(const std::vector<SpacePtr>& spaces, std::size_t count, std::uint64_t seed) {
    if (spaces.empty()) {
        throw ArgumentError("probe set needs at least one space");
    }
    Rng rng(seed);
    ProbeSet probes;
    probes.seed = seed;
    probes.scalars = default_dilation_grid();
    probes.profiles.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        probes.profiles.push_back(random_profile(spaces[i % spaces.size()], rng, i + 1));
    }
    return probes;
}

inline ProbeSet make_probe_set(const SpacePtr& space, std::size_t count, std::uint64_t seed) {
    return make_probe_set(std::vector<SpacePtr>{space}, count, seed);
}

/// Seeded probes on |Ω| ∈ {2,3,4}, half on uniform spaces and half on randomly weighted ones.
inline ProbeSet default_probe_set(std::uint64_t seed = 20210, std::size_t count = 200) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<SpacePtr> spaces;
    for (std::size_t n = 2; n <= 4; ++n) {
        spaces.push_back(StateSpace::uniform(n));
        spaces.push_back(StateSpace::make(random_weights(n, rng)));
    }
    return make_probe_set(spaces, count, seed);
}

/// Equiprobable probes on a single space of n states.
inline ProbeSet uniform_probe_set(std::size_t n, std::size_t count, std::uint64_t seed) {
    return make_probe_set(StateSpace::uniform(n), count, seed);
}

enum class Verdict { holds_on_sample, violated, not_applicable };

inline std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::holds_on_sample: return "holds_on_sample";
        case Verdict::violated: return "violated";
        case Verdict::not_applicable: return "not_applicable";
    }
    return "unknown";
}

/// A violating tuple: lhs ≤ rhs (+ tolerance) is the inequality that failed.
struct Witness {
    std::vector<LossProfile> profiles;
    std::vector<double> scalars;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string relation;
};

struct AxiomReport {
    std::string property;
    Verdict verdict = Verdict::holds_on_sample;
    std::optional<Witness> witness;
    double tolerance = 0.0;
    std::size_t probes_used = 0;
    std::size_t violations = 0;
    std::string note;

    bool holds() const { return verdict == Verdict::holds_on_sample; }
};

namespace detail {

struct ProbeTuple {
    std::vector<LossProfile> profiles;
    std::vector<double> scalars;
};

struct Sides {
    double lhs;
    double rhs;
    const char* relation;
};

/// Both sides of the defining inequality lhs ≤ rhs for one tuple.
inline Sides evaluate_tuple(const RiskEvaluator& rho, std::string_view property, const ProbeTuple& t) {
    const auto& p = t.profiles;
    const auto& s = t.scalars;
    if (property == "monotone") {
        return {rho(p[0]), rho(p[1]), "rho(X) <= rho(Y) for X <= Y"};
    }
    if (property == "translation_invariant") {
        return {std::abs(rho(p[0] + s[0]) - rho(p[0]) - s[0]), 0.0, "|rho(X+m) - rho(X) - m| <= 0"};
    }
    if (property == "normalized") {
        return {std::abs(rho(p[0])), 0.0, "|rho(0)| <= 0"};
    }
    if (property == "positively_homogeneous") {
        return {std::abs(rho(s[0] * p[0]) - s[0] * rho(p[0])), 0.0, "|rho(lX) - l rho(X)| <= 0"};
    }
    if (property == "subadditive") {
        return {rho(p[0] + p[1]), rho(p[0]) + rho(p[1]), "rho(X+Y) <= rho(X) + rho(Y)"};
    }
    if (property == "convex") {
        const double w = s[0];
        return {rho(w * p[0] + (1.0 - w) * p[1]), w * rho(p[0]) + (1.0 - w) * rho(p[1]),
                "rho(wX+(1-w)Y) <= w rho(X) + (1-w) rho(Y)"};
    }
    if (property == "star_shaped") {
        const double l = s[0];
        if (l > 1.0) {
            return {l * rho(p[0]), rho(l * p[0]), "l rho(X) <= rho(lX) for l > 1"};
        }
        return {rho(l * p[0]), l * rho(p[0]), "rho(aX) <= a rho(X) for a in (0,1]"};
    }
    if (property == "star_acceptance") {
        return {rho(s[0] * p[0]), 0.0, "rho(aX) <= 0 for acceptable X"};
    }
    if (property == "coherent_collapse") {
        return {std::abs(rho(s[0] * p[0]) - s[0] * rho(p[0])), 0.0, "|rho(lX) - l rho(X)| <= 0"};
    }
    throw ArgumentError("unknown property '" + std::string(property) + "'");
}

inline std::vector<std::pair<std::size_t, std::size_t>> same_space_pairs(const ProbeSet& probes,
                                                                         std::size_t partners) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto& ps = probes.profiles;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::size_t found = 0;
        for (std::size_t j = i + 1; j < ps.size() && found < partners; ++j) {
            if (ps[i].same_space(ps[j])) {
                out.emplace_back(i, j);
                ++found;
            }
        }
    }
    return out;
}

inline std::vector<ProbeTuple> tuples_for(std::string_view property, const ProbeSet& probes) {
    std::vector<ProbeTuple> out;
    const auto& ps = probes.profiles;
    if (property == "monotone") {
        Rng rng(probes.seed ^ 0x51ed270b27e1f3a5ULL);
        for (const auto& x : ps) {
            std::vector<double> bumped(x.values().begin(), x.values().end());
            for (double& v : bumped) {
                if (rng.uniform01() < 0.5) {
                    v += rng.uniform(0.0, 2.0);
                }
            }
            out.push_back({{x, LossProfile(x.space(), bumped)}, {}});
        }
        for (auto [i, j] : same_space_pairs(probes, 8)) {
            if (pointwise_leq(ps[i], ps[j])) {
                out.push_back({{ps[i], ps[j]}, {}});
            } else if (pointwise_leq(ps[j], ps[i])) {
                out.push_back({{ps[j], ps[i]}, {}});
            }
        }
    } else if (property == "translation_invariant") {
        for (const auto& x : ps) {
            for (double m : {-3.0, -0.5, 1.0, 2.5}) {
                out.push_back({{x}, {m}});
            }
        }
    } else if (property == "normalized") {
        std::vector<SpacePtr> seen;
        for (const auto& x : ps) {
            bool fresh = true;
            for (const auto& s : seen) {
                fresh &= !s->same_as(*x.space());
            }
            if (fresh) {
                seen.push_back(x.space());
                out.push_back({{LossProfile::constant(x.space(), 0.0)}, {}});
            }
        }
    } else if (property == "positively_homogeneous" || property == "star_shaped" ||
               property == "coherent_collapse") {
        for (const auto& x : ps) {
            for (double l : probes.scalars) {
                out.push_back({{x}, {l}});
            }
        }
    } else if (property == "subadditive" || property == "convex") {
        for (auto [i, j] : same_space_pairs(probes, 5)) {
            if (property == "subadditive") {
                out.push_back({{ps[i], ps[j]}, {}});
            } else {
                for (double w : {0.25, 0.5, 0.75}) {
                    out.push_back({{ps[i], ps[j]}, {w}});
                }
            }
        }
    } else {
        throw ArgumentError("unsupported property '" + std::string(property) + "'");
    }
    return out;
}

inline AxiomReport run_tuples(const RiskEvaluator& rho, std::string_view property,
                              const std::vector<ProbeTuple>& tuples, double tol) {
    AxiomReport rep;
    rep.property = std::string(property);
    rep.tolerance = tol;
    rep.probes_used = tuples.size();
    for (const auto& t : tuples) {
        const Sides sides = evaluate_tuple(rho, property, t);
        if (sides.lhs > sides.rhs + tol) {
            ++rep.violations;
            if (!rep.witness) {
                rep.witness = Witness{t.profiles, t.scalars, sides.lhs, sides.rhs, sides.relation};
            }
        }
    }
    rep.verdict = rep.violations > 0 ? Verdict::violated : Verdict::holds_on_sample;
    return rep;
}

}  // namespace detail

inline constexpr std::string_view kCheckableProperties[] = {
    "monotone", "translation_invariant", "normalized", "positively_homogeneous",
    "subadditive", "convex", "star_shaped",
};

/// Tests the defining inequality of one property on every applicable probe tuple.
/// A violated verdict is conclusive; holds_on_sample is evidence only.
inline AxiomReport check_axiom(const RiskEvaluator& rho, std::string_view which, const ProbeSet& probes,
                               double tol) {
    bool supported = false;
    for (auto p : kCheckableProperties) {
        supported |= p == which;
    }
    if (!supported) {
        throw ArgumentError("unknown property '" + std::string(which) + "'");
    }
    return detail::run_tuples(rho, which, detail::tuples_for(which, probes), tol);
}

inline AxiomReport check_axiom(const RiskEvaluator& rho, Property which, const ProbeSet& probes, double tol) {
    return check_axiom(rho, property_name(which), probes, tol);
}

/// Re-evaluates a stored witness; true when the violation still exceeds the report tolerance.
inline bool replay_witness(const RiskEvaluator& rho, const AxiomReport& report) {
    if (!report.witness) {
        return false;
    }
    const auto sides = detail::evaluate_tuple(rho, report.property,
                                              detail::ProbeTuple{report.witness->profiles, report.witness->scalars});
    return sides.lhs > sides.rhs + report.tolerance;
}

/// Sampled risk-to-exposure curve β ↦ ρ(βX)/β.
inline std::vector<std::pair<double, double>> risk_to_exposure(const RiskEvaluator& rho, const LossProfile& x,
                                                               const std::vector<double>& grid) {
    std::vector<std::pair<double, double>> curve;
    curve.reserve(grid.size());
    for (double b : grid) {
        if (!(b > 0.0)) {
            throw DomainError("risk-to-exposure grid entries must be positive");
        }
        curve.emplace_back(b, rho(b * x) / b);
    }
    return curve;
}

inline bool acceptance_set_contains(const RiskEvaluator& rho, const LossProfile& x) { return rho(x) <= 0.0; }

struct Bracket {
    double lo;
    double hi;
    double tol = 1e-12;
};

/// ρ(X) = min{m : X - m ∈ 𝒜} by bisection, given a membership test monotone in m.
inline double measure_from_acceptance(const std::function<bool(const LossProfile&)>& accept, const LossProfile& x,
                                      Bracket bracket) {
    double lo = bracket.lo;
    double hi = bracket.hi;
    if (!(lo < hi)) {
        throw SearchError("search bracket must satisfy lo < hi");
    }
    if (accept(x - lo)) {
        throw SearchError("X - lo is already acceptable; lower the bracket");
    }
    if (!accept(x - hi)) {
        throw SearchError("X - hi is not acceptable; raise the bracket");
    }
    while (hi - lo > bracket.tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (accept(x - mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

/// Bracket wide enough for any monetary measure: ρ(X) lies in [min X, max X].
inline Bracket monetary_bracket(const LossProfile& x, double tol = 1e-12) {
    return {x.min() - 1.0, x.max() + 1.0, tol};
}

/// Deleveraging check: every acceptable probe stays acceptable when scaled by α ∈ (0,1).
/// Probes are tried as given and shifted onto the acceptance boundary.
inline AxiomReport star_acceptance_check(const RiskEvaluator& rho, const ProbeSet& probes, double tol) {
    std::vector<detail::ProbeTuple> tuples;
    for (const auto& x : probes.profiles) {
        const double r = rho(x);
        const LossProfile candidates[] = {x, x - r, x - (r + 0.25)};
        for (const auto& c : candidates) {
            if (rho(c) > 0.0) {
                continue;
            }
            for (double a : probes.scalars) {
                if (a > 0.0 && a < 1.0) {
                    tuples.push_back({{c}, {a}});
                }
            }
        }
    }
    return detail::run_tuples(rho, "star_acceptance", tuples, tol);
}

/// Subadditive + star-shaped forces positive homogeneity; vacuous when either premise fails.
inline AxiomReport coherent_collapse_check(const RiskEvaluator& rho, const ProbeSet& probes, double tol) {
    const auto sub = check_axiom(rho, "subadditive", probes, tol);
    const auto star = check_axiom(rho, "star_shaped", probes, tol);
    if (!sub.holds() || !star.holds()) {
        AxiomReport rep;
        rep.property = "coherent_collapse";
        rep.verdict = Verdict::not_applicable;
        rep.tolerance = tol;
        rep.note = !sub.holds() ? "premise failed: subadditive violated" : "premise failed: star_shaped violated";
        return rep;
    }
    return detail::run_tuples(rho, "coherent_collapse", detail::tuples_for("coherent_collapse", probes), tol);
}

}  // namespace starrisk
