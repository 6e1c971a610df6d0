#pragma once

#include "starrisk/errors.hpp"
#include "starrisk/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace starrisk {

/// Declared (never self-verified) properties of a risk measure.
enum class Property : std::uint32_t {
    monotone = 1u << 0,
    translation_invariant = 1u << 1,
    normalized = 1u << 2,
    positively_homogeneous = 1u << 3,
    star_shaped = 1u << 4,
    subadditive = 1u << 5,
    convex = 1u << 6,
    law_invariant = 1u << 7,
    ssd_consistent = 1u << 8,
};

class Claims {
public:
    constexpr Claims() = default;
    constexpr Claims(std::initializer_list<Property> props) {
        for (Property p : props) {
            bits_ |= static_cast<std::uint32_t>(p);
        }
    }
    constexpr bool has(Property p) const { return (bits_ & static_cast<std::uint32_t>(p)) != 0; }
    constexpr Claims with(Property p) const {
        Claims c = *this;
        c.bits_ |= static_cast<std::uint32_t>(p);
        return c;
    }
    constexpr Claims without(Property p) const {
        Claims c = *this;
        c.bits_ &= ~static_cast<std::uint32_t>(p);
        return c;
    }
    constexpr Claims operator&(Claims o) const {
        Claims c;
        c.bits_ = bits_ & o.bits_;
        return c;
    }
    constexpr bool operator==(const Claims&) const = default;

private:
    std::uint32_t bits_ = 0;
};

inline constexpr Property kAllProperties[] = {
    Property::monotone,     Property::translation_invariant, Property::normalized,
    Property::positively_homogeneous, Property::star_shaped, Property::subadditive,
    Property::convex,       Property::law_invariant,         Property::ssd_consistent,
};

inline std::string_view property_name(Property p) {
    switch (p) {
        case Property::monotone: return "monotone";
        case Property::translation_invariant: return "translation_invariant";
        case Property::normalized: return "normalized";
        case Property::positively_homogeneous: return "positively_homogeneous";
        case Property::star_shaped: return "star_shaped";
        case Property::subadditive: return "subadditive";
        case Property::convex: return "convex";
        case Property::law_invariant: return "law_invariant";
        case Property::ssd_consistent: return "ssd_consistent";
    }
    return "unknown";
}

inline Property parse_property(std::string_view name) {
    for (Property p : kAllProperties) {
        if (property_name(p) == name) {
            return p;
        }
    }
    throw ArgumentError("unknown property '" + std::string(name) + "'");
}

inline constexpr Claims kMonetary{Property::monotone, Property::translation_invariant, Property::normalized};
inline constexpr Claims kCoherentLaw{Property::monotone,    Property::translation_invariant,
                                     Property::normalized,  Property::positively_homogeneous,
                                     Property::star_shaped, Property::subadditive,
                                     Property::convex,      Property::law_invariant,
                                     Property::ssd_consistent};

/**
 * A risk measure as an evaluation contract. Evaluators are immutable and
 * deterministic; the claims are hypotheses checked by the axioms module.
 */
class RiskEvaluator {
public:
    using Fn = std::function<double(const LossProfile&)>;

    RiskEvaluator(std::string name, Fn fn, Claims claims)
        : name_(std::move(name)), fn_(std::move(fn)), claims_(claims) {}

    double operator()(const LossProfile& x) const { return fn_(x); }
    double evaluate(const LossProfile& x) const { return fn_(x); }

    const std::string& name() const { return name_; }
    Claims claims() const { return claims_; }
    bool claims(Property p) const { return claims_.has(p); }

    RiskEvaluator renamed(std::string name) const { return RiskEvaluator(std::move(name), fn_, claims_); }

private:
    std::string name_;
    Fn fn_;
    Claims claims_;
};

inline void check_level(double beta, bool allow_one, const char* what) {
    const bool ok = allow_one ? (beta > 0.0 && beta <= 1.0) : (beta > 0.0 && beta < 1.0);
    if (!ok || std::isnan(beta)) {
        throw DomainError(std::string(what) + " level " + std::to_string(beta) +
                          (allow_one ? " outside (0,1]" : " outside (0,1)"));
    }
}

// ---------------------------------------------------------------------------
// Primitive law-based measures
// ---------------------------------------------------------------------------

/// VaR_β = inf{x : P(X > x) ≤ 1 - β}; β = 1 gives the largest atom.
inline double var(const LossDistribution& d, double beta) {
    check_level(beta, true, "VaR");
    auto atoms = d.atoms();
    auto cum = d.cumulative();
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        if (cum[j] >= beta - kMassTol) {
            return atoms[j].value;
        }
    }
    return atoms.back().value;
}

/// ES_β = (1-β)^{-1} ∫_β^1 VaR_t dt, integrated exactly over the quantile steps.
inline double es(const LossDistribution& d, double beta) {
    check_level(beta, false, "ES");
    auto atoms = d.atoms();
    auto cum = d.cumulative();
    double acc = 0.0;
    double lower = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double lo = std::max(lower, beta);
        const double hi = cum[j];
        if (hi > lo) {
            acc += atoms[j].value * (hi - lo);
        }
        lower = cum[j];
    }
    return acc / (1.0 - beta);
}

/// ∫_α^1 VaR_t dt, i.e. (1-α)·ES_α, for α ∈ [0,1]; continuous and piecewise linear in α.
inline double upper_tail_integral(const LossDistribution& d, double alpha) {
    auto atoms = d.atoms();
    auto cum = d.cumulative();
    double acc = 0.0;
    double lower = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double lo = std::max(lower, alpha);
        const double hi = cum[j];
        if (hi > lo) {
            acc += atoms[j].value * (hi - lo);
        }
        lower = cum[j];
    }
    return acc;
}

inline double mean(const LossDistribution& d) { return d.mean(); }
inline double worst_case(const LossDistribution& d) { return d.max(); }

/// Largest VaR_β across the laws of one loss under several scenarios.
inline double max_var(std::span<const LossDistribution> ds, double beta) {
    if (ds.empty()) {
        throw ArgumentError("MaxVaR needs at least one law");
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& d : ds) {
        best = std::max(best, var(d, beta));
    }
    return best;
}

/// Lower median of the VaR_β values (even counts take the lower middle value).
inline double med_var(std::span<const LossDistribution> ds, double beta) {
    if (ds.empty()) {
        throw ArgumentError("MedVaR needs at least one law");
    }
    std::vector<double> v;
    v.reserve(ds.size());
    for (const auto& d : ds) {
        v.push_back(var(d, beta));
    }
    const std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
}

/**
 * Right-continuous nondecreasing step function α: [0,∞) → (0,1]. Step j
 * holds level levels[j] on [starts[j], starts[j+1]); starts[0] must be 0.
 */
class LossBenchmark {
public:
    struct Step {
        double start;
        double level;
    };

    explicit LossBenchmark(std::vector<Step> steps) : steps_(std::move(steps)) {
        if (steps_.empty()) {
            throw ArgumentError("benchmark needs at least one step");
        }
        if (steps_.front().start != 0.0) {
            throw ValidationError("benchmark must start at t = 0");
        }
        for (std::size_t j = 0; j < steps_.size(); ++j) {
            check_level(steps_[j].level, true, "benchmark");
            if (j > 0) {
                if (!(steps_[j].start > steps_[j - 1].start)) {
                    throw ValidationError("benchmark breakpoints must be strictly increasing");
                }
                if (steps_[j].level < steps_[j - 1].level) {
                    throw ValidationError("benchmark levels must be nondecreasing");
                }
            }
        }
    }

    static LossBenchmark constant(double level) { return LossBenchmark({{0.0, level}}); }

    std::span<const Step> steps() const { return steps_; }

    double operator()(double t) const {
        double level = steps_.front().level;
        for (const Step& s : steps_) {
            if (t >= s.start) {
                level = s.level;
            }
        }
        return level;
    }

private:
    std::vector<Step> steps_;
};

/// LVaR = sup_{t≥0} {VaR_{α(t)} - t}. The integrand is constant in VaR on each step, so the
/// supremum sits at the left end of some step.
inline double lvar(const LossDistribution& d, const LossBenchmark& bench) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : bench.steps()) {
        best = std::max(best, var(d, s.level) - s.start);
    }
    return best;
}

/**
 * Continuous, strictly increasing piecewise-linear utility with u(0) = 0,
 * extended linearly past the outer knots.
 */
class Utility {
public:
    struct Knot {
        double x;
        double u;
    };

    explicit Utility(std::vector<Knot> knots) : knots_(std::move(knots)) {
        if (knots_.size() < 2) {
            throw ArgumentError("utility needs at least two knots");
        }
        bool has_origin = false;
        for (std::size_t j = 0; j < knots_.size(); ++j) {
            if (!std::isfinite(knots_[j].x) || !std::isfinite(knots_[j].u)) {
                throw DomainError("utility knots must be finite");
            }
            if (knots_[j].x == 0.0) {
                has_origin = true;
                if (knots_[j].u != 0.0) {
                    throw ValidationError("utility must satisfy u(0) = 0");
                }
            }
            if (j > 0 && (!(knots_[j].x > knots_[j - 1].x) || !(knots_[j].u > knots_[j - 1].u))) {
                throw ValidationError("utility knots must be strictly increasing in x and u");
            }
        }
        if (!has_origin) {
            throw ValidationError("utility needs a knot at x = 0");
        }
    }

    static Utility linear() { return Utility({{-1.0, -1.0}, {0.0, 0.0}, {1.0, 1.0}}); }

    std::span<const Knot> knots() const { return knots_; }

    /// Slope of segment j, where segment 0 is the left extension and segment n the right one.
    double segment_slope(std::size_t j) const {
        const std::size_t n = knots_.size();
        if (j == 0) {
            j = 1;
        } else if (j >= n) {
            j = n - 1;
        }
        return (knots_[j].u - knots_[j - 1].u) / (knots_[j].x - knots_[j - 1].x);
    }

    double operator()(double x) const {
        const std::size_t n = knots_.size();
        if (x <= knots_.front().x) {
            return knots_.front().u + segment_slope(0) * (x - knots_.front().x);
        }
        if (x >= knots_.back().x) {
            return knots_.back().u + segment_slope(n) * (x - knots_.back().x);
        }
        auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                                   [](double v, const Knot& k) { return v < k.x; });
        const std::size_t j = static_cast<std::size_t>(it - knots_.begin());
        const Knot& a = knots_[j - 1];
        const Knot& b = knots_[j];
        return a.u + (b.u - a.u) * (x - a.x) / (b.x - a.x);
    }

    bool is_concave() const {
        for (std::size_t j = 1; j + 1 < knots_.size(); ++j) {
            if (segment_slope(j + 1) > segment_slope(j) + 1e-15) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<Knot> knots_;
};

/**
 * u(x)/x nonincreasing on (0,∞) and on (-∞,0). On a linear piece u = s·x + c
 * the ratio is s + c/x, which is nonincreasing on either half-line iff c ≥ 0,
 * so the check reduces to the intercept of every piece (extensions included).
 */
inline bool utility_is_star_compatible(const Utility& u) {
    auto knots = u.knots();
    const std::size_t n = knots.size();
    for (std::size_t j = 0; j <= n; ++j) {
        const double s = u.segment_slope(j);
        const auto& anchor = (j == 0) ? knots[0] : knots[j - 1];
        const double intercept = anchor.u - s * anchor.x;
        if (intercept < -1e-12) {
            return false;
        }
    }
    return true;
}

/// E[u(m - X)], continuous and strictly increasing in m.
inline double expected_utility_of_reserve(const LossDistribution& d, const Utility& u, double m) {
    double s = 0.0;
    for (const Atom& a : d.atoms()) {
        s += a.prob * u(m - a.value);
    }
    return s;
}

/// ρ_u(X) = inf{m : E[u(m - X)] ≥ 0} by bisection on [min X, max X] to 1e-10.
inline double shortfall(const LossDistribution& d, const Utility& u) {
    double lo = d.min();
    double hi = d.max();
    if (hi - lo <= 0.0) {
        return lo;
    }
    if (expected_utility_of_reserve(d, u, lo) >= 0.0) {
        return lo;
    }
    double f_lo = expected_utility_of_reserve(d, u, lo);
    double f_hi = expected_utility_of_reserve(d, u, hi);
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = expected_utility_of_reserve(d, u, mid);
        if (f >= 0.0) {
            hi = mid;
            f_hi = f;
        } else {
            lo = mid;
            f_lo = f;
        }
    }
    // Linear finish: exact when the bracket holds no kink of the expected utility.
    if (f_hi > f_lo) {
        const double m = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        if (m >= lo && m <= hi) {
            return m;
        }
    }
    return hi;
}

/// λ log E[exp(X/λ)], evaluated with a max shift.
inline double entropic(const LossDistribution& d, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DomainError("entropic parameter must be positive");
    }
    const double top = d.max();
    double s = 0.0;
    for (const Atom& a : d.atoms()) {
        s += a.prob * std::exp((a.value - top) / lambda);
    }
    return top + lambda * std::log(s);
}

// ---------------------------------------------------------------------------
// Evaluators
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fmt_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::vector<LossDistribution> laws_under(const LossProfile& x,
                                                const std::vector<std::vector<double>>& scenarios) {
    std::vector<LossDistribution> ds;
    ds.reserve(scenarios.size());
    for (const auto& q : scenarios) {
        ds.push_back(distribution_under(x, q));
    }
    return ds;
}

inline void check_scenarios(const std::vector<std::vector<double>>& scenarios) {
    if (scenarios.empty()) {
        throw ArgumentError("scenario list is empty");
    }
    for (const auto& q : scenarios) {
        double total = 0.0;
        for (double w : q) {
            if (w < 0.0 || !std::isfinite(w)) {
                throw DomainError("scenario weights must be nonnegative");
            }
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(q.size()) + 1e-12) {
            throw ValidationError("scenario weights must sum to 1");
        }
    }
}
}  // namespace detail

inline RiskEvaluator var_measure(double beta) {
    check_level(beta, true, "VaR");
    return RiskEvaluator(
        "VaR_" + detail::fmt_param(beta), [beta](const LossProfile& x) { return var(distribution_of(x), beta); },
        kCoherentLaw.without(Property::subadditive).without(Property::convex).without(Property::ssd_consistent));
}

inline RiskEvaluator es_measure(double beta) {
    check_level(beta, false, "ES");
    return RiskEvaluator("ES_" + detail::fmt_param(beta),
                         [beta](const LossProfile& x) { return es(distribution_of(x), beta); }, kCoherentLaw);
}

inline RiskEvaluator mean_measure() {
    return RiskEvaluator("mean", [](const LossProfile& x) { return expectation(x); }, kCoherentLaw);
}

inline RiskEvaluator worst_case_measure() {
    return RiskEvaluator("worst_case", [](const LossProfile& x) { return x.max(); }, kCoherentLaw);
}

/// MaxVaR over scenario probability vectors on the profile's states.
inline RiskEvaluator maxvar_measure(std::vector<std::vector<double>> scenarios, double beta) {
    check_level(beta, true, "VaR");
    detail::check_scenarios(scenarios);
    return RiskEvaluator(
        "MaxVaR_" + detail::fmt_param(beta),
        [scenarios = std::move(scenarios), beta](const LossProfile& x) {
            auto ds = detail::laws_under(x, scenarios);
            return max_var(ds, beta);
        },
        Claims{Property::monotone, Property::translation_invariant, Property::normalized,
               Property::positively_homogeneous, Property::star_shaped});
}

inline RiskEvaluator medvar_measure(std::vector<std::vector<double>> scenarios, double beta) {
    check_level(beta, true, "VaR");
    detail::check_scenarios(scenarios);
    return RiskEvaluator(
        "MedVaR_" + detail::fmt_param(beta),
        [scenarios = std::move(scenarios), beta](const LossProfile& x) {
            auto ds = detail::laws_under(x, scenarios);
            return med_var(ds, beta);
        },
        Claims{Property::monotone, Property::translation_invariant, Property::normalized,
               Property::positively_homogeneous, Property::star_shaped});
}

inline RiskEvaluator lvar_measure(LossBenchmark bench) {
    Claims c{Property::monotone, Property::translation_invariant, Property::normalized, Property::star_shaped,
             Property::law_invariant};
    if (bench.steps().size() == 1) {
        c = c.with(Property::positively_homogeneous);
    }
    return RiskEvaluator(
        "LVaR", [bench = std::move(bench)](const LossProfile& x) { return lvar(distribution_of(x), bench); }, c);
}

inline RiskEvaluator shortfall_measure(Utility u) {
    Claims c{Property::monotone, Property::translation_invariant, Property::normalized, Property::law_invariant};
    if (utility_is_star_compatible(u)) {
        c = c.with(Property::star_shaped);
    }
    if (u.is_concave()) {
        c = c.with(Property::convex).with(Property::star_shaped).with(Property::ssd_consistent);
    }
    return RiskEvaluator(
        "shortfall", [u = std::move(u)](const LossProfile& x) { return shortfall(distribution_of(x), u); }, c);
}

inline RiskEvaluator entropic_measure(double lambda) {
    if (!(lambda > 0.0)) {
        throw DomainError("entropic parameter must be positive");
    }
    return RiskEvaluator("entropic_" + detail::fmt_param(lambda),
                         [lambda](const LossProfile& x) { return entropic(distribution_of(x), lambda); },
                         Claims{Property::monotone, Property::translation_invariant, Property::normalized,
                                Property::star_shaped, Property::convex, Property::law_invariant,
                                Property::ssd_consistent});
}

/// Entropic measure λ log E_Q[exp(X/λ)] under a reference scenario Q other than P.
inline RiskEvaluator entropic_measure(double lambda, std::vector<double> reference) {
    if (!(lambda > 0.0)) {
        throw DomainError("entropic parameter must be positive");
    }
    detail::check_scenarios({reference});
    return RiskEvaluator("entropic_" + detail::fmt_param(lambda) + "_Q",
                         [lambda, q = std::move(reference)](const LossProfile& x) {
                             return entropic(distribution_under(x, q), lambda);
                         },
                         Claims{Property::monotone, Property::translation_invariant, Property::normalized,
                                Property::star_shaped, Property::convex});
}

}  // namespace starrisk
