#pragma once

#include "starrisk/errors.hpp"
#include "starrisk/measures.hpp"
#include "starrisk/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace starrisk {

enum class CurveKind { var, es };

inline std::string_view curve_kind_name(CurveKind k) { return k == CurveKind::var ? "var" : "es"; }

inline CurveKind parse_curve_kind(std::string_view s) {
    if (s == "var") return CurveKind::var;
    if (s == "es") return CurveKind::es;
    throw ArgumentError("curve kind must be 'var' or 'es', got '" + std::string(s) + "'");
}

/**
 * g_Y(α) = VaR_α(Y) or ES_α(Y) for an acceptable Y. Both kinds are stored as the
 * quantile step curve of Y: `levels` are the jump points in (0,1) and `values`
 * holds one quantile value per cell, so values.size() == levels.size() + 1.
 */
class GeneratorCurve {
public:
    GeneratorCurve(CurveKind kind, const LossDistribution& source) : kind_(kind), law_(source) { validate(); }

    GeneratorCurve(CurveKind kind, const LossProfile& y) : GeneratorCurve(kind, distribution_of(y)) {}

    GeneratorCurve(CurveKind kind, const std::vector<double>& levels, const std::vector<double>& values)
        : kind_(kind), law_(from_steps(levels, values)) {
        validate();
    }

    static GeneratorCurve zero(CurveKind kind) { return GeneratorCurve(kind, LossDistribution::constant(0.0)); }

    CurveKind kind() const { return kind_; }
    const LossDistribution& law() const { return law_; }

    std::vector<double> levels() const { return quantile_breakpoints(law_); }
    std::vector<double> values() const {
        std::vector<double> out;
        for (const Atom& a : law_.atoms()) {
            out.push_back(a.value);
        }
        return out;
    }

    double operator()(double alpha) const { return kind_ == CurveKind::var ? var(law_, alpha) : es(law_, alpha); }

    /// Right limit at 0: the essential infimum for VaR curves, the mean for ES curves.
    double at_zero() const { return kind_ == CurveKind::var ? law_.min() : law_.mean(); }
    /// Left limit at 1: the maximum for both kinds.
    double at_one() const { return law_.max(); }

private:
    static LossDistribution from_steps(const std::vector<double>& levels, const std::vector<double>& values) {
        if (values.size() != levels.size() + 1) {
            throw ValidationError("curve needs exactly one value per cell (levels + 1)");
        }
        std::vector<Atom> atoms;
        double prev = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double next = j < levels.size() ? levels[j] : 1.0;
            if (!(next > prev) || next > 1.0) {
                throw ValidationError("curve levels must be strictly increasing inside (0,1)");
            }
            if (j > 0 && values[j] < values[j - 1]) {
                throw ValidationError("curve values must be nondecreasing");
            }
            atoms.push_back({values[j], next - prev});
            prev = next;
        }
        return LossDistribution(std::move(atoms));
    }

    void validate() const {
        if (at_zero() > 1e-9) {
            throw ValidationError("generator curve must start at or below 0");
        }
    }

    CurveKind kind_;
    LossDistribution law_;
};

/// VaR_α(x) ≤ VaR_α(y) for all α ∈ (0,1).
inline bool fsd_dominates(const LossDistribution& x, const LossDistribution& y, double tol = 1e-12) {
    const auto grid = merge_levels(quantile_breakpoints(x), quantile_breakpoints(y));
    double prev = 0.0;
    for (std::size_t j = 0; j <= grid.size(); ++j) {
        const double next = j < grid.size() ? grid[j] : 1.0;
        const double mid = 0.5 * (prev + next);
        if (var(x, mid) > var(y, mid) + tol) {
            return false;
        }
        prev = next;
    }
    return true;
}

/**
 * ES_α(x) ≤ ES_α(y) for all α ∈ (0,1). On each merged cell the sign of the
 * difference follows a linear numerator, so the cell endpoints decide; the
 * endpoints 0 and 1 are the mean and the maximum.
 */
inline bool ssd_dominates(const LossDistribution& x, const LossDistribution& y, double tol = 1e-12) {
    if (x.mean() > y.mean() + tol || x.max() > y.max() + tol) {
        return false;
    }
    for (double a : merge_levels(quantile_breakpoints(x), quantile_breakpoints(y))) {
        if (es(x, a) > es(y, a) + tol) {
            return false;
        }
    }
    return true;
}

namespace detail {

inline void require_generators(const std::vector<GeneratorCurve>& gen, CurveKind kind) {
    if (gen.empty()) {
        throw ArgumentError("generator list is empty");
    }
    for (const auto& g : gen) {
        if (g.kind() != kind) {
            throw ArgumentError(std::string("expected ") + std::string(curve_kind_name(kind)) + " generator curves");
        }
    }
}

}  // namespace detail

/// sup_α {VaR_α(x) - g(α)}: both curves are constant on each open cell of the merged grid.
inline double var_envelope_sup(const GeneratorCurve& g, const LossDistribution& x) {
    const auto grid = merge_levels(quantile_breakpoints(x), g.levels());
    double best = -std::numeric_limits<double>::infinity();
    double prev = 0.0;
    for (std::size_t j = 0; j <= grid.size(); ++j) {
        const double next = j < grid.size() ? grid[j] : 1.0;
        const double mid = 0.5 * (prev + next);
        best = std::max(best, var(x, mid) - g(mid));
        prev = next;
    }
    return best;
}

/// inf over generators of sup_α {VaR_α(x) - g(α)}.
inline double var_envelope_eval(const std::vector<GeneratorCurve>& gen, const LossDistribution& x) {
    detail::require_generators(gen, CurveKind::var);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : gen) {
        best = std::min(best, var_envelope_sup(g, x));
    }
    return best;
}

/// sup_α {ES_α(x) - g(α)}: monotone on each merged cell, so the endpoints and the limits at 0 and 1 suffice.
inline double es_envelope_sup(const GeneratorCurve& g, const LossDistribution& x) {
    double best = std::max(x.mean() - g.at_zero(), x.max() - g.at_one());
    for (double a : merge_levels(quantile_breakpoints(x), g.levels())) {
        best = std::max(best, es(x, a) - g(a));
    }
    return best;
}

inline double es_envelope_eval(const std::vector<GeneratorCurve>& gen, const LossDistribution& x) {
    detail::require_generators(gen, CurveKind::es);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : gen) {
        best = std::min(best, es_envelope_sup(g, x));
    }
    return best;
}

/// Generators g_Y for Y in `ys`, shifted to be acceptable: Y - ρ(Y) is used whenever ρ(Y) > 0.
inline std::vector<GeneratorCurve> acceptable_generators(const RiskEvaluator& rho, const std::vector<LossProfile>& ys,
                                                         CurveKind kind) {
    std::vector<GeneratorCurve> out;
    for (const auto& y : ys) {
        const double r = rho(y);
        out.emplace_back(kind, r > 0.0 ? y - r : y);
    }
    return out;
}

/**
 * States carrying the largest losses with total probability 1 - α′. States are
 * ranked by loss, ties going to the lower index.
 */
inline std::vector<std::size_t> tail_event(const LossProfile& x, double alpha_prime) {
    if (!(alpha_prime >= 0.0 && alpha_prime < 1.0)) {
        throw ArgumentError("tail level must lie in [0,1)");
    }
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    const double target = 1.0 - alpha_prime;
    std::vector<std::size_t> out;
    double mass = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(mass - target) <= kMassTol) {
            break;
        }
        const double next = mass + x.space()->prob(order[k]);
        if (next > target + kMassTol) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "tail mass %.15g is not realizable; nearest realizable levels are %.15g and %.15g", target,
                          1.0 - next, 1.0 - mass);
            throw PrecisionError(buf);
        }
        mass = next;
        out.push_back(order[k]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct MinimalityWitness {
    LossProfile y;
    std::vector<std::size_t> tail;
    double tail_mean;
    double var_alpha_x;
    double es_alpha_prime_x;
    double var_alpha_y;
    bool ssd_ok;        // Y dominates X in second order
    bool var_positive;  // VaR_α(Y) > 0
    bool valid() const { return ssd_ok && var_positive; }
};

/**
 * Given VaR_α(X) ≤ 0 < ES_α′(X), flattens X on its α′-tail event to the tail
 * mean. The result SSD-dominates X yet is rejected by VaR_α.
 */
inline MinimalityWitness es_minimality_witness(const LossProfile& x, double alpha, double alpha_prime) {
    check_level(alpha, false, "alpha");
    check_level(alpha_prime, false, "alpha_prime");
    if (!(alpha_prime < alpha)) {
        throw ArgumentError("alpha_prime must be below alpha");
    }
    const auto d = distribution_of(x);
    const double v = var(d, alpha);
    const double e = es(d, alpha_prime);
    std::string failed;
    if (v > 0.0) {
        failed += "VaR_alpha(x) = " + detail::fmt_param(v) + " > 0";
    }
    if (e <= 0.0) {
        failed += std::string(failed.empty() ? "" : "; ") + "ES_alpha_prime(x) = " + detail::fmt_param(e) + " <= 0";
    }
    if (!failed.empty()) {
        throw ArgumentError("precondition failed: " + failed);
    }
    const auto tail = tail_event(x, alpha_prime);
    std::vector<double> vals(x.values().begin(), x.values().end());
    for (std::size_t s : tail) {
        vals[s] = e;
    }
    LossProfile y(x.space(), std::move(vals));
    const auto dy = distribution_of(y);
    MinimalityWitness w{y, tail, e, v, e, var(dy, alpha), ssd_dominates(dy, d), false};
    w.var_positive = w.var_alpha_y > 0.0;
    return w;
}

}  // namespace starrisk
