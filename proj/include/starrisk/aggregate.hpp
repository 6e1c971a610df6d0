#pragma once

#include "starrisk/axioms.hpp"
#include "starrisk/errors.hpp"
#include "starrisk/measures.hpp"
#include "starrisk/random.hpp"
#include "starrisk/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace starrisk {

/// Indexed collection {ρ_i} of measures on a common space.
using MeasureFamily = std::vector<RiskEvaluator>;

inline void require_family(const MeasureFamily& fam) {
    if (fam.empty()) {
        throw ArgumentError("measure family is empty");
    }
}

/// Properties every member claims and that survive the aggregation operations.
inline Claims common_claims(const MeasureFamily& fam) {
    Claims keep{Property::monotone, Property::translation_invariant, Property::normalized, Property::star_shaped,
                Property::positively_homogeneous, Property::law_invariant};
    for (const auto& m : fam) {
        keep = keep & m.claims();
    }
    return keep;
}

inline std::string family_label(const MeasureFamily& fam) {
    std::string s;
    for (std::size_t i = 0; i < fam.size(); ++i) {
        s += (i ? "," : "") + fam[i].name();
    }
    return s;
}

// ---------------------------------------------------------------------------
// Choquet averages
// ---------------------------------------------------------------------------

/// Choquet integral of i ↦ values[i] against μ: descending order, top-set increments,
/// ties broken by index (the result does not depend on the tie order).
inline double choquet_integral(std::span<const double> values, const Capacity& mu) {
    if (values.size() != mu.index_count()) {
        throw ArgumentError("capacity has " + std::to_string(mu.index_count()) + " indices for " +
                            std::to_string(values.size()) + " values");
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    double out = 0.0;
    std::uint32_t mask = 0;
    double prev = 0.0;
    for (std::size_t i : order) {
        mask |= (1u << i);
        const double cur = mu(mask);
        out += values[i] * (cur - prev);
        prev = cur;
    }
    return out;
}

inline double choquet_aggregate(const MeasureFamily& fam, const Capacity& mu, const LossProfile& x) {
    require_family(fam);
    if (fam.size() != mu.index_count()) {
        throw ArgumentError("capacity size does not match the family size");
    }
    std::vector<double> v;
    v.reserve(fam.size());
    for (const auto& m : fam) {
        v.push_back(m(x));
    }
    return choquet_integral(v, mu);
}

inline RiskEvaluator make_choquet(MeasureFamily fam, Capacity mu, std::string name = "choquet") {
    require_family(fam);
    if (fam.size() != mu.index_count()) {
        throw ArgumentError("capacity size does not match the family size");
    }
    const Claims c = common_claims(fam);
    return RiskEvaluator(std::move(name),
                         [fam = std::move(fam), mu = std::move(mu)](const LossProfile& x) {
                             return choquet_aggregate(fam, mu, x);
                         },
                         c);
}

inline RiskEvaluator make_sup(MeasureFamily fam) {
    const auto k = fam.size();
    return make_choquet(std::move(fam), Capacity::sup(k), "sup");
}

inline RiskEvaluator make_inf(MeasureFamily fam) {
    const auto k = fam.size();
    return make_choquet(std::move(fam), Capacity::inf(k), "inf");
}

/// Lower median: the ⌈k/2⌉-th smallest member value.
inline RiskEvaluator make_median(MeasureFamily fam) {
    const auto k = fam.size();
    return make_choquet(std::move(fam), order_statistic_capacity(k, (k + 1) / 2), "median");
}

// ---------------------------------------------------------------------------
// ECB blend
// ---------------------------------------------------------------------------

/// weight·max_i ρ_i(X) + (1 - weight)·min_i ρ_i(X).
inline double ecb_blend(const MeasureFamily& fam, double weight, const LossProfile& x) {
    require_family(fam);
    if (!(weight >= 0.0 && weight <= 1.0)) {
        throw DomainError("ECB blend weight must lie in [0,1]");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& m : fam) {
        const double v = m(x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return weight * hi + (1.0 - weight) * lo;
}

inline RiskEvaluator make_ecb_blend(MeasureFamily fam, double weight) {
    require_family(fam);
    if (!(weight >= 0.0 && weight <= 1.0)) {
        throw DomainError("ECB blend weight must lie in [0,1]");
    }
    const Claims c = common_claims(fam);
    return RiskEvaluator("ecb_blend",
                         [fam = std::move(fam), weight](const LossProfile& x) { return ecb_blend(fam, weight, x); },
                         c);
}

// ---------------------------------------------------------------------------
// Normality condition
// ---------------------------------------------------------------------------

enum class NormalityStatus { passed_by_certificate, passed_by_sampling, violated };

inline std::string_view normality_name(NormalityStatus s) {
    switch (s) {
        case NormalityStatus::passed_by_certificate: return "passed_by_certificate";
        case NormalityStatus::passed_by_sampling: return "passed_by_sampling";
        case NormalityStatus::violated: return "violated";
    }
    return "unknown";
}

struct NormalityResult {
    NormalityStatus status = NormalityStatus::passed_by_certificate;
    std::vector<LossProfile> witness;  // zero-sum Z_1..Z_n when violated
    double witness_total = 0.0;
    std::size_t samples_used = 0;

    bool passed() const { return status != NormalityStatus::violated; }
};

/**
 * Σρ_i(Z_i) ≥ 0 whenever ΣZ_i = 0. First looks for the certificate that the
 * mean under P is dominated by every member on probe profiles; otherwise
 * samples zero-sum tuples and reports the first one with a negative total.
 */
inline NormalityResult normality_check(const MeasureFamily& fam, const SpacePtr& space, std::size_t samples = 1000,
                                       std::uint64_t seed = 1) {
    require_family(fam);
    NormalityResult res;
    const auto probes = make_probe_set(space, 100, seed);
    bool certified = true;
    for (const auto& x : probes.profiles) {
        const double m = expectation(x);
        for (const auto& rho : fam) {
            if (rho(x) < m - 1e-12) {
                certified = false;
                break;
            }
        }
        if (!certified) {
            break;
        }
    }
    if (certified) {
        res.status = NormalityStatus::passed_by_certificate;
        return res;
    }
    Rng rng(seed ^ 0x2545f4914f6cdd1dULL);
    const std::size_t n = space->size();
    for (std::size_t s = 0; s < samples; ++s) {
        std::vector<LossProfile> zs;
        std::vector<double> rest(n, 0.0);
        const double scale = (s % 3 == 0) ? 1.0 : (s % 3 == 1 ? 5.0 : 0.2);
        for (std::size_t i = 0; i + 1 < fam.size(); ++i) {
            std::vector<double> z(n);
            for (std::size_t w = 0; w < n; ++w) {
                z[w] = scale * rng.uniform(-1.0, 1.0);
                rest[w] -= z[w];
            }
            zs.emplace_back(space, std::move(z));
        }
        zs.emplace_back(space, rest);
        double total = 0.0;
        for (std::size_t i = 0; i < fam.size(); ++i) {
            total += fam[i](zs[i]);
        }
        res.samples_used = s + 1;
        if (total < -1e-9) {
            res.status = NormalityStatus::violated;
            res.witness = std::move(zs);
            res.witness_total = total;
            return res;
        }
    }
    res.status = NormalityStatus::passed_by_sampling;
    return res;
}

// ---------------------------------------------------------------------------
// Inf-convolution
// ---------------------------------------------------------------------------

struct InfConvConfig {
    std::size_t starts = 16;
    std::uint64_t seed = 1;
    std::size_t max_sweeps = 60;
    std::size_t scan_points = 24;
    double tol = 1e-10;
    bool normality_override = false;
    std::size_t normality_samples = 1000;
    bool parallel = true;
};

struct SplitSolution {
    std::vector<LossProfile> parts;
    double total = 0.0;
    bool converged = true;
    /// The solver returns the best value found; attainment of the infimum is not decided.
    bool attainment_unknown = true;
    std::size_t best_start = 0;
};

namespace detail {

class SplitObjective {
public:
    SplitObjective(const MeasureFamily& fam, const LossProfile& x) : fam_(fam), x_(x) {}

    std::size_t dims() const { return (fam_.size() - 1) * x_.size(); }

    std::vector<LossProfile> parts(const std::vector<double>& v) const {
        const std::size_t n = x_.size();
        std::vector<LossProfile> out;
        std::vector<double> last(x_.values().begin(), x_.values().end());
        for (std::size_t i = 0; i + 1 < fam_.size(); ++i) {
            std::vector<double> y(v.begin() + static_cast<std::ptrdiff_t>(i * n),
                                  v.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
            for (std::size_t w = 0; w < n; ++w) {
                last[w] -= y[w];
            }
            out.emplace_back(x_.space(), std::move(y));
        }
        out.emplace_back(x_.space(), std::move(last));
        return out;
    }

    double operator()(const std::vector<double>& v) const {
        const auto ps = parts(v);
        double total = 0.0;
        for (std::size_t i = 0; i < fam_.size(); ++i) {
            total += fam_[i](ps[i]);
        }
        return total;
    }

private:
    const MeasureFamily& fam_;
    const LossProfile& x_;
};

struct StartResult {
    std::vector<double> point;
    double value;
    bool converged;
};

/// Coordinate descent: a coarse scan over the box followed by a golden-section refinement
/// around the best scan point, per coordinate, until a full sweep stops improving.
inline StartResult descend(const SplitObjective& f, std::vector<double> v, double lo, double hi,
                           const InfConvConfig& cfg) {
    constexpr double kInvPhi = 0.6180339887498949;
    double fv = f(v);
    bool converged = false;
    for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        const double before = fv;
        for (std::size_t c = 0; c < v.size(); ++c) {
            const double keep = v[c];
            auto at = [&](double t) {
                v[c] = t;
                return f(v);
            };
            double best_t = keep;
            double best_f = fv;
            const std::size_t m = std::max<std::size_t>(cfg.scan_points, 2);
            const double h = (hi - lo) / static_cast<double>(m - 1);
            for (std::size_t s = 0; s < m; ++s) {
                const double t = lo + h * static_cast<double>(s);
                const double ft = at(t);
                if (ft < best_f) {
                    best_f = ft;
                    best_t = t;
                }
            }
            double a = std::max(lo, best_t - h);
            double b = std::min(hi, best_t + h);
            double x1 = b - kInvPhi * (b - a);
            double x2 = a + kInvPhi * (b - a);
            double f1 = at(x1);
            double f2 = at(x2);
            for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
                if (f1 <= f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - kInvPhi * (b - a);
                    f1 = at(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + kInvPhi * (b - a);
                    f2 = at(x2);
                }
            }
            if (f1 < best_f) {
                best_f = f1;
                best_t = x1;
            }
            if (f2 < best_f) {
                best_f = f2;
                best_t = x2;
            }
            v[c] = best_t;
            fv = best_f;
        }
        if (before - fv <= cfg.tol) {
            converged = true;
            break;
        }
    }
    return {std::move(v), fv, converged};
}

}  // namespace detail

/**
 * Minimizes Σρ_i(Y_i) over splits ΣY_i = X. The first k starts put the whole
 * position on one member; the remaining starts are seeded uniformly in the box.
 * Starts may run concurrently; the best one is selected by (value, start index).
 */
inline SplitSolution inf_convolution(const MeasureFamily& fam, const LossProfile& x, const InfConvConfig& cfg = {},
                                     const NormalityResult* known_normality = nullptr) {
    require_family(fam);
    if (!cfg.normality_override) {
        const NormalityResult nr =
            known_normality ? *known_normality : normality_check(fam, x.space(), cfg.normality_samples, cfg.seed);
        if (!nr.passed()) {
            throw RefusedError("normality condition violated for {" + family_label(fam) +
                               "}; the inf-convolution may be -infinity");
        }
    }
    if (fam.size() == 1) {
        return SplitSolution{{x}, fam[0](x), true, false, 0};
    }
    const std::size_t k = fam.size();
    const std::size_t n = x.size();
    const detail::SplitObjective f(fam, x);
    const double range = std::max(1.0, x.max() - x.min());
    const double lo = std::min(0.0, x.min()) - range;
    const double hi = std::max(0.0, x.max()) + range;

    const std::size_t starts = std::max(cfg.starts, k);
    std::vector<std::vector<double>> seeds;
    for (std::size_t s = 0; s < starts; ++s) {
        std::vector<double> v(f.dims(), 0.0);
        if (s < k) {
            if (s + 1 < k) {
                std::copy(x.values().begin(), x.values().end(), v.begin() + static_cast<std::ptrdiff_t>(s * n));
            }
        } else {
            Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + s);
            for (double& t : v) {
                t = rng.uniform(lo, hi);
            }
        }
        seeds.push_back(std::move(v));
    }

    std::vector<detail::StartResult> results;
    results.reserve(starts);
    if (cfg.parallel) {
        std::vector<std::future<detail::StartResult>> futs;
        for (std::size_t s = 0; s < starts; ++s) {
            futs.push_back(std::async(std::launch::async, [&, s] { return detail::descend(f, seeds[s], lo, hi, cfg); }));
        }
        for (auto& fu : futs) {
            results.push_back(fu.get());
        }
    } else {
        for (std::size_t s = 0; s < starts; ++s) {
            results.push_back(detail::descend(f, seeds[s], lo, hi, cfg));
        }
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < starts; ++s) {
        if (results[s].value < results[best].value) {
            best = s;
        }
    }
    SplitSolution sol;
    sol.parts = f.parts(results[best].point);
    sol.total = results[best].value;
    sol.converged = results[best].converged;
    sol.best_start = best;
    return sol;
}

/// ρ_⋄ as an evaluator; the normality gate runs once per state space.
inline RiskEvaluator make_inf_convolution(MeasureFamily fam, InfConvConfig cfg = {}) {
    require_family(fam);
    Claims c = common_claims(fam).without(Property::positively_homogeneous).without(Property::law_invariant);
    struct Cache {
        std::mutex mu;
        std::vector<std::pair<SpacePtr, NormalityResult>> seen;
    };
    auto cache = std::make_shared<Cache>();
    std::string name = "infconv(" + family_label(fam) + ")";
    return RiskEvaluator(
        std::move(name),
        [fam = std::move(fam), cfg, cache](const LossProfile& x) {
            NormalityResult nr;
            bool found = false;
            if (!cfg.normality_override) {
                std::lock_guard<std::mutex> lock(cache->mu);
                for (const auto& [sp, r] : cache->seen) {
                    if (sp->same_as(*x.space())) {
                        nr = r;
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    nr = normality_check(fam, x.space(), cfg.normality_samples, cfg.seed);
                    cache->seen.emplace_back(x.space(), nr);
                }
            }
            return inf_convolution(fam, x, cfg, cfg.normality_override ? nullptr : &nr).total;
        },
        c);
}

// ---------------------------------------------------------------------------
// CCP margin
// ---------------------------------------------------------------------------

struct MarginResult {
    std::uint32_t subset = 0;
    SplitSolution split;
    std::vector<double> subset_totals;  // in admissible-list order
};

inline MeasureFamily restrict_family(const MeasureFamily& fam, std::uint32_t mask) {
    MeasureFamily sub;
    for (std::size_t i = 0; i < fam.size(); ++i) {
        if (mask & (1u << i)) {
            sub.push_back(fam[i]);
        }
    }
    return sub;
}

inline void check_admissible(const MeasureFamily& fam, const std::vector<std::uint32_t>& admissible) {
    if (admissible.empty()) {
        throw ArgumentError("admissible subset list is empty");
    }
    for (auto m : admissible) {
        if (m == 0 || (fam.size() < 32 && (m >> fam.size()) != 0)) {
            throw ArgumentError("admissible subset " + std::to_string(m) + " is empty or out of range");
        }
    }
}

/// Effective margin: the cheapest admissible CCP composition and its optimal split.
inline MarginResult ccp_margin(const MeasureFamily& fam, const std::vector<std::uint32_t>& admissible,
                               const LossProfile& x, const InfConvConfig& cfg = {}) {
    require_family(fam);
    check_admissible(fam, admissible);
    MarginResult res;
    bool first = true;
    for (auto mask : admissible) {
        auto sol = inf_convolution(restrict_family(fam, mask), x, cfg);
        res.subset_totals.push_back(sol.total);
        if (first || sol.total < res.split.total) {
            res.subset = mask;
            res.split = std::move(sol);
            first = false;
        }
    }
    return res;
}

inline RiskEvaluator make_ccp_margin(MeasureFamily fam, std::vector<std::uint32_t> admissible, InfConvConfig cfg = {}) {
    require_family(fam);
    check_admissible(fam, admissible);
    std::vector<RiskEvaluator> parts;
    for (auto mask : admissible) {
        parts.push_back(make_inf_convolution(restrict_family(fam, mask), cfg));
    }
    Claims c = common_claims(fam).without(Property::positively_homogeneous).without(Property::law_invariant);
    return RiskEvaluator(
        "ccp_margin",
        [parts = std::move(parts)](const LossProfile& x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : parts) {
                best = std::min(best, p(x));
            }
            return best;
        },
        c);
}

}  // namespace starrisk
