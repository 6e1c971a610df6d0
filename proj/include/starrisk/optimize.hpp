#pragma once

#include "starrisk/aggregate.hpp"
#include "starrisk/axioms.hpp"
#include "starrisk/envelope.hpp"
#include "starrisk/errors.hpp"
#include "starrisk/measures.hpp"
#include "starrisk/state_space.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace starrisk {

class ActionLossTable {
public:
    ActionLossTable(std::vector<std::string> actions, std::vector<LossProfile> losses)
        : actions_(std::move(actions)), losses_(std::move(losses)) {
        if (losses_.empty()) {
            throw ArgumentError("action table is empty");
        }
        if (actions_.size() != losses_.size()) {
            throw DimensionError("action labels and loss rows differ in count");
        }
        for (const auto& l : losses_) {
            require_same_space(l, losses_.front());
        }
    }

    std::size_t size() const { return losses_.size(); }
    const std::string& action(std::size_t i) const { return actions_[i]; }
    const LossProfile& loss(std::size_t i) const { return losses_[i]; }
    const std::vector<LossProfile>& losses() const { return losses_; }

private:
    std::vector<std::string> actions_;
    std::vector<LossProfile> losses_;
};

struct ActionChoice {
    std::size_t index;
    std::string action;
    double value;
};

/// Exhaustive argmin; the first action wins ties.
inline ActionChoice minimize_risk(const RiskEvaluator& rho, const ActionLossTable& table) {
    ActionChoice best{0, table.action(0), rho(table.loss(0))};
    for (std::size_t a = 1; a < table.size(); ++a) {
        const double v = rho(table.loss(a));
        if (v < best.value) {
            best = {a, table.action(a), v};
        }
    }
    return best;
}

inline ActionChoice robust_minimize(const MeasureFamily& fam, const ActionLossTable& table) {
    require_family(fam);
    return minimize_risk(make_sup(fam), table);
}

struct DecompositionReport {
    AxiomReport report;
    ActionChoice direct;
    ActionChoice joint;
    std::size_t joint_member = 0;
    double gap = 0.0;
    bool transfer_ok = false;
};

/**
 * Exchanges the two infima: min_a ρ(ℓ(a)) against min over (γ, a) with γ ranging
 * over envelope members seeded at every ℓ(a). The direct argmin must also
 * minimize jointly.
 */
inline DecompositionReport decomposition_check(const RiskEvaluator& rho, const ActionLossTable& table,
                                               double tol = 1e-9) {
    DecompositionReport out;
    out.report.property = "decomposition";
    out.report.tolerance = tol;
    out.direct = minimize_risk(rho, table);
    const auto members = envelope_family(rho, table.losses(), false);
    std::vector<std::vector<double>> joint(members.size(), std::vector<double>(table.size()));
    out.joint = {0, table.action(0), std::numeric_limits<double>::infinity()};
    for (std::size_t g = 0; g < members.size(); ++g) {
        for (std::size_t a = 0; a < table.size(); ++a) {
            joint[g][a] = members[g].evaluate(table.loss(a));
            if (joint[g][a] < out.joint.value) {
                out.joint = {a, table.action(a), joint[g][a]};
                out.joint_member = g;
            }
        }
    }
    out.gap = std::abs(out.direct.value - out.joint.value);
    for (std::size_t g = 0; g < members.size() && !out.transfer_ok; ++g) {
        out.transfer_ok = joint[g][out.direct.index] <= out.joint.value + tol;
    }
    out.report.probes_used = members.size() * table.size();
    if (out.gap > tol) {
        ++out.report.violations;
        out.report.witness = Witness{{}, {}, out.direct.value, out.joint.value, "direct min == joint min"};
    }
    if (!out.transfer_ok) {
        ++out.report.violations;
        if (!out.report.witness) {
            out.report.witness =
                Witness{{table.loss(out.direct.index)}, {}, out.direct.value, out.joint.value, "direct argmin is jointly optimal"};
        }
    }
    out.report.verdict = out.report.violations ? Verdict::violated : Verdict::holds_on_sample;
    return out;
}

/// Robust form: the envelope of the sup measure stands in for the relaxed families.
inline DecompositionReport decomposition_check(const MeasureFamily& fam, const ActionLossTable& table,
                                               double tol = 1e-9) {
    require_family(fam);
    auto out = decomposition_check(make_sup(fam), table, tol);
    out.report.property = "robust_decomposition";
    return out;
}

/// X ↦ min_a ρ_a(X) over convex per-action measures; star-shaped but generally not convex.
inline RiskEvaluator mitigated_measure(MeasureFamily per_action) {
    require_family(per_action);
    Claims c = common_claims(per_action).without(Property::convex).without(Property::subadditive);
    c = c & Claims{Property::monotone, Property::translation_invariant, Property::normalized,
                   Property::positively_homogeneous, Property::law_invariant};
    c = c.with(Property::star_shaped);
    std::string name = "mitigated(" + family_label(per_action) + ")";
    return RiskEvaluator(
        std::move(name),
        [fam = std::move(per_action)](const LossProfile& x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& m : fam) {
                best = std::min(best, m(x));
            }
            return best;
        },
        c);
}

// ---------------------------------------------------------------------------
// Static portfolio selection
// ---------------------------------------------------------------------------

struct PortfolioProblem {
    std::vector<double> pricing;  // martingale weights Q
    double budget;
    std::vector<LossProfile> feasible;  // payoff profiles
};

struct PortfolioResult {
    bool feasible = false;
    double min_price = 0.0;  // smallest E_Q over candidates, reported when nothing fits the budget
    std::size_t index = 0;
    double value = 0.0;  // ρ(-X) at the selected payoff
    std::size_t direct_index = 0;
    double direct_value = 0.0;
    std::size_t member = 0;  // envelope member achieving the minimum
    bool routes_agree = false;
};

/**
 * Minimizes ρ(-X) over payoffs with E_Q[X] ≤ x₀ twice: directly, and by the
 * envelope recipe (best payoff per member, then best member).
 */
inline PortfolioResult portfolio_select(const RiskEvaluator& rho, const PortfolioProblem& prob, double tol = 1e-12) {
    if (prob.feasible.empty()) {
        throw ArgumentError("candidate list is empty");
    }
    {
        double total = 0.0;
        for (double q : prob.pricing) {
            if (!(q >= 0.0)) {
                throw ValidationError("pricing weights must be nonnegative");
            }
            total += q;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw ValidationError("pricing weights must sum to 1");
        }
    }
    PortfolioResult out;
    out.min_price = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> ok;
    std::vector<LossProfile> losses;
    for (std::size_t i = 0; i < prob.feasible.size(); ++i) {
        const double price = expectation(prob.feasible[i], prob.pricing);
        out.min_price = std::min(out.min_price, price);
        if (price <= prob.budget + tol) {
            ok.push_back(i);
            losses.push_back(-prob.feasible[i]);
        }
    }
    if (ok.empty()) {
        return out;
    }
    out.feasible = true;
    out.direct_value = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ok.size(); ++k) {
        const double v = rho(losses[k]);
        if (v < out.direct_value) {
            out.direct_value = v;
            out.direct_index = ok[k];
        }
    }
    const auto members = envelope_family(rho, losses, false);
    out.value = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < members.size(); ++g) {
        std::size_t arg = 0;
        double v = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ok.size(); ++k) {
            const double gv = members[g].evaluate(losses[k]);
            if (gv < v) {
                v = gv;
                arg = k;
            }
        }
        if (v < out.value - tol) {
            out.value = v;
            out.index = ok[arg];
            out.member = g;
        }
    }
    out.routes_agree = std::abs(out.value - out.direct_value) <= 1e-9 &&
                       std::abs(rho(-prob.feasible[out.index]) - out.direct_value) <= 1e-9;
    return out;
}

}  // namespace starrisk
