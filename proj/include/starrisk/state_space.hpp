#pragma once

#include "starrisk/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace starrisk {

/// Absolute tolerance on probability mass and on merging equal loss values.
inline constexpr double kMassTol = 1e-12;

/**
 * Finite probability space. Probabilities are strictly positive and sum to
 * one within kMassTol. Instances are immutable and shared by every profile
 * defined on them.
 */
class StateSpace {
public:
    explicit StateSpace(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) {
            throw ArgumentError("state space needs at least one state");
        }
        double total = 0.0;
        for (double p : probs_) {
            if (!(p > 0.0) || p > 1.0 || !std::isfinite(p)) {
                throw DomainError("state probabilities must lie in (0,1]");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > kMassTol * static_cast<double>(probs_.size()) + kMassTol) {
            throw ValidationError("state probabilities sum to " + std::to_string(total) + ", expected 1");
        }
    }

    static std::shared_ptr<const StateSpace> make(std::vector<double> probs) {
        return std::make_shared<const StateSpace>(std::move(probs));
    }

    static std::shared_ptr<const StateSpace> uniform(std::size_t n) {
        if (n == 0) {
            throw ArgumentError("state space needs at least one state");
        }
        return make(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    std::size_t size() const { return probs_.size(); }
    double prob(std::size_t i) const { return probs_[i]; }
    std::span<const double> probs() const { return probs_; }

    bool same_as(const StateSpace& other) const {
        return this == &other || probs_ == other.probs_;
    }

private:
    std::vector<double> probs_;
};

using SpacePtr = std::shared_ptr<const StateSpace>;

/// A loss X on a finite space: positive values are losses, negative values gains.
class LossProfile {
public:
    LossProfile(SpacePtr space, std::vector<double> values)
        : space_(std::move(space)), values_(std::move(values)) {
        if (!space_) {
            throw ArgumentError("loss profile needs a state space");
        }
        if (values_.size() != space_->size()) {
            throw DimensionError("loss profile has " + std::to_string(values_.size()) +
                                 " values for a space of " + std::to_string(space_->size()) + " states");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw DomainError("loss values must be finite");
            }
        }
    }

    static LossProfile constant(SpacePtr space, double c) {
        const auto n = space->size();
        return LossProfile(std::move(space), std::vector<double>(n, c));
    }

    const SpacePtr& space() const { return space_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }

    bool same_space(const LossProfile& other) const { return space_->same_as(*other.space_); }

private:
    SpacePtr space_;
    std::vector<double> values_;
};

inline void require_same_space(const LossProfile& x, const LossProfile& y) {
    if (!x.same_space(y)) {
        throw DimensionError("loss profiles live on different state spaces");
    }
}

template <class Op>
LossProfile zip_with(const LossProfile& x, const LossProfile& y, Op op) {
    require_same_space(x, y);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = op(x[i], y[i]);
    }
    return LossProfile(x.space(), std::move(out));
}

template <class Op>
LossProfile map_values(const LossProfile& x, Op op) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = op(x[i]);
    }
    return LossProfile(x.space(), std::move(out));
}

inline LossProfile operator+(const LossProfile& x, const LossProfile& y) {
    return zip_with(x, y, std::plus<>{});
}
inline LossProfile operator-(const LossProfile& x, const LossProfile& y) {
    return zip_with(x, y, std::minus<>{});
}
inline LossProfile operator+(const LossProfile& x, double m) {
    return map_values(x, [m](double v) { return v + m; });
}
inline LossProfile operator-(const LossProfile& x, double m) {
    return map_values(x, [m](double v) { return v - m; });
}
inline LossProfile operator*(double a, const LossProfile& x) {
    return map_values(x, [a](double v) { return a * v; });
}
inline LossProfile operator-(const LossProfile& x) {
    return map_values(x, [](double v) { return -v; });
}

/// X ≦ Y in the pointwise order.
inline bool pointwise_leq(const LossProfile& x, const LossProfile& y) {
    require_same_space(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > y[i]) {
            return false;
        }
    }
    return true;
}

inline double expectation(const LossProfile& x, std::span<const double> weights) {
    if (weights.size() != x.size()) {
        throw DimensionError("weight vector size does not match the profile");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += weights[i] * x[i];
    }
    return s;
}

inline double expectation(const LossProfile& x) { return expectation(x, x.space()->probs()); }

struct Atom {
    double value;
    double prob;
};

/**
 * Law of a loss: atoms sorted by strictly increasing value, masses summing
 * to one. Values closer than kMassTol are merged into a single atom.
 */
class LossDistribution {
public:
    explicit LossDistribution(std::vector<Atom> atoms) {
        if (atoms.empty()) {
            throw ArgumentError("distribution needs at least one atom");
        }
        std::stable_sort(atoms.begin(), atoms.end(),
                         [](const Atom& a, const Atom& b) { return a.value < b.value; });
        double total = 0.0;
        for (const Atom& a : atoms) {
            if (!std::isfinite(a.value)) {
                throw DomainError("atom values must be finite");
            }
            if (a.prob < 0.0 || a.prob > 1.0 + kMassTol) {
                throw DomainError("atom masses must lie in [0,1]");
            }
            total += a.prob;
            if (a.prob == 0.0) {
                continue;
            }
            if (!atoms_.empty() && a.value - atoms_.back().value <= kMassTol) {
                atoms_.back().prob += a.prob;
            } else {
                atoms_.push_back(a);
            }
        }
        if (atoms_.empty()) {
            throw ValidationError("distribution has no positive mass");
        }
        if (std::abs(total - 1.0) > kMassTol * static_cast<double>(atoms.size()) + kMassTol) {
            throw ValidationError("atom masses sum to " + std::to_string(total) + ", expected 1");
        }
        cumulative_.resize(atoms_.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < atoms_.size(); ++j) {
            acc += atoms_[j].prob;
            cumulative_[j] = acc;
        }
        cumulative_.back() = 1.0;
    }

    static LossDistribution constant(double c) { return LossDistribution({{c, 1.0}}); }

    std::span<const Atom> atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    /// F at the j-th atom value; the last entry is exactly 1.
    std::span<const double> cumulative() const { return cumulative_; }

    double min() const { return atoms_.front().value; }
    double max() const { return atoms_.back().value; }

    double mean() const {
        double s = 0.0;
        for (const Atom& a : atoms_) {
            s += a.value * a.prob;
        }
        return s;
    }

    LossDistribution scaled(double lambda) const {
        std::vector<Atom> out(atoms_.begin(), atoms_.end());
        for (Atom& a : out) {
            a.value *= lambda;
        }
        return LossDistribution(std::move(out));
    }

    LossDistribution shifted(double m) const {
        std::vector<Atom> out(atoms_.begin(), atoms_.end());
        for (Atom& a : out) {
            a.value += m;
        }
        return LossDistribution(std::move(out));
    }

private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
};

/// Law of x under arbitrary scenario weights (a probability vector on the states of x).
inline LossDistribution distribution_under(const LossProfile& x, std::span<const double> weights) {
    if (weights.size() != x.size()) {
        throw DimensionError("scenario has " + std::to_string(weights.size()) + " weights for " +
                             std::to_string(x.size()) + " states");
    }
    std::vector<Atom> atoms;
    atoms.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        atoms.push_back({x[i], weights[i]});
    }
    return LossDistribution(std::move(atoms));
}

/// Law of x under the reference probability of its space.
inline LossDistribution distribution_of(const LossProfile& x) {
    return distribution_under(x, x.space()->probs());
}

/// Levels strictly inside (0,1) where α ↦ VaR_α jumps: the strict partial sums of atom masses.
inline std::vector<double> quantile_breakpoints(const LossDistribution& d) {
    auto cum = d.cumulative();
    std::vector<double> out;
    for (std::size_t j = 0; j + 1 < cum.size(); ++j) {
        if (cum[j] > kMassTol && cum[j] < 1.0 - kMassTol) {
            out.push_back(cum[j]);
        }
    }
    return out;
}

/// Sorted union of level sets, with levels closer than kMassTol collapsed.
inline std::vector<double> merge_levels(std::vector<double> a, std::span<const double> b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    std::vector<double> out;
    for (double v : a) {
        if (out.empty() || v - out.back() > kMassTol) {
            out.push_back(v);
        }
    }
    return out;
}

/**
 * Monotone normalized set function on {0..k-1}, k ≤ 16, stored densely by
 * bitmask (bit i set means index i is in the subset).
 */
class Capacity {
public:
    static constexpr std::size_t kMaxIndices = 16;

    Capacity(std::size_t index_count, std::vector<double> values)
        : k_(index_count), values_(std::move(values)) {
        if (k_ == 0 || k_ > kMaxIndices) {
            throw ArgumentError("capacity index count must be in 1..16");
        }
        const std::size_t full = (std::size_t{1} << k_);
        if (values_.size() != full) {
            throw ArgumentError("capacity needs 2^k subset values");
        }
        if (values_[0] != 0.0) {
            throw ValidationError("capacity of the empty set must be 0");
        }
        if (std::abs(values_[full - 1] - 1.0) > kMassTol) {
            throw ValidationError("capacity of the full set must be 1");
        }
        for (std::size_t s = 0; s < full; ++s) {
            if (values_[s] < 0.0 || values_[s] > 1.0 + kMassTol) {
                throw ValidationError("capacity values must lie in [0,1]");
            }
            for (std::size_t i = 0; i < k_; ++i) {
                const std::size_t bit = std::size_t{1} << i;
                if ((s & bit) == 0 && values_[s] > values_[s | bit] + kMassTol) {
                    throw ValidationError("capacity is not monotone at subset " + std::to_string(s));
                }
            }
        }
    }

    std::size_t index_count() const { return k_; }
    double operator()(std::uint32_t mask) const { return values_.at(mask); }
    std::span<const double> values() const { return values_; }

    /// μ(J) = Σ_{i∈J} w_i.
    static Capacity additive(std::span<const double> weights) {
        const std::size_t k = weights.size();
        check_size(k);
        std::vector<double> v(std::size_t{1} << k, 0.0);
        for (std::size_t s = 1; s < v.size(); ++s) {
            for (std::size_t i = 0; i < k; ++i) {
                if (s & (std::size_t{1} << i)) {
                    v[s] += weights[i];
                }
            }
        }
        v.back() = 1.0;
        return Capacity(k, std::move(v));
    }

    /// μ(J) = 1 for every nonempty J; the Choquet average is the maximum.
    static Capacity sup(std::size_t k) {
        check_size(k);
        std::vector<double> v(std::size_t{1} << k, 1.0);
        v[0] = 0.0;
        return Capacity(k, std::move(v));
    }

    /// μ(J) = 1 only for the full set; the Choquet average is the minimum.
    static Capacity inf(std::size_t k) {
        check_size(k);
        std::vector<double> v(std::size_t{1} << k, 0.0);
        v.back() = 1.0;
        return Capacity(k, std::move(v));
    }

private:
    static void check_size(std::size_t k) {
        if (k == 0 || k > kMaxIndices) {
            throw ArgumentError("capacity index count must be in 1..16");
        }
    }

    std::size_t k_;
    std::vector<double> values_;
};

/// μ(J) = 1 iff |J| ≥ k - r + 1, so the Choquet average picks the r-th smallest value.
inline Capacity order_statistic_capacity(std::size_t k, std::size_t r) {
    if (k == 0 || k > Capacity::kMaxIndices) {
        throw ArgumentError("capacity index count must be in 1..16");
    }
    if (r < 1 || r > k) {
        throw ArgumentError("order statistic rank " + std::to_string(r) + " outside 1.." + std::to_string(k));
    }
    std::vector<double> v(std::size_t{1} << k, 0.0);
    for (std::size_t s = 0; s < v.size(); ++s) {
        if (static_cast<std::size_t>(std::popcount(static_cast<unsigned>(s))) >= k - r + 1) {
            v[s] = 1.0;
        }
    }
    return Capacity(k, std::move(v));
}

}  // namespace starrisk
