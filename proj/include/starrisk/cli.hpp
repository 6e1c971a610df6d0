#pragma once

#include "starrisk/aggregate.hpp"
#include "starrisk/axioms.hpp"
#include "starrisk/envelope.hpp"
#include "starrisk/errors.hpp"
#include "starrisk/law_invariant.hpp"
#include "starrisk/measures.hpp"
#include "starrisk/optimize.hpp"
#include "starrisk/state_space.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace starrisk::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Numbers
// ---------------------------------------------------------------------------

/// Rounds to 15 significant digits, the precision every report carries.
inline double round15(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return std::strtod(buf, nullptr);
}

inline Json num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return round15(v);
}

inline Json nums(std::span<const double> v) {
    Json a = Json::array();
    for (double x : v) {
        a.push_back(num(x));
    }
    return a;
}

inline Json profile_json(const LossProfile& x) { return nums(x.values()); }

// ---------------------------------------------------------------------------
// Scenario CSV: state,prob,<loss columns...>
// ---------------------------------------------------------------------------

struct Scenario {
    SpacePtr space;
    std::vector<std::string> states;
    std::vector<std::string> columns;
    std::vector<LossProfile> profiles;

    const LossProfile& column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) {
                return profiles[i];
            }
        }
        throw ArgumentError("unknown loss column '" + name + "'");
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        out.push_back(trim(cur));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

inline double parse_real(const std::string& text, std::size_t row, const std::string& field) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
        throw ParseError("row " + std::to_string(row) + ", field '" + field + "': '" + text + "' is not a finite number");
    }
    return v;
}

}  // namespace detail

inline Scenario parse_csv(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++row;
        if (!detail::trim(line).empty()) {
            header = detail::split_csv(detail::trim(line));
        }
    }
    if (header.size() < 3 || header[0] != "state" || header[1] != "prob") {
        throw ParseError("row " + std::to_string(row) + ": header must be 'state,prob,<column>...'");
    }
    Scenario sc;
    sc.columns.assign(header.begin() + 2, header.end());
    for (std::size_t i = 0; i < sc.columns.size(); ++i) {
        if (sc.columns[i].empty()) {
            throw ParseError("row " + std::to_string(row) + ", field " + std::to_string(i + 3) + ": empty column name");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (sc.columns[i] == sc.columns[j]) {
                throw ParseError("row " + std::to_string(row) + ": duplicate column '" + sc.columns[i] + "'");
            }
        }
    }
    std::vector<double> probs;
    std::vector<std::vector<double>> cols(sc.columns.size());
    while (std::getline(in, line)) {
        ++row;
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto f = detail::split_csv(line);
        if (f.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(f.size()));
        }
        sc.states.push_back(f[0]);
        probs.push_back(detail::parse_real(f[1], row, "prob"));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            cols[c].push_back(detail::parse_real(f[c + 2], row, sc.columns[c]));
        }
    }
    if (probs.empty()) {
        throw ParseError("no state rows");
    }
    try {
        sc.space = StateSpace::make(probs);
    } catch (const Error& e) {
        throw ValidationError(std::string("prob column: ") + e.what());
    }
    for (auto& c : cols) {
        sc.profiles.emplace_back(sc.space, std::move(c));
    }
    return sc;
}

inline Scenario load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open input '" + path + "'");
    }
    return parse_csv(in);
}

// ---------------------------------------------------------------------------
// Measure specs
// ---------------------------------------------------------------------------

namespace detail {

inline const Json& field(const Json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(path + ": missing field '" + key + "'");
    }
    return j.at(key);
}

inline double number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ParseError(path + ": expected a number");
    }
    return j.get<double>();
}

inline double number_field(const Json& j, const char* key, const std::string& path) {
    return number(field(j, key, path), path + "." + key);
}

inline std::vector<double> number_list(const Json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ParseError(path + ": expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline std::vector<std::vector<double>> matrix(const Json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ParseError(path + ": expected an array of arrays");
    }
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number_list(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline std::string string_field(const Json& j, const char* key, const std::string& path) {
    const Json& v = field(j, key, path);
    if (!v.is_string()) {
        throw ParseError(path + "." + key + ": expected a string");
    }
    return v.get<std::string>();
}

/// Pairs given either as [a, b] arrays or as objects with the two named keys.
inline std::vector<std::pair<double, double>> pairs(const Json& j, const char* first, const char* second,
                                                    const std::string& path) {
    if (!j.is_array()) {
        throw ParseError(path + ": expected an array");
    }
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (j[i].is_array()) {
            const auto v = number_list(j[i], p);
            if (v.size() != 2) {
                throw ParseError(p + ": expected two numbers");
            }
            out.emplace_back(v[0], v[1]);
        } else {
            out.emplace_back(number_field(j[i], first, p), number_field(j[i], second, p));
        }
    }
    return out;
}

}  // namespace detail

class SpecParser {
public:
    explicit SpecParser(InfConvConfig infconv) : infconv_(infconv) {}

    /// Parses {"measures": [...]}; later entries may reference earlier ones by name.
    std::vector<RiskEvaluator> parse(const Json& spec) {
        const Json& list = detail::field(spec, "measures", "spec");
        if (!list.is_array() || list.empty()) {
            throw ParseError("spec.measures: expected a nonempty array");
        }
        std::vector<RiskEvaluator> out;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string path = "measures[" + std::to_string(i) + "]";
            auto m = build(list[i], path);
            named_.insert_or_assign(m.name(), m);
            out.push_back(std::move(m));
        }
        return out;
    }

    RiskEvaluator build(const Json& j, const std::string& path) {
        if (j.is_string()) {
            const auto it = named_.find(j.get<std::string>());
            if (it == named_.end()) {
                throw ParseError(path + ": unknown measure '" + j.get<std::string>() + "'");
            }
            return it->second;
        }
        if (!j.is_object()) {
            throw ParseError(path + ": expected a measure object or name");
        }
        const std::string kind = detail::string_field(j, "kind", path);
        RiskEvaluator m = build_kind(kind, j, path);
        if (j.contains("name")) {
            if (!j["name"].is_string()) {
                throw ParseError(path + ".name: expected a string");
            }
            m = m.renamed(j["name"].get<std::string>());
        }
        return m;
    }

private:
    MeasureFamily members(const Json& j, const std::string& path) {
        const Json& list = detail::field(j, "members", path);
        if (!list.is_array() || list.empty()) {
            throw ParseError(path + ".members: expected a nonempty array");
        }
        MeasureFamily fam;
        for (std::size_t i = 0; i < list.size(); ++i) {
            fam.push_back(build(list[i], path + ".members[" + std::to_string(i) + "]"));
        }
        return fam;
    }

    static Capacity capacity(const Json& j, std::size_t k, const std::string& path) {
        if (!j.is_object()) {
            throw ParseError(path + ": expected an object");
        }
        if (j.contains("values")) {
            const Json& vals = j["values"];
            if (!vals.is_object()) {
                throw ParseError(path + ".values: expected an object keyed by subset bitmask");
            }
            std::vector<double> v(std::size_t{1} << k, std::nan(""));
            for (const auto& [key, val] : vals.items()) {
                char* end = nullptr;
                const unsigned long mask = std::strtoul(key.c_str(), &end, 10);
                if (key.empty() || *end != '\0' || mask >= v.size()) {
                    throw ParseError(path + ".values: bad subset key '" + key + "'");
                }
                v[mask] = detail::number(val, path + ".values." + key);
            }
            for (std::size_t s = 0; s < v.size(); ++s) {
                if (std::isnan(v[s])) {
                    throw ParseError(path + ".values: missing subset " + std::to_string(s));
                }
            }
            return Capacity(k, std::move(v));
        }
        const std::string type = detail::string_field(j, "type", path);
        if (type == "additive") {
            const auto w = detail::number_list(detail::field(j, "weights", path), path + ".weights");
            if (w.size() != k) {
                throw ParseError(path + ".weights: expected " + std::to_string(k) + " weights");
            }
            return Capacity::additive(w);
        }
        if (type == "sup") return Capacity::sup(k);
        if (type == "inf") return Capacity::inf(k);
        if (type == "median") return order_statistic_capacity(k, (k + 1) / 2);
        if (type == "order_statistic") {
            const double r = detail::number_field(j, "r", path);
            if (r < 1 || r > static_cast<double>(k) || r != std::floor(r)) {
                throw ParseError(path + ".r: expected an integer in 1.." + std::to_string(k));
            }
            return order_statistic_capacity(k, static_cast<std::size_t>(r));
        }
        throw ParseError(path + ".type: unknown capacity type '" + type + "'");
    }

    RiskEvaluator build_kind(const std::string& kind, const Json& j, const std::string& path) {
        auto beta = [&] { return detail::number_field(j, "beta", path); };
        if (kind == "var") return var_measure(beta());
        if (kind == "es") return es_measure(beta());
        if (kind == "mean") return mean_measure();
        if (kind == "worst_case") return worst_case_measure();
        if (kind == "maxvar" || kind == "medvar") {
            auto sc = detail::matrix(detail::field(j, "scenarios", path), path + ".scenarios");
            return kind == "maxvar" ? maxvar_measure(std::move(sc), beta()) : medvar_measure(std::move(sc), beta());
        }
        if (kind == "lvar") {
            std::vector<LossBenchmark::Step> steps;
            for (auto [t, a] : detail::pairs(detail::field(j, "benchmark_steps", path), "start", "level",
                                             path + ".benchmark_steps")) {
                steps.push_back({t, a});
            }
            return lvar_measure(LossBenchmark(std::move(steps)));
        }
        if (kind == "shortfall") {
            std::vector<Utility::Knot> knots;
            for (auto [x, u] : detail::pairs(detail::field(j, "utility_knots", path), "x", "u", path + ".utility_knots")) {
                knots.push_back({x, u});
            }
            return shortfall_measure(Utility(std::move(knots)));
        }
        if (kind == "entropic") {
            const double lambda = detail::number_field(j, "lambda", path);
            if (j.contains("reference")) {
                return entropic_measure(lambda, detail::number_list(j["reference"], path + ".reference"));
            }
            return entropic_measure(lambda);
        }
        if (kind == "choquet") {
            auto fam = members(j, path);
            const std::size_t k = fam.size();
            return make_choquet(std::move(fam), capacity(detail::field(j, "capacity", path), k, path + ".capacity"));
        }
        if (kind == "ecb_blend") return make_ecb_blend(members(j, path), detail::number_field(j, "weight", path));
        if (kind == "sup") return make_sup(members(j, path));
        if (kind == "inf") return make_inf(members(j, path));
        if (kind == "median") return make_median(members(j, path));
        if (kind == "mitigated") return mitigated_measure(members(j, path));
        if (kind == "infconv") {
            InfConvConfig cfg = infconv_;
            if (j.contains("starts")) {
                cfg.starts = static_cast<std::size_t>(detail::number(j["starts"], path + ".starts"));
            }
            if (j.contains("normality_override")) {
                cfg.normality_override = j["normality_override"].get<bool>();
            }
            return make_inf_convolution(members(j, path), cfg);
        }
        throw ParseError(path + ".kind: unknown measure kind '" + kind + "'");
    }

    InfConvConfig infconv_;
    std::map<std::string, RiskEvaluator> named_;
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string command;
    std::optional<std::string> input;
    std::optional<std::string> spec;
    std::uint64_t seed = 20210;
    double tol = 1e-9;
    std::optional<std::string> out;
    bool pretty = false;
};

struct CommandResult {
    Json report;
    int status = 0;
};

inline Json witness_json(const Witness& w) {
    Json j;
    j["profiles"] = Json::array();
    for (const auto& p : w.profiles) {
        j["profiles"].push_back(profile_json(p));
    }
    j["scalars"] = nums(w.scalars);
    j["lhs"] = num(w.lhs);
    j["rhs"] = num(w.rhs);
    j["relation"] = w.relation;
    return j;
}

inline Json report_json(const AxiomReport& r) {
    Json j;
    j["property"] = r.property;
    j["verdict"] = std::string(verdict_name(r.verdict));
    j["violations"] = r.violations;
    j["probes_used"] = r.probes_used;
    j["tolerance"] = num(r.tolerance);
    if (!r.note.empty()) {
        j["note"] = r.note;
    }
    j["witness"] = r.witness ? witness_json(*r.witness) : Json(nullptr);
    return j;
}

inline Json split_json(const SplitSolution& s) {
    Json j;
    j["total"] = num(s.total);
    j["parts"] = Json::array();
    for (const auto& p : s.parts) {
        j["parts"].push_back(profile_json(p));
    }
    j["converged"] = s.converged;
    j["attainment_unknown"] = s.attainment_unknown;
    j["best_start"] = s.best_start;
    return j;
}

class Session {
public:
    Session(RunConfig cfg, Json spec, std::optional<Scenario> scenario)
        : cfg_(std::move(cfg)), spec_(std::move(spec)), scenario_(std::move(scenario)) {
        infconv_.seed = cfg_.seed;
        SpecParser parser(infconv_);
        measures_ = parser.parse(spec_);
    }

    CommandResult run() {
        CommandResult res;
        res.report["command"] = cfg_.command;
        res.report["version"] = kVersion;
        res.report["seed"] = cfg_.seed;
        res.report["tol"] = num(cfg_.tol);
        const std::string& c = cfg_.command;
        if (c == "eval") eval(res);
        else if (c == "axioms") axioms(res);
        else if (c == "aggregate") aggregate(res);
        else if (c == "envelope") envelope(res);
        else if (c == "infconv") infconv(res);
        else if (c == "optimize") optimize(res);
        else if (c == "margin") margin(res);
        else throw ArgumentError("unknown command '" + c + "'");
        return res;
    }

private:
    const Scenario& scenario() const {
        if (!scenario_) {
            throw ArgumentError("command '" + cfg_.command + "' needs --input");
        }
        return *scenario_;
    }

    std::vector<std::size_t> selected_columns(const char* key = "columns") const {
        const Scenario& sc = scenario();
        std::vector<std::size_t> out;
        if (spec_.contains(key)) {
            const Json& list = spec_[key];
            if (!list.is_array()) {
                throw ParseError(std::string("spec.") + key + ": expected an array of column names");
            }
            for (const auto& name : list) {
                if (!name.is_string()) {
                    throw ParseError(std::string("spec.") + key + ": expected column names");
                }
                bool found = false;
                for (std::size_t i = 0; i < sc.columns.size(); ++i) {
                    if (sc.columns[i] == name.get<std::string>()) {
                        out.push_back(i);
                        found = true;
                    }
                }
                if (!found) {
                    throw ArgumentError("unknown loss column '" + name.get<std::string>() + "'");
                }
            }
        } else {
            for (std::size_t i = 0; i < sc.columns.size(); ++i) {
                out.push_back(i);
            }
        }
        return out;
    }

    std::size_t count_param(const char* key, std::size_t fallback) const {
        if (!spec_.contains(key)) {
            return fallback;
        }
        const double v = detail::number(spec_[key], std::string("spec.") + key);
        if (v < 1 || v != std::floor(v)) {
            throw ParseError(std::string("spec.") + key + ": expected a positive integer");
        }
        return static_cast<std::size_t>(v);
    }

    ProbeSet probes() const {
        const std::size_t n = count_param("probes", 200);
        return scenario_ ? make_probe_set(scenario_->space, n, cfg_.seed) : default_probe_set(cfg_.seed, n);
    }

    void eval(CommandResult& res) {
        const Scenario& sc = scenario();
        Json out = Json::array();
        for (const auto& m : measures_) {
            for (std::size_t c : selected_columns()) {
                out.push_back({{"measure", m.name()}, {"column", sc.columns[c]}, {"value", num(m(sc.profiles[c]))}});
            }
        }
        res.report["results"] = out;
    }

    std::vector<std::string> properties_for(const RiskEvaluator& m) const {
        std::vector<std::string> out;
        if (spec_.contains("properties")) {
            for (const auto& p : spec_["properties"]) {
                if (!p.is_string()) {
                    throw ParseError("spec.properties: expected property names");
                }
                out.push_back(p.get<std::string>());
            }
            return out;
        }
        for (auto p : kCheckableProperties) {
            if (m.claims(parse_property(p))) {
                out.emplace_back(p);
            }
        }
        return out;
    }

    void axioms(CommandResult& res) {
        const auto pr = probes();
        Json out = Json::array();
        for (const auto& m : measures_) {
            for (const auto& p : properties_for(m)) {
                const auto rep = check_axiom(m, p, pr, cfg_.tol);
                if (rep.verdict == Verdict::violated) {
                    res.status = 1;
                }
                Json j = report_json(rep);
                j["measure"] = m.name();
                out.push_back(j);
            }
        }
        res.report["reports"] = out;
    }

    void aggregate(CommandResult& res) {
        const auto pr = probes();
        Json out = Json::array();
        for (const auto& m : measures_) {
            Json j;
            j["measure"] = m.name();
            Json values = Json::object();
            if (scenario_) {
                for (std::size_t c : selected_columns()) {
                    values[scenario_->columns[c]] = num(m(scenario_->profiles[c]));
                }
            }
            j["values"] = values;
            const auto rep = check_axiom(m, Property::star_shaped, pr, cfg_.tol);
            if (rep.verdict == Verdict::violated) {
                res.status = 1;
            }
            j["star_shaped"] = report_json(rep);
            out.push_back(j);
        }
        res.report["aggregates"] = out;
    }

    void envelope(CommandResult& res) {
        const auto pr = probes();
        const std::size_t ys = count_param("random_ys", 50);
        Json out = Json::array();
        for (const auto& m : measures_) {
            const auto ver = verify_min_representation(m, pr, cfg_.tol, ys);
            if (ver.report.verdict == Verdict::violated) {
                res.status = 1;
            }
            Json rows = Json::array();
            for (const auto& r : ver.rows) {
                rows.push_back({{"x", profile_json(r.x)},
                                {"rho_x", num(r.rho_x)},
                                {"tight_member_value", num(r.tight_member_value)},
                                {"min_family_value", num(r.min_family_value)},
                                {"domination_ok", r.domination_ok}});
            }
            Json j = report_json(ver.report);
            j["measure"] = m.name();
            j["rows"] = rows;
            out.push_back(j);
        }
        res.report["envelopes"] = out;
        if (spec_.contains("op")) {
            RepresentationConfig rc;
            rc.tol = cfg_.tol;
            rc.infconv = infconv_;
            if (spec_.contains("weights")) {
                rc.weights = detail::number_list(spec_["weights"], "spec.weights");
            }
            rc.family_size = count_param("family_size", rc.family_size);
            const auto op = parse_aggregate_op(detail::string_field(spec_, "op", "spec"));
            const auto rep = aggregate_representation_check(measures_, op, pr, rc);
            if (rep.verdict == Verdict::violated) {
                res.status = 1;
            }
            res.report["aggregate_representation"] = report_json(rep);
        }
    }

    void infconv(CommandResult& res) {
        const Scenario& sc = scenario();
        InfConvConfig cfg = infconv_;
        cfg.starts = count_param("starts", cfg.starts);
        if (spec_.contains("normality_override")) {
            cfg.normality_override = spec_["normality_override"].get<bool>();
        }
        const auto nr = normality_check(measures_, sc.space, cfg.normality_samples, cfg.seed);
        Json norm;
        norm["status"] = std::string(normality_name(nr.status));
        norm["samples_used"] = nr.samples_used;
        if (!nr.passed()) {
            norm["witness_total"] = num(nr.witness_total);
            norm["witness"] = Json::array();
            for (const auto& z : nr.witness) {
                norm["witness"].push_back(profile_json(z));
            }
        }
        res.report["members"] = family_label(measures_);
        res.report["normality"] = norm;
        if (!nr.passed() && !cfg.normality_override) {
            res.report["refused"] = true;
            res.status = 1;
            return;
        }
        Json out = Json::array();
        for (std::size_t c : selected_columns()) {
            Json j = split_json(inf_convolution(measures_, sc.profiles[c], cfg, &nr));
            j["column"] = sc.columns[c];
            out.push_back(j);
        }
        res.report["splits"] = out;
    }

    void optimize(CommandResult& res) {
        const Scenario& sc = scenario();
        const auto cols = selected_columns("actions");
        std::vector<std::string> labels;
        std::vector<LossProfile> losses;
        for (std::size_t c : cols) {
            labels.push_back(sc.columns[c]);
            losses.push_back(sc.profiles[c]);
        }
        const ActionLossTable table(labels, losses);
        auto decomposition_json = [&](const ActionChoice& direct, const DecompositionReport& d) {
            Json j;
            j["argmin"] = direct.action;
            j["value"] = num(direct.value);
            j["method"] = "direct";
            j["decomposition_gap"] = num(d.gap);
            j["joint_argmin"] = d.joint.action;
            j["joint_value"] = num(d.joint.value);
            j["transfer_ok"] = d.transfer_ok;
            j["verdict"] = std::string(verdict_name(d.report.verdict));
            if (d.report.verdict == Verdict::violated) {
                res.status = 1;
            }
            return j;
        };
        Json out = Json::array();
        for (const auto& m : measures_) {
            Json j{{"measure", m.name()}};
            j.update(decomposition_json(minimize_risk(m, table), decomposition_check(m, table, cfg_.tol)));
            out.push_back(j);
        }
        res.report["actions"] = out;
        if (spec_.value("robust", false)) {
            Json j{{"members", family_label(measures_)}};
            j.update(decomposition_json(robust_minimize(measures_, table),
                                        decomposition_check(measures_, table, cfg_.tol)));
            res.report["robust"] = j;
        }
        if (spec_.contains("portfolio")) {
            const Json& p = spec_["portfolio"];
            PortfolioProblem prob;
            prob.pricing = detail::number_list(detail::field(p, "pricing", "spec.portfolio"), "spec.portfolio.pricing");
            prob.budget = detail::number_field(p, "budget", "spec.portfolio");
            if (prob.pricing.size() != sc.space->size()) {
                throw DimensionError("spec.portfolio.pricing: expected one weight per state");
            }
            std::vector<std::string> names;
            if (p.contains("candidates")) {
                for (const auto& n : p["candidates"]) {
                    names.push_back(n.get<std::string>());
                }
            } else {
                names = sc.columns;
            }
            for (const auto& n : names) {
                prob.feasible.push_back(sc.column(n));
            }
            Json pout = Json::array();
            for (const auto& m : measures_) {
                const auto r = portfolio_select(m, prob);
                Json j{{"measure", m.name()}, {"feasible", r.feasible}};
                if (!r.feasible) {
                    j["min_price"] = num(r.min_price);
                    res.status = 1;
                } else {
                    j["argmin"] = names[r.index];
                    j["value"] = num(r.value);
                    j["method"] = "envelope";
                    j["direct_argmin"] = names[r.direct_index];
                    j["direct_value"] = num(r.direct_value);
                    j["decomposition_gap"] = num(std::abs(r.value - r.direct_value));
                    j["routes_agree"] = r.routes_agree;
                    if (!r.routes_agree) {
                        res.status = 1;
                    }
                }
                pout.push_back(j);
            }
            res.report["portfolio"] = pout;
        }
    }

    void margin(CommandResult& res) {
        const Scenario& sc = scenario();
        std::vector<std::uint32_t> masks;
        const Json& adm = detail::field(spec_, "admissible", "spec");
        if (!adm.is_array()) {
            throw ParseError("spec.admissible: expected an array of member index lists");
        }
        for (std::size_t i = 0; i < adm.size(); ++i) {
            std::uint32_t mask = 0;
            for (double v : detail::number_list(adm[i], "spec.admissible[" + std::to_string(i) + "]")) {
                if (v < 0 || v >= static_cast<double>(measures_.size()) || v != std::floor(v)) {
                    throw ParseError("spec.admissible[" + std::to_string(i) + "]: member index out of range");
                }
                mask |= 1u << static_cast<unsigned>(v);
            }
            masks.push_back(mask);
        }
        Json out = Json::array();
        for (std::size_t c : selected_columns()) {
            Json j;
            j["column"] = sc.columns[c];
            try {
                const auto r = ccp_margin(measures_, masks, sc.profiles[c], infconv_);
                Json members = Json::array();
                for (std::size_t i = 0; i < measures_.size(); ++i) {
                    if (r.subset & (1u << i)) {
                        members.push_back(measures_[i].name());
                    }
                }
                j["subset"] = members;
                j["margin"] = num(r.split.total);
                j["split"] = split_json(r.split);
                j["subset_totals"] = nums(r.subset_totals);
            } catch (const RefusedError& e) {
                j["refused"] = e.what();
                res.status = 1;
            }
            out.push_back(j);
        }
        res.report["margins"] = out;
    }

    RunConfig cfg_;
    Json spec_;
    std::optional<Scenario> scenario_;
    InfConvConfig infconv_;
    std::vector<RiskEvaluator> measures_;
};

inline std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation_error";
    if (dynamic_cast<const DimensionError*>(&e)) return "dimension_error";
    if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
    if (dynamic_cast<const ArgumentError*>(&e)) return "argument_error";
    if (dynamic_cast<const PrecisionError*>(&e)) return "precision_error";
    if (dynamic_cast<const SearchError*>(&e)) return "search_error";
    if (dynamic_cast<const RefusedError*>(&e)) return "refused";
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "parse_error";
    return "error";
}

/// Runs one command and writes its JSON report. Returns the exit status: 0 on
/// success, 1 when a violation was found, 2 on input errors.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    CommandResult res;
    try {
        if (!cfg.spec) {
            throw ArgumentError("--spec is required");
        }
        std::ifstream sin(*cfg.spec);
        if (!sin) {
            throw ParseError("cannot open spec '" + *cfg.spec + "'");
        }
        Json spec;
        try {
            spec = Json::parse(sin);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("spec '" + *cfg.spec + "': " + e.what());
        }
        std::optional<Scenario> sc;
        if (cfg.input) {
            sc = load_csv(*cfg.input);
        }
        Session session(cfg, std::move(spec), std::move(sc));
        res = session.run();
    } catch (const std::exception& e) {
        Json j{{"command", cfg.command}, {"error", error_kind(e)}, {"message", e.what()}};
        err << j.dump() << '\n';
        return 2;
    }
    const std::string text = res.report.dump(cfg.pretty ? 2 : -1) + "\n";
    if (cfg.out) {
        std::ofstream f(*cfg.out, std::ios::binary);
        if (!f) {
            err << Json{{"command", cfg.command}, {"error", "io_error"}, {"message", "cannot write " + *cfg.out}}.dump()
                << '\n';
            return 2;
        }
        f << text;
    } else {
        out << text;
    }
    return res.status;
}

}  // namespace starrisk::cli
