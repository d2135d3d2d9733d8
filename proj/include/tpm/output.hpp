#pragma once

// CSV tables and the JSON report document. Numbers are written with 17
// significant digits through std::to_chars, so output never depends on the
// process locale.

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "tpm/scenario.hpp"

namespace tpm {

inline std::string format_number(double v) {
    if (!std::isfinite(v)) {
        throw InvariantViolation("refusing to write a non-finite number");
    }
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    if (res.ec != std::errc{}) {
        throw std::runtime_error("number formatting failed");
    }
    return std::string(buf.data(), res.ptr);
}

inline void write_joint_csv(std::ostream& os, const TpmJointTable& t) {
    os << "m,n,w,p\n";
    for (const auto& r : t.rows) {
        os << r.m << ',' << r.n << ',' << format_number(r.work) << ',' << format_number(r.probability) << '\n';
    }
}

inline void write_extended_csv(std::ostream& os, const ExtendedOutcomeTable& t) {
    os << "m,mu,nu,n,mu2,nu2,W,p\n";
    for (const auto& r : t.rows) {
        os << r.first.system << ',' << r.first.probe0 << ',' << r.first.probe1 << ',' << r.second.system << ','
           << r.second.probe0 << ',' << r.second.probe1 << ',' << format_number(r.work) << ','
           << format_number(r.probability) << '\n';
    }
}

inline void write_distribution_csv(std::ostream& os, const WorkDistribution& d) {
    os << "w,p\n";
    for (const auto& b : d.bins) {
        os << format_number(b.work) << ',' << format_number(b.probability) << '\n';
    }
}

// One entry of a report. Non-gating checks are informational: they are
// reported but never change the exit status.
struct ReportCheck {
    std::string name;
    bool pass = false;
    double max_deviation = 0.0;
    std::string precondition_status = "n/a"; // held | not_held | n/a
    bool expected_fail = false;
    bool gating = true;
    std::string note;
};

inline ReportCheck from_check_report(const CheckReport& r) {
    ReportCheck c;
    c.name = r.name;
    c.pass = r.pass;
    c.max_deviation = r.max_deviation;
    c.precondition_status = r.precondition_held ? "held" : "not_held";
    c.note = r.note;
    return c;
}

// A check named "a.b" is expected to fail when the list holds "a.b" or "a".
inline bool is_expected_fail(const std::vector<std::string>& expected, const std::string& name) {
    const auto base = name.substr(0, name.find('.'));
    for (const auto& e : expected) {
        if (e == name || e == base) {
            return true;
        }
    }
    return false;
}

// 0 iff every gating check that is not expected to fail passed.
inline int checks_exit_code(const std::vector<ReportCheck>& checks) {
    for (const auto& c : checks) {
        if (c.gating && !c.expected_fail && !c.pass) {
            return 1;
        }
    }
    return 0;
}

namespace detail {

inline double report_probability(double p) {
    return std::abs(p) < kNegligibleProbability ? 0.0 : p;
}

inline double finite(double v, const std::string& what) {
    if (!std::isfinite(v)) {
        throw InvariantViolation(what + " is not finite");
    }
    return v;
}

} // namespace detail

struct ReportDocument {
    std::string command;
    std::string scenario_digest;
    std::string description;
    bool probes_defaulted = false;
    Tolerances tolerances;
    std::vector<ReportCheck> checks;
    std::optional<TpmJointTable> joint;
    std::optional<ExtendedOutcomeTable> extended;
    std::optional<WorkDistribution> system_distribution;
    std::optional<WorkDistribution> total_distribution;
    nlohmann::json quantities = nlohmann::json::object();

    int exit_code() const { return checks_exit_code(checks); }
};

inline nlohmann::json to_json(const WorkDistribution& d) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : d.bins) {
        out.push_back({{"w", detail::finite(b.work, "work")},
                       {"p", detail::report_probability(detail::finite(b.probability, "probability"))}});
    }
    return out;
}

inline nlohmann::json to_json(const ReportDocument& r) {
    using nlohmann::json;
    json doc;
    doc["command"] = r.command;
    doc["scenario_digest"] = r.scenario_digest;
    if (!r.description.empty()) {
        doc["description"] = r.description;
    }
    doc["probes_defaulted"] = r.probes_defaulted;
    doc["tolerances"] = {{"degeneracy_tol", r.tolerances.degeneracy_tol},
                         {"bin_tol", r.tolerances.bin_tol},
                         {"check_tol", r.tolerances.check_tol}};
    json checks = json::array();
    for (const auto& c : r.checks) {
        json cj = {{"name", c.name},
                   {"pass", c.pass},
                   {"max_deviation", detail::finite(c.max_deviation, c.name + " deviation")},
                   {"precondition_status", c.precondition_status},
                   {"expected_fail", c.expected_fail},
                   {"gating", c.gating}};
        if (!c.note.empty()) {
            cj["note"] = c.note;
        }
        checks.push_back(std::move(cj));
    }
    doc["checks"] = std::move(checks);
    json tables = json::object();
    if (r.joint) {
        json rows = json::array();
        for (const auto& row : r.joint->rows) {
            rows.push_back({{"m", row.m},
                            {"n", row.n},
                            {"w", detail::finite(row.work, "work")},
                            {"p", detail::report_probability(detail::finite(row.probability, "probability"))}});
        }
        tables["system"] = {{"levels", r.joint->levels}, {"rows", std::move(rows)}};
    }
    if (r.extended) {
        json rows = json::array();
        for (const auto& row : r.extended->rows) {
            rows.push_back({{"m", row.first.system},
                            {"mu", row.first.probe0},
                            {"nu", row.first.probe1},
                            {"n", row.second.system},
                            {"mu2", row.second.probe0},
                            {"nu2", row.second.probe1},
                            {"W", detail::finite(row.work, "work")},
                            {"p", detail::report_probability(detail::finite(row.probability, "probability"))}});
        }
        tables["extended"] = {{"system_levels", r.extended->system_levels},
                              {"probe0_levels", r.extended->probe0_levels},
                              {"probe1_levels", r.extended->probe1_levels},
                              {"probes_undisturbed", r.extended->probes_undisturbed},
                              {"rows", std::move(rows)}};
    }
    doc["tables"] = std::move(tables);
    json dists = json::object();
    if (r.system_distribution) {
        dists["system"] = to_json(*r.system_distribution);
    }
    if (r.total_distribution) {
        dists["total"] = to_json(*r.total_distribution);
    }
    doc["distributions"] = std::move(dists);
    doc["quantities"] = r.quantities;
    doc["exit_code"] = r.exit_code();
    return doc;
}

} // namespace tpm
