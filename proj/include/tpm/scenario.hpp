#pragma once

// Scenario documents: JSON with complex scalars as [re, im] pairs and
// matrices as row-major arrays of rows. A bare number is read as a real
// scalar; writing always emits pairs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tpm/tpm_extended.hpp"

namespace tpm {

inline constexpr const char* kScenarioVersion = "tpm-scenario/1";

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& field, const std::string& what)
        : std::runtime_error("scenario field '" + field + "': " + what), field_(field) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct Tolerances {
    double degeneracy_tol = kDefaultDegeneracyTol;
    double bin_tol = kDefaultBinTol;
    double check_tol = kDefaultNormTol;
};

struct ProbeSpec {
    Index dim = 1;
    std::vector<double> probe_energies;   // diagonal H_A; ignored when `hamiltonian` is set
    std::optional<Matrix> hamiltonian;    // general H_A
    std::variant<Index, Vector> xi = Index{0};
    std::vector<std::size_t> pointer_assignment; // empty: a -> a mod N
    std::optional<Matrix> explicit_unitary;
};

enum class StateKind { matrix, pure, maximally_mixed };

struct StateSpec {
    StateKind kind = StateKind::maximally_mixed;
    Matrix matrix;
    Vector amplitudes;
};

struct ScenarioFile {
    std::string version = kScenarioVersion;
    std::string description;
    Matrix hamiltonian;
    std::vector<double> padding_levels; // extra outcomes with zero projection
    Matrix process_unitary;
    std::vector<ProbeSpec> probes;      // empty or two
    std::array<double, 2> thetas{0.0, 0.0};
    StateSpec state;
    Tolerances tolerances;
    std::vector<std::string> expected_fail;
};

namespace json_io {

using nlohmann::json;

inline Complex read_scalar(const json& j, const std::string& field) {
    if (j.is_number()) {
        return {j.get<double>(), 0.0};
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw ScenarioError(field, "expected a number or an [re, im] pair");
}

inline json write_scalar(Complex z) {
    return json::array({z.real(), z.imag()});
}

inline Matrix read_matrix(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) {
        throw ScenarioError(field, "expected a non-empty array of rows");
    }
    const auto rows = static_cast<Index>(j.size());
    if (!j[0].is_array() || j[0].empty()) {
        throw ScenarioError(field, "expected rows to be non-empty arrays");
    }
    const auto cols = static_cast<Index>(j[0].size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            throw ScenarioError(field, "row " + std::to_string(r) + " has the wrong length");
        }
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = read_scalar(row[static_cast<std::size_t>(c)],
                                  field + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
        }
    }
    if (!m.allFinite()) {
        throw ScenarioError(field, "non-finite entry");
    }
    return m;
}

inline json write_matrix(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) {
            row.push_back(write_scalar(m(r, c)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Vector read_vector(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) {
        throw ScenarioError(field, "expected a non-empty array");
    }
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Index>(i)) = read_scalar(j[i], field + "[" + std::to_string(i) + "]");
    }
    return v;
}

inline json write_vector(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        out.push_back(write_scalar(v(i)));
    }
    return out;
}

template <typename T>
T read_field(const json& obj, const char* key, const std::string& field) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ScenarioError(field + "." + key, e.what());
    }
}

} // namespace json_io

inline ScenarioFile parse_scenario(const nlohmann::json& doc) {
    using namespace json_io;
    if (!doc.is_object()) {
        throw ScenarioError("<root>", "expected an object");
    }
    ScenarioFile s;
    s.version = doc.value("version", std::string(kScenarioVersion));
    if (s.version != kScenarioVersion) {
        throw ScenarioError("version", "unsupported version '" + s.version + "'");
    }
    s.description = doc.value("description", std::string());
    if (!doc.contains("system")) {
        throw ScenarioError("system", "missing");
    }
    const auto& sys = doc.at("system");
    if (!sys.contains("hamiltonian")) {
        throw ScenarioError("system.hamiltonian", "missing");
    }
    s.hamiltonian = read_matrix(sys.at("hamiltonian"), "system.hamiltonian");
    if (sys.contains("process_unitary")) {
        s.process_unitary = read_matrix(sys.at("process_unitary"), "system.process_unitary");
    } else {
        s.process_unitary = Matrix::Identity(s.hamiltonian.rows(), s.hamiltonian.rows());
    }
    if (sys.contains("padding_levels")) {
        s.padding_levels = read_field<std::vector<double>>(sys, "padding_levels", "system");
    }

    if (doc.contains("probes")) {
        const auto& probes = doc.at("probes");
        if (!probes.is_array() || (probes.size() != 0 && probes.size() != 2)) {
            throw ScenarioError("probes", "expected an array of zero or two probes");
        }
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const std::string field = "probes[" + std::to_string(j) + "]";
            const auto& p = probes[j];
            ProbeSpec spec;
            spec.dim = read_field<Index>(p, "dim", field);
            if (p.contains("hamiltonian")) {
                spec.hamiltonian = read_matrix(p.at("hamiltonian"), field + ".hamiltonian");
            } else if (p.contains("probe_energies")) {
                spec.probe_energies = read_field<std::vector<double>>(p, "probe_energies", field);
            } else {
                spec.probe_energies.assign(static_cast<std::size_t>(std::max<Index>(spec.dim, 0)), 0.0);
            }
            if (p.contains("xi")) {
                if (p.at("xi").is_number_integer()) {
                    spec.xi = p.at("xi").get<Index>();
                } else {
                    spec.xi = read_vector(p.at("xi"), field + ".xi");
                }
            }
            if (p.contains("pointer_assignment")) {
                spec.pointer_assignment = read_field<std::vector<std::size_t>>(p, "pointer_assignment", field);
            }
            if (p.contains("explicit_unitary")) {
                spec.explicit_unitary = read_matrix(p.at("explicit_unitary"), field + ".explicit_unitary");
            }
            s.probes.push_back(std::move(spec));
        }
    }

    if (doc.contains("thetas")) {
        const auto th = read_field<std::vector<double>>(doc, "thetas", "<root>");
        if (th.size() != 2) {
            throw ScenarioError("thetas", "expected [theta0, theta1]");
        }
        s.thetas = {th[0], th[1]};
    }

    if (doc.contains("state")) {
        const auto& st = doc.at("state");
        const auto kind = read_field<std::string>(st, "kind", "state");
        if (kind == "matrix") {
            s.state.kind = StateKind::matrix;
            s.state.matrix = read_matrix(st.at("data"), "state.data");
        } else if (kind == "pure") {
            s.state.kind = StateKind::pure;
            s.state.amplitudes = read_vector(st.at("data"), "state.data");
        } else if (kind == "maximally_mixed") {
            s.state.kind = StateKind::maximally_mixed;
        } else {
            throw ScenarioError("state.kind", "unknown kind '" + kind + "'");
        }
    }

    if (doc.contains("tolerances")) {
        const auto& t = doc.at("tolerances");
        s.tolerances.degeneracy_tol = t.value("degeneracy_tol", s.tolerances.degeneracy_tol);
        s.tolerances.bin_tol = t.value("bin_tol", s.tolerances.bin_tol);
        s.tolerances.check_tol = t.value("check_tol", s.tolerances.check_tol);
    }
    if (doc.contains("expected_fail")) {
        s.expected_fail = read_field<std::vector<std::string>>(doc, "expected_fail", "<root>");
    }
    return s;
}

inline nlohmann::json to_json(const ScenarioFile& s) {
    using namespace json_io;
    json doc;
    doc["version"] = s.version;
    if (!s.description.empty()) {
        doc["description"] = s.description;
    }
    doc["system"]["hamiltonian"] = write_matrix(s.hamiltonian);
    doc["system"]["process_unitary"] = write_matrix(s.process_unitary);
    if (!s.padding_levels.empty()) {
        doc["system"]["padding_levels"] = s.padding_levels;
    }
    if (!s.probes.empty()) {
        json probes = json::array();
        for (const auto& p : s.probes) {
            json pj;
            pj["dim"] = p.dim;
            if (p.hamiltonian) {
                pj["hamiltonian"] = write_matrix(*p.hamiltonian);
            } else {
                pj["probe_energies"] = p.probe_energies;
            }
            if (std::holds_alternative<Index>(p.xi)) {
                pj["xi"] = std::get<Index>(p.xi);
            } else {
                pj["xi"] = write_vector(std::get<Vector>(p.xi));
            }
            if (!p.pointer_assignment.empty()) {
                pj["pointer_assignment"] = p.pointer_assignment;
            }
            if (p.explicit_unitary) {
                pj["explicit_unitary"] = write_matrix(*p.explicit_unitary);
            }
            probes.push_back(std::move(pj));
        }
        doc["probes"] = std::move(probes);
    }
    doc["thetas"] = {s.thetas[0], s.thetas[1]};
    switch (s.state.kind) {
    case StateKind::matrix:
        doc["state"] = {{"kind", "matrix"}, {"data", write_matrix(s.state.matrix)}};
        break;
    case StateKind::pure:
        doc["state"] = {{"kind", "pure"}, {"data", write_vector(s.state.amplitudes)}};
        break;
    case StateKind::maximally_mixed:
        doc["state"] = {{"kind", "maximally_mixed"}};
        break;
    }
    doc["tolerances"] = {{"degeneracy_tol", s.tolerances.degeneracy_tol},
                         {"bin_tol", s.tolerances.bin_tol},
                         {"check_tol", s.tolerances.check_tol}};
    if (!s.expected_fail.empty()) {
        doc["expected_fail"] = s.expected_fail;
    }
    return doc;
}

inline ScenarioFile read_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError("<file>", "cannot open " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError("<file>", std::string("parse error: ") + e.what());
    }
    return parse_scenario(doc);
}

inline void write_scenario_file(const std::filesystem::path& path, const ScenarioFile& s) {
    std::ofstream out(path);
    if (!out) {
        throw ScenarioError("<file>", "cannot write " + path.string());
    }
    out << to_json(s).dump(2) << '\n';
}

// A validated, ready-to-run scenario.
struct LoadedScenario {
    ScenarioFile file;
    ExtendedScenario scenario;
    DensityOperator state;
    bool probes_defaulted = false;
};

namespace detail {

template <typename F>
auto with_field(const std::string& field, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(field, e.what());
    }
}

inline HermitianObservable build_system_observable(const ScenarioFile& s) {
    auto obs = with_field("system.hamiltonian",
                          [&] { return spectral_decompose(s.hamiltonian, s.tolerances.degeneracy_tol); });
    if (s.padding_levels.empty()) {
        return obs;
    }
    std::vector<SpectralBand> bands = obs.bands();
    for (double level : s.padding_levels) {
        bands.push_back({level, Matrix::Zero(obs.dim(), obs.dim())});
    }
    return with_field("system.padding_levels", [&] { return HermitianObservable(std::move(bands)); });
}

inline NormalMeasurementScheme build_probe(const ProbeSpec& p, const HermitianObservable& obs,
                                           const std::string& field, double degeneracy_tol) {
    if (p.dim < 1) {
        throw ScenarioError(field + ".dim", "must be positive");
    }
    HermitianObservable ha = with_field(field + ".hamiltonian", [&] {
        if (p.hamiltonian) {
            return spectral_decompose(*p.hamiltonian, degeneracy_tol);
        }
        if (static_cast<Index>(p.probe_energies.size()) != p.dim) {
            throw DimensionMismatch("one probe energy per basis state required");
        }
        return HermitianObservable::from_diagonal(p.probe_energies);
    });
    if (ha.dim() != p.dim) {
        throw ScenarioError(field + ".hamiltonian", "dimension differs from dim");
    }
    const PureState xi = with_field(field + ".xi", [&] {
        if (std::holds_alternative<Index>(p.xi)) {
            return PureState::basis(p.dim, std::get<Index>(p.xi));
        }
        return PureState(std::get<Vector>(p.xi));
    });
    if (xi.dim() != p.dim) {
        throw ScenarioError(field + ".xi", "dimension differs from dim");
    }
    if (p.explicit_unitary) {
        const auto assignment =
            p.pointer_assignment.empty() ? default_pointer_assignment(p.dim, obs.size()) : p.pointer_assignment;
        auto pointer =
            with_field(field + ".pointer_assignment", [&] { return pointer_observable(p.dim, assignment, obs.size()); });
        return with_field(field + ".explicit_unitary", [&] {
            require_square(*p.explicit_unitary, obs.dim() * p.dim, "explicit unitary");
            return NormalMeasurementScheme(xi, *p.explicit_unitary, std::move(pointer), std::move(ha));
        });
    }
    return with_field(field, [&] { return build_canonical_scheme(obs, p.dim, std::move(ha), p.pointer_assignment, xi); });
}

inline DensityOperator build_state(const ScenarioFile& s, Index dim) {
    return with_field("state.data", [&] {
        switch (s.state.kind) {
        case StateKind::matrix:
            return DensityOperator(s.state.matrix);
        case StateKind::pure:
            return DensityOperator(PureState(s.state.amplitudes));
        case StateKind::maximally_mixed:
        default:
            return DensityOperator::maximally_mixed(dim);
        }
    });
}

} // namespace detail

// Probes default to canonical schemes with d_A = N, |xi> = |0> and H_A = 0.
inline LoadedScenario build_scenario(const ScenarioFile& s) {
    const auto obs = detail::build_system_observable(s);
    detail::with_field("system.process_unitary", [&] {
        require_square(s.process_unitary, obs.dim(), "process unitary");
        require_unitary(s.process_unitary, "process unitary");
        return 0;
    });
    std::vector<NormalMeasurementScheme> schemes;
    const bool defaulted = s.probes.empty();
    if (defaulted) {
        const auto n = static_cast<Index>(obs.size());
        for (int j = 0; j < 2; ++j) {
            schemes.push_back(build_canonical_scheme(obs, n, std::vector<double>(static_cast<std::size_t>(n), 0.0)));
        }
    } else {
        for (std::size_t j = 0; j < 2; ++j) {
            schemes.push_back(
                detail::build_probe(s.probes[j], obs, "probes[" + std::to_string(j) + "]", s.tolerances.degeneracy_tol));
        }
    }
    auto state = detail::build_state(s, obs.dim());
    if (state.dim() != obs.dim()) {
        throw ScenarioError("state.data", "dimension differs from the system dimension");
    }
    ExtendedScenario scn = detail::with_field("probes", [&] {
        return ExtendedScenario(obs, s.process_unitary, schemes[0], schemes[1], s.thetas[0], s.thetas[1]);
    });
    return LoadedScenario{s, std::move(scn), std::move(state), defaulted};
}

inline LoadedScenario load_scenario(const std::filesystem::path& path) {
    return build_scenario(read_scenario_file(path));
}

// FNV-1a over the compact canonical JSON form.
inline std::string scenario_digest(const ScenarioFile& s) {
    const std::string text = to_json(s).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

} // namespace tpm
