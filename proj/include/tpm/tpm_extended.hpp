#pragma once

// Two-point energy measurement on system + two probes. The tripartite space
// is ordered (system, probe 0, probe 1); probe 0 records the first system
// measurement and probe 1 the second.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tpm/measurement_scheme.hpp"

namespace tpm {

class ExtendedScenario {
public:
    ExtendedScenario(HermitianObservable system, Matrix process, NormalMeasurementScheme probe0,
                     NormalMeasurementScheme probe1, double theta0 = 0.0, double theta1 = 0.0)
        : system_(std::move(system)),
          process_(std::move(process)),
          probe0_(std::move(probe0)),
          probe1_(std::move(probe1)),
          theta0_(theta0),
          theta1_(theta1) {
        require_square(process_, system_.dim(), "process unitary");
        require_unitary(process_, "process unitary");
        for (const auto* p : {&probe0_, &probe1_}) {
            if (p->system_dim() != system_.dim()) {
                throw DimensionMismatch("probe coupling does not act on the system dimension");
            }
            if (p->outcome_count() != system_.size()) {
                throw DimensionMismatch("probe pointer outcome count differs from the system observable's");
            }
        }
        if (!std::isfinite(theta0_) || !std::isfinite(theta1_)) {
            throw InvariantViolation("free-evolution durations must be finite");
        }
    }

    const HermitianObservable& system() const { return system_; }
    const Matrix& process() const { return process_; }
    const NormalMeasurementScheme& probe(std::size_t j) const { return j == 0 ? probe0_ : probe1_; }
    double theta0() const { return theta0_; }
    double theta1() const { return theta1_; }

    CompositeSpace space() const { return CompositeSpace{system_.dim(), probe0_.probe_dim(), probe1_.probe_dim()}; }

    bool probes_in_eigenstates() const { return probe0_.xi_energy().has_value() && probe1_.xi_energy().has_value(); }

    bool pointer_equality() const {
        return satisfies_pointer_equality(probe0_) && satisfies_pointer_equality(probe1_);
    }

    // |xi> = |xi0> (x) |xi1>
    Vector apparatus_state() const {
        return tensor_product(probe0_.xi().amplitudes(), probe1_.xi().amplitudes());
    }

private:
    HermitianObservable system_;
    Matrix process_;
    NormalMeasurementScheme probe0_;
    NormalMeasurementScheme probe1_;
    double theta0_;
    double theta1_;
};

// H + H_A0 + H_A1 on the tripartite space.
inline Matrix total_hamiltonian_matrix(const ExtendedScenario& scn) {
    const auto space = scn.space();
    return embed(scn.system().matrix(), space, 0) + embed(scn.probe(0).probe_hamiltonian().matrix(), space, 1) +
           embed(scn.probe(1).probe_hamiltonian().matrix(), space, 2);
}

inline HermitianObservable total_hamiltonian(const ExtendedScenario& scn,
                                             double degeneracy_tol = kDefaultDegeneracyTol) {
    return spectral_decompose(total_hamiltonian_matrix(scn), degeneracy_tol);
}

// V_tot = exp(-i theta0 H_A0) U1 V U0 exp(-i theta1 H_A1), each factor
// embedded on (system, probe 0, probe 1).
inline Matrix total_unitary(const ExtendedScenario& scn) {
    const auto space = scn.space();
    const Matrix free0 = embed(scn.probe(0).probe_hamiltonian().evolution(scn.theta0()), space, 1);
    const Matrix free1 = embed(scn.probe(1).probe_hamiltonian().evolution(scn.theta1()), space, 2);
    const Matrix u0 = embed(scn.probe(0).coupling(), space, {0, 1});
    const Matrix u1 = embed(scn.probe(1).coupling(), space, {0, 2});
    const Matrix v = embed(scn.process(), space, 0);
    return free0 * u1 * v * u0 * free1;
}

namespace detail {

inline void check_state(const ExtendedScenario& scn, const DensityOperator& rho) {
    if (rho.dim() != scn.system().dim()) {
        throw DimensionMismatch("state does not match the system dimension");
    }
}

inline Matrix total_work_operator(const ExtendedScenario& scn) {
    const Matrix htot = total_hamiltonian_matrix(scn);
    const Matrix vtot = total_unitary(scn);
    return vtot.adjoint() * htot * vtot - htot;
}

inline double total_energy_scale(const ExtendedScenario& scn) {
    return scn.system().energy_scale() + scn.probe(0).probe_hamiltonian().energy_scale() +
           scn.probe(1).probe_hamiltonian().energy_scale();
}

} // namespace detail

// W_tot = tr[(V_tot^dag H_tot V_tot - H_tot)(rho (x) |xi><xi|)]
inline double total_unmeasured_work(const ExtendedScenario& scn, const DensityOperator& rho) {
    detail::check_state(scn, rho);
    const Matrix initial = tensor_product(rho.matrix(), outer(scn.apparatus_state(), scn.apparatus_state()));
    return detail::real_part_checked(trace_of_product(detail::total_work_operator(scn), initial),
                                     detail::total_energy_scale(scn), "total unmeasured work");
}

// Outcome of one ideal energy measurement on the compound system: the band of
// H, of H_A0 and of H_A1.
struct OutcomeTriple {
    std::size_t system = 0;
    std::size_t probe0 = 0;
    std::size_t probe1 = 0;

    bool operator==(const OutcomeTriple&) const = default;
};

struct ExtendedRow {
    OutcomeTriple first;
    OutcomeTriple second;
    double work = 0.0;
    double probability = 0.0;
};

struct ExtendedOutcomeTable {
    std::vector<double> system_levels;
    std::vector<double> probe0_levels;
    std::vector<double> probe1_levels;
    std::vector<ExtendedRow> rows;
    // Both probe states are energy eigenstates, so the first measurement
    // leaves the probes undisturbed.
    bool probes_undisturbed = true;

    double total_probability() const {
        double s = 0.0;
        for (const auto& r : rows) {
            s += r.probability;
        }
        return s;
    }
};

// Simulates: ideal measurement of (H, H_A0, H_A1) on rho (x) |xi><xi|, the
// total unitary, and a second ideal measurement of the same three
// Hamiltonians. rho is propagated as an ensemble of its eigenvectors, one
// state vector per first outcome. When a probe state is not an energy
// eigenstate the first measurement also branches the probe.
inline ExtendedOutcomeTable extended_tpm(const ExtendedScenario& scn, const DensityOperator& rho) {
    detail::check_state(scn, rho);
    const auto space = scn.space();
    const HermitianObservable& h = scn.system();
    const HermitianObservable& ha0 = scn.probe(0).probe_hamiltonian();
    const HermitianObservable& ha1 = scn.probe(1).probe_hamiltonian();
    const Matrix vtot = total_unitary(scn);

    ExtendedOutcomeTable table;
    for (const auto& b : h.bands()) table.system_levels.push_back(b.value);
    for (const auto& b : ha0.bands()) table.probe0_levels.push_back(b.value);
    for (const auto& b : ha1.bands()) table.probe1_levels.push_back(b.value);
    table.probes_undisturbed = scn.probes_in_eigenstates();

    const Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix());
    std::vector<std::pair<double, Vector>> ensemble;
    for (Index k = 0; k < rho.dim(); ++k) {
        if (es.eigenvalues()(k) > 0.0) {
            ensemble.emplace_back(es.eigenvalues()(k), es.eigenvectors().col(k));
        }
    }

    const std::vector<std::size_t> s_slot{0};
    const std::vector<std::size_t> a0_slot{1};
    const std::vector<std::size_t> a1_slot{2};
    const std::size_t n_sys = h.size();
    const std::size_t n_a0 = ha0.size();
    const std::size_t n_a1 = ha1.size();
    const std::size_t n_final = n_sys * n_a0 * n_a1;

    std::vector<double> ps;
    for (std::size_t m = 0; m < n_sys; ++m) {
        for (std::size_t a = 0; a < n_a0; ++a) {
            const Vector probe0 = ha0.projection(a) * scn.probe(0).xi().amplitudes();
            for (std::size_t b = 0; b < n_a1; ++b) {
                const Vector probe1 = ha1.projection(b) * scn.probe(1).xi().amplitudes();
                const Vector apparatus = tensor_product(probe0, probe1);
                std::vector<double> acc(n_final, 0.0);
                for (const auto& [weight, psi] : ensemble) {
                    const Vector chi = vtot * tensor_product(Vector(h.projection(m) * psi), apparatus);
                    std::size_t idx = 0;
                    for (std::size_t n = 0; n < n_sys; ++n) {
                        const Vector chi_n = apply_on_slots(h.projection(n), chi, space, s_slot);
                        for (std::size_t mu = 0; mu < n_a0; ++mu) {
                            const Vector chi_nm = apply_on_slots(ha0.projection(mu), chi_n, space, a0_slot);
                            for (std::size_t nu = 0; nu < n_a1; ++nu, ++idx) {
                                acc[idx] +=
                                    weight * apply_on_slots(ha1.projection(nu), chi_nm, space, a1_slot).squaredNorm();
                            }
                        }
                    }
                }
                std::size_t idx = 0;
                for (std::size_t n = 0; n < n_sys; ++n) {
                    for (std::size_t mu = 0; mu < n_a0; ++mu) {
                        for (std::size_t nu = 0; nu < n_a1; ++nu, ++idx) {
                            const double w = table.system_levels[n] - table.system_levels[m];
                            const double wa0 = table.probe0_levels[mu] - table.probe0_levels[a];
                            const double wa1 = table.probe1_levels[nu] - table.probe1_levels[b];
                            table.rows.push_back({{m, a, b}, {n, mu, nu}, w + wa0 + wa1, acc[idx]});
                            ps.push_back(acc[idx]);
                        }
                    }
                }
            }
        }
    }
    detail::validate_probabilities(ps, "extended outcome table");
    return table;
}

// Sum over every apparatus outcome, per system pair (m, n).
inline TpmJointTable marginal_system(const ExtendedOutcomeTable& table) {
    const std::size_t n = table.system_levels.size();
    TpmJointTable out;
    out.levels = table.system_levels;
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = 0; k < n; ++k) {
            out.rows.push_back({m, k, table.system_levels[k] - table.system_levels[m], 0.0});
        }
    }
    for (const auto& r : table.rows) {
        out.rows[r.first.system * n + r.second.system].probability += r.probability;
    }
    return out;
}

inline WorkDistribution total_work_distribution(const ExtendedOutcomeTable& table, double bin_tol = kDefaultBinTol) {
    std::vector<WorkBin> points;
    points.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        points.push_back({r.work, r.probability});
    }
    return bin_work_values(std::move(points), bin_tol);
}

inline double average_total_work(const ExtendedOutcomeTable& table) {
    double s = 0.0;
    for (const auto& r : table.rows) {
        s += r.probability * r.work;
    }
    return s;
}

// tr[(V_tot^dag H_tot V_tot - H_tot)(L(rho) (x) |xi><xi|)]
inline double average_total_work_closed_form(const ExtendedScenario& scn, const DensityOperator& rho) {
    detail::check_state(scn, rho);
    const Matrix dephased =
        tensor_product(luders_channel(scn.system(), rho.matrix()), outer(scn.apparatus_state(), scn.apparatus_state()));
    return detail::real_part_checked(trace_of_product(detail::total_work_operator(scn), dephased),
                                     detail::total_energy_scale(scn), "closed-form average total work");
}

// Pointer outcomes (m, n) of probe 0 and probe 1.
struct OutcomePair {
    std::size_t m = 0;
    std::size_t n = 0;
};

// J_{x',x}(T) = (1 (x) Z_x) V_tot (1 (x) Z_x') T (1 (x) Z_x') V_tot^dag (1 (x) Z_x)
// with Z_x = Z_m^(0) (x) Z_n^(1).
inline Matrix instrument_operation(const ExtendedScenario& scn, OutcomePair x_prime, OutcomePair x, const Matrix& t) {
    const auto space = scn.space();
    require_square(t, space.total(), "instrument operand");
    const auto& z0 = scn.probe(0).pointer();
    const auto& z1 = scn.probe(1).pointer();
    if (x_prime.m >= z0.size() || x.m >= z0.size() || x_prime.n >= z1.size() || x.n >= z1.size()) {
        throw DimensionMismatch("pointer outcome out of range");
    }
    const Matrix before = embed(tensor_product(z0.projection(x_prime.m), z1.projection(x_prime.n)), space, {1, 2});
    const Matrix after = embed(tensor_product(z0.projection(x.m), z1.projection(x.n)), space, {1, 2});
    const Matrix k = after * total_unitary(scn) * before;
    return k * t * k.adjoint();
}

struct CheckReport {
    std::string name;
    bool pass = false;
    double max_deviation = 0.0;
    bool precondition_held = true;
    std::string note;
};

inline CheckReport check_self_consistency(const ExtendedScenario& scn, const DensityOperator& rho,
                                          double tol = kDefaultNormTol) {
    CheckReport r;
    r.name = "self_consistency";
    r.precondition_held = scn.probes_in_eigenstates();
    if (!r.precondition_held) {
        r.note = "counterexample mode: a probe state is not an energy eigenstate";
    }
    const auto marginal = marginal_system(extended_tpm(scn, rho));
    const auto direct = tpm_joint(scn.system(), scn.process(), rho);
    for (std::size_t i = 0; i < direct.rows.size(); ++i) {
        r.max_deviation = std::max(r.max_deviation, std::abs(marginal.rows[i].probability - direct.rows[i].probability));
    }
    r.pass = r.max_deviation <= tol;
    return r;
}

inline CheckReport check_first_law(const ExtendedScenario& scn, const DensityOperator& rho,
                                   double tol = kDefaultNormTol) {
    CheckReport r;
    r.name = "first_law";
    r.precondition_held = scn.probes_in_eigenstates() && scn.pointer_equality();
    if (!r.precondition_held) {
        r.note = "probe Hamiltonians are not functions of the pointer observables or probe states are not eigenstates";
    }
    const double table_avg = average_total_work(extended_tpm(scn, rho));
    const double unmeasured = total_unmeasured_work(scn, rho);
    r.max_deviation = std::abs(table_avg - unmeasured);
    r.pass = r.max_deviation <= tol;
    return r;
}

inline CheckReport check_strong_repeatability(const ExtendedScenario& scn, const DensityOperator& rho,
                                              double tol = kDefaultNormTol) {
    CheckReport r;
    r.name = "strong_repeatability";
    r.precondition_held = scn.probes_in_eigenstates() && scn.pointer_equality();
    const Matrix delta = detail::total_work_operator(scn);
    const Matrix xi = outer(scn.apparatus_state(), scn.apparatus_state());
    const Complex plain = trace_of_product(delta, tensor_product(rho.matrix(), xi));
    const Complex dephased = trace_of_product(delta, tensor_product(luders_channel(scn.system(), rho.matrix()), xi));
    r.max_deviation = std::abs(plain - dephased);
    r.pass = r.max_deviation <= tol;
    return r;
}

// Largest per-bin probability difference after pooling the atoms of both
// distributions with the binning rule. Zero iff both put the same weight on
// the same work values.
inline double distribution_distance(const WorkDistribution& a, const WorkDistribution& b, double bin_tol) {
    struct Atom {
        double work;
        double signed_p;
    };
    std::vector<Atom> atoms;
    double scale = 0.0;
    for (const auto& x : a.bins) {
        atoms.push_back({x.work, x.probability});
        scale = std::max(scale, std::abs(x.work));
    }
    for (const auto& x : b.bins) {
        atoms.push_back({x.work, -x.probability});
        scale = std::max(scale, std::abs(x.work));
    }
    std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.work < r.work; });
    const double thr = bin_tol * std::max(1.0, scale);
    double worst = 0.0;
    std::size_t i = 0;
    while (i < atoms.size()) {
        std::size_t j = i + 1;
        double diff = atoms[i].signed_p;
        while (j < atoms.size() && atoms[j].work - atoms[j - 1].work <= thr) {
            diff += atoms[j].signed_p;
            ++j;
        }
        worst = std::max(worst, std::abs(diff));
        i = j;
    }
    return worst;
}

struct DistributionEqualityReport {
    CheckReport check;
    bool distributions_equal = false;
    bool structural_condition = false;     // weak conservation on both probes
    bool measurement_work_vanishes = false; // |W_meas| <= tol over all samples, both probes
    double max_measurement_work = 0.0;
    bool three_way_agreement = false;
};

inline DistributionEqualityReport check_distribution_equality(const ExtendedScenario& scn,
                                                              const std::vector<DensityOperator>& samples,
                                                              double tol = kDefaultNormTol,
                                                              double bin_tol = kDefaultBinTol) {
    if (samples.empty()) {
        throw InvariantViolation("distribution equality needs at least one state sample");
    }
    DistributionEqualityReport r;
    r.check.name = "distribution_equality";
    r.check.precondition_held = scn.probes_in_eigenstates() && scn.pointer_equality();
    for (const auto& rho : samples) {
        const auto system_dist = work_distribution(tpm_joint(scn.system(), scn.process(), rho), bin_tol);
        const auto total_dist = total_work_distribution(extended_tpm(scn, rho), bin_tol);
        r.check.max_deviation = std::max(r.check.max_deviation, distribution_distance(system_dist, total_dist, bin_tol));
        for (std::size_t j = 0; j < 2; ++j) {
            r.max_measurement_work =
                std::max(r.max_measurement_work, std::abs(measurement_work(scn.probe(j), scn.system(), rho)));
        }
    }
    r.distributions_equal = r.check.max_deviation <= tol;
    r.measurement_work_vanishes = r.max_measurement_work <= tol;
    r.check.pass = r.distributions_equal;
    if (!r.check.precondition_held) {
        // w_A(m) is only defined for eigenstate probes with pointer-equal H_A
        r.check.note = "structural condition not evaluated: precondition does not hold";
        return r;
    }
    r.structural_condition = check_weak_energy_conservation(scn.probe(0), scn.system(), tol).holds &&
                             check_weak_energy_conservation(scn.probe(1), scn.system(), tol).holds;
    r.three_way_agreement =
        r.distributions_equal == r.structural_condition && r.structural_condition == r.measurement_work_vanishes;
    if (!r.three_way_agreement) {
        r.check.note = "distribution equality, weak conservation and vanishing measurement work disagree";
    }
    return r;
}

} // namespace tpm
