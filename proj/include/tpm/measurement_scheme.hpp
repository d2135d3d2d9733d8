#pragma once

// Normal measurement schemes: a probe prepared in |xi>, a coupling unitary U
// on system (x) probe and a sharp pointer observable Z on the probe, plus the
// probe Hamiltonian H_A used for energy bookkeeping.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tpm/tpm_system.hpp"

namespace tpm {

inline constexpr double kEigenstateTol = 1e-10;

// Pointer observable from a basis-index -> outcome map. Outcome m is the
// projection onto the basis states assigned to it; its "eigenvalue" is m.
inline HermitianObservable pointer_observable(Index probe_dim, const std::vector<std::size_t>& assignment,
                                              std::size_t outcomes) {
    if (static_cast<Index>(assignment.size()) != probe_dim) {
        throw DimensionMismatch("pointer assignment must list every probe basis state");
    }
    std::vector<SpectralBand> bands(outcomes);
    for (std::size_t m = 0; m < outcomes; ++m) {
        bands[m].value = static_cast<double>(m);
        bands[m].projection = Matrix::Zero(probe_dim, probe_dim);
    }
    for (Index a = 0; a < probe_dim; ++a) {
        const std::size_t m = assignment[static_cast<std::size_t>(a)];
        if (m >= outcomes) {
            throw InvariantViolation("pointer assignment names outcome " + std::to_string(m) + " of " +
                                     std::to_string(outcomes));
        }
        bands[m].projection(a, a) = 1.0;
    }
    for (std::size_t m = 0; m < outcomes; ++m) {
        if (bands[m].projection.trace().real() < 0.5) {
            throw InvariantViolation("pointer assignment does not cover outcome " + std::to_string(m));
        }
    }
    return HermitianObservable(std::move(bands));
}

// Default assignment: probe basis state a reports outcome a mod N.
inline std::vector<std::size_t> default_pointer_assignment(Index probe_dim, std::size_t outcomes) {
    std::vector<std::size_t> out(static_cast<std::size_t>(probe_dim));
    for (Index a = 0; a < probe_dim; ++a) {
        out[static_cast<std::size_t>(a)] = static_cast<std::size_t>(a) % outcomes;
    }
    return out;
}

class NormalMeasurementScheme {
public:
    NormalMeasurementScheme(PureState xi, Matrix coupling, HermitianObservable pointer,
                            HermitianObservable probe_hamiltonian,
                            std::optional<std::vector<Vector>> pointer_states = std::nullopt)
        : xi_(std::move(xi)),
          coupling_(std::move(coupling)),
          pointer_(std::move(pointer)),
          probe_h_(std::move(probe_hamiltonian)),
          pointer_states_(std::move(pointer_states)) {
        const Index da = xi_.dim();
        if (pointer_.dim() != da || probe_h_.dim() != da) {
            throw DimensionMismatch("probe state, pointer and probe Hamiltonian dimensions differ");
        }
        if (!is_square(coupling_) || coupling_.rows() % da != 0 || coupling_.rows() == 0) {
            throw DimensionMismatch("coupling unitary does not act on system (x) probe");
        }
        require_unitary(coupling_, "coupling unitary");
        if (pointer_states_ && pointer_states_->size() != pointer_.size()) {
            throw DimensionMismatch("one pointer state per outcome required");
        }
    }

    Index probe_dim() const { return xi_.dim(); }
    Index system_dim() const { return coupling_.rows() / xi_.dim(); }
    std::size_t outcome_count() const { return pointer_.size(); }
    const PureState& xi() const { return xi_; }
    const Matrix& coupling() const { return coupling_; }
    const HermitianObservable& pointer() const { return pointer_; }
    const HermitianObservable& probe_hamiltonian() const { return probe_h_; }
    const std::optional<std::vector<Vector>>& known_pointer_states() const { return pointer_states_; }

    CompositeSpace space() const { return CompositeSpace{system_dim(), probe_dim()}; }

    // Energy lambda_0 of |xi> when it is an eigenstate of H_A.
    std::optional<double> xi_energy(double tol = kEigenstateTol) const {
        const Matrix h = probe_h_.matrix();
        const Vector& v = xi_.amplitudes();
        const double lambda = v.dot(h * v).real();
        if ((h * v - lambda * v).norm() <= tol * std::max(1.0, max_abs(h))) {
            return lambda;
        }
        return std::nullopt;
    }

private:
    PureState xi_;
    Matrix coupling_;
    HermitianObservable pointer_;
    HermitianObservable probe_h_;
    std::optional<std::vector<Vector>> pointer_states_;
};

namespace detail {

inline void check_scheme_for(const NormalMeasurementScheme& s, const HermitianObservable& obs) {
    if (s.system_dim() != obs.dim()) {
        throw DimensionMismatch("scheme system dimension differs from the observable's");
    }
    if (s.outcome_count() != obs.size()) {
        throw DimensionMismatch("scheme pointer outcome count differs from the observable's");
    }
}

// Unitary on the probe with W xi = e_0 (identity when xi is already e_0).
inline Matrix rotate_to_first_basis_state(const PureState& xi) {
    const Index d = xi.dim();
    const Vector& v = xi.amplitudes();
    Vector e0 = Vector::Zero(d);
    e0(0) = 1.0;
    if ((v - e0).norm() == 0.0) {
        return Matrix::Identity(d, d);
    }
    Matrix seed = Matrix::Identity(d, d);
    seed.col(0) = v;
    const Eigen::HouseholderQR<Matrix> qr(seed);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Complex c = q.col(0).dot(v); // <q_0|xi>, unit modulus
    q.col(0) *= c / std::abs(c);
    return q.adjoint();
}

} // namespace detail

// U = (sum_m P_m (x) S_m)(1 (x) W_xi), where S_m shifts the probe basis
// |a> -> |a + m mod d_A> and W_xi rotates |xi> onto |0>. The pointer state
// for outcome m is probe basis state m.
inline NormalMeasurementScheme build_canonical_scheme(const HermitianObservable& obs, Index probe_dim,
                                                      HermitianObservable probe_hamiltonian,
                                                      std::vector<std::size_t> pointer_assignment = {},
                                                      std::optional<PureState> xi = std::nullopt) {
    const auto n_out = obs.size();
    if (probe_dim < static_cast<Index>(n_out)) {
        throw InvariantViolation("probe dimension " + std::to_string(probe_dim) + " is smaller than the " +
                                 std::to_string(n_out) + " outcomes to record");
    }
    if (pointer_assignment.empty()) {
        pointer_assignment = default_pointer_assignment(probe_dim, n_out);
    }
    if (static_cast<Index>(pointer_assignment.size()) != probe_dim) {
        throw DimensionMismatch("pointer assignment must list every probe basis state");
    }
    for (std::size_t m = 0; m < n_out; ++m) {
        if (pointer_assignment[m] != m) {
            throw InvariantViolation("pointer assignment must map basis state " + std::to_string(m) + " to outcome " +
                                     std::to_string(m));
        }
    }
    if (probe_hamiltonian.dim() != probe_dim) {
        throw DimensionMismatch("probe Hamiltonian dimension differs from probe dimension");
    }
    PureState probe_state = xi ? *xi : PureState::basis(probe_dim, 0);
    if (probe_state.dim() != probe_dim) {
        throw DimensionMismatch("probe state dimension differs from probe dimension");
    }

    const Index d = obs.dim();
    Matrix shift_coupling = Matrix::Zero(d * probe_dim, d * probe_dim);
    for (std::size_t m = 0; m < n_out; ++m) {
        Matrix s = Matrix::Zero(probe_dim, probe_dim);
        for (Index a = 0; a < probe_dim; ++a) {
            s((a + static_cast<Index>(m)) % probe_dim, a) = 1.0;
        }
        shift_coupling += tensor_product(obs.projection(m), s);
    }
    const Matrix w = detail::rotate_to_first_basis_state(probe_state);
    Matrix u = shift_coupling;
    if (!w.isIdentity(0.0)) {
        u = shift_coupling * tensor_product(Matrix(Matrix::Identity(d, d)), w);
    }

    std::vector<Vector> states;
    for (std::size_t m = 0; m < n_out; ++m) {
        states.push_back(PureState::basis(probe_dim, static_cast<Index>(m)).amplitudes());
    }
    return NormalMeasurementScheme(std::move(probe_state), std::move(u),
                                   pointer_observable(probe_dim, pointer_assignment, n_out),
                                   std::move(probe_hamiltonian), std::move(states));
}

inline NormalMeasurementScheme build_canonical_scheme(const HermitianObservable& obs, Index probe_dim,
                                                      const std::vector<double>& probe_energies,
                                                      std::vector<std::size_t> pointer_assignment = {},
                                                      std::optional<PureState> xi = std::nullopt) {
    if (static_cast<Index>(probe_energies.size()) != probe_dim) {
        throw DimensionMismatch("one probe energy per probe basis state required");
    }
    return build_canonical_scheme(obs, probe_dim, HermitianObservable::from_diagonal(probe_energies),
                                  std::move(pointer_assignment), std::move(xi));
}

// Largest entry-wise deviation of tr_A[(1 (x) Z_m) U (T (x) |xi><xi|) U^dag]
// from P_m T P_m over the matrix units T = |i><j| and all outcomes m.
inline double dilation_deviation(const NormalMeasurementScheme& s, const HermitianObservable& obs) {
    detail::check_scheme_for(s, obs);
    const Index d = obs.dim();
    const auto space = s.space();
    const Matrix xi_proj = s.xi().projector();
    const Matrix& u = s.coupling();
    double worst = 0.0;
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            Matrix t = Matrix::Zero(d, d);
            t(i, j) = 1.0;
            const Matrix joint = u * tensor_product(t, xi_proj) * u.adjoint();
            for (std::size_t m = 0; m < obs.size(); ++m) {
                const Matrix read = embed(s.pointer().projection(m), space, 1) * joint;
                const Matrix lhs = partial_trace(read, space, {0});
                const Matrix rhs = obs.projection(m) * t * obs.projection(m);
                worst = std::max(worst, max_abs(Matrix(lhs - rhs)));
            }
        }
    }
    return worst;
}

inline bool verify_dilation(const NormalMeasurementScheme& s, const HermitianObservable& obs,
                            double tol = kDefaultNormTol) {
    return dilation_deviation(s, obs) <= tol;
}

// Joint system+probe state U (rho (x) |xi><xi|) U^dag.
inline Matrix premeasure(const NormalMeasurementScheme& s, const DensityOperator& rho) {
    if (rho.dim() != s.system_dim()) {
        throw DimensionMismatch("state does not match scheme system dimension");
    }
    return s.coupling() * tensor_product(rho.matrix(), s.xi().projector()) * s.coupling().adjoint();
}

// Unnormalized system state conditioned on each pointer outcome.
inline std::vector<Matrix> pointer_readout(const NormalMeasurementScheme& s, const Matrix& joint) {
    const auto space = s.space();
    require_square(joint, space.total(), "joint state");
    std::vector<Matrix> out;
    for (std::size_t m = 0; m < s.outcome_count(); ++m) {
        out.push_back(partial_trace(Matrix(embed(s.pointer().projection(m), space, 1) * joint), space, {0}));
    }
    return out;
}

// Pointer states |phi_m>. Known states are returned as stored; otherwise
// |phi_m> = (<psi| (x) 1) U (|psi> (x) |xi>) for a unit |psi> in the range of
// P_m. Outcomes with P_m = 0 are never reached; they get a unit vector from
// the support of Z_m.
inline std::vector<Vector> pointer_states(const NormalMeasurementScheme& s, const HermitianObservable& obs) {
    detail::check_scheme_for(s, obs);
    if (s.known_pointer_states()) {
        return *s.known_pointer_states();
    }
    const Index d = obs.dim();
    const Index da = s.probe_dim();
    std::vector<Vector> out;
    for (std::size_t m = 0; m < obs.size(); ++m) {
        const Matrix& pm = obs.is_zero(m) ? s.pointer().projection(m) : obs.projection(m);
        Index best = 0;
        pm.colwise().norm().maxCoeff(&best);
        Vector psi = pm.col(best);
        psi.normalize();
        if (obs.is_zero(m)) {
            out.push_back(psi);
            continue;
        }
        const Vector chi = s.coupling() * tensor_product(psi, s.xi().amplitudes());
        Vector phi = Vector::Zero(da);
        for (Index k = 0; k < d; ++k) {
            phi += std::conj(psi(k)) * chi.segment(k * da, da);
        }
        if (std::abs(phi.norm() - 1.0) > 1e-8) {
            throw InvariantViolation("coupling does not map outcome " + std::to_string(m) +
                                     " onto a product with a unit pointer state");
        }
        out.push_back(phi);
    }
    return out;
}

// Energies <phi_m|H_A|phi_m> of the pointer states.
inline std::vector<double> pointer_state_energies(const NormalMeasurementScheme& s, const HermitianObservable& obs) {
    const Matrix h = s.probe_hamiltonian().matrix();
    std::vector<double> out;
    for (const auto& phi : pointer_states(s, obs)) {
        out.push_back(phi.dot(h * phi).real());
    }
    return out;
}

// H_A = sum_m lambda_m Z_m, with lambda_m = tr[H_A Z_m] / tr[Z_m].
inline bool satisfies_pointer_equality(const NormalMeasurementScheme& s, double tol = kDefaultNormTol) {
    const Matrix h = s.probe_hamiltonian().matrix();
    Matrix rebuilt = Matrix::Zero(h.rows(), h.cols());
    for (const auto& b : s.pointer().bands()) {
        const double lambda = trace_of_product(h, b.projection).real() / b.projection.trace().real();
        rebuilt += lambda * b.projection;
    }
    return max_abs(Matrix(h - rebuilt)) <= tol * std::max(1.0, max_abs(h));
}

namespace detail {

inline Matrix local_total_hamiltonian(const NormalMeasurementScheme& s, const HermitianObservable& h) {
    const auto space = s.space();
    return embed(h.matrix(), space, 0) + embed(s.probe_hamiltonian().matrix(), space, 1);
}

} // namespace detail

// W_meas = tr[(U^dag H_tot U - H_tot)(rho (x) |xi><xi|)], H_tot = H + H_A.
inline double measurement_work(const NormalMeasurementScheme& s, const HermitianObservable& h,
                               const DensityOperator& rho) {
    detail::check_scheme_for(s, h);
    if (rho.dim() != h.dim()) {
        throw DimensionMismatch("state does not match Hamiltonian");
    }
    const Matrix htot = detail::local_total_hamiltonian(s, h);
    const Matrix delta = s.coupling().adjoint() * htot * s.coupling() - htot;
    const Matrix initial = tensor_product(rho.matrix(), s.xi().projector());
    const double scale = std::max(h.energy_scale(), s.probe_hamiltonian().energy_scale());
    return detail::real_part_checked(trace_of_product(delta, initial), scale, "measurement work");
}

// Gamma_xi(B) = (1 (x) <xi|) B (1 (x) |xi>).
inline Matrix restriction_map(const Matrix& b, const PureState& xi) {
    const Index da = xi.dim();
    if (!is_square(b) || b.rows() % da != 0) {
        throw DimensionMismatch("operator does not act on system (x) probe");
    }
    const Index d = b.rows() / da;
    const Vector& v = xi.amplitudes();
    Matrix out(d, d);
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            out(i, j) = v.dot(b.block(i * da, j * da, da, da) * v);
        }
    }
    return out;
}

struct EffectiveWork {
    Matrix computed;                // Gamma_xi(U^dag H_tot U - H_tot)
    Matrix predicted;               // sum_m (lambda_m - lambda_0) P_m
    std::vector<double> probe_work; // w_A(m) = lambda_m - lambda_0
    double deviation = 0.0;
};

inline EffectiveWork effective_work_operator(const NormalMeasurementScheme& s, const HermitianObservable& h) {
    detail::check_scheme_for(s, h);
    const auto lambda0 = s.xi_energy();
    if (!lambda0) {
        throw InvariantViolation("probe state is not an eigenstate of the probe Hamiltonian");
    }
    const Matrix ha = s.probe_hamiltonian().matrix();
    const auto phis = pointer_states(s, h);
    EffectiveWork out;
    out.predicted = Matrix::Zero(h.dim(), h.dim());
    for (std::size_t m = 0; m < h.size(); ++m) {
        const Vector& phi = phis[m];
        const double lambda = phi.dot(ha * phi).real();
        if (!h.is_zero(m) && (ha * phi - lambda * phi).norm() > kEigenstateTol * std::max(1.0, max_abs(ha))) {
            throw InvariantViolation("pointer state " + std::to_string(m) +
                                     " is not an eigenstate of the probe Hamiltonian");
        }
        out.probe_work.push_back(lambda - *lambda0);
        out.predicted += (lambda - *lambda0) * h.projection(m);
    }
    const Matrix htot = detail::local_total_hamiltonian(s, h);
    out.computed = restriction_map(Matrix(s.coupling().adjoint() * htot * s.coupling() - htot), s.xi());
    out.deviation = max_abs(Matrix(out.computed - out.predicted));
    return out;
}

struct WeakConservationReport {
    bool holds = false;             // w_A(m) = 0 on every outcome with P_m > 0
    bool operator_vanishes = false; // effective work operator is zero
    std::vector<double> probe_work;
    std::vector<bool> reachable;
    double effective_norm = 0.0;
};

inline WeakConservationReport check_weak_energy_conservation(const NormalMeasurementScheme& s,
                                                             const HermitianObservable& h,
                                                             double tol = kDefaultNormTol) {
    const auto eff = effective_work_operator(s, h);
    WeakConservationReport r;
    r.probe_work = eff.probe_work;
    r.holds = true;
    for (std::size_t m = 0; m < h.size(); ++m) {
        r.reachable.push_back(!h.is_zero(m));
        if (!h.is_zero(m) && std::abs(eff.probe_work[m]) > tol) {
            r.holds = false;
        }
    }
    r.effective_norm = max_abs(eff.computed);
    r.operator_vanishes = r.effective_norm <= tol;
    return r;
}

// |[H + H_A, U]|_max
inline double full_conservation_deviation(const NormalMeasurementScheme& s, const HermitianObservable& h) {
    detail::check_scheme_for(s, h);
    return max_abs(commutator(detail::local_total_hamiltonian(s, h), s.coupling()));
}

inline bool check_full_energy_conservation(const NormalMeasurementScheme& s, const HermitianObservable& h,
                                           double tol = kDefaultNormTol) {
    return full_conservation_deviation(s, h) <= tol;
}

} // namespace tpm
