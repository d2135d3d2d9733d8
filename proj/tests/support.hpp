#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "tpm/scenario.hpp"

namespace tpm_test {

using tpm::Complex;
using tpm::Index;
using tpm::Matrix;
using tpm::Vector;

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(TPM_SCENARIO_DIR) / name;
}

inline Matrix diag(std::initializer_list<double> d) {
    Vector v(static_cast<Index>(d.size()));
    Index i = 0;
    for (double x : d) v(i++) = x;
    return v.asDiagonal();
}

inline Matrix hadamard() {
    Matrix h(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    h << r, r, r, -r;
    return h;
}

inline Matrix rotation(double t) {
    Matrix r(2, 2);
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
}

// |m,0> -> |m,m>, |m,1> -> |m+1 mod 2, m>; basis index 2*m + a.
inline Matrix qubit_table_coupling() {
    Matrix u = Matrix::Zero(4, 4);
    u(0, 0) = 1.0;
    u(3, 2) = 1.0;
    u(2, 1) = 1.0;
    u(1, 3) = 1.0;
    return u;
}

inline Vector ket(std::initializer_list<Complex> a) {
    Vector v(static_cast<Index>(a.size()));
    Index i = 0;
    for (auto x : a) v(i++) = x;
    return v;
}

inline oracle::Input to_oracle(const tpm::ExtendedScenario& scn, const tpm::DensityOperator& rho) {
    oracle::Input in;
    in.h = scn.system().matrix();
    for (std::size_t m = 0; m < scn.system().size(); ++m) {
        if (scn.system().is_zero(m)) in.padding.push_back(scn.system().value(m));
    }
    in.v = scn.process();
    in.ha0 = scn.probe(0).probe_hamiltonian().matrix();
    in.ha1 = scn.probe(1).probe_hamiltonian().matrix();
    in.u0 = scn.probe(0).coupling();
    in.u1 = scn.probe(1).coupling();
    in.xi0 = scn.probe(0).xi().amplitudes();
    in.xi1 = scn.probe(1).xi().amplitudes();
    in.theta0 = scn.theta0();
    in.theta1 = scn.theta1();
    in.rho = rho.matrix();
    return in;
}

// Largest probability difference between extended_tpm and the oracle;
// returns infinity when the tables disagree on shape, labels or work values.
inline double oracle_deviation(const tpm::ExtendedScenario& scn, const tpm::DensityOperator& rho) {
    const auto table = tpm::extended_tpm(scn, rho);
    const auto ref = oracle::enumerate(to_oracle(scn, rho));
    if (table.rows.size() != ref.size()) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& a = table.rows[i];
        const auto& b = ref[i];
        if (a.first.system != b.m || a.first.probe0 != b.mu || a.first.probe1 != b.nu || a.second.system != b.n ||
            a.second.probe0 != b.mu2 || a.second.probe1 != b.nu2) {
            return INFINITY;
        }
        if (std::abs(a.work - b.work) > 1e-9) return INFINITY;
        worst = std::max(worst, std::abs(a.probability - b.p));
    }
    return worst;
}

// Marginal-vs-system deviation computed by the oracle alone.
inline double oracle_marginal_deviation(const tpm::ExtendedScenario& scn, const tpm::DensityOperator& rho) {
    const auto in = to_oracle(scn, rho);
    const auto rows = oracle::enumerate(in);
    const auto direct = oracle::system_joint(in);
    return oracle::max_abs_diff(oracle::marginal(rows, direct.size()), direct);
}

} // namespace tpm_test
