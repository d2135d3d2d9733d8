#pragma once

#include <cstddef>
#include <vector>

#include "tpm/spectral.hpp"

namespace tpm {

// Non-selective ideal measurement: sum_m P_m T P_m.
inline Matrix luders_channel(const HermitianObservable& obs, const Matrix& t) {
    require_square(t, obs.dim(), "operand of the Lueders channel");
    Matrix out = Matrix::Zero(t.rows(), t.cols());
    for (const auto& b : obs.bands()) {
        out += b.projection * t * b.projection;
    }
    return out;
}

struct MeasurementBranch {
    std::size_t label = 0;
    Matrix state; // unnormalized P_m rho P_m
    double probability = 0.0;
};

// One branch per outcome, zero-probability outcomes included.
inline std::vector<MeasurementBranch> ideal_measurement_branches(const HermitianObservable& obs,
                                                                 const DensityOperator& rho) {
    if (rho.dim() != obs.dim()) {
        throw DimensionMismatch("state does not match observable");
    }
    std::vector<MeasurementBranch> out;
    out.reserve(obs.size());
    for (std::size_t m = 0; m < obs.size(); ++m) {
        const Matrix& p = obs.projection(m);
        out.push_back({m, p * rho.matrix() * p, trace_of_product(p, rho.matrix()).real()});
    }
    return out;
}

inline bool commutes(const Matrix& a, const Matrix& b, double tol) {
    if (!is_square(a) || !is_square(b) || a.rows() != b.rows()) {
        throw DimensionMismatch("commutes needs square matrices of equal size");
    }
    return max_abs(commutator(a, b)) <= tol * std::max(1.0, max_abs(a) * max_abs(b));
}

} // namespace tpm
