#pragma once

// System-only two-point energy measurement: joint outcome statistics,
// work distribution and averages.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tpm/observables.hpp"

namespace tpm {

inline constexpr double kDefaultBinTol = 1e-9;
inline constexpr double kImaginaryResidueTol = 1e-10;
inline constexpr double kProbabilityNormTol = 1e-10;
inline constexpr double kProbabilityRangeTol = 1e-12;
// Bins and report entries below this are floating-point dust, not outcomes.
inline constexpr double kNegligibleProbability = 1e-15;

struct JointRow {
    std::size_t m = 0;
    std::size_t n = 0;
    double work = 0.0; // eps_n - eps_m
    double probability = 0.0;
};

// Rows are ordered m-major over every (m, n), zero rows included.
struct TpmJointTable {
    std::vector<double> levels;
    std::vector<JointRow> rows;

    double total_probability() const {
        double s = 0.0;
        for (const auto& r : rows) {
            s += r.probability;
        }
        return s;
    }

    const JointRow& at(std::size_t m, std::size_t n) const { return rows.at(m * levels.size() + n); }
};

struct WorkBin {
    double work = 0.0;
    double probability = 0.0;
};

struct WorkDistribution {
    std::vector<WorkBin> bins; // ascending in work
    double bin_tol = kDefaultBinTol;
};

namespace detail {

inline double real_part_checked(Complex z, double scale, const std::string& what) {
    if (std::abs(z.imag()) > kImaginaryResidueTol * std::max(1.0, scale)) {
        throw InvariantViolation(what + " has imaginary residue " + std::to_string(z.imag()));
    }
    return z.real();
}

inline void check_process(const HermitianObservable& h, const Matrix& v, const DensityOperator& rho) {
    require_square(v, h.dim(), "process unitary");
    require_unitary(v, "process unitary");
    if (rho.dim() != h.dim()) {
        throw DimensionMismatch("state does not match Hamiltonian");
    }
}

inline void validate_probabilities(const std::vector<double>& ps, const std::string& what) {
    double total = 0.0;
    for (double p : ps) {
        if (!std::isfinite(p) || p < -kProbabilityRangeTol || p > 1.0 + kProbabilityRangeTol) {
            throw InvariantViolation(what + " has a probability outside [0, 1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityNormTol) {
        throw InvariantViolation(what + " probabilities sum to " + std::to_string(total));
    }
}

} // namespace detail

// Groups (work, probability) pairs whose work values lie within
// bin_tol * max(1, max|w|) of their sorted neighbour. A bin is represented by
// the probability-weighted mean of its members (the common value when they
// all coincide); bins with total probability below kNegligibleProbability are
// dropped.
inline WorkDistribution bin_work_values(std::vector<WorkBin> points, double bin_tol) {
    double scale = 0.0;
    for (const auto& pt : points) {
        scale = std::max(scale, std::abs(pt.work));
    }
    const double thr = bin_tol * std::max(1.0, scale);
    std::stable_sort(points.begin(), points.end(),
                     [](const WorkBin& a, const WorkBin& b) { return a.work < b.work; });

    WorkDistribution dist;
    dist.bin_tol = bin_tol;
    std::size_t i = 0;
    while (i < points.size()) {
        std::size_t j = i + 1;
        while (j < points.size() && points[j].work - points[j - 1].work <= thr) {
            ++j;
        }
        double total = 0.0;
        double weight = 0.0;
        double weighted = 0.0;
        bool same = true;
        for (std::size_t k = i; k < j; ++k) {
            total += points[k].probability;
            same = same && points[k].work == points[i].work;
            if (points[k].probability > 0.0) {
                weight += points[k].probability;
                weighted += points[k].probability * points[k].work;
            }
        }
        if (total >= kNegligibleProbability) {
            double rep = points[i].work;
            if (!same && weight > 0.0) {
                rep = std::clamp(weighted / weight, points[i].work, points[j - 1].work);
            }
            dist.bins.push_back({rep, total});
        }
        i = j;
    }
    return dist;
}

inline double unmeasured_work(const HermitianObservable& h, const Matrix& v, const DensityOperator& rho) {
    detail::check_process(h, v, rho);
    const Matrix hm = h.matrix();
    const Matrix delta = v.adjoint() * hm * v - hm;
    return detail::real_part_checked(trace_of_product(delta, rho.matrix()), h.energy_scale(), "unmeasured work");
}

// p(m, n) = tr[P_m V^dag P_n V P_m rho]
inline TpmJointTable tpm_joint(const HermitianObservable& h, const Matrix& v, const DensityOperator& rho) {
    detail::check_process(h, v, rho);
    TpmJointTable table;
    for (const auto& b : h.bands()) {
        table.levels.push_back(b.value);
    }
    std::vector<double> ps;
    for (std::size_t m = 0; m < h.size(); ++m) {
        const Matrix& pm = h.projection(m);
        const Matrix first = pm * rho.matrix() * pm;
        const Matrix evolved = v * first * v.adjoint();
        for (std::size_t n = 0; n < h.size(); ++n) {
            const Complex p = trace_of_product(h.projection(n), evolved);
            const double pr = detail::real_part_checked(p, 1.0, "joint probability");
            table.rows.push_back({m, n, h.value(n) - h.value(m), pr});
            ps.push_back(pr);
        }
    }
    detail::validate_probabilities(ps, "TPM joint table");
    return table;
}

inline WorkDistribution work_distribution(const TpmJointTable& table, double bin_tol = kDefaultBinTol) {
    std::vector<WorkBin> points;
    points.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        points.push_back({r.work, r.probability});
    }
    return bin_work_values(std::move(points), bin_tol);
}

inline double average_work(const WorkDistribution& dist) {
    double s = 0.0;
    for (const auto& b : dist.bins) {
        s += b.work * b.probability;
    }
    return s;
}

// tr[(V^dag H V - H) L(rho)] with L the Lueders channel of H.
inline double average_work_closed_form(const HermitianObservable& h, const Matrix& v, const DensityOperator& rho) {
    detail::check_process(h, v, rho);
    const Matrix hm = h.matrix();
    const Matrix delta = v.adjoint() * hm * v - hm;
    return detail::real_part_checked(trace_of_product(delta, luders_channel(h, rho.matrix())), h.energy_scale(),
                                     "closed-form average work");
}

} // namespace tpm
