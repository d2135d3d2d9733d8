#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tpm/hilbert.hpp"

namespace tpm {

inline constexpr double kDefaultDegeneracyTol = 1e-9;
inline constexpr double kProjectionOrthoTol = 1e-10;
inline constexpr double kProjectionCompletenessTol = 1e-12;

// One outcome of a sharp observable: its eigenvalue and spectral projection.
// The projection may be the zero operator.
struct SpectralBand {
    double value = 0.0;
    Matrix projection;
};

// Sharp observable in spectral form, sum_m value_m P_m. Outcome labels are
// the positions 0..N-1 in `bands()`.
class HermitianObservable {
public:
    HermitianObservable() = default;

    explicit HermitianObservable(std::vector<SpectralBand> bands) : bands_(std::move(bands)) {
        if (bands_.empty()) {
            throw InvariantViolation("observable needs at least one outcome");
        }
        dim_ = bands_.front().projection.rows();
        if (dim_ < 1) {
            throw DimensionMismatch("observable dimension must be positive");
        }
        Matrix sum = Matrix::Zero(dim_, dim_);
        for (std::size_t m = 0; m < bands_.size(); ++m) {
            const auto& p = bands_[m].projection;
            require_square(p, dim_, "projection " + std::to_string(m));
            if (!std::isfinite(bands_[m].value) || !p.allFinite()) {
                throw InvariantViolation("observable has non-finite entries");
            }
            sum += p;
        }
        if (max_abs(Matrix(sum - Matrix::Identity(dim_, dim_))) > kProjectionCompletenessTol) {
            throw InvariantViolation("projections do not sum to the identity");
        }
        for (std::size_t m = 0; m < bands_.size(); ++m) {
            for (std::size_t n = m; n < bands_.size(); ++n) {
                const Matrix prod = bands_[m].projection * bands_[n].projection;
                const Matrix expect = m == n ? bands_[m].projection : Matrix::Zero(dim_, dim_);
                if (max_abs(Matrix(prod - expect)) > kProjectionOrthoTol) {
                    throw InvariantViolation("projections " + std::to_string(m) + "," + std::to_string(n) +
                                             " are not mutually orthogonal idempotents");
                }
                if (m != n && bands_[m].value == bands_[n].value && !is_zero(m) && !is_zero(n)) {
                    throw InvariantViolation("outcomes " + std::to_string(m) + "," + std::to_string(n) +
                                             " share an eigenvalue");
                }
            }
        }
    }

    // Diagonal observable in the computational basis; equal entries form one band.
    static HermitianObservable from_diagonal(const std::vector<double>& diagonal) {
        if (diagonal.empty()) {
            throw DimensionMismatch("empty diagonal");
        }
        const auto dim = static_cast<Index>(diagonal.size());
        std::vector<double> levels = diagonal;
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        std::vector<SpectralBand> bands;
        for (double level : levels) {
            Matrix p = Matrix::Zero(dim, dim);
            for (Index i = 0; i < dim; ++i) {
                if (diagonal[static_cast<std::size_t>(i)] == level) {
                    p(i, i) = 1.0;
                }
            }
            bands.push_back({level, std::move(p)});
        }
        return HermitianObservable(std::move(bands));
    }

    Index dim() const { return dim_; }
    std::size_t size() const { return bands_.size(); }
    const std::vector<SpectralBand>& bands() const { return bands_; }
    double value(std::size_t m) const { return bands_.at(m).value; }
    const Matrix& projection(std::size_t m) const { return bands_.at(m).projection; }

    Index rank(std::size_t m) const {
        return static_cast<Index>(std::lround(projection(m).trace().real()));
    }
    bool is_zero(std::size_t m) const { return rank(m) == 0; }

    Matrix matrix() const {
        Matrix h = Matrix::Zero(dim_, dim_);
        for (const auto& b : bands_) {
            h += b.value * b.projection;
        }
        return h;
    }

    // Largest |eigenvalue| over outcomes with non-zero projection.
    double energy_scale() const {
        double s = 0.0;
        for (std::size_t m = 0; m < bands_.size(); ++m) {
            if (!is_zero(m)) {
                s = std::max(s, std::abs(bands_[m].value));
            }
        }
        return s;
    }

    // exp(-i theta H), built from the spectral form.
    Matrix evolution(double theta) const {
        Matrix u = Matrix::Zero(dim_, dim_);
        for (const auto& b : bands_) {
            u += std::exp(Complex(0.0, -theta * b.value)) * b.projection;
        }
        return u;
    }

    // Outcome whose projection contains `v` (up to tol), if any.
    std::optional<std::size_t> band_containing(const Vector& v, double tol) const {
        if (v.size() != dim_) {
            throw DimensionMismatch("vector does not match observable dimension");
        }
        const double norm = v.norm();
        for (std::size_t m = 0; m < bands_.size(); ++m) {
            if ((bands_[m].projection * v - v).norm() <= tol * std::max(1.0, norm)) {
                return m;
            }
        }
        return std::nullopt;
    }

private:
    Index dim_ = 0;
    std::vector<SpectralBand> bands_;
};

// Spectral form of a Hermitian matrix. Sorted eigenvalues are merged into one
// band while the gap to the previous one is below
// degeneracy_tol * max(1, |H|_max); each band's eigenvectors are
// re-orthonormalized before forming the projection.
inline HermitianObservable spectral_decompose(const Matrix& h, double degeneracy_tol = kDefaultDegeneracyTol) {
    if (!is_square(h) || h.rows() < 1) {
        throw DimensionMismatch("spectral_decompose needs a non-empty square matrix");
    }
    if (!h.allFinite()) {
        throw InvariantViolation("matrix has non-finite entries");
    }
    if (!is_hermitian(h, kDefaultNormTol)) {
        throw InvariantViolation("matrix is not Hermitian");
    }
    const Matrix sym = 0.5 * (h + h.adjoint());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) {
        throw InvariantViolation("eigensolver did not converge");
    }
    const Eigen::VectorXd& evals = es.eigenvalues();
    const Matrix& evecs = es.eigenvectors();
    const double gap_tol = degeneracy_tol * std::max(1.0, max_abs(h));
    const Index n = h.rows();

    std::vector<SpectralBand> bands;
    Index start = 0;
    while (start < n) {
        Index stop = start + 1;
        while (stop < n && evals(stop) - evals(stop - 1) < gap_tol) {
            ++stop;
        }
        const Index width = stop - start;
        const Eigen::HouseholderQR<Matrix> qr(evecs.middleCols(start, width));
        const Matrix basis = qr.householderQ() * Matrix::Identity(n, width);
        Matrix p = basis * basis.adjoint();
        p = 0.5 * (p + p.adjoint()).eval();
        bands.push_back({evals.segment(start, width).mean(), std::move(p)});
        start = stop;
    }
    return HermitianObservable(std::move(bands));
}

} // namespace tpm
