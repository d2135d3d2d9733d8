#pragma once

// Dense complex linear algebra on finite-dimensional Hilbert spaces:
// Kronecker composition, slot embedding, partial traces, validated state
// types and seeded random generators. Factor 0 of a composite space is the
// most significant index (row-major block convention, matching Eigen's
// kroneckerProduct).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tpm/errors.hpp"

namespace tpm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr double kDefaultNormTol = 1e-10;

// Max-absolute-entry norm; the default operator comparison throughout.
inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const Vector& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& m) {
    return m.allFinite();
}

inline bool is_square(const Matrix& m) {
    return m.rows() == m.cols();
}

inline bool is_hermitian(const Matrix& m, double tol) {
    return is_square(m) && max_abs(Matrix(m - m.adjoint())) <= tol * std::max(1.0, max_abs(m));
}

inline bool is_unitary(const Matrix& u, double tol = kDefaultNormTol) {
    if (!is_square(u)) {
        return false;
    }
    const Matrix id = Matrix::Identity(u.rows(), u.cols());
    return max_abs(Matrix(u.adjoint() * u - id)) <= tol;
}

inline void require_unitary(const Matrix& u, const std::string& name, double tol = kDefaultNormTol) {
    if (!is_square(u)) {
        throw DimensionMismatch(name + " is not square");
    }
    if (!u.allFinite()) {
        throw InvariantViolation(name + " has non-finite entries");
    }
    if (!is_unitary(u, tol)) {
        throw InvariantViolation(name + " is not unitary");
    }
}

inline void require_square(const Matrix& m, Index dim, const std::string& name) {
    if (m.rows() != dim || m.cols() != dim) {
        throw DimensionMismatch(name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", expected " + std::to_string(dim) + "x" + std::to_string(dim));
    }
}

inline Complex trace_of_product(const Matrix& a, const Matrix& b) {
    // tr[AB] without forming AB
    return (a.transpose().cwiseProduct(b)).sum();
}

inline Matrix commutator(const Matrix& a, const Matrix& b) {
    return a * b - b * a;
}

inline Matrix tensor_product(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline Vector tensor_product(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (Index i = 0; i < a.size(); ++i) {
        out.segment(i * b.size(), b.size()) = a(i) * b;
    }
    return out;
}

inline Matrix outer(const Vector& ket, const Vector& bra) {
    return ket * bra.adjoint();
}

// Ordered list of factor dimensions of a tensor-product space.
class CompositeSpace {
public:
    CompositeSpace() = default;
    CompositeSpace(std::initializer_list<Index> dims) : CompositeSpace(std::vector<Index>(dims)) {}
    explicit CompositeSpace(std::vector<Index> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) {
            throw DimensionMismatch("composite space needs at least one factor");
        }
        for (Index d : dims_) {
            if (d < 1) {
                throw DimensionMismatch("factor dimensions must be positive");
            }
        }
    }

    const std::vector<Index>& dims() const { return dims_; }
    std::size_t factors() const { return dims_.size(); }
    Index dim(std::size_t slot) const { return dims_.at(slot); }

    Index total() const {
        return std::accumulate(dims_.begin(), dims_.end(), Index{1}, std::multiplies<>());
    }

    // Digits of a flat index, most significant factor first.
    std::vector<Index> digits(Index flat) const {
        std::vector<Index> out(dims_.size());
        for (std::size_t k = dims_.size(); k-- > 0;) {
            out[k] = flat % dims_[k];
            flat /= dims_[k];
        }
        return out;
    }

    bool operator==(const CompositeSpace&) const = default;

private:
    std::vector<Index> dims_;
};

namespace detail {

// Splits every flat index of `space` into (index within the chosen slots,
// index within the remaining slots). Chosen slots keep the order given.
struct SlotSplit {
    std::vector<Index> sub;
    std::vector<Index> rest;
    Index sub_dim = 1;
    Index rest_dim = 1;
};

inline SlotSplit split_slots(const CompositeSpace& space, const std::vector<std::size_t>& slots) {
    std::vector<bool> chosen(space.factors(), false);
    for (std::size_t s : slots) {
        if (s >= space.factors()) {
            throw DimensionMismatch("slot " + std::to_string(s) + " out of range");
        }
        if (chosen[s]) {
            throw DimensionMismatch("slot " + std::to_string(s) + " listed twice");
        }
        chosen[s] = true;
    }
    SlotSplit split;
    for (std::size_t s : slots) {
        split.sub_dim *= space.dim(s);
    }
    split.rest_dim = space.total() / split.sub_dim;
    const Index n = space.total();
    split.sub.resize(static_cast<std::size_t>(n));
    split.rest.resize(static_cast<std::size_t>(n));
    for (Index flat = 0; flat < n; ++flat) {
        const auto dig = space.digits(flat);
        Index sub = 0;
        for (std::size_t s : slots) {
            sub = sub * space.dim(s) + dig[s];
        }
        Index rest = 0;
        for (std::size_t k = 0; k < space.factors(); ++k) {
            if (!chosen[k]) {
                rest = rest * space.dim(k) + dig[k];
            }
        }
        split.sub[static_cast<std::size_t>(flat)] = sub;
        split.rest[static_cast<std::size_t>(flat)] = rest;
    }
    return split;
}

} // namespace detail

// `op` acting on the listed slots (in the order listed), identity elsewhere.
inline Matrix embed(const Matrix& op, const CompositeSpace& space, const std::vector<std::size_t>& slots) {
    const auto split = detail::split_slots(space, slots);
    require_square(op, split.sub_dim, "embedded operator");
    const Index n = space.total();
    Matrix out = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        for (Index j = 0; j < n; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (split.rest[iu] == split.rest[ju]) {
                out(i, j) = op(split.sub[iu], split.sub[ju]);
            }
        }
    }
    return out;
}

inline Matrix embed(const Matrix& op, const CompositeSpace& space, std::size_t slot) {
    return embed(op, space, std::vector<std::size_t>{slot});
}

// Applies `op` on the listed slots of a state vector without forming the
// embedded matrix.
inline Vector apply_on_slots(const Matrix& op, const Vector& state, const CompositeSpace& space,
                             const std::vector<std::size_t>& slots) {
    if (state.size() != space.total()) {
        throw DimensionMismatch("state vector does not match composite space");
    }
    const auto split = detail::split_slots(space, slots);
    require_square(op, split.sub_dim, "local operator");
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(split.rest_dim),
                                           std::vector<Index>(static_cast<std::size_t>(split.sub_dim)));
    for (Index flat = 0; flat < space.total(); ++flat) {
        const auto f = static_cast<std::size_t>(flat);
        groups[static_cast<std::size_t>(split.rest[f])][static_cast<std::size_t>(split.sub[f])] = flat;
    }
    Vector out(state.size());
    Vector local(split.sub_dim);
    for (const auto& g : groups) {
        for (std::size_t k = 0; k < g.size(); ++k) {
            local(static_cast<Index>(k)) = state(g[k]);
        }
        const Vector mapped = op * local;
        for (std::size_t k = 0; k < g.size(); ++k) {
            out(g[k]) = mapped(static_cast<Index>(k));
        }
    }
    return out;
}

inline Matrix partial_trace(const Matrix& m, const CompositeSpace& space, const std::vector<std::size_t>& keep) {
    require_square(m, space.total(), "operator for partial trace");
    std::vector<std::size_t> kept = keep;
    std::sort(kept.begin(), kept.end());
    const auto split = detail::split_slots(space, kept);
    Matrix out = Matrix::Zero(split.sub_dim, split.sub_dim);
    const Index n = space.total();
    for (Index i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        for (Index j = 0; j < n; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (split.rest[iu] == split.rest[ju]) {
                out(split.sub[iu], split.sub[ju]) += m(i, j);
            }
        }
    }
    return out;
}

// Unit vector in a finite-dimensional Hilbert space.
class PureState {
public:
    explicit PureState(Vector amplitudes, double norm_tol = kDefaultNormTol) : amps_(std::move(amplitudes)) {
        if (amps_.size() < 1) {
            throw DimensionMismatch("pure state needs dimension >= 1");
        }
        if (!amps_.allFinite()) {
            throw InvariantViolation("pure state has non-finite amplitudes");
        }
        if (std::abs(amps_.norm() - 1.0) > norm_tol) {
            throw InvariantViolation("pure state is not normalized (norm " + std::to_string(amps_.norm()) + ")");
        }
    }

    static PureState basis(Index dim, Index k) {
        if (k < 0 || k >= dim) {
            throw DimensionMismatch("basis index out of range");
        }
        Vector v = Vector::Zero(dim);
        v(k) = 1.0;
        return PureState(std::move(v));
    }

    Index dim() const { return amps_.size(); }
    const Vector& amplitudes() const { return amps_; }
    Matrix projector() const { return outer(amps_, amps_); }

private:
    Vector amps_;
};

inline constexpr double kDefaultPsdTol = 1e-10;

// Positive unit-trace operator.
class DensityOperator {
public:
    explicit DensityOperator(Matrix m, double tol = kDefaultPsdTol) : m_(std::move(m)) {
        if (!is_square(m_) || m_.rows() < 1) {
            throw DimensionMismatch("density operator must be a non-empty square matrix");
        }
        if (!m_.allFinite()) {
            throw InvariantViolation("density operator has non-finite entries");
        }
        if (!is_hermitian(m_, tol)) {
            throw InvariantViolation("density operator is not Hermitian");
        }
        if (std::abs(m_.trace() - Complex(1.0)) > tol) {
            throw InvariantViolation("density operator trace differs from 1");
        }
        const Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol) {
            throw InvariantViolation("density operator has a negative eigenvalue");
        }
    }

    explicit DensityOperator(const PureState& psi) : m_(psi.projector()) {}

    static DensityOperator maximally_mixed(Index dim) {
        return DensityOperator(Matrix(Matrix::Identity(dim, dim) / static_cast<double>(dim)));
    }

    Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }

private:
    Matrix m_;
};

namespace detail {

inline Matrix ginibre(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            g(i, j) = Complex(re, im);
        }
    }
    return g;
}

} // namespace detail

// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
// of R's diagonal absorbed into Q.
inline Matrix random_unitary(Index dim, std::uint64_t seed) {
    if (dim < 1) {
        throw DimensionMismatch("random_unitary needs dim >= 1");
    }
    std::mt19937_64 rng(seed);
    const Matrix g = detail::ginibre(dim, dim, rng);
    const Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index k = 0; k < dim; ++k) {
        const double a = std::abs(r(k, k));
        if (a > 0.0) {
            q.col(k) *= r(k, k) / a;
        }
    }
    return q;
}

inline DensityOperator random_density(Index dim, std::uint64_t seed) {
    if (dim < 1) {
        throw DimensionMismatch("random_density needs dim >= 1");
    }
    std::mt19937_64 rng(seed);
    const Matrix g = detail::ginibre(dim, dim, rng);
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return DensityOperator(std::move(rho));
}

inline PureState random_pure(Index dim, std::uint64_t seed) {
    if (dim < 1) {
        throw DimensionMismatch("random_pure needs dim >= 1");
    }
    std::mt19937_64 rng(seed);
    Vector v = detail::ginibre(dim, 1, rng).col(0);
    v.normalize();
    return PureState(std::move(v));
}

// SplitMix64 step; derives independent per-item seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace tpm
