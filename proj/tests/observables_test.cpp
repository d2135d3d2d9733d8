#include <gtest/gtest.h>

#include "support.hpp"
#include "tpm/observables.hpp"

using namespace tpm;
using tpm_test::diag;
using tpm_test::ket;

namespace {

Matrix pauli_x() {
    Matrix x(2, 2);
    x << 0, 1, 1, 0;
    return x;
}

// W diag(levels) W^dag with a random unitary W; repeated levels give degeneracy.
Matrix rotated(std::initializer_list<double> levels, std::uint64_t seed) {
    const Matrix w = random_unitary(static_cast<Index>(levels.size()), seed);
    return w * diag(levels) * w.adjoint();
}

Matrix random_hermitian(Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Matrix g = detail::ginibre(d, d, rng);
    return 0.5 * (g + g.adjoint());
}

} // namespace

TEST(SpectralDecompose, GroupsDegenerateLevels) {
    const auto obs = spectral_decompose(diag({1, 1, 2}));
    ASSERT_EQ(obs.size(), 2u);
    EXPECT_DOUBLE_EQ(obs.value(0), 1.0);
    EXPECT_DOUBLE_EQ(obs.value(1), 2.0);
    EXPECT_LE(max_abs(Matrix(obs.projection(0) - diag({1, 1, 0}))), 1e-12);
    EXPECT_LE(max_abs(Matrix(obs.projection(1) - diag({0, 0, 1}))), 1e-12);
    EXPECT_EQ(obs.rank(0), 2);
}

TEST(SpectralDecompose, PauliX) {
    const auto obs = spectral_decompose(pauli_x());
    ASSERT_EQ(obs.size(), 2u);
    const Matrix id = Matrix::Identity(2, 2);
    EXPECT_NEAR(obs.value(0), -1.0, 1e-14);
    EXPECT_NEAR(obs.value(1), 1.0, 1e-14);
    EXPECT_LE(max_abs(Matrix(obs.projection(0) - 0.5 * (id - pauli_x()))), 1e-12);
    EXPECT_LE(max_abs(Matrix(obs.projection(1) - 0.5 * (id + pauli_x()))), 1e-12);
}

TEST(SpectralDecompose, NearDegenerateWithinToleranceMerges) {
    const auto obs = spectral_decompose(diag({1, 1 + 1e-12, 2}));
    ASSERT_EQ(obs.size(), 2u);
    EXPECT_EQ(obs.rank(0), 2);
    EXPECT_EQ(obs.rank(1), 1);
}

TEST(SpectralDecompose, SeparatedLevelsStaySeparate) {
    EXPECT_EQ(spectral_decompose(diag({1, 1 + 1e-6, 2})).size(), 3u);
    EXPECT_EQ(spectral_decompose(diag({1, 1 + 1e-6, 2}), 1e-3).size(), 2u);
}

TEST(SpectralDecompose, RejectsBadInput) {
    Matrix nonherm = diag({1, 2});
    nonherm(0, 1) = 0.5;
    EXPECT_THROW(spectral_decompose(nonherm), InvariantViolation);
    EXPECT_THROW(spectral_decompose(Matrix(2, 3)), DimensionMismatch);
    EXPECT_THROW(spectral_decompose(diag({std::numeric_limits<double>::infinity(), 0})), InvariantViolation);
}

TEST(SpectralDecompose, ReconstructionInvariants) {
    const std::vector<Matrix> cases = {
        rotated({0, 0, 1, 2}, 1), rotated({-1, 3, 3, 3}, 2), rotated({5, 5, 5}, 3), random_hermitian(5, 4),
        random_hermitian(3, 5), rotated({0.2, 1, 1, 3}, 6),
    };
    for (const auto& h : cases) {
        const auto obs = spectral_decompose(h);
        const double scale = std::max(1.0, max_abs(h));
        EXPECT_LE(max_abs(Matrix(obs.matrix() - h)), 1e-10 * scale);
        Matrix sum = Matrix::Zero(h.rows(), h.cols());
        for (std::size_t m = 0; m < obs.size(); ++m) {
            sum += obs.projection(m);
            for (std::size_t n = 0; n < obs.size(); ++n) {
                const Matrix prod = obs.projection(m) * obs.projection(n);
                const Matrix expect = m == n ? obs.projection(m) : Matrix::Zero(h.rows(), h.cols());
                EXPECT_LE(max_abs(Matrix(prod - expect)), 1e-10);
            }
            if (m > 0) {
                EXPECT_LT(obs.value(m - 1), obs.value(m));
            }
        }
        EXPECT_LE(max_abs(Matrix(sum - Matrix::Identity(h.rows(), h.cols()))), 1e-12);
    }
}

TEST(SpectralDecompose, DegeneracyCountsSurviveRotation) {
    const auto obs = spectral_decompose(rotated({0, 0, 1, 2}, 17));
    ASSERT_EQ(obs.size(), 3u);
    EXPECT_EQ(obs.rank(0), 2);
    EXPECT_EQ(obs.rank(1), 1);
    EXPECT_EQ(obs.rank(2), 1);
}

TEST(HermitianObservable, RejectsIncompleteProjections) {
    EXPECT_THROW(HermitianObservable({{0.0, diag({1, 0})}}), InvariantViolation);
}

TEST(HermitianObservable, RejectsNonOrthogonalProjections) {
    const double r = 0.5;
    Matrix plus(2, 2);
    plus << r, r, r, r;
    EXPECT_THROW(HermitianObservable({{0.0, plus}, {1.0, diag({0, 1})}, {2.0, diag({1, 0}) - plus}}),
                 InvariantViolation);
}

TEST(HermitianObservable, RejectsSharedValueOnNonZeroBands) {
    EXPECT_THROW(HermitianObservable({{1.0, diag({1, 0})}, {1.0, diag({0, 1})}}), InvariantViolation);
}

TEST(HermitianObservable, AllowsZeroProjectionPadding) {
    const HermitianObservable obs({{0.0, diag({1, 0})}, {1.0, diag({0, 1})}, {1.0, Matrix::Zero(2, 2)}});
    EXPECT_EQ(obs.size(), 3u);
    EXPECT_TRUE(obs.is_zero(2));
    EXPECT_FALSE(obs.is_zero(1));
    EXPECT_EQ(obs.matrix(), diag({0, 1}));
    EXPECT_DOUBLE_EQ(obs.energy_scale(), 1.0);
}

TEST(HermitianObservable, RejectsEmptyAndMismatchedBands) {
    EXPECT_THROW(HermitianObservable(std::vector<SpectralBand>{}), InvariantViolation);
    EXPECT_THROW(HermitianObservable({{0.0, diag({1, 0})}, {1.0, diag({0, 1, 0})}}), DimensionMismatch);
    EXPECT_THROW(HermitianObservable::from_diagonal({}), DimensionMismatch);
}

TEST(HermitianObservable, FromDiagonalAndEvolution) {
    const auto obs = HermitianObservable::from_diagonal({2.0, 0.0, 2.0});
    ASSERT_EQ(obs.size(), 2u);
    EXPECT_EQ(obs.projection(1), diag({1, 0, 1}));
    const Matrix u = obs.evolution(0.7);
    EXPECT_TRUE(is_unitary(u));
    EXPECT_NEAR(std::abs(u(0, 0) - std::exp(Complex(0.0, -1.4))), 0.0, 1e-15);
    EXPECT_EQ(u(1, 1), Complex(1.0, 0.0));
}

TEST(HermitianObservable, BandContaining) {
    const auto obs = HermitianObservable::from_diagonal({0.0, 1.0, 1.0});
    EXPECT_EQ(obs.band_containing(ket({0, 0.6, 0.8}), 1e-12), std::optional<std::size_t>(1));
    EXPECT_EQ(obs.band_containing(ket({1, 0, 0}), 1e-12), std::optional<std::size_t>(0));
    EXPECT_FALSE(obs.band_containing(ket({0.6, 0.8, 0}), 1e-12).has_value());
    EXPECT_THROW(obs.band_containing(ket({1, 0}), 1e-12), DimensionMismatch);
}

TEST(LudersChannel, DiagonalOperandUnchanged) {
    const auto obs = HermitianObservable::from_diagonal({0.0, 1.0});
    EXPECT_EQ(luders_channel(obs, diag({0.3, 0.7})), diag({0.3, 0.7}));
}

TEST(LudersChannel, DephasesPlusState) {
    const auto obs = HermitianObservable::from_diagonal({0.0, 1.0});
    Matrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    EXPECT_EQ(luders_channel(obs, plus), diag({0.5, 0.5}));
}

TEST(LudersChannel, SingleOutcomeIsIdentity) {
    const auto obs = HermitianObservable::from_diagonal({4.0, 4.0, 4.0});
    const Matrix t = random_density(3, 8).matrix();
    EXPECT_LE(max_abs(Matrix(luders_channel(obs, t) - t)), 0.0);
}

TEST(LudersChannel, IdempotentTracePreservingHermitian) {
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto obs = spectral_decompose(rotated({0, 0, 1, 3}, 300 + k));
        const Matrix rho = random_density(4, 400 + k).matrix();
        const Matrix once = luders_channel(obs, rho);
        EXPECT_LE(max_abs(Matrix(luders_channel(obs, once) - once)), 1e-12);
        EXPECT_NEAR(std::abs(once.trace() - rho.trace()), 0.0, 1e-12);
        EXPECT_TRUE(is_hermitian(once, 1e-12));
    }
}

TEST(LudersChannel, FixedPointIffCommutes) {
    const Matrix h = rotated({0, 1, 1}, 21);
    const auto obs = spectral_decompose(h);
    const Matrix generic = random_density(3, 22).matrix();
    EXPECT_FALSE(commutes(h, generic, 1e-10));
    EXPECT_GT(max_abs(Matrix(luders_channel(obs, generic) - generic)), 1e-3);
    const Matrix dephased = luders_channel(obs, generic);
    EXPECT_TRUE(commutes(h, dephased, 1e-10));
    EXPECT_LE(max_abs(Matrix(luders_channel(obs, dephased) - dephased)), 1e-12);
}

TEST(LudersChannel, RejectsDimensionMismatch) {
    const auto obs = HermitianObservable::from_diagonal({0.0, 1.0});
    EXPECT_THROW(luders_channel(obs, diag({1, 0, 0})), DimensionMismatch);
}

TEST(MeasurementBranches, EigenstateHasSingleBranch) {
    const auto obs = HermitianObservable::from_diagonal({0.0, 1.0, 2.0});
    const auto branches = ideal_measurement_branches(obs, DensityOperator(PureState::basis(3, 1)));
    ASSERT_EQ(branches.size(), 3u);
    EXPECT_DOUBLE_EQ(branches[0].probability, 0.0);
    EXPECT_DOUBLE_EQ(branches[1].probability, 1.0);
    EXPECT_DOUBLE_EQ(branches[2].probability, 0.0);
    EXPECT_EQ(branches[1].state, diag({0, 1, 0}));
}

TEST(MeasurementBranches, PlusStateSplitsEvenly) {
    const auto obs = HermitianObservable::from_diagonal({0.0, 1.0});
    const double r = 1.0 / std::sqrt(2.0);
    const auto branches = ideal_measurement_branches(obs, DensityOperator(PureState(ket({r, r}))));
    ASSERT_EQ(branches.size(), 2u);
    EXPECT_NEAR(branches[0].probability, 0.5, 1e-15);
    EXPECT_NEAR(branches[1].probability, 0.5, 1e-15);
    EXPECT_LE(max_abs(Matrix(branches[0].state - diag({0.5, 0}))), 1e-15);
}

TEST(MeasurementBranches, PaddingBranchRetainedWithZeroProbability) {
    const HermitianObservable obs({{0.0, diag({1, 0})}, {1.0, diag({0, 1})}, {3.0, Matrix::Zero(2, 2)}});
    const auto branches = ideal_measurement_branches(obs, random_density(2, 5));
    ASSERT_EQ(branches.size(), 3u);
    EXPECT_EQ(branches[2].label, 2u);
    EXPECT_EQ(branches[2].probability, 0.0);
    EXPECT_EQ(branches[2].state, Matrix(Matrix::Zero(2, 2)));
}

TEST(MeasurementBranches, SumReconstructsLuders) {
    const auto obs = spectral_decompose(rotated({0, 1, 1, 2}, 31));
    const auto rho = random_density(4, 32);
    const auto branches = ideal_measurement_branches(obs, rho);
    Matrix sum = Matrix::Zero(4, 4);
    double total = 0.0;
    for (const auto& b : branches) {
        sum += b.state;
        total += b.probability;
        EXPECT_GE(b.probability, -1e-15);
    }
    EXPECT_LE(max_abs(Matrix(sum - luders_channel(obs, rho.matrix()))), 1e-15);
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_THROW(ideal_measurement_branches(obs, random_density(3, 1)), DimensionMismatch);
}

TEST(Commutes, DiagonalPairsAndPaulis) {
    EXPECT_TRUE(commutes(diag({0, 1}), diag({3, -2}), 1e-12));
    EXPECT_FALSE(commutes(pauli_x(), diag({1, -1}), 1e-12));
    EXPECT_TRUE(commutes(Matrix(Matrix::Identity(3, 3)), random_density(3, 2).matrix(), 1e-12));
    EXPECT_THROW(commutes(diag({0, 1}), diag({0, 1, 2}), 1e-12), DimensionMismatch);
}
