#pragma once

// Seeded random scenario families and the checks run on each member.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tpm/tpm_extended.hpp"

namespace tpm {

enum class SweepMode { eigenstate_xi, pointer_equal, weak_conservation_family };

inline std::optional<SweepMode> parse_sweep_mode(std::string_view name) {
    if (name == "eigenstate-xi" || name == "eigenstate-ξ" || name == "eigenstate") {
        return SweepMode::eigenstate_xi;
    }
    if (name == "pointer-equal") {
        return SweepMode::pointer_equal;
    }
    if (name == "weak-conservation-family" || name == "weak-conservation") {
        return SweepMode::weak_conservation_family;
    }
    return std::nullopt;
}

inline std::string_view to_string(SweepMode mode) {
    switch (mode) {
    case SweepMode::eigenstate_xi:
        return "eigenstate-xi";
    case SweepMode::pointer_equal:
        return "pointer-equal";
    case SweepMode::weak_conservation_family:
        return "weak-conservation-family";
    }
    return "unknown";
}

struct SweepConfig {
    SweepMode mode = SweepMode::eigenstate_xi;
    std::uint64_t master_seed = 0;
    std::size_t count = 100;
    Index system_min = 2;
    Index system_max = 4;
    Index probe_max = 4;
    double tol = kDefaultNormTol;
    std::size_t state_samples = 100; // distribution-equality samples
    unsigned threads = 0;            // 0: hardware concurrency
};

struct RandomScenario {
    ExtendedScenario scenario;
    DensityOperator state;
    std::uint64_t seed = 0;
};

namespace detail {

inline Index uniform_index(std::mt19937_64& rng, Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, std::max(lo, hi))(rng);
}

// Random-basis Hamiltonian with integer-spaced (often degenerate) levels and
// at least two distinct eigenvalues.
inline HermitianObservable random_system_hamiltonian(std::mt19937_64& rng, Index dim) {
    std::uniform_real_distribution<double> spacing(0.5, 2.0);
    std::uniform_real_distribution<double> offset(-1.0, 1.0);
    Eigen::VectorXd levels(dim);
    do {
        for (Index i = 0; i < dim; ++i) {
            levels(i) = static_cast<double>(uniform_index(rng, 0, dim - 1));
        }
    } while (levels.maxCoeff() == levels.minCoeff());
    levels = levels * spacing(rng) + Eigen::VectorXd::Constant(dim, offset(rng));
    const Matrix w = random_unitary(dim, rng());
    const Matrix h = w * levels.cast<Complex>().asDiagonal() * w.adjoint();
    return spectral_decompose(h);
}

inline HermitianObservable pad_outcomes(const HermitianObservable& obs, std::size_t extra) {
    std::vector<SpectralBand> bands = obs.bands();
    double top = bands.back().value;
    for (std::size_t k = 0; k < extra; ++k) {
        top += 1.0;
        bands.push_back({top, Matrix::Zero(obs.dim(), obs.dim())});
    }
    return HermitianObservable(std::move(bands));
}

// H_A with |0> as an eigenvector and a random-basis block on its complement.
inline HermitianObservable random_probe_hamiltonian_fixing_ground(std::mt19937_64& rng, Index dim) {
    std::uniform_real_distribution<double> spacing(0.5, 1.5);
    const double s = spacing(rng);
    Matrix h = Matrix::Zero(dim, dim);
    h(0, 0) = s * static_cast<double>(uniform_index(rng, 0, 2));
    if (dim > 1) {
        Eigen::VectorXd levels(dim - 1);
        for (Index i = 0; i < dim - 1; ++i) {
            levels(i) = s * static_cast<double>(uniform_index(rng, 0, 2));
        }
        const Matrix w = random_unitary(dim - 1, rng());
        h.bottomRightCorner(dim - 1, dim - 1) = w * levels.cast<Complex>().asDiagonal() * w.adjoint();
    }
    h = 0.5 * (h + h.adjoint()).eval();
    return spectral_decompose(h);
}

inline std::vector<double> pointer_equal_energies(Index probe_dim, const std::vector<double>& per_outcome) {
    const auto assignment = default_pointer_assignment(probe_dim, per_outcome.size());
    std::vector<double> out;
    for (auto m : assignment) {
        out.push_back(per_outcome[m]);
    }
    return out;
}

} // namespace detail

// Scenario families:
//  eigenstate_xi            canonical probes, |xi> = |0> an eigenstate of a
//                           generic H_A, random free-evolution times;
//  pointer_equal            H_A = sum_m lambda_m Z_m with random lambda_m and
//                           a state that does not commute with H;
//  weak_conservation_family lambda_m drawn from {0, 1} (and a possibly padded
//                           zero-projection outcome with lambda in {0, 1, 2}),
//                           so weak conservation holds for some members only.
inline RandomScenario random_scenario(SweepMode mode, std::uint64_t seed, Index system_min = 2,
                                      Index system_max = 4, Index probe_max = 4) {
    std::mt19937_64 rng(seed);
    const Index d = detail::uniform_index(rng, system_min, system_max);
    HermitianObservable h = detail::random_system_hamiltonian(rng, d);
    if (mode == SweepMode::weak_conservation_family && std::bernoulli_distribution(0.5)(rng)) {
        h = detail::pad_outcomes(h, 1);
    }
    const auto n = static_cast<Index>(h.size());
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double theta0 = angle(rng);
    const double theta1 = angle(rng);

    auto make_probe = [&]() {
        const Index da = detail::uniform_index(rng, n, std::max(n, probe_max));
        switch (mode) {
        case SweepMode::eigenstate_xi:
            return build_canonical_scheme(h, da, detail::random_probe_hamiltonian_fixing_ground(rng, da));
        case SweepMode::pointer_equal: {
            std::uniform_real_distribution<double> lam(-1.0, 1.0);
            std::vector<double> per_outcome;
            for (Index m = 0; m < n; ++m) {
                per_outcome.push_back(lam(rng));
            }
            return build_canonical_scheme(h, da, detail::pointer_equal_energies(da, per_outcome));
        }
        case SweepMode::weak_conservation_family:
        default: {
            std::vector<double> per_outcome;
            for (Index m = 0; m < n; ++m) {
                const Index top = h.is_zero(static_cast<std::size_t>(m)) ? 2 : 1;
                per_outcome.push_back(static_cast<double>(detail::uniform_index(rng, 0, top)));
            }
            return build_canonical_scheme(h, da, detail::pointer_equal_energies(da, per_outcome));
        }
        }
    };
    auto probe0 = make_probe();
    auto probe1 = make_probe();
    const Matrix v = random_unitary(d, rng());
    DensityOperator rho = random_density(d, rng());
    if (mode == SweepMode::pointer_equal) {
        while (commutes(h.matrix(), rho.matrix(), 1e-6)) {
            rho = random_density(d, rng());
        }
    }
    return RandomScenario{ExtendedScenario(h, v, std::move(probe0), std::move(probe1), theta0, theta1), std::move(rho),
                          seed};
}

struct SweepCheck {
    std::string name;
    bool pass = false;
    double deviation = 0.0;
};

struct SweepRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    Index system_dim = 0;
    Index probe0_dim = 0;
    Index probe1_dim = 0;
    std::vector<SweepCheck> checks;

    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const SweepCheck& c) { return c.pass; });
    }
};

inline SweepRecord evaluate_scenario(const RandomScenario& rs, SweepMode mode, double tol,
                                     std::size_t state_samples = 100) {
    const auto& scn = rs.scenario;
    SweepRecord rec;
    rec.seed = rs.seed;
    rec.system_dim = scn.system().dim();
    rec.probe0_dim = scn.probe(0).probe_dim();
    rec.probe1_dim = scn.probe(1).probe_dim();
    auto add = [&](std::string name, double dev) { rec.checks.push_back({std::move(name), dev <= tol, dev}); };

    if (mode == SweepMode::weak_conservation_family) {
        std::vector<DensityOperator> samples{rs.state};
        for (std::size_t k = 1; k < state_samples; ++k) {
            samples.push_back(random_density(scn.system().dim(), derive_seed(rs.seed, k)));
        }
        const auto r = check_distribution_equality(scn, samples, tol);
        rec.checks.push_back({"distribution_equality", r.distributions_equal, r.check.max_deviation});
        rec.checks.push_back({"weak_conservation", r.structural_condition, 0.0});
        rec.checks.push_back({"measurement_work_zero", r.measurement_work_vanishes, r.max_measurement_work});
        rec.checks.push_back({"three_way_agreement", r.three_way_agreement, 0.0});
        return rec;
    }

    const auto table = extended_tpm(scn, rs.state);
    const auto joint = tpm_joint(scn.system(), scn.process(), rs.state);
    const auto marginal = marginal_system(table);
    double sc = 0.0;
    for (std::size_t i = 0; i < joint.rows.size(); ++i) {
        sc = std::max(sc, std::abs(marginal.rows[i].probability - joint.rows[i].probability));
    }
    add("self_consistency", sc);
    add("normalization", std::abs(table.total_probability() - 1.0));
    add("closed_form_system",
        std::abs(average_work(work_distribution(joint)) - average_work_closed_form(scn.system(), scn.process(), rs.state)));
    add("closed_form_total", std::abs(average_total_work(table) - average_total_work_closed_form(scn, rs.state)));
    if (mode == SweepMode::pointer_equal) {
        add("first_law", std::abs(average_total_work(table) - total_unmeasured_work(scn, rs.state)));
        add("strong_repeatability", check_strong_repeatability(scn, rs.state, tol).max_deviation);
    }
    return rec;
}

// Member i uses seed derive_seed(master_seed, i); results are ordered by i
// whatever the thread count.
inline std::vector<SweepRecord> run_sweep(const SweepConfig& cfg) {
    std::vector<SweepRecord> records(cfg.count);
    unsigned threads = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(cfg.count, 1)));
    std::vector<std::exception_ptr> errors(threads);
    auto work = [&](unsigned t) {
        try {
            for (std::size_t i = t; i < cfg.count; i += threads) {
                const auto seed = derive_seed(cfg.master_seed, i);
                const auto rs = random_scenario(cfg.mode, seed, cfg.system_min, cfg.system_max, cfg.probe_max);
                records[i] = evaluate_scenario(rs, cfg.mode, cfg.tol, cfg.state_samples);
                records[i].index = i;
            }
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(work, t);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return records;
}

} // namespace tpm
