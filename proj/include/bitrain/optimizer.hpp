// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers
//
// Full-CSI iterative optimizers: separate uplink/downlink alternating MMSE
// optimization, the simultaneous tied-filter scheme (fixed symbol powers or
// per-iteration power normalization), and a projected-gradient sum-capacity
// reference bound.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "bitrain/objectives.hpp"

namespace bitrain {

struct OptimizerConfig {
    int max_iters = 100;
    /// Stop when the objective (fixed modes) or the largest normalized filter
    /// move (power-normalized simultaneous mode) changes by less than this
    /// between full iterations.
    double rel_tol = 1e-8;
    Structure structure = uplink(FilterKind::kLinear);
    double rho = 1.0;
    double beta = 1.0;
    bool normalize_powers = false;
    bool capture_trajectory = true;
    bool random_init = false;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
        if (!(rel_tol > 0.0)) throw std::invalid_argument("optimizer: rel_tol must be positive");
        if (!normalize_powers && (!(rho > 0.0) || !(beta > 0.0)))
            throw std::invalid_argument("optimizer: rho and beta must be positive");
    }
};

struct OptimizeResult {
    CellBanks banks;
    /// Objective after every half-step (sum MSE for the separate optimizers,
    /// forward potential for the fixed simultaneous mode, uplink sum MSE per
    /// iteration for the normalized mode).
    std::vector<double> trajectory;
    int iterations = 0;
    /// Largest filter move produced by one additional full update at the end.
    double fixed_point_residual = 0.0;
    bool monotone = true;
    /// Largest relative |forward - backward| potential gap seen (simultaneous).
    double max_pair_gap = 0.0;
};

namespace detail {

inline void check_monotone(std::vector<double>& trajectory, bool& flag, double value) {
    if (!trajectory.empty() && value > trajectory.back() + 1e-9) flag = false;
    trajectory.push_back(value);
}

inline double max_filter_change(const CellBanks& a, const CellBanks& b) {
    double worst = 0.0;
    auto scan = [&](const std::vector<Eigen::VectorXcd>& x, const std::vector<Eigen::VectorXcd>& y) {
        for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
            if (x[i].size() == y[i].size() && x[i].size() > 0)
                worst = std::max(worst, (x[i] - y[i]).norm());
    };
    for (std::size_t c = 0; c < a.size(); ++c) {
        scan(a[c].v, b[c].v);
        scan(a[c].g, b[c].g);
        scan(a[c].t, b[c].t);
        scan(a[c].r, b[c].r);
    }
    return worst;
}

}  // namespace detail

/// Alternates the uplink receive and precoder updates until the sum MSE
/// settles. The trajectory holds the sum MSE after every half-step and is
/// nonincreasing: each half-step exactly minimizes the Lagrangian over its
/// block while all power constraints stay tight.
inline OptimizeResult optimize_uplink(const ChannelSet& channels, const OptimizerConfig& config,
                                      std::optional<CellBanks> warm_start = std::nullopt) {
    config.validate();
    const auto& spec = channels.spec;
    const Structure structure = uplink(config.structure.kind);
    OptimizeResult result;
    result.banks = warm_start ? std::move(*warm_start)
                              : (config.random_init ? random_banks(spec, config.init_seed)
                                                    : initial_banks(spec));
    double previous = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= config.max_iters; ++iter) {
        result.banks = uplink_rx_update(channels, std::move(result.banks), spec.uplink_noise_var,
                                        structure);
        const double after_rx = sum_mse(channels, result.banks, spec.uplink_noise_var, structure);
        result.banks = uplink_tx_update(channels, std::move(result.banks), spec.user_powers,
                                        structure);
        const double after_tx = sum_mse(channels, result.banks, spec.uplink_noise_var, structure);
        if (config.capture_trajectory) {
            detail::check_monotone(result.trajectory, result.monotone, after_rx);
            detail::check_monotone(result.trajectory, result.monotone, after_tx);
        }
        result.iterations = iter;
        if (std::abs(previous - after_tx) <= config.rel_tol * std::max(std::abs(after_tx), 1e-300))
            break;
        previous = after_tx;
    }
    CellBanks probe = uplink_rx_update(channels, result.banks, spec.uplink_noise_var, structure);
    probe = uplink_tx_update(channels, std::move(probe), spec.user_powers, structure);
    result.fixed_point_residual = detail::max_filter_change(result.banks, probe);
    return result;
}

/// Downlink counterpart: iterates the precoder update (sum-power equality at
/// each BTS) and the user receive update, tracking the downlink sum MSE.
inline OptimizeResult optimize_downlink(const ChannelSet& channels, const OptimizerConfig& config,
                                        std::optional<CellBanks> warm_start = std::nullopt) {
    config.validate();
    const auto& spec = channels.spec;
    const Structure structure = downlink(config.structure.kind);
    OptimizeResult result;
    result.banks = warm_start ? std::move(*warm_start)
                              : (config.random_init ? random_banks(spec, config.init_seed)
                                                    : initial_banks(spec));
    for (auto& bank : result.banks) {
        bank.r.resize(static_cast<std::size_t>(spec.users_per_cell));
        for (int k = 0; k < spec.users_per_cell; ++k) {
            auto& r = bank.r[static_cast<std::size_t>(k)];
            if (r.size() != spec.user_antennas[static_cast<std::size_t>(k)]) {
                r = Eigen::VectorXcd::Zero(spec.user_antennas[static_cast<std::size_t>(k)]);
                r(0) = 1.0;
            }
        }
    }
    double previous = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= config.max_iters; ++iter) {
        result.banks = downlink_tx_update(channels, std::move(result.banks), spec.bts_power,
                                          structure);
        const double after_tx = sum_mse(channels, result.banks, spec.user_noise_vars, structure);
        result.banks = downlink_rx_update(channels, std::move(result.banks), spec.user_noise_vars,
                                          structure);
        const double after_rx = sum_mse(channels, result.banks, spec.user_noise_vars, structure);
        if (config.capture_trajectory) {
            detail::check_monotone(result.trajectory, result.monotone, after_tx);
            detail::check_monotone(result.trajectory, result.monotone, after_rx);
        }
        result.iterations = iter;
        if (std::abs(previous - after_rx) <= config.rel_tol * std::max(std::abs(after_rx), 1e-300))
            break;
        previous = after_rx;
    }
    CellBanks probe = downlink_tx_update(channels, result.banks, spec.bts_power, structure);
    probe = downlink_rx_update(channels, std::move(probe), spec.user_noise_vars, structure);
    result.fixed_point_residual = detail::max_filter_change(result.banks, probe);
    return result;
}

/// Simultaneous uplink/downlink optimization with tied filters: the user
/// filter serves as uplink precoder and downlink receiver, the BTS filter as
/// uplink receiver and downlink precoder. With fixed symbol powers (rho,
/// beta) the forward/backward potential decreases at every half-step and the
/// trajectory records it. With normalize_powers the precoders are rescaled to
/// the power budgets after each tie; convergence is then only observed, never
/// asserted, and `monotone` reports what happened.
inline OptimizeResult optimize_simultaneous(const ChannelSet& channels,
                                            const OptimizerConfig& config) {
    config.validate();
    const auto& spec = channels.spec;
    const FilterKind kind = config.structure.kind;
    OptimizeResult result;
    result.banks = config.random_init ? random_banks(spec, config.init_seed) : initial_banks(spec);
    for (auto& bank : result.banks) {
        bank.r = bank.v;
        bank.t.assign(static_cast<std::size_t>(spec.users_per_cell),
                      Eigen::VectorXcd::Zero(spec.bts_antennas));
        bank.g = bank.t;
    }
    const double rho = config.normalize_powers ? 1.0 : config.rho;
    const double beta = config.normalize_powers ? 1.0 : config.beta;
    std::vector<double> scaled_user_noise(spec.user_noise_vars);
    for (double& s : scaled_user_noise) s /= beta;

    double previous = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= config.max_iters; ++iter) {
        const CellBanks before = result.banks;
        // Forward half: BTS filters from the tied user precoders.
        result.banks = uplink_rx_update(channels, std::move(result.banks),
                                        spec.uplink_noise_var / rho, uplink(kind));
        CellBanks metric_banks = result.banks;  // raw MMSE g for readouts
        if (config.normalize_powers) {
            // Every BTS has the same budget, so each cell scales on its own sum.
            for (auto& bank : result.banks) {
                double cell_sum = 0.0;
                for (auto& gk : bank.g) cell_sum += gk.squaredNorm();
                const double scale = cell_sum > 0.0 ? std::sqrt(spec.bts_power / cell_sum) : 1.0;
                for (auto& gk : bank.g) gk *= scale;
            }
        }
        for (auto& bank : result.banks) bank.t = bank.g;

        if (!config.normalize_powers && config.capture_trajectory) {
            const auto [fwd, bwd] = potential_pair(channels, result.banks, rho, beta, kind);
            result.max_pair_gap = std::max(
                result.max_pair_gap, std::abs(fwd - bwd) / std::max(std::abs(fwd), 1e-300));
            detail::check_monotone(result.trajectory, result.monotone, fwd);
        }

        // Backward half: user filters from the tied BTS precoders.
        result.banks = downlink_rx_update(channels, std::move(result.banks), scaled_user_noise,
                                          downlink(kind));
        if (config.normalize_powers) {
            for (auto& bank : result.banks)
                for (int k = 0; k < spec.users_per_cell; ++k) {
                    auto& rk = bank.r[static_cast<std::size_t>(k)];
                    const double norm = rk.norm();
                    if (norm > 0.0)
                        rk *= std::sqrt(spec.user_powers[static_cast<std::size_t>(k)]) / norm;
                }
        }
        for (auto& bank : result.banks) bank.v = bank.r;
        result.iterations = iter;

        if (config.normalize_powers) {
            for (std::size_t c = 0; c < result.banks.size(); ++c) metric_banks[c].v = result.banks[c].v;
            if (config.capture_trajectory) {
                const double mse = sum_mse(channels, metric_banks, spec.uplink_noise_var,
                                           uplink(kind));
                detail::check_monotone(result.trajectory, result.monotone, mse);
            }
            const double move = detail::max_filter_change(before, result.banks);
            if (move <= config.rel_tol * std::sqrt(spec.bts_power)) break;
        } else {
            const auto [fwd, bwd] = potential_pair(channels, result.banks, rho, beta, kind);
            result.max_pair_gap = std::max(
                result.max_pair_gap, std::abs(fwd - bwd) / std::max(std::abs(fwd), 1e-300));
            if (config.capture_trajectory)
                detail::check_monotone(result.trajectory, result.monotone, fwd);
            if (std::abs(previous - fwd) <= config.rel_tol * std::max(std::abs(fwd), 1e-300)) break;
            previous = fwd;
        }
    }
    return result;
}

struct CapacityResult {
    double rate = 0.0;  // bits; a lower bound on the rank-one sum capacity
    std::vector<Eigen::VectorXcd> precoders;
};

/// Best-effort maximization of the single-cell sum rate
/// log2 det(I + (1/sigma^2) sum_k H_k v_k v_k' H_k') over full-power rank-one
/// precoders, by projected gradient ascent with restarts. Restart 0 starts
/// from the dominant right singular vectors, the rest from random directions.
inline CapacityResult capacity_reference(const ChannelSet& channels,
                                         std::span<const double> powers, double sigma2,
                                         int restarts = 8, int steps = 2000,
                                         std::uint64_t seed = 0x5EEDull) {
    if (channels.spec.num_cells != 1)
        throw std::invalid_argument("capacity_reference: defined for a single cell");
    const int users = channels.spec.users_per_cell;
    const int n = channels.spec.bts_antennas;
    if (static_cast<int>(powers.size()) != users)
        throw std::invalid_argument("capacity_reference: need one power per user");

    const auto objective = [&](const std::vector<Eigen::VectorXcd>& v) {
        return sum_rate_logdet(channels, v, sigma2);
    };

    CapacityResult best;
    best.rate = -1.0;
    for (int attempt = 0; attempt < std::max(restarts, 1); ++attempt) {
        std::vector<Eigen::VectorXcd> v(static_cast<std::size_t>(users));
        for (int k = 0; k < users; ++k) {
            const Eigen::MatrixXcd& h = channels.direct(0, k);
            Eigen::VectorXcd dir;
            if (attempt == 0) {
                Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h, Eigen::ComputeThinV);
                dir = svd.matrixV().col(0);
            } else {
                Prng rng{seed, static_cast<std::uint64_t>(attempt), static_cast<std::uint64_t>(k)};
                dir.resize(h.cols());
                for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.complex_normal();
                dir.normalize();
            }
            v[static_cast<std::size_t>(k)] =
                std::sqrt(powers[static_cast<std::size_t>(k)]) * dir;
        }
        double value = objective(v);
        double step = 1.0;
        for (int it = 0; it < steps && step > 1e-14; ++it) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n);
            for (int k = 0; k < users; ++k) {
                const Eigen::VectorXcd e = channels.direct(0, k) * v[static_cast<std::size_t>(k)];
                m.noalias() += (1.0 / sigma2) * e * e.adjoint();
            }
            Eigen::LLT<Eigen::MatrixXcd> llt(m);
            std::vector<Eigen::VectorXcd> grad(static_cast<std::size_t>(users));
            for (int k = 0; k < users; ++k) {
                const Eigen::MatrixXcd& h = channels.direct(0, k);
                grad[static_cast<std::size_t>(k)] =
                    h.adjoint() * llt.solve(h * v[static_cast<std::size_t>(k)]) / sigma2;
            }
            bool accepted = false;
            while (step > 1e-14) {
                std::vector<Eigen::VectorXcd> trial(static_cast<std::size_t>(users));
                for (int k = 0; k < users; ++k) {
                    Eigen::VectorXcd cand =
                        v[static_cast<std::size_t>(k)] + step * grad[static_cast<std::size_t>(k)];
                    cand *= std::sqrt(powers[static_cast<std::size_t>(k)]) / cand.norm();
                    trial[static_cast<std::size_t>(k)] = std::move(cand);
                }
                const double trial_value = objective(trial);
                if (trial_value >= value) {
                    v = std::move(trial);
                    value = trial_value;
                    step = std::min(step * 1.25, 1e6);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        if (value > best.rate) {
            best.rate = value;
            best.precoders = std::move(v);
        }
    }
    return best;
}

}  // namespace bitrain
