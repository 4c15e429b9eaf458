// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers
//
// Closed-form MMSE filter updates for linear and successive structures, both
// link directions, with exact power-equality multiplier solving. Every update
// is a pure function: banks go in by value, the modified copy comes out.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bitrain/filter_bank.hpp"

namespace bitrain {

namespace detail {

/// Hermitian PSD solve for one or more right-hand sides. A singular system
/// (sigma^2 = 0 with a rank-deficient signal part) gets one ridge retry of
/// 1e-12 * trace/dim before giving up.
inline Eigen::MatrixXcd solve_hermitian_psd(const Eigen::MatrixXcd& gram,
                                            const Eigen::MatrixXcd& rhs) {
    Eigen::LDLT<Eigen::MatrixXcd> factor(gram);
    Eigen::MatrixXcd x = factor.solve(rhs);
    if (x.allFinite()) return x;
    double ridge = 1e-12 * gram.real().trace() / static_cast<double>(gram.rows());
    if (!(ridge > 0.0)) ridge = 1e-12;
    Eigen::MatrixXcd damped = gram;
    damped.diagonal().array() += ridge;
    x = Eigen::LDLT<Eigen::MatrixXcd>(damped).solve(rhs);
    if (!x.allFinite()) throw NumericalError("hermitian solve failed even with ridge");
    return x;
}

}  // namespace detail

/// Solution of the coupled norm-equality problem: a single multiplier mu with
/// x_j = (A_j + mu I)^-1 b_j and sum_j ||x_j||^2 = target.
struct NormConstrained {
    double multiplier = 0.0;
    std::vector<Eigen::VectorXcd> solutions;
    double achieved = 0.0;
};

/// Finds the unique mu in the region where every A_j + mu I is positive
/// definite such that the aggregate squared norm hits `target` (1e-12
/// relative). The aggregate is strictly decreasing there, so the search
/// brackets from the PD boundary (offset 1e-12 * trace/dim) and from a
/// doubled-out upper end, then bisects. A target above the boundary supremum
/// throws InfeasiblePowerError carrying that supremum.
inline NormConstrained solve_norm_constrained(const std::vector<Eigen::MatrixXcd>& grams,
                                              const std::vector<Eigen::VectorXcd>& rhs,
                                              double target) {
    if (grams.empty() || grams.size() != rhs.size())
        throw std::invalid_argument("solve_norm_constrained: need matching gram/rhs lists");
    if (!(target > 0.0))
        throw std::invalid_argument("solve_norm_constrained: target must be positive");

    const std::size_t count = grams.size();
    std::vector<Eigen::VectorXd> eigenvalues(count);
    std::vector<Eigen::VectorXcd> projected(count);
    std::vector<Eigen::MatrixXcd> basis(count);
    double lambda_min = std::numeric_limits<double>::infinity();
    double trace_scale = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(grams[j]);
        if (es.info() != Eigen::Success)
            throw NumericalError("solve_norm_constrained: eigendecomposition failed");
        eigenvalues[j] = es.eigenvalues();
        basis[j] = es.eigenvectors();
        projected[j] = basis[j].adjoint() * rhs[j];
        lambda_min = std::min(lambda_min, eigenvalues[j](0));
        trace_scale = std::max(trace_scale, eigenvalues[j].sum() /
                                                static_cast<double>(eigenvalues[j].size()));
    }

    const auto aggregate = [&](double mu) {
        double total = 0.0;
        for (std::size_t j = 0; j < count; ++j)
            for (Eigen::Index i = 0; i < eigenvalues[j].size(); ++i) {
                const double denom = eigenvalues[j](i) + mu;
                total += std::norm(projected[j](i)) / (denom * denom);
            }
        return total;
    };

    double epsilon = 1e-12 * trace_scale;
    if (!(epsilon > 0.0)) epsilon = 1e-300;
    double lo = -lambda_min + epsilon;
    const double supremum = aggregate(lo);
    if (!(supremum >= target)) throw InfeasiblePowerError(target, supremum);

    double hi = std::max(lo + 1.0, 1.0);
    while (aggregate(hi) > target) hi = lo + 2.0 * (hi - lo);

    double mu = lo;
    for (int iter = 0; iter < 400; ++iter) {
        mu = 0.5 * (lo + hi);
        const double value = aggregate(mu);
        if (std::abs(value - target) <= 1e-12 * target) break;
        if (value > target)
            lo = mu;
        else
            hi = mu;
        if (hi - lo <= 1e-16 * std::max(1.0, std::abs(mu))) break;
    }

    NormConstrained result;
    result.multiplier = mu;
    result.solutions.reserve(count);
    double achieved = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        Eigen::VectorXcd scaled = projected[j];
        for (Eigen::Index i = 0; i < scaled.size(); ++i) scaled(i) /= eigenvalues[j](i) + mu;
        Eigen::VectorXcd x = basis[j] * scaled;
        achieved += x.squaredNorm();
        result.solutions.push_back(std::move(x));
    }
    result.achieved = achieved;
    return result;
}

/// Single-pair convenience: mu with ||(A + mu I)^-1 b||^2 = target.
inline double solve_multiplier(const Eigen::MatrixXcd& gram, const Eigen::VectorXcd& rhs,
                               double target) {
    return solve_norm_constrained({gram}, {rhs}, target).multiplier;
}

namespace detail {

/// Beamformed uplink signal vectors seen by BTS `rx`: out[tx][k] = H * v.
inline std::vector<std::vector<Eigen::VectorXcd>> uplink_effectives(const ChannelSet& channels,
                                                                    const CellBanks& banks,
                                                                    int rx) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    std::vector<std::vector<Eigen::VectorXcd>> eff(static_cast<std::size_t>(cells));
    for (int tx = 0; tx < cells; ++tx) {
        eff[static_cast<std::size_t>(tx)].resize(static_cast<std::size_t>(users));
        for (int k = 0; k < users; ++k)
            eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(k)] =
                channels.link(rx, tx, k) * banks[static_cast<std::size_t>(tx)].v[static_cast<std::size_t>(k)];
    }
    return eff;
}

/// Downlink beams from every BTS as seen through user (cell, k)'s channel:
/// out[tx][i] = H(tx -> user)' t_i.
inline std::vector<std::vector<Eigen::VectorXcd>> downlink_effectives(const ChannelSet& channels,
                                                                      const CellBanks& banks,
                                                                      int cell, int user) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    std::vector<std::vector<Eigen::VectorXcd>> eff(static_cast<std::size_t>(cells));
    for (int tx = 0; tx < cells; ++tx) {
        const Eigen::MatrixXcd down = channels.link(tx, cell, user).adjoint();
        eff[static_cast<std::size_t>(tx)].resize(static_cast<std::size_t>(users));
        for (int i = 0; i < users; ++i)
            eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)] =
                down * banks[static_cast<std::size_t>(tx)].t[static_cast<std::size_t>(i)];
    }
    return eff;
}

}  // namespace detail

/// BTS receive-filter update. Linear: g_k = (sum_i H_i v_i v_i' H_i' +
/// sigma^2 I)^-1 H_k v_k over every same-direction transmission in the
/// network. Successive: the intra-cell sum keeps only users not yet decoded
/// (decode-order positions >= k's); other-cell users always stay. Also fills
/// the feedback matrix b_ki = g_k' H_i v_i for earlier intra-cell users and
/// the bias factors alpha_k = g_k' H_k v_k.
inline CellBanks uplink_rx_update(const ChannelSet& channels, CellBanks banks, double sigma2,
                                  Structure structure) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    const int n = channels.spec.bts_antennas;
    for (int c = 0; c < cells; ++c) {
        FilterBank& bank = banks[static_cast<std::size_t>(c)];
        const auto eff = detail::uplink_effectives(channels, banks, c);
        Eigen::MatrixXcd base = sigma2 * Eigen::MatrixXcd::Identity(n, n);
        for (int tx = 0; tx < cells; ++tx) {
            if (tx == c) continue;
            for (int i = 0; i < users; ++i) {
                const auto& e = eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)];
                base.noalias() += e * e.adjoint();
            }
        }
        bank.g.assign(static_cast<std::size_t>(users), Eigen::VectorXcd());
        if (structure.kind == FilterKind::kLinear) {
            Eigen::MatrixXcd cov = base;
            for (int i = 0; i < users; ++i) {
                const auto& e = eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
                cov.noalias() += e * e.adjoint();
            }
            Eigen::MatrixXcd stacked(n, users);
            for (int k = 0; k < users; ++k)
                stacked.col(k) = eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
            Eigen::MatrixXcd solved = detail::solve_hermitian_psd(cov, stacked);
            for (int k = 0; k < users; ++k) bank.g[static_cast<std::size_t>(k)] = solved.col(k);
            bank.feedback = Eigen::MatrixXcd::Identity(users, users);
        } else {
            Eigen::MatrixXcd cov = base;
            for (int p = users - 1; p >= 0; --p) {
                const int k = bank.order[static_cast<std::size_t>(p)];
                const auto& e = eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
                cov.noalias() += e * e.adjoint();
                bank.g[static_cast<std::size_t>(k)] = detail::solve_hermitian_psd(cov, e);
            }
            bank.feedback = Eigen::MatrixXcd::Identity(users, users);
            for (int p = 0; p < users; ++p) {
                const int k = bank.order[static_cast<std::size_t>(p)];
                for (int q = 0; q < p; ++q) {
                    const int i = bank.order[static_cast<std::size_t>(q)];
                    bank.feedback(k, i) =
                        bank.g[static_cast<std::size_t>(k)]
                            .dot(eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]);
                }
            }
        }
        bank.bias.resize(users);
        for (int k = 0; k < users; ++k)
            bank.bias(k) = bank.g[static_cast<std::size_t>(k)]
                               .dot(eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
    }
    return banks;
}

/// Uplink precoder update with exact per-user power equality ||v_k||^2 = P_k.
/// The gram sums g-filter responses through user k's channel: every filter in
/// other cells, and intra-cell filters of users decoded no later than k
/// (Successive) or all of them (Linear). Multipliers land in
/// `multipliers_out` (flattened cell-major) when provided.
inline CellBanks uplink_tx_update(const ChannelSet& channels, CellBanks banks,
                                  std::span<const double> powers, Structure structure,
                                  std::vector<double>* multipliers_out = nullptr) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    if (static_cast<int>(powers.size()) != users)
        throw std::invalid_argument("uplink_tx_update: need one power per user");
    if (multipliers_out) multipliers_out->clear();
    CellBanks updated = banks;
    for (int c = 0; c < cells; ++c) {
        const std::vector<int> pos = banks[static_cast<std::size_t>(c)].positions();
        for (int k = 0; k < users; ++k) {
            const int nk = channels.spec.user_antennas[static_cast<std::size_t>(k)];
            Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(nk, nk);
            for (int rx = 0; rx < cells; ++rx) {
                const Eigen::MatrixXcd up = channels.link(rx, c, k).adjoint();
                const std::vector<int> rx_pos = banks[static_cast<std::size_t>(rx)].positions();
                for (int i = 0; i < users; ++i) {
                    if (rx == c && structure.kind == FilterKind::kSuccessive &&
                        rx_pos[static_cast<std::size_t>(i)] > pos[static_cast<std::size_t>(k)])
                        continue;
                    const Eigen::VectorXcd w =
                        up * banks[static_cast<std::size_t>(rx)].g[static_cast<std::size_t>(i)];
                    gram.noalias() += w * w.adjoint();
                }
            }
            const Eigen::VectorXcd rhs =
                channels.link(c, c, k).adjoint() * banks[static_cast<std::size_t>(c)].g[static_cast<std::size_t>(k)];
            NormConstrained sol =
                solve_norm_constrained({gram}, {rhs}, powers[static_cast<std::size_t>(k)]);
            updated[static_cast<std::size_t>(c)].v[static_cast<std::size_t>(k)] =
                std::move(sol.solutions.front());
            if (multipliers_out) multipliers_out->push_back(sol.multiplier);
        }
    }
    return updated;
}

/// Downlink precoder update at every BTS with one multiplier per cell
/// enforcing sum_k ||t_k||^2 = P. Linear sums every user filter response;
/// Successive (interference pre-compensation) drops intra-cell users encoded
/// after k, i.e. keeps decode-order positions >= k's.
inline CellBanks downlink_tx_update(const ChannelSet& channels, CellBanks banks,
                                    double total_power, Structure structure,
                                    std::vector<double>* multipliers_out = nullptr) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    const int n = channels.spec.bts_antennas;
    if (multipliers_out) multipliers_out->clear();
    CellBanks updated = banks;
    for (int c = 0; c < cells; ++c) {
        const FilterBank& bank = banks[static_cast<std::size_t>(c)];
        // m[tx][i] = H(c -> user i of cell tx) r_i
        std::vector<std::vector<Eigen::VectorXcd>> resp(static_cast<std::size_t>(cells));
        Eigen::MatrixXcd inter = Eigen::MatrixXcd::Zero(n, n);
        for (int tx = 0; tx < cells; ++tx) {
            resp[static_cast<std::size_t>(tx)].resize(static_cast<std::size_t>(users));
            for (int i = 0; i < users; ++i) {
                Eigen::VectorXcd m =
                    channels.link(c, tx, i) * banks[static_cast<std::size_t>(tx)].r[static_cast<std::size_t>(i)];
                if (tx != c) inter.noalias() += m * m.adjoint();
                resp[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)] = std::move(m);
            }
        }
        std::vector<Eigen::MatrixXcd> grams(static_cast<std::size_t>(users));
        std::vector<Eigen::VectorXcd> rhs(static_cast<std::size_t>(users));
        if (structure.kind == FilterKind::kLinear) {
            Eigen::MatrixXcd full = inter;
            for (int i = 0; i < users; ++i) {
                const auto& m = resp[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
                full.noalias() += m * m.adjoint();
            }
            for (int k = 0; k < users; ++k) {
                grams[static_cast<std::size_t>(k)] = full;
                rhs[static_cast<std::size_t>(k)] = resp[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
            }
        } else {
            Eigen::MatrixXcd acc = inter;
            for (int p = users - 1; p >= 0; --p) {
                const int k = bank.order[static_cast<std::size_t>(p)];
                const auto& m = resp[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
                acc.noalias() += m * m.adjoint();
                grams[static_cast<std::size_t>(k)] = acc;
                rhs[static_cast<std::size_t>(k)] = m;
            }
        }
        NormConstrained sol = solve_norm_constrained(grams, rhs, total_power);
        updated[static_cast<std::size_t>(c)].t = std::move(sol.solutions);
        if (multipliers_out) multipliers_out->push_back(sol.multiplier);
    }
    return updated;
}

/// User receive-filter update for the downlink. The interference gram sums
/// every beam of other cells plus intra-cell beams at decode-order positions
/// <= k's (Successive) or all of them (Linear), plus sigma_k^2 I.
inline CellBanks downlink_rx_update(const ChannelSet& channels, CellBanks banks,
                                    std::span<const double> noise_vars, Structure structure) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    if (static_cast<int>(noise_vars.size()) != users)
        throw std::invalid_argument("downlink_rx_update: need one noise variance per user");
    CellBanks updated = banks;
    for (int c = 0; c < cells; ++c) {
        const std::vector<int> pos = banks[static_cast<std::size_t>(c)].positions();
        for (int k = 0; k < users; ++k) {
            const int nk = channels.spec.user_antennas[static_cast<std::size_t>(k)];
            const auto eff = detail::downlink_effectives(channels, banks, c, k);
            Eigen::MatrixXcd gram = noise_vars[static_cast<std::size_t>(k)] *
                                    Eigen::MatrixXcd::Identity(nk, nk);
            for (int tx = 0; tx < cells; ++tx) {
                const std::vector<int> tx_pos = banks[static_cast<std::size_t>(tx)].positions();
                for (int i = 0; i < users; ++i) {
                    if (tx == c && structure.kind == FilterKind::kSuccessive &&
                        tx_pos[static_cast<std::size_t>(i)] > pos[static_cast<std::size_t>(k)])
                        continue;
                    const auto& w = eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)];
                    gram.noalias() += w * w.adjoint();
                }
            }
            updated[static_cast<std::size_t>(c)].r[static_cast<std::size_t>(k)] =
                detail::solve_hermitian_psd(
                    gram, eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
        }
    }
    return updated;
}

}  // namespace bitrain
