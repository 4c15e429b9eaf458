// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers
//
// Scalar objectives: per-user / sum MSEs for all structure-direction
// combinations, the uplink Lagrangian, the potential-function pair of the
// simultaneous scheme, rate readouts, and the MMSE trace/spectrum identity.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "bitrain/mmse.hpp"

namespace bitrain {

/// SINR values are clipped here before the log so zero-noise corner cases
/// stay finite.
inline constexpr double kSinrCap = 1e12;

/// Uplink MSE of every user, flattened cell-major. Successive assumes
/// genie-aided cancellation: intra-cell users at earlier decode positions
/// contribute no interference. `noise_scale` divides sigma^2 (used by the
/// potential functions, where the noise is normalized by the symbol power).
inline std::vector<double> per_user_mse_uplink(const ChannelSet& channels, const CellBanks& banks,
                                               double sigma2, Structure structure,
                                               double noise_scale = 1.0) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    std::vector<double> mse;
    mse.reserve(static_cast<std::size_t>(cells * users));
    for (int c = 0; c < cells; ++c) {
        const auto eff = detail::uplink_effectives(channels, banks, c);
        const std::vector<int> pos = banks[static_cast<std::size_t>(c)].positions();
        for (int k = 0; k < users; ++k) {
            const Eigen::VectorXcd& g = banks[static_cast<std::size_t>(c)].g[static_cast<std::size_t>(k)];
            double value = 1.0 + sigma2 / noise_scale * g.squaredNorm() -
                           2.0 * g.dot(eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]).real();
            for (int tx = 0; tx < cells; ++tx) {
                const std::vector<int> tx_pos = banks[static_cast<std::size_t>(tx)].positions();
                for (int i = 0; i < users; ++i) {
                    if (tx == c && structure.kind == FilterKind::kSuccessive &&
                        tx_pos[static_cast<std::size_t>(i)] < pos[static_cast<std::size_t>(k)])
                        continue;
                    value += std::norm(
                        g.dot(eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)]));
                }
            }
            mse.push_back(value);
        }
    }
    return mse;
}

/// Downlink counterpart; pre-compensation removes intra-cell beams at later
/// decode positions.
inline std::vector<double> per_user_mse_downlink(const ChannelSet& channels, const CellBanks& banks,
                                                 std::span<const double> noise_vars,
                                                 Structure structure, double noise_scale = 1.0) {
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    std::vector<double> mse;
    mse.reserve(static_cast<std::size_t>(cells * users));
    for (int c = 0; c < cells; ++c) {
        const std::vector<int> pos = banks[static_cast<std::size_t>(c)].positions();
        for (int k = 0; k < users; ++k) {
            const auto eff = detail::downlink_effectives(channels, banks, c, k);
            const Eigen::VectorXcd& r = banks[static_cast<std::size_t>(c)].r[static_cast<std::size_t>(k)];
            double value = 1.0 +
                           noise_vars[static_cast<std::size_t>(k)] / noise_scale * r.squaredNorm() -
                           2.0 * r.dot(eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]).real();
            for (int tx = 0; tx < cells; ++tx) {
                const std::vector<int> tx_pos = banks[static_cast<std::size_t>(tx)].positions();
                for (int i = 0; i < users; ++i) {
                    if (tx == c && structure.kind == FilterKind::kSuccessive &&
                        tx_pos[static_cast<std::size_t>(i)] > pos[static_cast<std::size_t>(k)])
                        continue;
                    value += std::norm(
                        r.dot(eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)]));
                }
            }
            mse.push_back(value);
        }
    }
    return mse;
}

/// Network sum MSE, uplink form.
inline double sum_mse(const ChannelSet& channels, const CellBanks& banks, double sigma2,
                      Structure structure) {
    if (structure.direction != LinkDirection::kUplink)
        throw std::invalid_argument("sum_mse: scalar-noise overload is the uplink form");
    double total = 0.0;
    for (double e : per_user_mse_uplink(channels, banks, sigma2, structure)) total += e;
    return total;
}

/// Network sum MSE, downlink form (per-user noise variances).
inline double sum_mse(const ChannelSet& channels, const CellBanks& banks,
                      std::span<const double> noise_vars, Structure structure) {
    if (structure.direction != LinkDirection::kDownlink)
        throw std::invalid_argument("sum_mse: per-user-noise overload is the downlink form");
    double total = 0.0;
    for (double e : per_user_mse_downlink(channels, banks, noise_vars, structure)) total += e;
    return total;
}

/// Uplink Lagrangian: sum MSE plus sum_k mu_k (||v_k||^2 - P_k), multipliers
/// flattened cell-major. Equals the sum MSE whenever every power constraint
/// is tight.
inline double lagrangian(const ChannelSet& channels, const CellBanks& banks, double sigma2,
                         Structure structure, std::span<const double> multipliers,
                         std::span<const double> powers) {
    const int users = channels.spec.users_per_cell;
    if (static_cast<int>(multipliers.size()) != channels.spec.num_cells * users)
        throw std::invalid_argument("lagrangian: need one multiplier per (cell, user)");
    if (static_cast<int>(powers.size()) != users)
        throw std::invalid_argument("lagrangian: need one power per user");
    double value = sum_mse(channels, banks, sigma2, structure);
    for (int c = 0; c < channels.spec.num_cells; ++c)
        for (int k = 0; k < users; ++k) {
            const auto& v = banks[static_cast<std::size_t>(c)].v[static_cast<std::size_t>(k)];
            value += multipliers[static_cast<std::size_t>(c * users + k)] *
                     (v.squaredNorm() - powers[static_cast<std::size_t>(k)]);
        }
    return value;
}

/// Forward/backward potential functions of the simultaneous scheme, evaluated
/// on a tied bank (v = r, t = g). Noise levels come from the topology. The
/// two values agree identically; returning both lets callers assert it.
inline std::pair<double, double> potential_pair(const ChannelSet& channels, const CellBanks& banks,
                                                double rho, double beta,
                                                FilterKind kind = FilterKind::kLinear) {
    if (!(rho > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("potential_pair: rho and beta must be positive");
    const auto& spec = channels.spec;
    const std::vector<double> forward_mse =
        per_user_mse_uplink(channels, banks, spec.uplink_noise_var,
                            uplink(kind), rho);
    const std::vector<double> backward_mse =
        per_user_mse_downlink(channels, banks, spec.user_noise_vars,
                              downlink(kind), beta);
    double forward = 0.0;
    double backward = 0.0;
    for (int c = 0; c < spec.num_cells; ++c)
        for (int k = 0; k < spec.users_per_cell; ++k) {
            const auto& bank = banks[static_cast<std::size_t>(c)];
            const std::size_t flat = static_cast<std::size_t>(c * spec.users_per_cell + k);
            forward += forward_mse[flat] +
                       spec.user_noise_vars[static_cast<std::size_t>(k)] *
                           bank.v[static_cast<std::size_t>(k)].squaredNorm() / beta;
            backward += backward_mse[flat] +
                        spec.uplink_noise_var * bank.t[static_cast<std::size_t>(k)].squaredNorm() / rho;
        }
    return {forward, backward};
}

/// log2 det(I + (1/sigma^2) sum_k H_k v_k v_k' H_k') for a single cell. The
/// noise normalization is explicit so the SNR sweep is visible in the value.
inline double sum_rate_logdet(const ChannelSet& channels, const std::vector<Eigen::VectorXcd>& v,
                              double sigma2) {
    const Eigen::MatrixXcd composite = effective_channel(channels, v);
    const int n = channels.spec.bts_antennas;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n);
    m.noalias() += (1.0 / sigma2) * composite * composite.adjoint();
    Eigen::LLT<Eigen::MatrixXcd> llt(m);
    double log_det = 0.0;
    for (int i = 0; i < n; ++i) log_det += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
    return log_det / std::numbers::ln2;
}

namespace detail {

inline double rate_from_parts(double desired, double impairment) {
    if (desired <= 0.0) return 0.0;
    double sinr = impairment > desired / kSinrCap ? desired / impairment : kSinrCap;
    sinr = std::min(sinr, kSinrCap);
    return std::log2(1.0 + sinr);
}

}  // namespace detail

/// Per-user achievable rates log2(1 + SINR) at the uplink filter outputs,
/// flattened cell-major. For exact MMSE filters, mse_k = 1/(1 + SINR_k).
inline std::vector<double> user_sinr_rates(const ChannelSet& channels, const CellBanks& banks,
                                           double sigma2, Structure structure) {
    if (structure.direction != LinkDirection::kUplink)
        throw std::invalid_argument("user_sinr_rates: scalar-noise overload is the uplink form");
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    std::vector<double> rates;
    rates.reserve(static_cast<std::size_t>(cells * users));
    for (int c = 0; c < cells; ++c) {
        const auto eff = detail::uplink_effectives(channels, banks, c);
        const std::vector<int> pos = banks[static_cast<std::size_t>(c)].positions();
        for (int k = 0; k < users; ++k) {
            const Eigen::VectorXcd& g = banks[static_cast<std::size_t>(c)].g[static_cast<std::size_t>(k)];
            const double desired =
                std::norm(g.dot(eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]));
            double impairment = sigma2 * g.squaredNorm();
            for (int tx = 0; tx < cells; ++tx) {
                const std::vector<int> tx_pos = banks[static_cast<std::size_t>(tx)].positions();
                for (int i = 0; i < users; ++i) {
                    if (tx == c && i == k) continue;
                    if (tx == c && structure.kind == FilterKind::kSuccessive &&
                        tx_pos[static_cast<std::size_t>(i)] < pos[static_cast<std::size_t>(k)])
                        continue;
                    impairment += std::norm(
                        g.dot(eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)]));
                }
            }
            rates.push_back(detail::rate_from_parts(desired, impairment));
        }
    }
    return rates;
}

/// Downlink counterpart.
inline std::vector<double> user_sinr_rates(const ChannelSet& channels, const CellBanks& banks,
                                           std::span<const double> noise_vars,
                                           Structure structure) {
    if (structure.direction != LinkDirection::kDownlink)
        throw std::invalid_argument("user_sinr_rates: per-user-noise overload is the downlink form");
    const int cells = channels.spec.num_cells;
    const int users = channels.spec.users_per_cell;
    std::vector<double> rates;
    rates.reserve(static_cast<std::size_t>(cells * users));
    for (int c = 0; c < cells; ++c) {
        const std::vector<int> pos = banks[static_cast<std::size_t>(c)].positions();
        for (int k = 0; k < users; ++k) {
            const auto eff = detail::downlink_effectives(channels, banks, c, k);
            const Eigen::VectorXcd& r = banks[static_cast<std::size_t>(c)].r[static_cast<std::size_t>(k)];
            const double desired =
                std::norm(r.dot(eff[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]));
            double impairment = noise_vars[static_cast<std::size_t>(k)] * r.squaredNorm();
            for (int tx = 0; tx < cells; ++tx) {
                const std::vector<int> tx_pos = banks[static_cast<std::size_t>(tx)].positions();
                for (int i = 0; i < users; ++i) {
                    if (tx == c && i == k) continue;
                    if (tx == c && structure.kind == FilterKind::kSuccessive &&
                        tx_pos[static_cast<std::size_t>(i)] > pos[static_cast<std::size_t>(k)])
                        continue;
                    impairment += std::norm(
                        r.dot(eff[static_cast<std::size_t>(tx)][static_cast<std::size_t>(i)]));
                }
            }
            rates.push_back(detail::rate_from_parts(desired, impairment));
        }
    }
    return rates;
}

/// Sum MMSE of the joint estimator for a composite channel H (columns
/// H_k v_k), in two algebraically equal forms: K - sum_i lambda_i /
/// (lambda_i + sigma^2) with lambda_i the eigenvalues of H H', which equals
/// trace(I_K - H'(H H' + sigma^2 I)^-1 H).
struct TraceSpectrum {
    double trace = 0.0;
    Eigen::VectorXd eigenvalues;  // ascending
};

inline TraceSpectrum mmse_trace_spectrum(const Eigen::MatrixXcd& composite, double sigma2) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(composite * composite.adjoint());
    TraceSpectrum out;
    out.eigenvalues = es.eigenvalues();
    out.trace = static_cast<double>(composite.cols());
    for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i)
        out.trace -= out.eigenvalues(i) / (out.eigenvalues(i) + sigma2);
    return out;
}

}  // namespace bitrain
