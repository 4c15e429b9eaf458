// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers

#pragma once

#include <Eigen/Dense>
#include <numeric>
#include <vector>

#include "bitrain/channel.hpp"

namespace bitrain {

enum class FilterKind { kLinear, kSuccessive };
enum class LinkDirection { kUplink, kDownlink };

/// Which interference terms a filter update sees: Linear keeps every term,
/// Successive drops the ones removed by uplink cancellation / downlink
/// pre-compensation (intra-cell only; other-cell users always interfere).
struct Structure {
    FilterKind kind = FilterKind::kLinear;
    LinkDirection direction = LinkDirection::kUplink;
};

inline Structure uplink(FilterKind kind) { return {kind, LinkDirection::kUplink}; }
inline Structure downlink(FilterKind kind) { return {kind, LinkDirection::kDownlink}; }

/// Per-cell collection of every filter the algorithms touch.
///   v[k]  uplink precoder / tied user filter, length N_k
///   g[k]  BTS receive (feedforward) filter, length N
///   t[k]  downlink precoder, length N
///   r[k]  downlink receive filter, length N_k
///   feedback  K x K matrix B: unit diagonal, b_ki = g_k' H_i v_i for users i
///             decoded before k, zero elsewhere
///   bias      alpha_k = g_k' H_k v_k
///   order     decode order; order[p] is the user decoded p-th (uplink), and
///             downlink pre-compensation runs through the same list reversed
struct FilterBank {
    std::vector<Eigen::VectorXcd> v, g, t, r;
    Eigen::MatrixXcd feedback;
    Eigen::VectorXcd bias;
    std::vector<int> order;

    static FilterBank natural_order(int users) {
        FilterBank bank;
        bank.order.resize(static_cast<std::size_t>(users));
        std::iota(bank.order.begin(), bank.order.end(), 0);
        bank.feedback = Eigen::MatrixXcd::Identity(users, users);
        bank.bias = Eigen::VectorXcd::Zero(users);
        return bank;
    }

    /// position[user] = step at which the user is decoded.
    std::vector<int> positions() const {
        std::vector<int> pos(order.size());
        for (std::size_t p = 0; p < order.size(); ++p)
            pos[static_cast<std::size_t>(order[p])] = static_cast<int>(p);
        return pos;
    }
};

/// One bank per cell.
using CellBanks = std::vector<FilterBank>;

/// Banks with uplink precoders set to the deterministic full-power start
/// v_k = sqrt(P_k) e_1 (and r tied to v for the simultaneous scheme).
inline CellBanks initial_banks(const TopologySpec& spec) {
    CellBanks banks;
    banks.reserve(static_cast<std::size_t>(spec.num_cells));
    for (int c = 0; c < spec.num_cells; ++c) {
        FilterBank bank = FilterBank::natural_order(spec.users_per_cell);
        bank.v.resize(static_cast<std::size_t>(spec.users_per_cell));
        for (int k = 0; k < spec.users_per_cell; ++k) {
            Eigen::VectorXcd vk =
                Eigen::VectorXcd::Zero(spec.user_antennas[static_cast<std::size_t>(k)]);
            vk(0) = std::sqrt(spec.user_powers[static_cast<std::size_t>(k)]);
            bank.v[static_cast<std::size_t>(k)] = vk;
        }
        bank.r = bank.v;
        banks.push_back(std::move(bank));
    }
    return banks;
}

/// Random unit-direction full-power start, keyed by seed.
inline CellBanks random_banks(const TopologySpec& spec, std::uint64_t seed) {
    CellBanks banks = initial_banks(spec);
    for (int c = 0; c < spec.num_cells; ++c) {
        for (int k = 0; k < spec.users_per_cell; ++k) {
            Prng rng{seed, 0xB31Aull, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)};
            Eigen::VectorXcd vk(spec.user_antennas[static_cast<std::size_t>(k)]);
            for (Eigen::Index i = 0; i < vk.size(); ++i) vk(i) = rng.complex_normal();
            vk *= std::sqrt(spec.user_powers[static_cast<std::size_t>(k)]) / vk.norm();
            banks[static_cast<std::size_t>(c)].v[static_cast<std::size_t>(k)] = vk;
            banks[static_cast<std::size_t>(c)].r[static_cast<std::size_t>(k)] = vk;
        }
    }
    return banks;
}

}  // namespace bitrain
