// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bitrain/rng.hpp"
#include "bitrain/topology.hpp"

namespace bitrain {

/// One block-fading realization of every uplink channel in the network.
/// links[rx][tx][k] is the N x N_k matrix from user k of cell `tx` to the BTS
/// of cell `rx`. The downlink channel is never stored: TDD reciprocity makes
/// it the conjugate transpose of the uplink matrix. Immutable after sampling,
/// safe to share across trial workers.
struct ChannelSet {
    TopologySpec spec;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> links;

    const Eigen::MatrixXcd& link(int rx_cell, int tx_cell, int user) const {
        return links[static_cast<std::size_t>(rx_cell)][static_cast<std::size_t>(tx_cell)]
                    [static_cast<std::size_t>(user)];
    }
    /// Direct link of user k inside its own cell.
    const Eigen::MatrixXcd& direct(int cell, int user) const { return link(cell, cell, user); }
};

/// Draws every link as i.i.d. unit-variance CSCG entries scaled by the
/// (rx, tx) cross gain. Each link owns its own keyed stream, so identical
/// (spec, seed) pairs reproduce the set bit for bit and cells/links can be
/// regenerated independently.
inline ChannelSet sample_channels(const TopologySpec& spec, std::uint64_t seed) {
    spec.validate();
    ChannelSet set;
    set.spec = spec;
    set.seed = seed;
    set.links.resize(static_cast<std::size_t>(spec.num_cells));
    for (int rx = 0; rx < spec.num_cells; ++rx) {
        set.links[static_cast<std::size_t>(rx)].resize(static_cast<std::size_t>(spec.num_cells));
        for (int tx = 0; tx < spec.num_cells; ++tx) {
            auto& cell_links = set.links[static_cast<std::size_t>(rx)][static_cast<std::size_t>(tx)];
            cell_links.reserve(static_cast<std::size_t>(spec.users_per_cell));
            for (int k = 0; k < spec.users_per_cell; ++k) {
                Prng rng{seed, static_cast<std::uint64_t>(rx), static_cast<std::uint64_t>(tx),
                         static_cast<std::uint64_t>(k)};
                Eigen::MatrixXcd h(spec.bts_antennas, spec.user_antennas[static_cast<std::size_t>(k)]);
                const double gain = spec.cross_gain(rx, tx);
                for (Eigen::Index col = 0; col < h.cols(); ++col)
                    for (Eigen::Index row = 0; row < h.rows(); ++row)
                        h(row, col) = gain * rng.complex_normal();
                cell_links.push_back(std::move(h));
            }
        }
    }
    return set;
}

/// Stacks the per-user beamformed channels of a single cell into the N x K
/// composite matrix whose k-th column is H_k v_k.
inline Eigen::MatrixXcd effective_channel(const ChannelSet& channels,
                                          const std::vector<Eigen::VectorXcd>& precoders) {
    if (channels.spec.num_cells != 1)
        throw std::invalid_argument("effective_channel: defined for a single cell");
    const int users = channels.spec.users_per_cell;
    if (static_cast<int>(precoders.size()) != users)
        throw std::invalid_argument("effective_channel: need one precoder per user");
    Eigen::MatrixXcd composite(channels.spec.bts_antennas, users);
    for (int k = 0; k < users; ++k) {
        const Eigen::MatrixXcd& h = channels.direct(0, k);
        if (precoders[static_cast<std::size_t>(k)].size() != h.cols())
            throw std::invalid_argument("effective_channel: precoder length mismatch");
        composite.col(k) = h * precoders[static_cast<std::size_t>(k)];
    }
    return composite;
}

}  // namespace bitrain
