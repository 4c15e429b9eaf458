// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace bitrain {

/// Static description of a (possibly multi-cell) cellular layout: antenna
/// counts, per-user powers and noise levels, and the amplitude scale of every
/// cell-to-cell link. All cells share the same user count and the same
/// per-user-index antenna/power/noise lists.
struct TopologySpec {
    int num_cells = 1;
    int users_per_cell = 1;           // K
    int bts_antennas = 1;             // N
    std::vector<int> user_antennas;   // N_k, size K
    Eigen::MatrixXd cross_gain;       // C x C amplitude scale, diagonal = 1
    double uplink_noise_var = 1.0;    // sigma^2 at every BTS
    std::vector<double> user_noise_vars;  // sigma_k^2, size K
    std::vector<double> user_powers;      // P_k, size K
    double bts_power = 1.0;               // P per BTS

    /// Homogeneous layout: every user has n_k antennas, power p_k, noise
    /// noise_k; every cross link has gain `cross` (diagonal stays 1).
    static TopologySpec homogeneous(int cells, int users, int n_bts, int n_user,
                                    double sigma2 = 1.0, double p_user = 1.0,
                                    double p_bts = -1.0, double noise_user = -1.0,
                                    double cross = 1.0) {
        TopologySpec s;
        s.num_cells = cells;
        s.users_per_cell = users;
        s.bts_antennas = n_bts;
        s.user_antennas.assign(static_cast<std::size_t>(users), n_user);
        s.cross_gain = Eigen::MatrixXd::Constant(cells, cells, cross);
        s.cross_gain.diagonal().setOnes();
        s.uplink_noise_var = sigma2;
        s.user_noise_vars.assign(static_cast<std::size_t>(users),
                                 noise_user > 0.0 ? noise_user : sigma2);
        s.user_powers.assign(static_cast<std::size_t>(users), p_user);
        s.bts_power = p_bts > 0.0 ? p_bts : p_user * users;
        return s;
    }

    int total_users() const { return num_cells * users_per_cell; }

    void validate() const {
        if (num_cells < 1 || users_per_cell < 1 || bts_antennas < 1)
            throw std::invalid_argument("topology: all dimensions must be >= 1");
        if (static_cast<int>(user_antennas.size()) != users_per_cell)
            throw std::invalid_argument("topology: user_antennas must list one entry per user");
        for (int n : user_antennas)
            if (n < 1) throw std::invalid_argument("topology: user antenna counts must be >= 1");
        if (cross_gain.rows() != num_cells || cross_gain.cols() != num_cells)
            throw std::invalid_argument("topology: cross_gain must be num_cells x num_cells");
        for (int c = 0; c < num_cells; ++c) {
            if (cross_gain(c, c) != 1.0)
                throw std::invalid_argument("topology: cross_gain diagonal must equal 1");
            for (int d = 0; d < num_cells; ++d)
                if (cross_gain(c, d) < 0.0)
                    throw std::invalid_argument("topology: cross_gain entries must be >= 0");
        }
        if (!(uplink_noise_var > 0.0))
            throw std::invalid_argument("topology: uplink noise variance must be positive");
        if (static_cast<int>(user_noise_vars.size()) != users_per_cell ||
            static_cast<int>(user_powers.size()) != users_per_cell)
            throw std::invalid_argument("topology: per-user noise/power lists must have K entries");
        for (double v : user_noise_vars)
            if (!(v > 0.0)) throw std::invalid_argument("topology: user noise variances must be positive");
        for (double p : user_powers)
            if (!(p > 0.0)) throw std::invalid_argument("topology: user powers must be positive");
        if (!(bts_power > 0.0))
            throw std::invalid_argument("topology: BTS power must be positive");
    }
};

/// Thrown when a norm/power equality cannot be met anywhere in the
/// positive-definite multiplier region; carries the reachable supremum.
class InfeasiblePowerError : public std::runtime_error {
  public:
    InfeasiblePowerError(double target, double supremum)
        : std::runtime_error("power target " + std::to_string(target) +
                             " exceeds reachable supremum " + std::to_string(supremum)),
          target_(target),
          supremum_(supremum) {}
    double target() const { return target_; }
    double supremum() const { return supremum_; }

  private:
    double target_;
    double supremum_;
};

/// Thrown when a linear solve stays unusable even after the ridge retry.
class NumericalError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bitrain
