// SPDX-License-Identifier: Apache-2.0
//
// risopt — joint transmit beamforming and RIS phase-shift optimization
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
//
// Physical channel generation: 3GPP-style log-distance path loss, Rayleigh
// direct links, Rician RIS links built from half-wavelength ULA steering
// vectors, and imperfect-CSI realizations with a prescribed normalized MSE.
//
// The small-scale fading blocks are kept separate from the deterministic
// LOS/path-loss structure: draw_small_scale() produces unit-variance
// blocks, assemble_channels() combines them with the geometry into a full
// ChannelSet, and draw_channels() is the composition of the two. Estimation
// noise is injected on the small-scale blocks only.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "risopt/model.hpp"
#include "risopt/rng.hpp"

namespace risopt {

// Log-distance path loss: loss_db(d) = intercept + slope * log10(d).
struct PathLossModel
{
    double intercept_db = 0.0;
    double slope_db_per_decade = 0.0;

    double loss_db(double distance_m) const
    {
        if (distance_m <= 0.0)
            throw std::invalid_argument("PathLossModel: distance must be positive");
        return intercept_db + slope_db_per_decade * std::log10(distance_m);
    }

    // Amplitude scale factor sqrt(10^(-loss/10)) applied to channel entries.
    double amplitude(double distance_m) const
    {
        return std::pow(10.0, -loss_db(distance_m) / 20.0);
    }
};

inline double path_loss_db(const PathLossModel& model, double distance_m)
{
    return model.loss_db(distance_m);
}

// 3GPP propagation parameters used in the evaluation scenario.
inline PathLossModel ris_link_path_loss() { return {35.6, 22.0}; }
inline PathLossModel direct_link_path_loss() { return {32.6, 36.7}; }

// Noise power for a given bandwidth at the standard -170 dBm/Hz density.
inline double noise_power_dbm(double bandwidth_hz, double density_dbm_per_hz = -170.0)
{
    return density_dbm_per_hz + 10.0 * std::log10(bandwidth_hz);
}

// Rician LOS structure of the RIS links.
struct RicianParams
{
    double factor = 10.0;              // power ratio LOS/NLOS (epsilon)
    double ap_angle = 0.0;             // AP-side angle of the AP-RIS link
    double ris_departure_angle = 0.0;  // RIS-side angle of the AP-RIS link
    VectorXd ris_to_user_angles;       // RIS-side angle of each RIS-user link
};

// Channel estimation uncertainty: E[|x - xhat|^2] / E[|xhat|^2].
struct CsiErrorModel
{
    double normalized_mse = 0.0;
};

// Unit-variance small-scale fading blocks (or their estimates): the full
// direct channels plus the NLOS parts of the RIS links.
struct SmallScaleEstimate
{
    std::vector<VectorXcd> direct;      // K vectors of length M
    MatrixXcd ap_to_ris;                // N x M
    std::vector<VectorXcd> ris_to_user; // K vectors of length N
};

// Node placement in the 2-D deployment plane (meters).
struct LinkGeometry
{
    Eigen::Vector2d ap{0.0, 0.0};
    Eigen::Vector2d ris{0.0, 0.0};
    std::vector<Eigen::Vector2d> users;

    int user_count() const { return static_cast<int>(users.size()); }
};

// Half-wavelength ULA response: element m (0-indexed) = exp(j*pi*m*sin(angle)).
inline VectorXcd steering_vector(int length, double angle)
{
    if (length < 1)
        throw std::invalid_argument("steering_vector: length must be >= 1");
    VectorXcd a(length);
    const double s = std::sin(angle);
    for (int m = 0; m < length; ++m)
        a[m] = std::polar(1.0, M_PI * m * s);
    return a;
}

// Angle of the line from -> to, measured against the array broadside.
// Arrays are oriented along the x-axis, so sin(angle) is the x-component of
// the unit direction vector; only sin(angle) enters the steering vector.
inline double broadside_angle(const Eigen::Vector2d& from, const Eigen::Vector2d& to)
{
    const double dist = (to - from).norm();
    if (dist <= 0.0)
        throw std::invalid_argument("broadside_angle: coincident nodes");
    double s = (to.x() - from.x()) / dist;
    s = std::clamp(s, -1.0, 1.0);
    return std::asin(s);
}

inline RicianParams rician_from_geometry(const LinkGeometry& geom, double factor = 10.0)
{
    RicianParams p;
    p.factor = factor;
    p.ap_angle = broadside_angle(geom.ap, geom.ris);
    p.ris_departure_angle = broadside_angle(geom.ap, geom.ris);
    p.ris_to_user_angles.resize(geom.user_count());
    for (int k = 0; k < geom.user_count(); ++k)
        p.ris_to_user_angles[k] = broadside_angle(geom.ris, geom.users[k]);
    return p;
}

inline VectorXcd draw_cgauss_vector(int n, Rng& rng)
{
    VectorXcd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = rng.cgauss();
    return v;
}

inline MatrixXcd draw_cgauss_matrix(int rows, int cols, Rng& rng)
{
    MatrixXcd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = rng.cgauss();
    return m;
}

// Fresh unit-variance small-scale fading for every block. Draw order is
// fixed (direct per user, AP-RIS matrix, RIS-user per user) so a given seed
// reproduces the same blocks.
inline SmallScaleEstimate draw_small_scale(const SystemDims& dims, Rng& rng)
{
    SmallScaleEstimate s;
    s.direct.reserve(dims.users);
    for (int k = 0; k < dims.users; ++k)
        s.direct.push_back(draw_cgauss_vector(dims.antennas, rng));
    s.ap_to_ris = draw_cgauss_matrix(dims.ris_elements, dims.antennas, rng);
    s.ris_to_user.reserve(dims.users);
    for (int k = 0; k < dims.users; ++k)
        s.ris_to_user.push_back(draw_cgauss_vector(dims.ris_elements, rng));
    return s;
}

// Combines small-scale blocks with the deterministic LOS components and
// path losses into a full ChannelSet (including the cascade matrices).
inline ChannelSet assemble_channels(const SmallScaleEstimate& fading, const RicianParams& rician,
                                    const PathLossModel& ris_loss, const PathLossModel& direct_loss,
                                    const LinkGeometry& geom)
{
    const int k = static_cast<int>(fading.direct.size());
    const int n = static_cast<int>(fading.ap_to_ris.rows());
    if (geom.user_count() != k)
        throw std::invalid_argument("assemble_channels: geometry user count mismatch");
    if (rician.ris_to_user_angles.size() != k)
        throw std::invalid_argument("assemble_channels: Rician angle count mismatch");

    const double los = std::sqrt(rician.factor / (rician.factor + 1.0));
    const double nlos = std::sqrt(1.0 / (rician.factor + 1.0));

    std::vector<VectorXcd> direct;
    direct.reserve(k);
    for (int u = 0; u < k; ++u)
    {
        const double d = (geom.users[u] - geom.ap).norm();
        direct.push_back(direct_loss.amplitude(d) * fading.direct[u]);
    }

    MatrixXcd g(n, fading.ap_to_ris.cols());
    std::vector<VectorXcd> ris_to_user;
    ris_to_user.reserve(k);
    if (n > 0)
    {
        const int m = static_cast<int>(fading.ap_to_ris.cols());
        const double l1 = ris_loss.amplitude((geom.ris - geom.ap).norm());
        const VectorXcd a_ris = steering_vector(n, rician.ris_departure_angle);
        const VectorXcd a_ap = steering_vector(m, rician.ap_angle);
        g = l1 * (los * (a_ris * a_ap.adjoint()) + nlos * fading.ap_to_ris);
        for (int u = 0; u < k; ++u)
        {
            const double l2 = ris_loss.amplitude((geom.users[u] - geom.ris).norm());
            ris_to_user.push_back(
                l2 * (los * steering_vector(n, rician.ris_to_user_angles[u]) + nlos * fading.ris_to_user[u]));
        }
    }
    else
    {
        for (int u = 0; u < k; ++u)
            ris_to_user.emplace_back(VectorXcd::Zero(0));
    }

    return make_channel_set(std::move(direct), std::move(g), std::move(ris_to_user));
}

inline ChannelSet draw_channels(const SystemDims& dims, const LinkGeometry& geom,
                                const PathLossModel& ris_loss, const PathLossModel& direct_loss,
                                const RicianParams& rician, Rng& rng)
{
    return assemble_channels(draw_small_scale(dims, rng), rician, ris_loss, direct_loss, geom);
}

namespace detail {

inline double mean_square(const VectorXcd& v) { return v.size() ? v.squaredNorm() / v.size() : 0.0; }

inline VectorXcd perturb(const VectorXcd& est, double stddev, Rng& rng)
{
    return est + stddev * draw_cgauss_vector(static_cast<int>(est.size()), rng);
}

} // namespace detail

// Draws a true-channel realization around an estimate: every entry gets an
// independent CN(0, rho * E[|xhat|^2]) error, the second moment taken over
// the entries of the block the entry belongs to (direct channels pooled,
// the AP-RIS matrix, each RIS-user vector separately).
inline SmallScaleEstimate draw_csi_realization(const SmallScaleEstimate& estimate,
                                               const CsiErrorModel& err, Rng& rng)
{
    if (err.normalized_mse < 0.0)
        throw std::invalid_argument("draw_csi_realization: normalized MSE must be >= 0");
    if (err.normalized_mse == 0.0)
        return estimate;

    SmallScaleEstimate out;

    double direct_ms = 0.0;
    Eigen::Index direct_count = 0;
    for (const auto& v : estimate.direct)
    {
        direct_ms += v.squaredNorm();
        direct_count += v.size();
    }
    direct_ms = direct_count ? direct_ms / direct_count : 0.0;
    const double direct_std = std::sqrt(err.normalized_mse * direct_ms);
    out.direct.reserve(estimate.direct.size());
    for (const auto& v : estimate.direct)
        out.direct.push_back(detail::perturb(v, direct_std, rng));

    if (estimate.ap_to_ris.size() > 0)
    {
        const double g_ms = estimate.ap_to_ris.squaredNorm() / estimate.ap_to_ris.size();
        out.ap_to_ris = estimate.ap_to_ris +
                        std::sqrt(err.normalized_mse * g_ms) *
                            draw_cgauss_matrix(static_cast<int>(estimate.ap_to_ris.rows()),
                                               static_cast<int>(estimate.ap_to_ris.cols()), rng);
    }
    else
    {
        out.ap_to_ris = estimate.ap_to_ris;
    }

    out.ris_to_user.reserve(estimate.ris_to_user.size());
    for (const auto& v : estimate.ris_to_user)
    {
        const double std_k = std::sqrt(err.normalized_mse * detail::mean_square(v));
        out.ris_to_user.push_back(v.size() ? detail::perturb(v, std_k, rng) : v);
    }
    return out;
}

} // namespace risopt
