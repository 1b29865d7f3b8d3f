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
// System model for the RIS-aided multiuser MISO downlink: dimensions,
// channels, reflection coefficients, beamformers, SINR and weighted
// sum-rate. Everything downstream (WMMSE, RCG, BCD, SSCA) is written in
// terms of these types.
//
// Conventions used throughout the library:
//  * Rates are in nats; convert with nats_to_bits() only at reporting
//    boundaries.
//  * Powers are linear milliwatts inside all solver math; dBm values are
//    converted once at construction time.
//  * The reflection coefficients are theta_n = exp(j*phi_n). Wirtinger
//    gradients of real objectives are taken with respect to these
//    coefficients (d/dRe + j*d/dIm).

#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace risopt {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

inline constexpr double kLn2 = 0.6931471805599453094;

inline double nats_to_bits(double nats) { return nats / kLn2; }
inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Antenna/element/user counts. N = 0 models a deployment without RIS.
struct SystemDims
{
    int antennas = 1;     // M, transmit antennas at the AP
    int ris_elements = 0; // N, reflecting elements (0 = no RIS)
    int users = 1;        // K, single-antenna users

    SystemDims() = default;
    SystemDims(int m, int n, int k) : antennas(m), ris_elements(n), users(k)
    {
        if (antennas < 1 || users < 1 || ris_elements < 0)
            throw std::invalid_argument("SystemDims: need M >= 1, K >= 1, N >= 0");
    }
};

// One realization of all physical links. `effective[k]` caches the N x M
// cascade matrix diag(conj(ris_to_user[k])) * ap_to_ris used by every
// solver; it is rebuilt on construction so the two representations cannot
// drift apart.
struct ChannelSet
{
    std::vector<VectorXcd> direct;      // K vectors of length M (AP -> user)
    MatrixXcd ap_to_ris;                // N x M
    std::vector<VectorXcd> ris_to_user; // K vectors of length N
    std::vector<MatrixXcd> effective;   // K matrices, N x M

    int users() const { return static_cast<int>(direct.size()); }
    int antennas() const { return direct.empty() ? 0 : static_cast<int>(direct[0].size()); }
    int ris_elements() const { return static_cast<int>(ap_to_ris.rows()); }
};

inline ChannelSet make_channel_set(std::vector<VectorXcd> direct, MatrixXcd ap_to_ris,
                                   std::vector<VectorXcd> ris_to_user)
{
    if (direct.empty())
        throw std::invalid_argument("make_channel_set: need at least one user");
    const auto k = direct.size();
    const auto m = direct[0].size();
    const auto n = ap_to_ris.rows();
    if (n > 0 && ap_to_ris.cols() != m)
        throw std::invalid_argument("make_channel_set: ap_to_ris column count != M");
    if (ris_to_user.size() != k)
        throw std::invalid_argument("make_channel_set: ris_to_user user count != K");
    for (const auto& h : direct)
        if (h.size() != m)
            throw std::invalid_argument("make_channel_set: inconsistent direct channel length");
    for (const auto& h : ris_to_user)
        if (h.size() != n)
            throw std::invalid_argument("make_channel_set: inconsistent RIS-user channel length");

    ChannelSet ch;
    ch.direct = std::move(direct);
    ch.ap_to_ris = std::move(ap_to_ris);
    ch.ris_to_user = std::move(ris_to_user);
    ch.effective.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        ch.effective.push_back(ch.ris_to_user[i].conjugate().asDiagonal() * ch.ap_to_ris);
    return ch;
}

// N unit-modulus reflection coefficients. The phases are the source of
// truth; coefficients are regenerated from them on every construction, so
// |theta_n| = 1 holds to machine precision at all times.
class PhaseVector
{
  public:
    PhaseVector() = default;

    static PhaseVector from_phases(VectorXd phases)
    {
        PhaseVector p;
        p.phases_ = std::move(phases);
        p.regenerate();
        return p;
    }

    // Recovers phases via arg(); the stored coefficients are the
    // re-exponentiated phases, i.e. the input normalized to unit modulus.
    static PhaseVector from_coefficients(const VectorXcd& coeffs)
    {
        VectorXd phases(coeffs.size());
        for (Eigen::Index i = 0; i < coeffs.size(); ++i)
        {
            if (std::abs(coeffs[i]) == 0.0)
                throw std::invalid_argument("PhaseVector: zero-magnitude coefficient");
            phases[i] = std::arg(coeffs[i]);
        }
        return from_phases(std::move(phases));
    }

    static PhaseVector ones(int n) { return from_phases(VectorXd::Zero(n)); }

    const VectorXd& phases() const { return phases_; }
    const VectorXcd& coefficients() const { return coeffs_; }
    int size() const { return static_cast<int>(phases_.size()); }

  private:
    void regenerate()
    {
        coeffs_.resize(phases_.size());
        for (Eigen::Index i = 0; i < phases_.size(); ++i)
            coeffs_[i] = std::polar(1.0, phases_[i]);
    }

    VectorXd phases_;
    VectorXcd coeffs_;
};

// M x K transmit beamforming matrix; column k serves user k.
struct Beamformer
{
    MatrixXcd columns;

    Beamformer() = default;
    explicit Beamformer(MatrixXcd w) : columns(std::move(w)) {}
    static Beamformer zero(int m, int k) { return Beamformer(MatrixXcd::Zero(m, k)); }

    int antennas() const { return static_cast<int>(columns.rows()); }
    int users() const { return static_cast<int>(columns.cols()); }
};

inline double total_power(const Beamformer& w) { return w.columns.squaredNorm(); }

// Transmit power budget, receiver noise power and user priorities.
// Linear-scale values are fixed once at construction.
class LinkBudget
{
  public:
    LinkBudget() = default;
    LinkBudget(double tx_power_dbm, double noise_power_dbm, VectorXd weights)
        : tx_power_dbm_(tx_power_dbm), noise_power_dbm_(noise_power_dbm),
          weights_(std::move(weights)), tx_power_mw_(dbm_to_mw(tx_power_dbm)),
          noise_mw_(dbm_to_mw(noise_power_dbm))
    {
        if ((weights_.array() <= 0.0).any())
            throw std::invalid_argument("LinkBudget: weights must be positive");
    }

    double tx_power_dbm() const { return tx_power_dbm_; }
    double noise_power_dbm() const { return noise_power_dbm_; }
    double tx_power_mw() const { return tx_power_mw_; }
    double noise_mw() const { return noise_mw_; }
    const VectorXd& weights() const { return weights_; }
    int users() const { return static_cast<int>(weights_.size()); }

  private:
    double tx_power_dbm_ = 0.0;
    double noise_power_dbm_ = 0.0;
    VectorXd weights_;
    double tx_power_mw_ = 1.0;
    double noise_mw_ = 1.0;
};

// Combined channel h_k = direct_k + effective_k^H * conj(theta), so that
// h_k^H w = direct_k^H w + sum_n theta_n * (effective_k * w)_n. With N = 0
// (or all-zero RIS links) this degenerates to the direct channel.
inline std::vector<VectorXcd> combined_channel(const ChannelSet& ch, const PhaseVector& theta)
{
    if (theta.size() != ch.ris_elements())
        throw std::invalid_argument("combined_channel: phase vector length != N");
    std::vector<VectorXcd> h;
    h.reserve(ch.direct.size());
    const VectorXcd conj_coeffs = theta.coefficients().conjugate();
    for (std::size_t k = 0; k < ch.direct.size(); ++k)
    {
        if (theta.size() == 0)
            h.push_back(ch.direct[k]);
        else
            h.push_back(ch.direct[k] + ch.effective[k].adjoint() * conj_coeffs);
    }
    return h;
}

// SINR of each user for given combined channels.
inline VectorXd sinr_from_channels(const std::vector<VectorXcd>& h, const MatrixXcd& w,
                                   double noise_mw)
{
    if (noise_mw <= 0.0)
        throw std::invalid_argument("sinr: noise power must be positive");
    const int k = static_cast<int>(h.size());
    VectorXd out(k);
    for (int u = 0; u < k; ++u)
    {
        double signal = 0.0, interference = 0.0;
        for (int i = 0; i < w.cols(); ++i)
        {
            const double p = std::norm(cplx(h[u].dot(w.col(i))));
            if (i == u)
                signal = p;
            else
                interference += p;
        }
        out[u] = signal / (interference + noise_mw);
    }
    return out;
}

inline VectorXd sinr(const Beamformer& w, const PhaseVector& theta, const ChannelSet& ch,
                     double noise_mw)
{
    return sinr_from_channels(combined_channel(ch, theta), w.columns, noise_mw);
}

// Weighted sum-rate in nats: sum_k weight_k * ln(1 + sinr_k).
inline double wsr_from_sinr(const VectorXd& gamma, const VectorXd& weights)
{
    return (weights.array() * (1.0 + gamma.array()).log()).sum();
}

inline double wsr_from_channels(const std::vector<VectorXcd>& h, const MatrixXcd& w,
                                const VectorXd& weights, double noise_mw)
{
    return wsr_from_sinr(sinr_from_channels(h, w, noise_mw), weights);
}

inline double wsr(const Beamformer& w, const PhaseVector& theta, const ChannelSet& ch,
                  const LinkBudget& budget)
{
    return wsr_from_sinr(sinr(w, theta, ch, budget.noise_mw()), budget.weights());
}

// Maximum-ratio transmission with an equal power split: w_k proportional
// to h_k, total power = budget. Zero channels get zero columns.
inline Beamformer mrt_beamformer(const std::vector<VectorXcd>& h, double tx_power_mw)
{
    const int k = static_cast<int>(h.size());
    const int m = static_cast<int>(h[0].size());
    MatrixXcd w = MatrixXcd::Zero(m, k);
    const double per_user = std::sqrt(tx_power_mw / k);
    for (int u = 0; u < k; ++u)
    {
        const double nrm = h[u].norm();
        if (nrm > 0.0)
            w.col(u) = per_user / nrm * h[u];
    }
    return Beamformer(std::move(w));
}

} // namespace risopt
