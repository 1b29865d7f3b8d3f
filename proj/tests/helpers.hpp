// Shared test utilities: independent scalar-loop oracles (no Eigen
// reductions) and seeded random instance generators.
#pragma once

#include <complex>
#include <vector>

#include "risopt/channel_model.hpp"
#include "risopt/model.hpp"
#include "risopt/rng.hpp"

namespace testutil {

using risopt::Beamformer;
using risopt::ChannelSet;
using risopt::LinkBudget;
using risopt::MatrixXcd;
using risopt::PhaseVector;
using risopt::VectorXcd;
using risopt::VectorXd;
using cplx = std::complex<double>;

// --- scalar-loop oracles -------------------------------------------------
// These recompute the advertised formulas entry by entry with plain loops,
// independent of the Eigen-based implementation paths.

// h_k = direct_k + effective_k^H conj(coeffs); accepts arbitrary (possibly
// non-unit-modulus) coefficient vectors.
inline VectorXcd oracle_combined_channel(const VectorXcd& direct, const MatrixXcd& effective,
                                         const VectorXcd& coeffs)
{
    VectorXcd h(direct.size());
    for (int m = 0; m < direct.size(); ++m)
    {
        cplx acc = direct[m];
        for (int n = 0; n < effective.rows(); ++n)
            acc += std::conj(effective(n, m)) * std::conj(coeffs[n]);
        h[m] = acc;
    }
    return h;
}

inline double oracle_sinr_user(const std::vector<VectorXcd>& h, const MatrixXcd& w, int user,
                               double noise)
{
    cplx desired = 0.0;
    for (int m = 0; m < h[user].size(); ++m)
        desired += std::conj(h[user][m]) * w(m, user);
    double interference = 0.0;
    for (int i = 0; i < w.cols(); ++i)
    {
        if (i == user)
            continue;
        cplx t = 0.0;
        for (int m = 0; m < h[user].size(); ++m)
            t += std::conj(h[user][m]) * w(m, i);
        interference += std::norm(t);
    }
    return std::norm(desired) / (interference + noise);
}

inline double oracle_wsr(const std::vector<VectorXcd>& h, const MatrixXcd& w,
                         const VectorXd& weights, double noise)
{
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k)
        acc += weights[static_cast<int>(k)] *
               std::log(1.0 + oracle_sinr_user(h, w, static_cast<int>(k), noise));
    return acc;
}

inline double oracle_total_power(const MatrixXcd& w)
{
    double acc = 0.0;
    for (int c = 0; c < w.cols(); ++c)
        for (int r = 0; r < w.rows(); ++r)
            acc += std::norm(w(r, c));
    return acc;
}

// --- random instances ----------------------------------------------------

inline VectorXcd random_cvector(int n, risopt::Rng& rng)
{
    VectorXcd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = rng.cgauss();
    return v;
}

inline MatrixXcd random_cmatrix(int rows, int cols, risopt::Rng& rng)
{
    MatrixXcd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = rng.cgauss();
    return m;
}

// Unstructured channels with unit-scale CSCG entries.
inline ChannelSet random_channels(int m, int n, int k, risopt::Rng& rng)
{
    std::vector<VectorXcd> direct, ris;
    for (int u = 0; u < k; ++u)
        direct.push_back(random_cvector(m, rng));
    MatrixXcd g = random_cmatrix(n, m, rng);
    for (int u = 0; u < k; ++u)
        ris.push_back(random_cvector(n, rng));
    return risopt::make_channel_set(direct, g, ris);
}

inline PhaseVector random_phases(int n, risopt::Rng& rng)
{
    VectorXd phi(n);
    for (int i = 0; i < n; ++i)
        phi[i] = rng.uniform(0.0, 2.0 * M_PI);
    return PhaseVector::from_phases(phi);
}

// Random beamformer scaled to exactly the power budget.
inline Beamformer random_beamformer(int m, int k, double power, risopt::Rng& rng)
{
    MatrixXcd w = random_cmatrix(m, k, rng);
    w *= std::sqrt(power / w.squaredNorm());
    return Beamformer(std::move(w));
}

// Unit-scale budget (0 dBm transmit, 0 dBm noise, equal weights) used by
// instance-level solver tests.
inline LinkBudget unit_budget(int k, double tx_dbm = 0.0, double noise_dbm = 0.0)
{
    return LinkBudget(tx_dbm, noise_dbm, VectorXd::Constant(k, 1.0 / k));
}

inline LinkBudget weighted_budget(int k, double tx_dbm, double noise_dbm, risopt::Rng& rng)
{
    VectorXd w(k);
    for (int i = 0; i < k; ++i)
        w[i] = 0.2 + rng.uniform();
    w /= w.sum();
    return LinkBudget(tx_dbm, noise_dbm, std::move(w));
}

} // namespace testutil
