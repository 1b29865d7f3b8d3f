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
// Riemannian conjugate gradient solver for the fixed-beamformer phase
// subproblem on the product-of-circles manifold {theta : |theta_n| = 1},
// plus the alternating WMMSE/RCG driver for the joint problem.
//
// The manifold variable is the coefficient vector theta_n = exp(j*phi_n).
// Euclidean gradients are ambient Wirtinger gradients with respect to
// these coefficients (dRe + j*dIm); the finite-difference tests pin this
// convention.

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "risopt/model.hpp"
#include "risopt/wmmse.hpp"

namespace risopt {

// Effective per-user gains at a fixed beamformer: a(i,k) = effective_k * w_i
// (column i of a[k]) and b(i,k) = direct_k^H * w_i, so the combined channel
// response of stream i at user k is theta^T a(i,k) + b(i,k).
struct EffectiveGains
{
    std::vector<MatrixXcd> a; // K matrices, N x K; a[k].col(i) = a(i,k)
    MatrixXcd b;              // K x K; b(i,k)

    int users() const { return static_cast<int>(a.size()); }
    int ris_elements() const { return a.empty() ? 0 : static_cast<int>(a[0].rows()); }
};

inline EffectiveGains effective_gains(const ChannelSet& ch, const Beamformer& w)
{
    if (w.antennas() != ch.antennas())
        throw std::invalid_argument("effective_gains: beamformer antenna count mismatch");
    const int k = ch.users();
    EffectiveGains g;
    g.a.reserve(k);
    g.b.resize(w.users(), k);
    for (int u = 0; u < k; ++u)
    {
        g.a.push_back(ch.effective[u] * w.columns);
        g.b.col(u) = (w.columns.adjoint() * ch.direct[u]).conjugate();
    }
    return g;
}

struct RcgOptions
{
    int max_iters = 500;
    double grad_norm_tol = 1e-6;
    double armijo_shrink = 0.5;  // in (0, 1)
    double armijo_slope = 1e-4;  // in (0, 0.5)
    int max_line_search = 30;
};

struct RcgResult
{
    PhaseVector theta;
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;      // gradient norm below tolerance
    bool line_search_failed = false;
};

namespace detail {

// Stream responses e(i,k) = theta^T a(i,k) + b(i,k) for all i, one column
// per user.
inline MatrixXcd stream_responses(const VectorXcd& coeffs, const EffectiveGains& g)
{
    MatrixXcd e = g.b;
    if (g.ris_elements() > 0)
        for (int u = 0; u < g.users(); ++u)
            e.col(u) += g.a[u].transpose() * coeffs;
    return e;
}

} // namespace detail

// Weighted sum-rate at fixed gains as a function of the reflection
// coefficients; coincides with wsr() evaluated on the same instance.
inline double objective_fC(const VectorXcd& coeffs, const EffectiveGains& g,
                           const VectorXd& weights, double noise_mw)
{
    const MatrixXcd e = detail::stream_responses(coeffs, g);
    double value = 0.0;
    for (int u = 0; u < g.users(); ++u)
    {
        const double total = e.col(u).squaredNorm() + noise_mw;
        const double interference = total - std::norm(cplx(e(u, u)));
        value += weights[u] * std::log(total / interference);
    }
    return value;
}

// Ambient Wirtinger gradient of objective_fC with respect to the
// coefficients (scaled to dRe + j*dIm).
inline VectorXcd euclidean_grad_fC(const VectorXcd& coeffs, const EffectiveGains& g,
                                   const VectorXd& weights, double noise_mw)
{
    const int n = g.ris_elements();
    VectorXcd grad = VectorXcd::Zero(n);
    if (n == 0)
        return grad;
    const MatrixXcd e = detail::stream_responses(coeffs, g);
    for (int u = 0; u < g.users(); ++u)
    {
        const double total = e.col(u).squaredNorm() + noise_mw;
        const double interference = total - std::norm(cplx(e(u, u)));
        const VectorXcd full = g.a[u].conjugate() * e.col(u);
        const VectorXcd intf = full - g.a[u].col(u).conjugate() * e(u, u);
        grad += 2.0 * weights[u] * (full / total - intf / interference);
    }
    return grad;
}

// Orthogonal projection of an ambient gradient onto the tangent space of
// the product-of-circles manifold at theta.
inline VectorXcd riemannian_grad(const VectorXcd& coeffs, const VectorXcd& ambient_grad)
{
    const Eigen::ArrayXd radial = (ambient_grad.array() * coeffs.conjugate().array()).real();
    return ambient_grad - (radial.cast<cplx>() * coeffs.array()).matrix();
}

// Vector transport to the tangent space at theta (same projection).
inline VectorXcd transport_tangent(const VectorXcd& v, const VectorXcd& coeffs)
{
    return riemannian_grad(coeffs, v);
}

// Conjugate search direction with a Polak-Ribiere+ parameter (clamped at
// zero): d = -grad + tau1 * Transport(prev_dir). Gradients refer to the
// function being descended. With no history this is steepest descent.
inline VectorXcd transport_and_direction(const std::optional<VectorXcd>& prev_dir,
                                         const VectorXcd& coeffs, const VectorXcd& rgrad,
                                         const std::optional<VectorXcd>& prev_rgrad)
{
    if (!prev_dir || !prev_rgrad)
        return -rgrad;
    const VectorXcd transported_grad = transport_tangent(*prev_rgrad, coeffs);
    const double denom = prev_rgrad->squaredNorm();
    double tau1 = 0.0;
    if (denom > 0.0)
        tau1 = std::max(0.0, std::real(rgrad.dot(rgrad - transported_grad)) / denom);
    return -rgrad + tau1 * transport_tangent(*prev_dir, coeffs);
}

namespace detail {

inline bool retract_coefficients(const VectorXcd& coeffs, const VectorXcd& dir, double step,
                                 VectorXcd& out)
{
    out = coeffs + step * dir;
    for (Eigen::Index i = 0; i < out.size(); ++i)
    {
        const double mag = std::abs(out[i]);
        if (mag == 0.0)
            return false;
        out[i] /= mag;
    }
    return true;
}

} // namespace detail

// Projects theta + step * direction back onto the manifold elementwise.
inline PhaseVector retract(const PhaseVector& theta, const VectorXcd& direction, double step)
{
    VectorXcd out;
    if (!detail::retract_coefficients(theta.coefficients(), direction, step, out))
        throw std::invalid_argument("retract: zero-magnitude element; reduce the step");
    return PhaseVector::from_coefficients(out);
}

// Maximizes objective_fC over the manifold by Riemannian conjugate
// gradient with Armijo backtracking (internally a descent on -f_C).
inline RcgResult rcg_solve(const PhaseVector& theta0, const EffectiveGains& g,
                           const VectorXd& weights, double noise_mw, const RcgOptions& opts = {})
{
    RcgResult result;
    VectorXcd coeffs = theta0.coefficients();
    if (coeffs.size() == 0)
    {
        result.theta = theta0;
        result.converged = true;
        return result;
    }

    double cur = -objective_fC(coeffs, g, weights, noise_mw);
    result.objective_trace.push_back(-cur);

    std::optional<VectorXcd> prev_dir;
    std::optional<VectorXcd> prev_rgrad;
    for (int it = 0; it < opts.max_iters; ++it)
    {
        const VectorXcd egrad = -euclidean_grad_fC(coeffs, g, weights, noise_mw);
        const VectorXcd rgrad = riemannian_grad(coeffs, egrad);
        const double grad_norm_sq = rgrad.squaredNorm();
        if (std::sqrt(grad_norm_sq) < opts.grad_norm_tol)
        {
            result.converged = true;
            break;
        }

        VectorXcd dir = transport_and_direction(prev_dir, coeffs, rgrad, prev_rgrad);
        if (std::real(rgrad.dot(dir)) >= 0.0)
            dir = -rgrad; // conjugate direction lost descent; restart

        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt)
        {
            double step = 1.0;
            for (int ls = 0; ls < opts.max_line_search; ++ls)
            {
                VectorXcd candidate;
                if (detail::retract_coefficients(coeffs, dir, step, candidate))
                {
                    const double trial = -objective_fC(candidate, g, weights, noise_mw);
                    if (trial <= cur - opts.armijo_slope * step * grad_norm_sq)
                    {
                        coeffs = candidate;
                        cur = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= opts.armijo_shrink;
            }
            if (!accepted && attempt == 0)
            {
                if (dir == -rgrad)
                    break;
                dir = -rgrad; // retry once along steepest descent
            }
        }
        if (!accepted)
        {
            result.line_search_failed = true;
            break;
        }
        prev_dir = dir;
        prev_rgrad = rgrad;
        ++result.iterations;
        result.objective_trace.push_back(-cur);
    }

    result.theta = PhaseVector::from_coefficients(coeffs);
    return result;
}

struct AlternatingOptions
{
    double outer_tol = 1e-5; // relative WSR change across one outer cycle
    int outer_max = 100;
    WmmseOptions wmmse;
    RcgOptions rcg;
};

struct AlternatingResult
{
    Beamformer w;
    PhaseVector theta;
    std::vector<double> wsr_trace;  // nats; entry 0 is the starting point
    std::vector<double> elapsed_ms; // cumulative, aligned with wsr_trace
    int outer_iterations = 0;
    bool converged = false;
};

// Alternating optimization: WMMSE on the beamformer at fixed phases, then
// RCG on the phases at fixed beamformer, until the weighted sum-rate
// settles. With N = 0 this is a single WMMSE solve.
inline AlternatingResult alternating_optimize(const ChannelSet& ch, const LinkBudget& budget,
                                              const AlternatingOptions& opts = {})
{
    AlternatingResult result;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    PhaseVector theta = PhaseVector::ones(ch.ris_elements());
    std::vector<VectorXcd> h = combined_channel(ch, theta);
    Beamformer w = mrt_beamformer(h, budget.tx_power_mw());

    double prev = wsr_from_channels(h, w.columns, budget.weights(), budget.noise_mw());
    result.wsr_trace.push_back(prev);
    result.elapsed_ms.push_back(elapsed());

    for (int outer = 0; outer < opts.outer_max; ++outer)
    {
        const WmmseResult bf = wmmse_solve(h, budget, opts.wmmse, &w);
        w = bf.w;

        double cur;
        if (ch.ris_elements() > 0)
        {
            const EffectiveGains g = effective_gains(ch, w);
            const RcgResult phase =
                rcg_solve(theta, g, budget.weights(), budget.noise_mw(), opts.rcg);
            theta = phase.theta;
            h = combined_channel(ch, theta);
            cur = wsr_from_channels(h, w.columns, budget.weights(), budget.noise_mw());
        }
        else
        {
            cur = bf.wsr_trace.back();
        }

        result.wsr_trace.push_back(cur);
        result.elapsed_ms.push_back(elapsed());
        ++result.outer_iterations;

        const bool settled = std::abs(cur - prev) <= opts.outer_tol * std::max(1.0, std::abs(cur));
        prev = cur;
        if (settled || ch.ris_elements() == 0)
        {
            result.converged = true;
            break;
        }
    }

    result.w = w;
    result.theta = theta;
    return result;
}

} // namespace risopt
