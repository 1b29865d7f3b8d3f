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
// WMMSE solver for the fixed-phase beamforming subproblem: weighted
// sum-rate maximization in a conventional multiuser MISO downlink. The
// three-step update (receiver gain chi, MSE weight kappa, beamformer W)
// is iterated to a stationary point; the transmit power constraint is
// enforced through a bisection search on the dual variable lambda.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "risopt/model.hpp"

namespace risopt {

struct WmmseOptions
{
    int max_iters = 200;
    double obj_tol = 1e-6;       // relative WSR change between iterations
    double bisect_tol = 1e-12;   // relative power residual |P(lambda) - P_T| / P_T
    double lambda_max0 = 1.0;    // initial upper bracket, doubled until the power undershoots
    bool validate = true;        // assert feasibility after every step
};

struct WmmseState
{
    VectorXcd chi;    // per-user receive gain
    VectorXd kappa;   // per-user MSE weight, >= 1
    Beamformer w;
    double lambda = 0.0;
};

struct WmmseResult
{
    Beamformer w;
    std::vector<double> wsr_trace; // nats, one entry per iteration
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Solves (lambda*I + A) w_k = c_k for all k. At lambda = 0 the matrix can be
// rank deficient (K < M); the minimum-norm solution is the lambda -> 0 limit
// and is optimal because the right-hand sides lie in the range of A.
inline MatrixXcd wmmse_beamformer_for_lambda(double lambda, const MatrixXcd& a,
                                             const MatrixXcd& c)
{
    const int m = static_cast<int>(a.rows());
    MatrixXcd shifted = a + lambda * MatrixXcd::Identity(m, m);
    if (lambda > 0.0)
    {
        Eigen::LLT<MatrixXcd> llt(shifted);
        if (llt.info() == Eigen::Success)
            return llt.solve(c);
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXcd> cod(shifted);
    return cod.solve(c);
}

} // namespace detail

// One full chi/kappa/W round. The returned beamformer satisfies the power
// constraint: lambda = 0 if the minimum-norm solution already fits the
// budget, otherwise the unique positive lambda matching the budget within
// bisect_tol is located by bracketing and bisection (power is strictly
// decreasing in lambda).
inline WmmseState wmmse_step(const std::vector<VectorXcd>& h, const WmmseState& state,
                             const LinkBudget& budget, const WmmseOptions& opts = {})
{
    const int k = static_cast<int>(h.size());
    const int m = static_cast<int>(h[0].size());
    const double p_total = budget.tx_power_mw();
    const VectorXd& weights = budget.weights();

    WmmseState next = state;
    next.chi.resize(k);
    next.kappa.resize(k);

    // Receive gains and MSE weights at the current beamformer.
    for (int u = 0; u < k; ++u)
    {
        cplx desired = h[u].dot(state.w.columns.col(u));
        double rx_power = budget.noise_mw();
        for (int i = 0; i < k; ++i)
            rx_power += std::norm(cplx(h[u].dot(state.w.columns.col(i))));
        next.chi[u] = desired / rx_power;
        const double mse = 1.0 - std::real(std::conj(next.chi[u]) * desired);
        next.kappa[u] = 1.0 / mse;
    }

    MatrixXcd a = MatrixXcd::Zero(m, m);
    MatrixXcd c(m, k);
    for (int u = 0; u < k; ++u)
    {
        a.noalias() += weights[u] * std::norm(next.chi[u]) * next.kappa[u] *
                       (h[u] * h[u].adjoint());
        c.col(u) = weights[u] * next.chi[u] * next.kappa[u] * h[u];
    }

    MatrixXcd w = detail::wmmse_beamformer_for_lambda(0.0, a, c);
    double lambda = 0.0;
    if (w.squaredNorm() > p_total)
    {
        double lo = 0.0;
        double hi = opts.lambda_max0;
        while (detail::wmmse_beamformer_for_lambda(hi, a, c).squaredNorm() > p_total)
        {
            hi *= 2.0;
            if (!std::isfinite(hi))
                throw std::runtime_error("wmmse_step: bisection bracket diverged");
        }
        for (int it = 0; it < 200; ++it)
        {
            lambda = 0.5 * (lo + hi);
            w = detail::wmmse_beamformer_for_lambda(lambda, a, c);
            const double p = w.squaredNorm();
            if (std::abs(p - p_total) <= opts.bisect_tol * p_total)
                break;
            (p > p_total ? lo : hi) = lambda;
        }
        // Land exactly inside the ball; the bisection leaves at most a
        // bisect_tol-relative residual to remove.
        const double p = w.squaredNorm();
        if (p > p_total)
            w *= std::sqrt(p_total / p);
    }

    next.w = Beamformer(std::move(w));
    next.lambda = lambda;

    if (opts.validate && total_power(next.w) > p_total * (1.0 + 1e-9))
        throw std::logic_error("wmmse_step: power constraint violated");
    return next;
}

// Iterates wmmse_step from a warm start (or an MRT split when none is
// given) until the relative WSR change drops below obj_tol.
inline WmmseResult wmmse_solve(const std::vector<VectorXcd>& h, const LinkBudget& budget,
                               const WmmseOptions& opts = {},
                               const Beamformer* warm_start = nullptr)
{
    WmmseState state;
    state.w = warm_start ? *warm_start : mrt_beamformer(h, budget.tx_power_mw());

    WmmseResult result;
    double prev = wsr_from_channels(h, state.w.columns, budget.weights(), budget.noise_mw());
    result.wsr_trace.push_back(prev);
    for (int it = 0; it < opts.max_iters; ++it)
    {
        state = wmmse_step(h, state, budget, opts);
        const double cur = wsr_from_channels(h, state.w.columns, budget.weights(), budget.noise_mw());
        result.wsr_trace.push_back(cur);
        ++result.iterations;
        if (std::abs(cur - prev) <= opts.obj_tol * std::max(1.0, std::abs(cur)))
        {
            result.converged = true;
            prev = cur;
            break;
        }
        prev = cur;
    }
    result.w = state.w;
    return result;
}

} // namespace risopt
