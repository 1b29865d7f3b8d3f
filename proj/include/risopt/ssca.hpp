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
// Stochastic SCA for phase optimization under imperfect CSI. Each outer
// iteration draws a channel realization consistent with the estimate and
// its error statistics, runs the inner block cycle to a stationary point
// at the current phases (parfun_b), and folds the sampled quadratic
// surrogate value and gradient into recursive averages; the phases then
// take one averaged-gradient step with an Armijo-selected step size. The
// deployed performance of a phase design is scored by re-optimizing the
// beamformer on the realized channel (deployed_wsr).

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "risopt/channel_model.hpp"
#include "risopt/fp_bcd.hpp"
#include "risopt/model.hpp"
#include "risopt/rng.hpp"
#include "risopt/wmmse.hpp"

namespace risopt {

// Recursive-average state of the stochastic SCA loop.
struct SscaState
{
    VectorXd phi;        // current phases
    double h_bar = 0.0;  // recursive objective estimate
    VectorXd g_bar;      // recursive gradient estimate
    int r = 0;           // completed outer iterations
    double delta = 0.0;  // averaging weight of the last iteration, r^-0.501
    double kappa = 1.0;  // last accepted inverse step size (search seed)
};

// Deterministic source of channel realizations around a fixed estimate:
// realization(r) is a pure function of (seed, r).
struct CsiSampler
{
    SmallScaleEstimate estimate;
    CsiErrorModel error_model;
    RicianParams rician;
    PathLossModel ris_loss;
    PathLossModel direct_loss;
    LinkGeometry geometry;
    std::uint64_t seed = 0;

    ChannelSet realization(int r) const
    {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        return assemble_channels(draw_csi_realization(estimate, error_model, rng), rician,
                                 ris_loss, direct_loss, geometry);
    }
};

struct SscaOptions
{
    int max_outer = 500;
    int window = 20;       // convergence window on the h_bar trace
    double h_tol = 1e-3;   // mean relative h_bar change over the window
    ArmijoParams armijo{}; // step-size backtracking, kappa from 1 by factor base
    double inner_tol = 1e-5;
    int inner_max_cycles = 200;
    bool warm_start = true; // carry inner blocks across realizations
    bool validate = true;
};

struct ParfunBResult
{
    QuadParams quad;
    AuxiliaryVars aux;
    ProxState prox;
    double f_a1 = 0.0;
    int cycles = 0;
    bool converged = false;
};

// Inner solver at fixed phases: cycles beta -> W -> alpha -> beta on the
// given realization until f_A1 settles, then builds the quadratic phase
// parameters. A zero-power warm start falls back to an MRT split.
inline ParfunBResult parfun_b(const VectorXd& phi, const AuxiliaryVars& aux0,
                              const ProxState& prox0, const ChannelSet& realization,
                              const LinkBudget& budget, const SscaOptions& opts = {})
{
    const PhaseVector theta = PhaseVector::from_phases(phi);
    const std::vector<VectorXcd> h = combined_channel(realization, theta);

    ParfunBResult r;
    r.aux = aux0;
    r.prox = prox0;
    if (total_power(r.prox.w_curr) == 0.0)
    {
        r.prox.w_curr = mrt_beamformer(h, budget.tx_power_mw());
        r.prox.w_prev = r.prox.w_curr;
    }

    BcdOptions inner;
    inner.validate = opts.validate;

    double prev = -std::numeric_limits<double>::infinity();
    for (int cycle = 0; cycle < opts.inner_max_cycles; ++cycle)
    {
        block_cycle_pass(h, r.aux, r.prox, r.f_a1, budget, inner);
        ++r.cycles;
        if (std::abs(r.f_a1 - prev) <= opts.inner_tol * std::max(1.0, std::abs(r.f_a1)))
        {
            r.converged = true;
            break;
        }
        prev = r.f_a1;
    }
    r.quad = build_quad_params(r.aux.alpha, r.aux.beta, r.prox.w_curr, realization,
                               budget.weights());
    return r;
}

// Gradient of the sampled quadratic surrogate; shares its kernel with the
// perfect-CSI phase gradient.
inline VectorXd grad_g_hat(const VectorXd& phi, const QuadParams& q)
{
    return grad_fA4(phi, q);
}

// Per-sample SCA surrogate value around phi_prev.
inline double ssca_surrogate(const VectorXd& phi, const VectorXd& phi_prev, double g_prev,
                             const VectorXd& grad_prev, double kappa)
{
    const VectorXd step = phi - phi_prev;
    return g_prev + grad_prev.dot(step) + 0.5 * kappa * step.squaredNorm();
}

// Folds one sampled (value, gradient) pair into the recursive averages with
// weight delta_r = r^-0.501, then moves the phases along -g_bar/kappa. The
// inverse step size kappa is searched on a geometric grid seeded by the
// last accepted value: expanded while the sampled surrogate keeps
// decreasing by slope*(1/kappa)*||g_bar||^2, backtracked otherwise.
// quad_eval evaluates the current sample's quadratic form at given phases.
// On a stalled search the phases stay put but the averages still advance.
template <class QuadEval>
inline SscaState ssca_update(SscaState state, const VectorXd& grad_sample, double g_sample,
                             const ArmijoParams& armijo, QuadEval&& quad_eval)
{
    state.r += 1;
    state.delta = std::pow(static_cast<double>(state.r), -0.501);
    if (state.g_bar.size() == 0)
        state.g_bar = VectorXd::Zero(grad_sample.size());

    state.h_bar = (1.0 - state.delta) * state.h_bar + state.delta * g_sample;
    state.g_bar = (1.0 - state.delta) * state.g_bar + state.delta * grad_sample;

    const double gn2 = state.g_bar.squaredNorm();
    if (gn2 == 0.0)
        return state;

    auto sufficient = [&](double kappa, const VectorXd& candidate) {
        return g_sample - quad_eval(candidate) >= armijo.slope / kappa * gn2;
    };

    double kappa = std::max(state.kappa, 1e-12);
    int tries = 1;
    VectorXd candidate = state.phi - state.g_bar / kappa;
    bool accepted = sufficient(kappa, candidate);
    if (accepted)
    {
        while (tries < armijo.max_tries)
        {
            const double wider = kappa / armijo.base;
            const VectorXd next = state.phi - state.g_bar / wider;
            ++tries;
            if (!sufficient(wider, next))
                break;
            kappa = wider;
            candidate = next;
        }
    }
    else
    {
        while (tries < armijo.max_tries && !accepted)
        {
            kappa *= armijo.base;
            candidate = state.phi - state.g_bar / kappa;
            accepted = sufficient(kappa, candidate);
            ++tries;
        }
    }

    if (accepted)
    {
        state.phi = std::move(candidate);
        state.kappa = kappa;
    }
    return state;
}

struct SscaResult
{
    PhaseVector theta;
    std::vector<double> h_trace;    // recursive objective estimate per iteration
    std::vector<double> elapsed_ms; // cumulative, aligned with h_trace
    int iterations = 0;
    bool converged = false;
};

// Full stochastic SCA loop from all-zero phases. Terminates when the mean
// relative change of h_bar over the trailing window drops below h_tol.
inline SscaResult ssca_solve(const CsiSampler& sampler, const SystemDims& dims,
                             const LinkBudget& budget, const SscaOptions& opts = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    SscaState state;
    state.phi = VectorXd::Zero(dims.ris_elements);
    state.g_bar = VectorXd::Zero(dims.ris_elements);

    AuxiliaryVars aux;
    aux.alpha = VectorXd::Zero(dims.users);
    aux.beta = VectorXcd::Zero(dims.users);
    aux.zeta = VectorXd::Zero(dims.users);
    ProxState prox;
    prox.w_curr = Beamformer::zero(dims.antennas, dims.users);
    prox.w_prev = prox.w_curr;

    SscaResult result;
    for (int r = 1; r <= opts.max_outer; ++r)
    {
        const ChannelSet realization = sampler.realization(r);
        const ParfunBResult inner = parfun_b(state.phi, aux, prox, realization, budget, opts);
        const double g_sample = objective_fA4(state.phi, inner.quad);
        const VectorXd grad_sample = grad_g_hat(state.phi, inner.quad);

        state = ssca_update(state, grad_sample, g_sample, opts.armijo,
                            [&inner](const VectorXd& phi) { return objective_fA4(phi, inner.quad); });
        if (opts.warm_start)
        {
            aux = inner.aux;
            prox = inner.prox;
        }

        result.h_trace.push_back(state.h_bar);
        result.elapsed_ms.push_back(elapsed());
        ++result.iterations;

        const int w = opts.window;
        if (static_cast<int>(result.h_trace.size()) > w)
        {
            double mean_change = 0.0;
            const auto& tr = result.h_trace;
            for (std::size_t i = tr.size() - w; i < tr.size(); ++i)
                mean_change += std::abs(tr[i] - tr[i - 1]);
            mean_change /= w;
            if (mean_change <= opts.h_tol * std::max(1e-12, std::abs(state.h_bar)))
            {
                result.converged = true;
                break;
            }
        }
    }

    result.theta = PhaseVector::from_phases(state.phi);
    return result;
}

// Achieved weighted sum-rate when the phases are fixed in advance and the
// beamformer is re-optimized on the channels actually realized.
inline double deployed_wsr(const PhaseVector& theta, const ChannelSet& true_channels,
                           const LinkBudget& budget, const WmmseOptions& wmmse_opts = {})
{
    const std::vector<VectorXcd> h = combined_channel(true_channels, theta);
    const WmmseResult r = wmmse_solve(h, budget, wmmse_opts);
    return wsr_from_channels(h, r.w.columns, budget.weights(), budget.noise_mw());
}

} // namespace risopt
