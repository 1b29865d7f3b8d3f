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
// Low-complexity BCD solver for the joint beamforming/phase problem under
// perfect CSI. The weighted sum-rate objective is reformulated by
// fractional programming — a Lagrangian dual transform (auxiliary alpha
// moves the SINR out of the logarithm) followed by a quadratic transform
// (auxiliary beta linearizes the ratios) — and the four blocks
// (alpha, beta, W, phi) are updated cyclically:
//   * alpha, beta: closed-form maximizers;
//   * W: prox-linear step with Nesterov-style extrapolation, projected
//     onto the transmit power ball;
//   * phi: one gradient step on the phase-restricted quadratic form, the
//     step size chosen by an Armijo backtracking rule that measures the
//     decrease through a full inner-block refresh (parfun_a).
//
// Conventions: the quadratic parameters (QuadParams) are expressed in the
// reflection-coefficient frame, i.e. with theta_n = exp(j*phi_n) the
// phase-restricted objective to minimize is
//   f(phi) = theta^H * quadratic * theta - 2 Re{linear^H * theta},
// and the full objective satisfies f_A1 = -f(phi) + terms independent of
// phi. Finite-difference tests pin this convention.

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "risopt/model.hpp"

namespace risopt {

// Auxiliary variables of the fractional-programming reformulation.
struct AuxiliaryVars
{
    VectorXd alpha; // K, >= 0; equals the SINR at a fixed point
    VectorXcd beta; // K
    VectorXd zeta;  // K, Re{conj(beta_k) h_k^H w_k} / sqrt(weight_k)
};

// Parameters of the phase-restricted quadratic form (coefficient frame).
struct QuadParams
{
    MatrixXcd quadratic; // N x N Hermitian PSD
    VectorXcd linear;    // N
};

// Prox-linear bookkeeping for the W block.
struct ProxState
{
    Beamformer w_prev;           // beamformer before the last W update
    Beamformer w_curr;           // current beamformer
    double lipschitz = 1.0;      // L, gradient Lipschitz constant
    double lipschitz_prev = 1.0; // L of the previous iteration
    double d = 1.0;              // extrapolation counter sequence, >= 1
    double epsilon = 0.0;        // extrapolation weight, >= 0
};

// Backtracking parameters for the phase step.
struct ArmijoParams
{
    double slope = 0.1; // sufficient-decrease fraction, in (0, 0.5)
    double base = 2.0;  // kappa growth factor, > 1
    int max_tries = 40;
};

struct BcdOptions
{
    double obj_tol = 1e-6; // relative objective change per outer cycle
    int max_outer = 1000;
    ArmijoParams armijo{};
    int armijo_inner_passes = 1; // parfun_a passes per Armijo candidate
    bool update_w = true;        // false freezes the beamformer block
    bool paper_lambda = false;   // literal closed-form multiplier (comparison only)
    bool validate = true;        // assert feasibility/ascent inside the loop
};

// alpha_k = (zeta^2 + zeta*sqrt(zeta^2+4))/2, the closed-form maximizer of
// the dual-transform term; negative ratios clamp to the boundary alpha = 0.
inline VectorXd update_alpha(const VectorXd& zeta)
{
    VectorXd alpha(zeta.size());
    for (Eigen::Index i = 0; i < zeta.size(); ++i)
    {
        const double z = zeta[i];
        alpha[i] = std::max(0.0, 0.5 * (z * z + z * std::sqrt(z * z + 4.0)));
    }
    return alpha;
}

namespace detail {

// h_k^H w_i for all pairs; column k collects the responses at user k.
inline MatrixXcd response_matrix(const std::vector<VectorXcd>& h, const MatrixXcd& w)
{
    const int k = static_cast<int>(h.size());
    MatrixXcd t(w.cols(), k);
    for (int u = 0; u < k; ++u)
        t.col(u) = (w.adjoint() * h[u]).conjugate(); // entry i = h_u^H w_i
    return t;
}

} // namespace detail

// beta_k = sqrt(weight_k (1+alpha_k)) * h_k^H w_k / (sum_i |h_k^H w_i|^2 + noise).
inline VectorXcd update_beta(const VectorXd& alpha, const MatrixXcd& w,
                             const std::vector<VectorXcd>& h, const VectorXd& weights,
                             double noise_mw)
{
    const int k = static_cast<int>(h.size());
    const MatrixXcd t = detail::response_matrix(h, w);
    VectorXcd beta(k);
    for (int u = 0; u < k; ++u)
        beta[u] = std::sqrt(weights[u] * (1.0 + alpha[u])) * t(u, u) /
                  (t.col(u).squaredNorm() + noise_mw);
    return beta;
}

inline VectorXd compute_zeta(const VectorXcd& beta, const MatrixXcd& w,
                             const std::vector<VectorXcd>& h, const VectorXd& weights)
{
    const int k = static_cast<int>(h.size());
    VectorXd zeta(k);
    for (int u = 0; u < k; ++u)
        zeta[u] = std::real(std::conj(beta[u]) * cplx(h[u].dot(w.col(u)))) /
                  std::sqrt(weights[u]);
    return zeta;
}

// The reformulated objective: dual-transform log terms, bilinear terms and
// quadratic penalty terms. Coincides with the weighted sum-rate when alpha
// and beta sit at their closed-form optima.
inline double objective_fA1_from_channels(const VectorXd& alpha, const VectorXcd& beta,
                                          const MatrixXcd& w, const std::vector<VectorXcd>& h,
                                          const VectorXd& weights, double noise_mw)
{
    const int k = static_cast<int>(h.size());
    const MatrixXcd t = detail::response_matrix(h, w);
    double value = 0.0;
    for (int u = 0; u < k; ++u)
    {
        value += weights[u] * (std::log1p(alpha[u]) - alpha[u]);
        value += 2.0 * std::sqrt(weights[u] * (1.0 + alpha[u])) *
                 std::real(std::conj(beta[u]) * t(u, u));
        value -= std::norm(beta[u]) * (t.col(u).squaredNorm() + noise_mw);
    }
    return value;
}

inline double objective_fA1(const VectorXd& alpha, const VectorXcd& beta, const Beamformer& w,
                            const PhaseVector& theta, const ChannelSet& ch,
                            const LinkBudget& budget)
{
    return objective_fA1_from_channels(alpha, beta, w.columns, combined_channel(ch, theta),
                                       budget.weights(), budget.noise_mw());
}

// L = 2 * ||sum_i |beta_i|^2 h_i h_i^H||_F, floored so the prox step stays
// defined when every beta vanishes.
inline double lipschitz_L(const VectorXcd& beta, const std::vector<VectorXcd>& h)
{
    const int m = static_cast<int>(h[0].size());
    MatrixXcd acc = MatrixXcd::Zero(m, m);
    for (std::size_t u = 0; u < h.size(); ++u)
        acc.noalias() += std::norm(beta[u]) * (h[u] * h[u].adjoint());
    return std::max(2.0 * acc.norm(), 1e-12);
}

// Advances the extrapolation sequence: d <- (1+sqrt(1+4d^2))/2 and
// epsilon = min((d_old - 1)/d_new, 0.9999*sqrt(L_prev/L)). The first call
// (d = 1) yields epsilon = 0.
inline ProxState extrapolation_update(ProxState state)
{
    const double d_old = state.d;
    const double d_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * d_old * d_old));
    state.epsilon = std::min((d_old - 1.0) / d_new,
                             0.9999 * std::sqrt(state.lipschitz_prev / state.lipschitz));
    state.d = d_new;
    return state;
}

// One prox-linear step on the W block: gradient step of length 1/L from the
// extrapolated point, then Euclidean projection onto the power ball.
// paper_lambda = true instead applies the literal closed-form multiplier
// formula (kept for comparison; it does not reproduce the projection).
inline Beamformer prox_linear_w(const ProxState& state, const VectorXd& alpha,
                                const VectorXcd& beta, const std::vector<VectorXcd>& h,
                                const VectorXd& weights, double tx_power_mw,
                                bool paper_lambda = false)
{
    const int k = static_cast<int>(h.size());
    const int m = static_cast<int>(h[0].size());
    const double big_l = state.lipschitz;

    MatrixXcd extrapolated =
        state.w_curr.columns + state.epsilon * (state.w_curr.columns - state.w_prev.columns);

    MatrixXcd quad = MatrixXcd::Zero(m, m);
    for (int u = 0; u < k; ++u)
        quad.noalias() += std::norm(beta[u]) * (h[u] * h[u].adjoint());

    MatrixXcd grad = 2.0 * quad * extrapolated;
    for (int u = 0; u < k; ++u)
        grad.col(u) -= 2.0 * std::sqrt(weights[u] * (1.0 + alpha[u])) * beta[u] * h[u];

    if (paper_lambda)
    {
        const MatrixXcd scaled = big_l * extrapolated - grad;
        const double lambda = 0.5 * big_l - 0.5 / tx_power_mw * scaled.squaredNorm();
        return Beamformer(scaled / (big_l - 2.0 * lambda));
    }

    MatrixXcd candidate = extrapolated - grad / big_l;
    const double power = candidate.squaredNorm();
    if (power > tx_power_mw)
        candidate *= std::sqrt(tx_power_mw / power);
    return Beamformer(std::move(candidate));
}

// Quadratic parameters of the phase-restricted objective, in the
// coefficient frame (see the header comment):
//   quadratic = sum_k |beta_k|^2 sum_i atil(i,k) atil(i,k)^H,
//   linear    = sum_k ( sqrt(w_k(1+alpha_k)) beta_k atil(k,k)
//                       - |beta_k|^2 sum_i b(i,k) atil(i,k) ),
// with atil(i,k) = conj(effective_k * w_i) and b(i,k) = direct_k^H w_i.
inline QuadParams build_quad_params(const VectorXd& alpha, const VectorXcd& beta,
                                    const Beamformer& w, const ChannelSet& ch,
                                    const VectorXd& weights)
{
    const int k = ch.users();
    const int n = ch.ris_elements();
    QuadParams q;
    q.quadratic = MatrixXcd::Zero(n, n);
    q.linear = VectorXcd::Zero(n);
    if (n == 0)
        return q;
    for (int u = 0; u < k; ++u)
    {
        const MatrixXcd atil = (ch.effective[u] * w.columns).conjugate(); // N x K
        const VectorXcd b = (w.columns.adjoint() * ch.direct[u]).conjugate();
        q.quadratic.selfadjointView<Eigen::Lower>().rankUpdate(atil, std::norm(beta[u]));
        q.linear += std::sqrt(weights[u] * (1.0 + alpha[u])) * beta[u] * atil.col(u) -
                    std::norm(beta[u]) * (atil * b);
    }
    q.quadratic = q.quadratic.selfadjointView<Eigen::Lower>();
    return q;
}

inline VectorXcd phases_to_coefficients(const VectorXd& phi)
{
    VectorXcd u(phi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        u[i] = std::polar(1.0, phi[i]);
    return u;
}

// Value of the phase-restricted quadratic form (the function minimized by
// the phi block).
inline double objective_fA4(const VectorXd& phi, const QuadParams& q)
{
    const VectorXcd u = phases_to_coefficients(phi);
    return std::real(cplx(u.dot(q.quadratic * u))) - 2.0 * std::real(cplx(q.linear.dot(u)));
}

// Gradient of objective_fA4 with respect to the real phases:
// 2 Re{-j conj(theta) o (quadratic*theta - linear)}.
inline VectorXd grad_fA4(const VectorXd& phi, const QuadParams& q)
{
    const VectorXcd u = phases_to_coefficients(phi);
    const VectorXcd residual = q.quadratic * u - q.linear;
    return (2.0 * (u.conjugate().array() * residual.array()).imag()).matrix();
}

// Result of one inner-block refresh at a fixed phase vector.
struct ParfunResult
{
    QuadParams quad;
    AuxiliaryVars aux;
    ProxState prox; // prox.w_curr is the refreshed beamformer
    double f_a1 = 0.0;
};

// One inner-cycle pass (beta -> W -> alpha -> beta) at fixed combined
// channels: refresh beta, take a monitored prox-linear step on W (redone
// without extrapolation if the objective dropped), refresh alpha and beta
// again. Every sub-step is an ascent step of f_A1 at this phase vector.
inline void block_cycle_pass(const std::vector<VectorXcd>& h, AuxiliaryVars& aux,
                             ProxState& prox, double& f_a1, const LinkBudget& budget,
                             const BcdOptions& opts)
{
    const VectorXd& weights = budget.weights();
    const double noise = budget.noise_mw();
    const double p_total = budget.tx_power_mw();

    aux.beta = update_beta(aux.alpha, prox.w_curr.columns, h, weights, noise);

    if (opts.update_w)
    {
        const double before =
            objective_fA1_from_channels(aux.alpha, aux.beta, prox.w_curr.columns, h, weights, noise);
        prox.lipschitz_prev = prox.lipschitz;
        prox.lipschitz = lipschitz_L(aux.beta, h);
        prox = extrapolation_update(prox);

        Beamformer w_new =
            prox_linear_w(prox, aux.alpha, aux.beta, h, weights, p_total, opts.paper_lambda);
        double after =
            objective_fA1_from_channels(aux.alpha, aux.beta, w_new.columns, h, weights, noise);
        if (after < before && prox.epsilon > 0.0)
        {
            // Extrapolation overshot; a plain step from w_curr cannot descend.
            ProxState flat = prox;
            flat.epsilon = 0.0;
            w_new = prox_linear_w(flat, aux.alpha, aux.beta, h, weights, p_total,
                                  opts.paper_lambda);
            after = objective_fA1_from_channels(aux.alpha, aux.beta, w_new.columns, h, weights,
                                                noise);
        }
        if (opts.validate)
        {
            if (total_power(w_new) > p_total * (1.0 + 1e-9))
                throw std::logic_error("block_cycle_pass: power constraint violated");
            if (!opts.paper_lambda && after < before - 1e-9 * (1.0 + std::abs(before)))
                throw std::logic_error("block_cycle_pass: beamformer step decreased the objective");
        }
        prox.w_prev = prox.w_curr;
        prox.w_curr = std::move(w_new);
    }

    aux.zeta = compute_zeta(aux.beta, prox.w_curr.columns, h, weights);
    aux.alpha = update_alpha(aux.zeta);
    aux.beta = update_beta(aux.alpha, prox.w_curr.columns, h, weights, noise);
    f_a1 = objective_fA1_from_channels(aux.alpha, aux.beta, prox.w_curr.columns, h, weights, noise);
}

// One pass of the inner cycle at fixed phi followed by a rebuild of the
// quadratic phase parameters.
inline ParfunResult parfun_a(const VectorXd& phi, const AuxiliaryVars& aux0,
                             const ProxState& prox0, const ChannelSet& ch,
                             const LinkBudget& budget, const BcdOptions& opts = {})
{
    const PhaseVector theta = PhaseVector::from_phases(phi);
    const std::vector<VectorXcd> h = combined_channel(ch, theta);

    ParfunResult r;
    r.aux = aux0;
    r.prox = prox0;
    block_cycle_pass(h, r.aux, r.prox, r.f_a1, budget, opts);
    r.quad = build_quad_params(r.aux.alpha, r.aux.beta, r.prox.w_curr, ch, budget.weights());
    return r;
}

// Outcome of the Armijo search for the phase step size.
struct ArmijoOutcome
{
    double kappa = 1.0;
    VectorXd phi;
    ParfunResult state;
    bool stalled = false;
};

// Armijo search for the inverse step size kappa over the geometric grid
// {seed * base^j, j integer}: the candidate phases phi - grad/kappa must
// decrease the quadratic form, measured after the inner blocks respond
// (through parfun_a), by at least slope*(1/kappa)*||grad||^2. Both sides of
// the comparison are evaluated through one parfun_a pass from the same
// base blocks, so the measurement is unbiased by the inner refresh and
// shrinks to zero as the step does. The search expands the step (divides
// kappa by base) while the condition keeps holding — the surrogate
// curvature of the phase-restricted form depends on the channel scale and
// can sit far below one — and backtracks otherwise. Acceptance
// additionally requires the full objective not to drop, which keeps the
// recorded f_A1 trace monotone.
inline ArmijoOutcome armijo_kappa(const VectorXd& phi, const ParfunResult& cur,
                                  const ChannelSet& ch, const LinkBudget& budget,
                                  const BcdOptions& opts, double kappa_seed = 1.0)
{
    ArmijoOutcome out;
    out.phi = phi;

    ParfunResult baseline = parfun_a(phi, cur.aux, cur.prox, ch, budget, opts);
    for (int pass = 1; pass < opts.armijo_inner_passes; ++pass)
        baseline = parfun_a(phi, baseline.aux, baseline.prox, ch, budget, opts);
    const VectorXd grad = grad_fA4(phi, baseline.quad);
    const double grad_norm_sq = grad.squaredNorm();
    if (grad_norm_sq == 0.0)
    {
        // Vacuous step: keep phi, still let the inner blocks advance.
        out.state = std::move(baseline);
        return out;
    }

    const double f_cur = objective_fA4(phi, baseline.quad);
    struct Trial
    {
        ParfunResult state;
        VectorXd phi;
        double objective = 0.0;
        bool accepted = false;
    };
    auto evaluate = [&](double kappa) {
        Trial t;
        t.phi = phi - grad / kappa;
        t.state = parfun_a(t.phi, cur.aux, cur.prox, ch, budget, opts);
        for (int pass = 1; pass < opts.armijo_inner_passes; ++pass)
            t.state = parfun_a(t.phi, t.state.aux, t.state.prox, ch, budget, opts);
        t.objective = objective_fA4(t.phi, t.state.quad);
        t.accepted = f_cur - t.objective >= opts.armijo.slope / kappa * grad_norm_sq &&
                     t.state.f_a1 >= cur.f_a1 - 1e-12 * (1.0 + std::abs(cur.f_a1));
        return t;
    };

    double kappa = std::max(kappa_seed, 1e-12);
    int tries = 1;
    Trial trial = evaluate(kappa);
    if (trial.accepted)
    {
        // Expand the step while the sufficient decrease keeps holding.
        while (tries < opts.armijo.max_tries)
        {
            const double wider = kappa / opts.armijo.base;
            Trial next = evaluate(wider);
            ++tries;
            if (!next.accepted)
                break;
            kappa = wider;
            trial = std::move(next);
        }
    }
    else
    {
        while (tries < opts.armijo.max_tries && !trial.accepted)
        {
            kappa *= opts.armijo.base;
            trial = evaluate(kappa);
            ++tries;
        }
    }

    if (!trial.accepted)
    {
        out.stalled = true;
        out.state = cur;
        return out;
    }
    out.kappa = kappa;
    out.phi = std::move(trial.phi);
    out.state = std::move(trial.state);
    return out;
}

struct BcdResult
{
    Beamformer w;
    PhaseVector theta;
    std::vector<double> objective_trace; // f_A1 (nats scale), one entry per outer cycle
    std::vector<double> wsr_trace;       // nats, aligned with objective_trace
    std::vector<double> elapsed_ms;      // cumulative, aligned with the traces
    int iterations = 0;
    bool converged = false;
    bool stalled = false;
};

// Full BCD driver. Starts from all-ones reflection coefficients and an MRT
// beamformer unless a warm start is supplied, then cycles
// alpha -> beta -> phi -> beta -> W until f_A1 settles.
inline BcdResult bcd_solve(const ChannelSet& ch, const LinkBudget& budget,
                           const BcdOptions& opts = {},
                           const std::optional<PhaseVector>& theta0 = std::nullopt,
                           const std::optional<Beamformer>& w0 = std::nullopt)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    const int n = ch.ris_elements();
    const int k = ch.users();
    PhaseVector theta = theta0 ? *theta0 : PhaseVector::ones(n);
    VectorXd phi = theta.phases();
    std::vector<VectorXcd> h = combined_channel(ch, theta);

    Beamformer w;
    if (w0 && total_power(*w0) > 0.0)
        w = *w0;
    else
        w = mrt_beamformer(h, budget.tx_power_mw());

    AuxiliaryVars aux;
    aux.alpha = VectorXd::Zero(k);
    aux.beta = update_beta(aux.alpha, w.columns, h, budget.weights(), budget.noise_mw());
    aux.zeta = compute_zeta(aux.beta, w.columns, h, budget.weights());

    ProxState prox;
    prox.w_curr = w;
    prox.w_prev = w;

    BcdResult result;
    ParfunResult cur = parfun_a(phi, aux, prox, ch, budget, opts);
    result.objective_trace.push_back(cur.f_a1);
    result.wsr_trace.push_back(wsr_from_channels(h, cur.prox.w_curr.columns, budget.weights(),
                                                 budget.noise_mw()));
    result.elapsed_ms.push_back(elapsed());

    double prev = cur.f_a1;
    double kappa_seed = 1.0;
    for (int outer = 0; outer < opts.max_outer; ++outer)
    {
        ArmijoOutcome step = armijo_kappa(phi, cur, ch, budget, opts, kappa_seed);
        if (step.stalled)
        {
            result.stalled = true;
            break;
        }
        kappa_seed = step.kappa;
        phi = step.phi;
        cur = std::move(step.state);
        ++result.iterations;

        theta = PhaseVector::from_phases(phi);
        if (opts.validate &&
            ((theta.coefficients().array().abs() - 1.0).abs() > 1e-12).any())
            throw std::logic_error("bcd_solve: unit-modulus invariant violated");

        h = combined_channel(ch, theta);
        result.objective_trace.push_back(cur.f_a1);
        result.wsr_trace.push_back(wsr_from_channels(h, cur.prox.w_curr.columns, budget.weights(),
                                                     budget.noise_mw()));
        result.elapsed_ms.push_back(elapsed());

        if (std::abs(cur.f_a1 - prev) <= opts.obj_tol * std::max(1.0, std::abs(cur.f_a1)))
        {
            result.converged = true;
            break;
        }
        prev = cur.f_a1;
    }

    result.w = cur.prox.w_curr;
    result.theta = theta;
    return result;
}

} // namespace risopt
