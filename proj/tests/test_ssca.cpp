#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "risopt/ssca.hpp"

using namespace risopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Scenario
{
    SystemDims dims;
    LinkGeometry geometry;
    RicianParams rician;
    CsiSampler sampler;
    LinkBudget budget;
};

Scenario small_scenario(int m, int n, int k, double rho, std::uint64_t seed,
                        double tx_dbm = 0.0)
{
    Scenario s{SystemDims(m, n, k), {}, {}, {}, LinkBudget()};
    s.geometry.ap = {0.0, 0.0};
    s.geometry.ris = {200.0, 0.0};
    for (int u = 0; u < k; ++u)
        s.geometry.users.push_back({197.0 + 3.0 * u, 28.0 + 2.0 * u});
    s.rician = rician_from_geometry(s.geometry, 10.0);

    Rng est_rng(derive_seed(seed, {0xE57u}));
    s.sampler = CsiSampler{draw_small_scale(s.dims, est_rng), CsiErrorModel{rho},     s.rician,
                           ris_link_path_loss(),              direct_link_path_loss(), s.geometry,
                           derive_seed(seed, {0x5A11u})};
    s.budget = LinkBudget(tx_dbm, noise_power_dbm(180000.0),
                          VectorXd::Constant(k, 1.0 / k));
    return s;
}

ProxState zero_prox(int m, int k)
{
    ProxState p;
    p.w_curr = Beamformer::zero(m, k);
    p.w_prev = p.w_curr;
    return p;
}

AuxiliaryVars zero_aux(int k)
{
    AuxiliaryVars a;
    a.alpha = VectorXd::Zero(k);
    a.beta = VectorXcd::Zero(k);
    a.zeta = VectorXd::Zero(k);
    return a;
}

} // namespace

TEST_CASE("parfun_b: deterministic for identical inputs", "[ssca]")
{
    Scenario s = small_scenario(2, 6, 2, 0.1, 42);
    const ChannelSet realization = s.sampler.realization(3);
    const VectorXd phi = VectorXd::Zero(6);

    const ParfunBResult a = parfun_b(phi, zero_aux(2), zero_prox(2, 2), realization, s.budget);
    const ParfunBResult b = parfun_b(phi, zero_aux(2), zero_prox(2, 2), realization, s.budget);
    REQUIRE(a.quad.quadratic == b.quad.quadratic);
    REQUIRE(a.quad.linear == b.quad.linear);
    REQUIRE(a.f_a1 == b.f_a1);
}

TEST_CASE("parfun_b: inner objective is non-decreasing and converges", "[ssca]")
{
    Scenario s = small_scenario(2, 6, 2, 0.2, 43);
    const ChannelSet realization = s.sampler.realization(1);
    const VectorXd phi = testutil::random_phases(6, *[] {
        static Rng rng(7);
        return &rng;
    }()).phases();

    // Trace the inner cycles manually through block_cycle_pass.
    const PhaseVector theta = PhaseVector::from_phases(phi);
    const auto h = combined_channel(realization, theta);
    AuxiliaryVars aux = zero_aux(2);
    ProxState prox = zero_prox(2, 2);
    prox.w_curr = mrt_beamformer(h, s.budget.tx_power_mw());
    prox.w_prev = prox.w_curr;

    BcdOptions inner;
    double f = -1e300, prev = -1e300;
    for (int cycle = 0; cycle < 100; ++cycle)
    {
        block_cycle_pass(h, aux, prox, f, s.budget, inner);
        REQUIRE(f >= prev - 1e-9);
        prev = f;
    }

    const ParfunBResult r = parfun_b(phi, zero_aux(2), zero_prox(2, 2), realization, s.budget);
    REQUIRE(r.converged);
    REQUIRE_THAT(r.f_a1, WithinRel(f, 1e-3));
}

TEST_CASE("parfun_b: zero uncertainty matches the perfect-CSI quadratic parameters",
          "[ssca][oracle]")
{
    Scenario s = small_scenario(2, 6, 2, 0.0, 44);
    const ChannelSet realization = s.sampler.realization(5); // identical to the estimate channel
    const ChannelSet assembled = assemble_channels(s.sampler.estimate, s.rician,
                                                   ris_link_path_loss(), direct_link_path_loss(),
                                                   s.geometry);
    REQUIRE(realization.ap_to_ris == assembled.ap_to_ris);

    const VectorXd phi = VectorXd::Zero(6);
    SscaOptions opts;
    opts.inner_tol = 1e-9;
    opts.inner_max_cycles = 2000;
    const ParfunBResult inner = parfun_b(phi, zero_aux(2), zero_prox(2, 2), realization,
                                         s.budget, opts);

    // Perfect-CSI path: iterate parfun_a on the assembled channel to the
    // same stagnation point and compare the phase-restricted objectives.
    AuxiliaryVars aux = zero_aux(2);
    ProxState prox = zero_prox(2, 2);
    const auto h = combined_channel(assembled, PhaseVector::from_phases(phi));
    prox.w_curr = mrt_beamformer(h, s.budget.tx_power_mw());
    prox.w_prev = prox.w_curr;
    ParfunResult ref = parfun_a(phi, aux, prox, assembled, s.budget);
    for (int it = 0; it < 2000; ++it)
        ref = parfun_a(phi, ref.aux, ref.prox, assembled, s.budget);

    Rng rng(45);
    for (int probe = 0; probe < 5; ++probe)
    {
        const VectorXd p = testutil::random_phases(6, rng).phases();
        const double a = objective_fA4(p, inner.quad);
        const double b = objective_fA4(p, ref.quad);
        REQUIRE_THAT(a, WithinAbs(b, 1e-8 * (1.0 + std::abs(b))));
    }
}

TEST_CASE("grad_g_hat shares the phase-gradient kernel bitwise", "[ssca]")
{
    Rng rng(46);
    QuadParams q;
    q.quadratic = MatrixXcd::Zero(4, 4);
    const MatrixXcd probe = testutil::random_cmatrix(4, 4, rng);
    q.quadratic = probe * probe.adjoint();
    q.linear = testutil::random_cvector(4, rng);
    const VectorXd phi = testutil::random_phases(4, rng).phases();
    const VectorXd a = grad_g_hat(phi, q);
    const VectorXd b = grad_fA4(phi, q);
    REQUIRE(a == b);

    QuadParams zero;
    zero.quadratic = MatrixXcd::Zero(3, 3);
    zero.linear = VectorXcd::Zero(3);
    REQUIRE(grad_g_hat(VectorXd::Ones(3), zero).isZero());
}

TEST_CASE("ssca_update: first-sample reset and averaging weights", "[ssca]")
{
    SECTION("r = 1 loads the first sample exactly")
    {
        SscaState state;
        state.phi = VectorXd::Zero(3);
        state.g_bar = VectorXd::Zero(3);
        VectorXd grad(3);
        grad << 0.1, -0.2, 0.3;
        const SscaState out = ssca_update(state, grad, 1.7, ArmijoParams{},
                                          [](const VectorXd&) { return -1e9; });
        REQUIRE(out.delta == 1.0);
        REQUIRE(out.h_bar == 1.7);
        REQUIRE(out.g_bar == grad);
    }
    SECTION("delta_4 evaluates the exponent formula")
    {
        SscaState state;
        state.phi = VectorXd::Zero(1);
        state.g_bar = VectorXd::Zero(1);
        state.r = 3;
        const SscaState out = ssca_update(state, VectorXd::Zero(1), 0.0, ArmijoParams{},
                                          [](const VectorXd&) { return 0.0; });
        const double expect = std::pow(4.0, -0.501);
        REQUIRE(out.delta == expect);
        REQUIRE_THAT(out.delta, WithinAbs(0.499307, 1e-6));
    }
    SECTION("zero gradients never move the phases")
    {
        SscaState state;
        state.phi = VectorXd::Ones(4);
        state.g_bar = VectorXd::Zero(4);
        for (int r = 0; r < 10; ++r)
        {
            state = ssca_update(state, VectorXd::Zero(4), 0.5, ArmijoParams{},
                                [](const VectorXd&) { return 0.0; });
            REQUIRE(state.phi == VectorXd::Ones(4));
        }
    }
}

TEST_CASE("ssca recursions match their closed non-recursive forms", "[ssca][property]")
{
    Rng rng(47);
    const int steps = 10;
    std::vector<double> g_samples;
    std::vector<VectorXd> grad_samples;
    for (int i = 0; i < steps; ++i)
    {
        g_samples.push_back(rng.normal());
        VectorXd g(3);
        for (int j = 0; j < 3; ++j)
            g[j] = rng.normal();
        grad_samples.push_back(g);
    }

    SscaState state;
    state.phi = VectorXd::Zero(3);
    state.g_bar = VectorXd::Zero(3);
    ArmijoParams armijo;
    armijo.max_tries = 1; // force stalls; only the averages advance
    for (int i = 0; i < steps; ++i)
        state = ssca_update(state, grad_samples[i], g_samples[i], armijo,
                            [](const VectorXd&) { return 1e300; });

    // Closed form: h_r = sum_i delta_i prod_{j>i} (1-delta_j) g_i.
    double h_closed = 0.0;
    VectorXd g_closed = VectorXd::Zero(3);
    for (int i = 1; i <= steps; ++i)
    {
        double coeff = std::pow(i, -0.501);
        for (int j = i + 1; j <= steps; ++j)
            coeff *= 1.0 - std::pow(j, -0.501);
        h_closed += coeff * g_samples[i - 1];
        g_closed += coeff * grad_samples[i - 1];
    }
    REQUIRE_THAT(state.h_bar, WithinAbs(h_closed, 1e-12));
    REQUIRE((state.g_bar - g_closed).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("per-sample surrogate is tangent at the expansion point", "[ssca][property]")
{
    Rng rng(48);
    for (int trial = 0; trial < 10; ++trial)
    {
        const VectorXd phi = testutil::random_phases(5, rng).phases();
        const double g = rng.normal();
        VectorXd grad(5);
        for (int i = 0; i < 5; ++i)
            grad[i] = rng.normal();
        const double kappa = 1.0 + rng.uniform() * 10.0;
        REQUIRE_THAT(ssca_surrogate(phi, phi, g, grad, kappa), WithinAbs(g, 1e-10));
        // And it majorizes the linear model away from the point.
        const VectorXd away = phi + VectorXd::Ones(5);
        REQUIRE(ssca_surrogate(away, phi, g, grad, kappa) >=
                g + grad.dot(VectorXd::Ones(5)));
    }
}

TEST_CASE("backtracking accepts a step bounded by the curvature", "[ssca][oracle]")
{
    // On an exact quadratic q(phi) = 0.5 phi^T H phi the accepted 1/kappa is
    // at least min(1, 2(1-slope)/(base*Lmax)); verified numerically.
    Rng rng(49);
    for (int trial = 0; trial < 10; ++trial)
    {
        const int n = 4;
        MatrixXcd root = testutil::random_cmatrix(n, n, rng);
        Eigen::MatrixXd hess = (root * root.adjoint()).real();
        hess = 0.5 * (hess + hess.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
        const double lmax = es.eigenvalues().maxCoeff();

        VectorXd phi0(n);
        for (int i = 0; i < n; ++i)
            phi0[i] = rng.normal();
        auto q = [&](const VectorXd& x) { return 0.5 * x.dot(hess * x); };
        const VectorXd grad = hess * phi0;

        SscaState state;
        state.phi = phi0;
        state.g_bar = VectorXd::Zero(n);
        ArmijoParams armijo; // slope 0.1, base 2
        const SscaState out = ssca_update(state, grad, q(phi0), armijo,
                                          [&](const VectorXd& x) { return q(x); });
        REQUIRE(out.phi != phi0); // a step was accepted
        // Recover the accepted kappa from the step length.
        const double kappa = grad.norm() / (out.phi - phi0).norm();
        const double bound = std::min(1.0, 2.0 * (1.0 - armijo.slope) / (armijo.base * lmax));
        REQUIRE(1.0 / kappa >= bound * (1.0 - 1e-9));
        // Sufficient decrease holds at the accepted step.
        REQUIRE(q(phi0) - q(out.phi) >= armijo.slope / kappa * grad.squaredNorm() - 1e-12);
    }
}

TEST_CASE("ssca_solve: deterministic phase trace for a fixed seed", "[ssca]")
{
    Scenario s = small_scenario(2, 4, 2, 0.3, 50);
    SscaOptions opts;
    opts.max_outer = 25;
    opts.h_tol = 0.0; // run all iterations
    const SscaResult a = ssca_solve(s.sampler, s.dims, s.budget, opts);
    const SscaResult b = ssca_solve(s.sampler, s.dims, s.budget, opts);
    REQUIRE(a.h_trace == b.h_trace);
    REQUIRE(a.theta.phases() == b.theta.phases());
    for (int i = 0; i < 4; ++i)
        REQUIRE_THAT(std::abs(a.theta.coefficients()[i]), WithinAbs(1.0, 1e-12));
}

TEST_CASE("ssca_solve: recursive objective stabilizes", "[ssca][montecarlo]")
{
    Scenario s = small_scenario(2, 8, 2, 0.1, 51);
    SscaOptions opts;
    opts.max_outer = 150;
    opts.h_tol = 0.0;
    const SscaResult r = ssca_solve(s.sampler, s.dims, s.budget, opts);
    REQUIRE(r.iterations == 150);

    const int tail = 50;
    double mean = 0.0;
    for (int i = r.iterations - tail; i < r.iterations; ++i)
        mean += r.h_trace[i];
    mean /= tail;
    double var = 0.0;
    for (int i = r.iterations - tail; i < r.iterations; ++i)
        var += (r.h_trace[i] - mean) * (r.h_trace[i] - mean);
    const double stddev = std::sqrt(var / tail);
    REQUIRE(stddev < 0.05 * std::abs(mean));
}

TEST_CASE("ssca_solve: zero uncertainty recovers the perfect-CSI design", "[ssca][oracle]")
{
    Scenario s = small_scenario(2, 8, 2, 0.0, 52);
    const ChannelSet truth = s.sampler.realization(1); // equals the estimate channel

    SscaOptions opts;
    opts.max_outer = 300;
    const SscaResult r = ssca_solve(s.sampler, s.dims, s.budget, opts);
    const double ssca_rate = deployed_wsr(r.theta, truth, s.budget);

    BcdOptions bopts;
    const BcdResult ref = bcd_solve(truth, s.budget, bopts);
    const double ref_rate = deployed_wsr(ref.theta, truth, s.budget);
    REQUIRE_THAT(ssca_rate, WithinRel(ref_rate, 0.02));
}

TEST_CASE("deployed_wsr: without RIS paths it equals the plain WMMSE rate", "[ssca]")
{
    Rng rng(53);
    ChannelSet ch = testutil::random_channels(3, 4, 2, rng);
    for (auto& v : ch.ris_to_user)
        v.setZero();
    ch = make_channel_set(ch.direct, ch.ap_to_ris, ch.ris_to_user);
    LinkBudget budget = testutil::weighted_budget(2, 3.0, 0.0, rng);

    const double with_theta = deployed_wsr(testutil::random_phases(4, rng), ch, budget);
    const auto h0 = combined_channel(ch, PhaseVector::ones(4));
    const WmmseResult ref = wmmse_solve(h0, budget);
    REQUIRE_THAT(with_theta, WithinRel(ref.wsr_trace.back(), 1e-9));
}
