#include <gtest/gtest.h>

#include <cmath>

#include "mgt/picard.hpp"
#include "test_support.hpp"

using namespace mgt;

namespace {

CoefficientSet small_coefficients() {
    CoefficientSet c;
    c.alpha = 1.0;
    c.D = 1.0;
    c.gamma = Coefficient(CoefficientSpec::polynomial({1.0, 0.2}));
    c.ghat = Coefficient(CoefficientSpec::polynomial({1.0, 0.1}));
    c.Gamma = Coefficient(CoefficientSpec::constant(0.5));
    return c;
}

InitialData small_data(const Grid& g) {
    return make_initial_data(FieldSpec::cosine({{1, 0.05}}), FieldSpec::cosine({{2, 0.05}}),
                             FieldSpec::cosine({{1, 0.02}}), FieldSpec::cosine({{1, 0.05}}, 0.2), g, true);
}

double final_gap(const State& a, const State& b) {
    const Grid& g = a.grid();
    auto gap = [&](const GridFunction& x, const GridFunction& y) { return (x - inject(y, g)).max_abs(); };
    return std::max({gap(a.u, b.u), gap(a.v, b.v), gap(a.w, b.w), gap(a.theta, b.theta)});
}

}  // namespace

TEST(SemigroupConstants, ConstantProbeGivesSqrtL) {
    Grid g(2.0, 65);
    HeatSemigroup sg(g);
    EXPECT_NEAR(semigroup_c1_probe(sg, 0.1, GridFunction::constant(g, 1.0)), std::sqrt(2.0), 1e-12);
}

TEST(SemigroupConstants, SingleModeMatchesScalarOptimum) {
    Grid g(1.0, 64);
    HeatSemigroup sg(g);
    const double eps = 0.01;
    for (std::size_t k : {1, 3, 10, 40}) {
        const GridFunction phi = cosine_mode(g, k);
        const double lam = laplacian_eigenvalue(g, k);
        const double t = std::min(1.0, 1.0 / (2.0 * eps * lam));
        const double expect = std::sqrt(t) * std::exp(-eps * lam * t) * std::sqrt(1.0 + lam) * l2_norm(phi) / phi.max_abs();
        EXPECT_NEAR(semigroup_c1_probe(sg, eps, phi), expect, 1e-6 * expect) << "k=" << k;
    }
}

TEST(SemigroupConstants, PositiveAndC3DecreasesWithEps) {
    Grid g(1.0, 65);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-3, 1e-2, 1e-1}) {
        auto c = estimate_semigroup_constants(g, eps, 1.0);
        EXPECT_GT(c.c1, 0.0);
        EXPECT_GT(c.c2, 0.0);
        EXPECT_GT(c.c3, 0.0);
        EXPECT_LT(c.c3, prev);
        prev = c.c3;
    }
}

TEST(SemigroupConstants, Deterministic) {
    Grid g(1.0, 33);
    auto a = estimate_semigroup_constants(g, 0.1, 1.0, 7);
    auto b = estimate_semigroup_constants(g, 0.1, 1.0, 7);
    EXPECT_EQ(a.c1, b.c1);
    EXPECT_EQ(a.c2, b.c2);
    EXPECT_EQ(a.c3, b.c3);
    EXPECT_THROW(estimate_semigroup_constants(g, 0.0, 1.0), ValidationError);
}

TEST(ComputeT0, UnitConstants) {
    const SemigroupConstants sg{1.0, 1.0, 1.0};
    const auto c = CoefficientSet::constant(0.0, 1.0, 1.0, 1.0, 1.0);
    const double T0 = compute_T0(1.0, sg, c, 0.0);
    // roots: 8 T^{1/4} = 1, 2 T^{1/2} = 1, T = 1, 2 T^{1/2} = 1
    EXPECT_NEAR(T0, std::pow(8.0, -4.0), 1e-12 * T0 + 1e-15);
    EXPECT_LE(T0, 0.25);
    EXPECT_THROW(compute_T0(0.5, sg, c, 0.0), ValidationError);
}

TEST(ComputeT0, DecreasesInR) {
    const SemigroupConstants sg{1.0, 1.0, 1.0};
    const auto c = small_coefficients();
    double prev = 1.0;
    for (double R : {1.0, 2.0, 4.0, 8.0, 64.0}) {
        const double T0 = compute_T0(R, sg, c);
        EXPECT_GT(T0, 0.0);
        EXPECT_LT(T0, prev);
        prev = T0;
    }
}

TEST(ComputeT0, GammaScalingWhenL9Binds) {
    const SemigroupConstants sg{1e-3, 1.0, 1e-6};
    const double a = compute_T0(2.0, sg, CoefficientSet::constant(0.0, 1.0, 1.0, 1.0, 1.0), 0.0);
    const double b = compute_T0(2.0, sg, CoefficientSet::constant(0.0, 1.0, 1.0, 1.0, 2.0), 0.0);
    EXPECT_NEAR(a, 1.0 / 64.0, 1e-12);
    EXPECT_NEAR(b / a, 0.25, 1e-10);
}

TEST(ComputeT0, ConstantContinuationBelowZero) {
    const SemigroupConstants sg{1.0, 1.0, 1.0};
    auto c = CoefficientSet::constant(0.0, 1.0, 1.0, 1.0, 0.0);
    c.gamma = Coefficient(CoefficientSpec::polynomial({1.0, -0.5}));  // |gamma| largest at 0 on [0, R]
    const double T0 = compute_T0(1.0, sg, c, 0.0);
    EXPECT_NEAR(T0, std::pow(8.0, -4.0), 1e-12);
}

TEST(Duhamel, ZeroDataIsFixed) {
    Grid g(1.0, 33);
    auto d = make_initial_data(FieldSpec::zero(), FieldSpec::zero(), FieldSpec::zero(), FieldSpec::zero(), g, true);
    auto out = duhamel_map(constant_path(d, 1e-3, 8), d, small_coefficients(), 0.1);
    EXPECT_EQ(x_norm(out), 0.0);
}

TEST(Duhamel, PhiTwoWithZeroW) {
    Grid g(1.0, 33);
    auto d = make_initial_data(FieldSpec::zero(), FieldSpec::cosine({{1, 1.0}, {3, 0.5}}), FieldSpec::zero(),
                               FieldSpec::constant(1.0), g, true);
    auto path = constant_path(d, 0.01, 8);
    for (auto& s : path.at) s.w.values.setZero();
    const double eps = 0.3;
    auto out = duhamel_map(path, d, small_coefficients(), eps);
    for (const auto& s : out.at) {
        const auto expect = heat_semigroup_apply(eps, s.t, d.u0t);
        EXPECT_LT((s.v - expect).max_abs(), 1e-13);
    }
}

TEST(Duhamel, InitialNodeIsData) {
    Grid g(1.0, 33);
    auto d = small_data(g);
    auto out = duhamel_map(constant_path(d, 1e-3, 8), d, small_coefficients(), 0.1);
    EXPECT_EQ((out.at[0].u - d.u0).max_abs(), 0.0);
    EXPECT_EQ((out.at[0].theta - d.theta0).max_abs(), 0.0);
}

TEST(Duhamel, GridMismatchAndShortPath) {
    Grid g(1.0, 33), h(1.0, 17);
    auto d = small_data(g);
    EXPECT_THROW(duhamel_map(constant_path(small_data(h), 1e-3, 4), d, small_coefficients(), 0.1), GridMismatch);
    EXPECT_THROW(duhamel_map(constant_path(d, 1e-3, 0), d, small_coefficients(), 0.1), InsufficientSamples);
}

TEST(Duhamel, HeatMapPositive) {
    Grid g(1.0, 65);
    std::mt19937_64 rng(3);
    auto d = make_initial_data(FieldSpec::zero(), FieldSpec::zero(), FieldSpec::zero(), FieldSpec::constant(0.0), g, true);
    d.theta0 = test::random_field(g, rng, 0.0, 1.0);
    auto path = constant_path(d, 0.05, 16);
    for (auto& s : path.at) {
        s.v = test::random_field(g, rng, -1.0, 1.0);
        s.theta = test::random_field(g, rng, 0.0, 2.0);
    }
    auto out = duhamel_map(path, d, small_coefficients(), 0.1);
    for (const auto& s : out.at) EXPECT_GE(s.theta.values.minCoeff(), -1e-10);
}

TEST(Duhamel, ReproducesConvergedTimeStepping) {
    Grid g(1.0, 33);
    auto d = small_data(g);
    const auto c = small_coefficients();
    const double eps = 0.1, T = 0.02;
    auto residual = [&](std::size_t n_time) {
        EvolutionParams p;
        p.eps = eps;
        p.t_end = T;
        p.dt = T / static_cast<double>(n_time * 16);
        MonitorConfig mon;
        mon.cadence = 16;
        auto tr = evolve(d, c, p, {}, mon);
        PicardPath path;
        path.at = tr.snapshots;
        return x_distance(duhamel_map(path, d, c, eps), path);
    };
    const double r8 = residual(8), r16 = residual(16);
    EXPECT_LT(r16, r8);
    EXPECT_GT(r8 / r16, 3.0);
}

TEST(Picard, ZeroDataConvergesImmediately) {
    Grid g(1.0, 17);
    auto d = make_initial_data(FieldSpec::zero(), FieldSpec::zero(), FieldSpec::zero(), FieldSpec::zero(), g, true);
    PicardConfig cfg;
    cfg.eps = 0.1;
    cfg.n_time = 8;
    auto r = picard_solve(d, small_coefficients(), cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations(), 1u);
    EXPECT_EQ(x_norm(r.path), 0.0);
    EXPECT_DOUBLE_EQ(r.R, 1.0);
}

TEST(Picard, ContractsStaysInBallAndMatchesEvolve) {
    const double eps = 0.1;
    const auto c = small_coefficients();
    auto solve = [&](std::size_t n, std::size_t n_time) {
        Grid g(1.0, n);
        auto d = small_data(g);
        PicardConfig cfg;
        cfg.eps = eps;
        cfg.n_time = n_time;
        return std::pair{picard_solve(d, c, cfg), d};
    };
    auto [coarse, dc] = solve(33, 16);
    EXPECT_TRUE(coarse.converged);
    EXPECT_NEAR(coarse.T, 0.5 * coarse.T0, 1e-15);
    for (std::size_t k = 1; k < coarse.history.size(); ++k) EXPECT_LT(coarse.history[k].ratio, 1.0) << "k=" << k;
    EXPECT_LE(coarse.ball_excess(), 1e-9);

    auto [fine, df] = solve(65, 32);
    ASSERT_TRUE(fine.converged);
    auto march = [&](const InitialData& d, double T, std::size_t steps) {
        EvolutionParams p;
        p.eps = eps;
        p.t_end = T;
        p.dt = T / static_cast<double>(steps);
        return evolve(d, c, p).snapshots.back();
    };
    const State ec = march(dc, coarse.T, 16);
    const State ef = march(df, coarse.T, 32);
    const double gap = final_gap(coarse.path.at.back(), ec);
    const double discretization = final_gap(coarse.path.at.back(), fine.path.at.back()) + final_gap(ec, ef);
    EXPECT_LE(gap, 5.0 * discretization);
}

TEST(Picard, ConfigValidation) {
    Grid g(1.0, 17);
    auto d = small_data(g);
    PicardConfig cfg;
    cfg.eps = 0.0;
    EXPECT_THROW(picard_solve(d, small_coefficients(), cfg), ValidationError);
    cfg.eps = 0.1;
    cfg.T0 = 1e-3;
    cfg.T = 2e-3;
    EXPECT_THROW(picard_solve(d, small_coefficients(), cfg), ValidationError);
}

TEST(Picard, LongHorizonFailsToContract) {
    Grid g(1.0, 33);
    auto d = make_initial_data(FieldSpec::cosine({{4, 3.0}}), FieldSpec::cosine({{4, 3.0}}), FieldSpec::zero(),
                               FieldSpec::constant(1.0), g, true);
    PicardConfig cfg;
    cfg.eps = 1e-3;
    cfg.T0 = 50.0;
    cfg.T = 50.0;
    cfg.n_time = 16;
    cfg.max_iter = 60;
    auto c = small_coefficients();
    c.alpha = 0.0;
    EXPECT_THROW(picard_solve(d, c, cfg), NoContraction);
}

TEST(Picard, MaxIterExceeded) {
    Grid g(1.0, 17);
    auto d = small_data(g);
    PicardConfig cfg;
    cfg.eps = 0.1;
    cfg.n_time = 8;
    cfg.max_iter = 1;
    EXPECT_THROW(picard_solve(d, small_coefficients(), cfg), MaxIterExceeded);
}
