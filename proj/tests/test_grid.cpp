#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

#include "mgt/grid.hpp"
#include "mgt/semigroup.hpp"
#include "test_support.hpp"

using namespace mgt;
using mgt::test::pi;

TEST(Grid, RejectsFewNodes) {
    EXPECT_THROW(Grid(1.0, 7), ValidationError);
    EXPECT_THROW(Grid(0.0, 16), ValidationError);
    Grid g(2.0, 9);
    EXPECT_DOUBLE_EQ(g.h(), 0.25);
    EXPECT_EQ(g.x(8), 2.0);
    EXPECT_DOUBLE_EQ(g.h() * static_cast<double>(g.n - 1), g.L);
}

TEST(Grid, MismatchedGridsThrow) {
    GridFunction a(Grid(1.0, 16)), b(Grid(1.0, 17));
    EXPECT_THROW(flux_divergence(a, b), GridMismatch);
    EXPECT_THROW(a + b, GridMismatch);
}

TEST(FluxDivergence, ConstantFieldHasZeroDivergence) {
    Grid g(1.0, 33);
    auto out = flux_divergence(GridFunction::constant(g, 1.0), GridFunction::constant(g, 4.2));
    EXPECT_LT(out.max_abs(), 1e-12);
}

TEST(FluxDivergence, CosineModeSecondOrder) {
    std::vector<double> hs, errs;
    for (std::size_t n : {33, 65, 129, 257}) {
        Grid g(1.0, n);
        auto p = test::cosine(g, 1);
        auto out = flux_divergence(GridFunction::constant(g, 1.0), p);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(out[i] + pi * pi * p[i]));
        hs.push_back(g.h());
        errs.push_back(err);
    }
    EXPECT_GE(test::fitted_order(hs, errs), 1.9);
}

TEST(FluxDivergence, VariableCoefficientSecondOrder) {
    // a = 2 + cos(pi x), p = cos(2 pi x): (a p_x)_x analytic
    std::vector<double> hs, errs;
    for (std::size_t n : {33, 65, 129, 257}) {
        Grid g(1.0, n);
        auto a = GridFunction::sample(g, [](double x) { return 2 + std::cos(pi * x); });
        auto p = test::cosine(g, 2);
        auto out = flux_divergence(a, p);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = g.x(i);
            const double exact = -pi * std::sin(pi * x) * (-2 * pi * std::sin(2 * pi * x)) +
                                 (2 + std::cos(pi * x)) * (-4 * pi * pi * std::cos(2 * pi * x));
            err = std::max(err, std::abs(out[i] - exact));
        }
        hs.push_back(g.h());
        errs.push_back(err);
    }
    EXPECT_GE(test::fitted_order(hs, errs), 1.9);
}

TEST(FluxDivergence, TelescopesToZeroIntegral) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Grid g(1.7, 40 + trial);
        auto a = test::random_field(g, rng, 0.1, 3.0);
        auto p = test::random_field(g, rng);
        auto out = flux_divergence(a, p);
        const double scale = a.max_abs() * p.max_abs() / (g.h() * g.h());
        EXPECT_LE(std::abs(integrate(out)), 1e-13 * scale * g.L);
        EXPECT_LE(std::abs(mean(out)), 1e-13 * scale);
    }
}

TEST(FluxDivergence, SelfAdjointInQuadratureInnerProduct) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Grid g(1.0, 64);
        auto a = test::random_field(g, rng, 0.5, 2.0);
        auto p = test::random_field(g, rng), q = test::random_field(g, rng);
        const double lhs = inner(flux_divergence(a, p), q), rhs = inner(p, flux_divergence(a, q));
        EXPECT_NEAR(lhs, rhs, 1e-11 * std::max(1.0, std::abs(lhs)));
    }
}

TEST(Differences, SecondDifferenceOfLinearIsZero) {
    Grid g(1.0, 20);
    auto p = GridFunction::sample(g, [](double x) { return 3 * x - 1; });
    EXPECT_LT(second_difference(p).max_abs(), 1e-10);
}

TEST(Differences, SecondDifferenceCosineOrderTwo) {
    std::vector<double> hs, errs;
    for (std::size_t n : {33, 65, 129, 257}) {
        Grid g(1.0, n);
        auto p = test::cosine(g, 2);
        auto out = second_difference(p);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(out[i] + 4 * pi * pi * p[i]));
        hs.push_back(g.h());
        errs.push_back(err);
    }
    EXPECT_GE(test::fitted_order(hs, errs), 1.9);
}

TEST(Differences, ThirdDifferenceCosineAtLeastFirstOrder) {
    std::vector<double> hs, errs, errs_interior;
    for (std::size_t n : {33, 65, 129, 257}) {
        Grid g(1.0, n);
        auto p = test::cosine(g, 1);
        auto out = third_difference(p);
        double err = 0, err_in = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::abs(out[i] - pi * pi * pi * std::sin(pi * g.x(i)));
            err = std::max(err, e);
            if (i >= 2 && i + 2 < n) err_in = std::max(err_in, e);
        }
        hs.push_back(g.h());
        errs.push_back(err);
        errs_interior.push_back(err_in);
    }
    EXPECT_GE(test::fitted_order(hs, errs), 1.0 - 0.05);
    EXPECT_GE(test::fitted_order(hs, errs_interior), 1.9);
}

TEST(Differences, FirstDifferenceNeumannZeroAtEnds) {
    Grid g(1.0, 16);
    auto p = GridFunction::sample(g, [](double x) { return x * x; });
    auto out = first_difference_neumann(p);
    EXPECT_EQ(out[0], 0.0);
    EXPECT_EQ(out[15], 0.0);
    EXPECT_NEAR(first_difference(p)[15], 2.0, 1e-12);
}

TEST(Quadrature, Examples) {
    Grid g(2.5, 50);
    EXPECT_NEAR(integrate(GridFunction::constant(g, 1.0)), 2.5, 1e-14);
    EXPECT_LE(std::abs(integrate(test::cosine(g, 1))), 1e-13 * g.L);
    Grid unit(1.0, 101);
    EXPECT_NEAR(integrate(GridFunction::sample(unit, [](double x) { return x; })), 0.5, 1e-15);
}

TEST(Norms, Examples) {
    Grid g(1.0, 64);
    auto z = sobolev_norms(GridFunction(g));
    EXPECT_EQ(z.L2, 0.0);
    EXPECT_EQ(z.W2inf, 0.0);
    auto c = sobolev_norms(GridFunction::constant(g, 3.0));
    EXPECT_NEAR(c.L2, 3.0, 1e-14);
    EXPECT_NEAR(c.Linf, 3.0, 1e-14);
    EXPECT_NEAR(c.H1_seminorm, 0.0, 1e-12);
    EXPECT_NEAR(c.H2_seminorm, 0.0, 1e-9);

    for (double L : {1.0, 2.0}) {
        Grid fine(L, 1024);
        auto s = sobolev_norms(test::cosine(fine, 1));
        const double exact = (pi / L) * (pi / L) * L / 2;
        EXPECT_LE(std::abs(s.H1_seminorm * s.H1_seminorm - exact) / exact, 1e-3);
    }
}

TEST(Norms, H1SeminormIsDirichletForm) {
    std::mt19937_64 rng(3);
    Grid g(1.3, 40);
    auto p = test::random_field(g, rng);
    const double h1 = h1_seminorm(p);
    EXPECT_NEAR(h1 * h1, -inner(p, laplacian(p)), 1e-10 * h1 * h1);
}

TEST(Injection, SharesNodes) {
    Grid fine(1.0, 17), coarse(1.0, 9);
    auto f = GridFunction::sample(fine, [](double x) { return x; });
    auto c = inject(f, coarse);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(c[i], coarse.x(i));
    EXPECT_THROW(inject(f, Grid(1.0, 10)), GridMismatch);
}

// --- heat semigroup ---------------------------------------------------------

namespace {

Eigen::MatrixXd laplacian_matrix(const Grid& g) {
    const auto n = static_cast<Eigen::Index>(g.n);
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        GridFunction e(g);
        e.values[j] = 1.0;
        A.col(j) = laplacian(e).values;
    }
    return A;
}

}  // namespace

TEST(HeatSemigroup, IdentityAtTimeZero) {
    std::mt19937_64 rng(1);
    Grid g(1.0, 30);
    auto p = test::random_field(g, rng);
    EXPECT_EQ((heat_semigroup_apply(1.0, 0.0, p).values - p.values).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((heat_semigroup_apply(0.0, 5.0, p).values - p.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HeatSemigroup, FixesConstants) {
    Grid g(1.0, 50);
    auto out = heat_semigroup_apply(2.0, 3.0, GridFunction::constant(g, 1.5));
    EXPECT_LT((out.values.array() - 1.5).abs().maxCoeff(), 1e-14);
}

TEST(HeatSemigroup, DiagonalizesLaplacian) {
    Grid g(1.0, 40);
    for (std::size_t k : {1, 5, 39}) {
        auto phi = cosine_mode(g, k);
        auto lap = laplacian(phi);
        EXPECT_LT((lap.values + laplacian_eigenvalue(g, k) * phi.values).cwiseAbs().maxCoeff(),
                  1e-9 * laplacian_eigenvalue(g, k));
        auto out = heat_semigroup_apply(0.7, 0.01, phi);
        const double f = std::exp(-0.01 * 0.7 * laplacian_eigenvalue(g, k));
        EXPECT_LT((out.values - f * phi.values).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(HeatSemigroup, MatchesMatrixExponential) {
    Grid g(1.0, 16);
    const Eigen::MatrixXd A = laplacian_matrix(g);
    std::mt19937_64 rng(5);
    for (double t : {0.01, 0.1, 1.0}) {
        const Eigen::MatrixXd E = (t * 0.3 * A).exp();
        for (int trial = 0; trial < 5; ++trial) {
            auto p = test::random_field(g, rng);
            auto out = heat_semigroup_apply(0.3, t, p);
            EXPECT_LT((out.values - E * p.values).cwiseAbs().maxCoeff(), 1e-12) << "t = " << t;
        }
    }
}

TEST(HeatSemigroup, ModeRoundTrip) {
    std::mt19937_64 rng(17);
    Grid g(1.0, 33);
    HeatSemigroup sg(g);
    auto p = test::random_field(g, rng);
    EXPECT_LT((sg.from_modes(sg.to_modes(p.values)) - p.values).cwiseAbs().maxCoeff(), 1e-14);
    Vec c = sg.to_modes(cosine_mode(g, 4).values);
    EXPECT_NEAR(c[4], 1.0, 1e-14);
    EXPECT_NEAR(c.cwiseAbs().sum(), 1.0, 1e-13);
}

TEST(HeatSemigroup, Properties) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Grid g(1.0 + 0.1 * trial, 20 + 3 * trial);
        auto p = test::random_field(g, rng);
        const double kappa = 0.5, s = 0.003 * (trial + 1), t = 0.011;
        auto once = heat_semigroup_apply(kappa, s + t, p);
        auto twice = heat_semigroup_apply(kappa, s, heat_semigroup_apply(kappa, t, p));
        EXPECT_LT((once.values - twice.values).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(mean(once), mean(p), 1e-14);
        EXPECT_LE(once.max_abs(), p.max_abs() + 1e-12);
    }
}

TEST(HeatSemigroup, PreservesPositivity) {
    std::mt19937_64 rng(29);
    Grid g(1.0, 64);
    GridFunction delta(g);
    delta[0] = 1.0;
    for (double t : {1e-6, 1e-4, 1e-2}) {
        auto out = heat_semigroup_apply(1.0, t, delta);
        EXPECT_GE(out.values.minCoeff(), -1e-15);
    }
}
