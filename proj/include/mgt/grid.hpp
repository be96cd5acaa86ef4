#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "mgt/errors.hpp"

namespace mgt {

using Vec = Eigen::VectorXd;

/// Uniform node-centered grid on [0, L]: x_i = i h, h = L / (n - 1).
struct Grid {
    double L = 1.0;
    std::size_t n = 0;

    Grid() = default;
    Grid(double length, std::size_t nodes) : L(length), n(nodes) {
        if (!(length > 0.0) || !std::isfinite(length)) throw ValidationError("grid length must be positive");
        if (nodes < 8) throw ValidationError("grid needs at least 8 nodes");
    }

    [[nodiscard]] double h() const noexcept { return L / static_cast<double>(n - 1); }
    [[nodiscard]] double x(std::size_t i) const noexcept {
        // exact at both ends
        return i + 1 == n ? L : static_cast<double>(i) * h();
    }
    [[nodiscard]] Vec nodes() const {
        Vec out(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = x(i);
        return out;
    }
    /// Trapezoidal quadrature weights.
    [[nodiscard]] Vec weights() const {
        Vec w = Vec::Constant(static_cast<Eigen::Index>(n), h());
        w[0] = w[w.size() - 1] = 0.5 * h();
        return w;
    }
    friend bool operator==(const Grid& a, const Grid& b) { return a.n == b.n && a.L == b.L; }
    friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }
};

/// Node values of one field on a Grid.
struct GridFunction {
    Grid grid;
    Vec values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g) : grid(g), values(Vec::Zero(static_cast<Eigen::Index>(g.n))) {}
    GridFunction(const Grid& g, Vec v) : grid(g), values(std::move(v)) {
        if (static_cast<std::size_t>(values.size()) != grid.n)
            throw GridMismatch("grid function length does not match grid");
    }
    static GridFunction sample(const Grid& g, const std::function<double(double)>& f) {
        GridFunction out(g);
        for (std::size_t i = 0; i < g.n; ++i) out.values[static_cast<Eigen::Index>(i)] = f(g.x(i));
        return out;
    }
    static GridFunction constant(const Grid& g, double c) {
        return {g, Vec::Constant(static_cast<Eigen::Index>(g.n), c)};
    }

    [[nodiscard]] std::size_t size() const noexcept { return grid.n; }
    double& operator[](std::size_t i) { return values[static_cast<Eigen::Index>(i)]; }
    double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
    [[nodiscard]] bool all_finite() const { return values.allFinite(); }
    [[nodiscard]] double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

    GridFunction& operator+=(const GridFunction& o) { check_same(o); values += o.values; return *this; }
    GridFunction& operator-=(const GridFunction& o) { check_same(o); values -= o.values; return *this; }
    GridFunction& operator*=(double s) { values *= s; return *this; }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }
    friend GridFunction operator*(GridFunction a, double s) { return a *= s; }

    void check_same(const GridFunction& o) const {
        if (grid != o.grid) throw GridMismatch("grid functions live on different grids");
    }
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b) { a.check_same(b); }

/// Conservative discretization of (a p_x)_x with zero flux through both end faces.
///
/// Face coefficients are arithmetic means of the adjacent node values; the end
/// nodes own half cells, so `integrate` of the result telescopes to zero.
inline GridFunction flux_divergence(const GridFunction& a, const GridFunction& p) {
    require_same_grid(a, p);
    const std::size_t n = p.size();
    const double ih2 = 1.0 / (p.grid.h() * p.grid.h());
    GridFunction out(p.grid);
    double left_flux = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double face = 0.5 * (a[i] + a[i + 1]) * (p[i + 1] - p[i]);
        const double scale = (i == 0) ? 2.0 : 1.0;
        out[i] = scale * (face - left_flux) * ih2;
        left_flux = face;
    }
    out[n - 1] = 2.0 * (0.0 - left_flux) * ih2;
    return out;
}

/// Discrete Neumann Laplacian: flux_divergence with a = 1.
inline GridFunction laplacian(const GridFunction& p) {
    const std::size_t n = p.size();
    const double ih2 = 1.0 / (p.grid.h() * p.grid.h());
    GridFunction out(p.grid);
    out[0] = 2.0 * (p[1] - p[0]) * ih2;
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (p[i + 1] - 2.0 * p[i] + p[i - 1]) * ih2;
    out[n - 1] = 2.0 * (p[n - 2] - p[n - 1]) * ih2;
    return out;
}

/// Centered first difference, one-sided second order at the ends.
inline GridFunction first_difference(const GridFunction& p) {
    const std::size_t n = p.size();
    const double ih = 1.0 / p.grid.h();
    GridFunction out(p.grid);
    out[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) * 0.5 * ih;
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (p[i + 1] - p[i - 1]) * 0.5 * ih;
    out[n - 1] = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) * 0.5 * ih;
    return out;
}

/// Centered first difference with the end values replaced by the Neumann value 0.
inline GridFunction first_difference_neumann(const GridFunction& p) {
    GridFunction out = first_difference(p);
    out[0] = 0.0;
    out[p.size() - 1] = 0.0;
    return out;
}

/// Differences across the n-1 cell faces, (p_{i+1} - p_i) / h.
inline Vec face_differences(const GridFunction& p) {
    const auto m = static_cast<Eigen::Index>(p.size() - 1);
    return (p.values.tail(m) - p.values.head(m)) / p.grid.h();
}

/// Centered second difference, one-sided second order (exact for cubics) at the ends.
inline GridFunction second_difference(const GridFunction& p) {
    const std::size_t n = p.size();
    if (n < 8) throw GridMismatch("second_difference needs at least 8 nodes");
    const double ih2 = 1.0 / (p.grid.h() * p.grid.h());
    GridFunction out(p.grid);
    out[0] = (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * ih2;
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (p[i + 1] - 2.0 * p[i] + p[i - 1]) * ih2;
    out[n - 1] = (2.0 * p[n - 1] - 5.0 * p[n - 2] + 4.0 * p[n - 3] - p[n - 4]) * ih2;
    return out;
}

/// Centered five-point third difference; the two nodes nearest each end use
/// the four-point stencil of the adjacent cell (first order there).
inline GridFunction third_difference(const GridFunction& p) {
    const std::size_t n = p.size();
    if (n < 8) throw GridMismatch("third_difference needs at least 8 nodes");
    const double h = p.grid.h();
    const double ih3 = 1.0 / (h * h * h);
    GridFunction out(p.grid);
    const double left = (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * ih3;
    const double right = (p[n - 1] - 3.0 * p[n - 2] + 3.0 * p[n - 3] - p[n - 4]) * ih3;
    out[0] = out[1] = left;
    out[n - 1] = out[n - 2] = right;
    for (std::size_t i = 2; i + 2 < n; ++i)
        out[i] = (p[i + 2] - 2.0 * p[i + 1] + 2.0 * p[i - 1] - p[i - 2]) * 0.5 * ih3;
    return out;
}

/// Trapezoidal quadrature.
inline double integrate(const GridFunction& p) {
    const std::size_t n = p.size();
    double s = 0.5 * (p[0] + p[n - 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) s += p[i];
    return s * p.grid.h();
}
inline double integrate(const Grid& g, const Vec& values) { return integrate(GridFunction(g, values)); }

inline double mean(const GridFunction& p) { return integrate(p) / p.grid.L; }

/// Quadrature inner product.
inline double inner(const GridFunction& a, const GridFunction& b) {
    require_same_grid(a, b);
    return integrate(a.grid, a.values.cwiseProduct(b.values));
}

struct SobolevNorms {
    double L2 = 0.0;
    double Linf = 0.0;
    double H1_seminorm = 0.0;
    double H2_seminorm = 0.0;
    double W2inf = 0.0;

    [[nodiscard]] double W12() const { return std::sqrt(L2 * L2 + H1_seminorm * H1_seminorm); }
    [[nodiscard]] double W22() const {
        return std::sqrt(L2 * L2 + H1_seminorm * H1_seminorm + H2_seminorm * H2_seminorm);
    }
};

/// H1 seminorm from face differences (midpoint rule on each cell). With this
/// choice |p|_{H1}^2 = -<p, laplacian(p)> exactly.
inline double h1_seminorm(const GridFunction& p) {
    return std::sqrt(face_differences(p).squaredNorm() * p.grid.h());
}

inline double l2_norm(const GridFunction& p) { return std::sqrt(std::max(0.0, inner(p, p))); }

/// W^{1,2} norm (L2^2 + H1^2)^{1/2}.
inline double w12_norm(const GridFunction& p) {
    const double l2 = l2_norm(p), h1 = h1_seminorm(p);
    return std::sqrt(l2 * l2 + h1 * h1);
}

inline SobolevNorms sobolev_norms(const GridFunction& p) {
    SobolevNorms s;
    s.L2 = l2_norm(p);
    s.Linf = p.max_abs();
    s.H1_seminorm = h1_seminorm(p);
    const GridFunction pxx = second_difference(p);
    s.H2_seminorm = l2_norm(pxx);
    s.W2inf = std::max({s.Linf, first_difference(p).max_abs(), pxx.max_abs()});
    return s;
}

/// Restriction of a fine grid function onto a coarse grid sharing its nodes.
inline GridFunction inject(const GridFunction& fine, const Grid& coarse) {
    if (fine.grid.L != coarse.L || (fine.grid.n - 1) % (coarse.n - 1) != 0)
        throw GridMismatch("grids do not share nodes");
    const std::size_t stride = (fine.grid.n - 1) / (coarse.n - 1);
    GridFunction out(coarse);
    for (std::size_t i = 0; i < coarse.n; ++i) out[i] = fine[i * stride];
    return out;
}

}  // namespace mgt
