#pragma once

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "mgt/grid.hpp"

namespace mgt {

/// Exact Neumann heat semigroup exp(t kappa laplacian) on a Grid.
///
/// `laplacian` is diagonalized by the DCT-I basis
///     phi_k(x_i) = cos(pi k i / (n - 1)),   k = 0 .. n-1,
/// with  laplacian(phi_k) = -lambda_k phi_k  and
///     lambda_k = (4 / h^2) sin^2(pi k / (2 (n - 1))).
/// The forward transform is FFTW's REDFT00 (unnormalized); applying it twice
/// multiplies by 2 (n - 1).
namespace detail {

class Dct1Plan {
public:
    Dct1Plan(const Dct1Plan&) = delete;
    Dct1Plan& operator=(const Dct1Plan&) = delete;
    ~Dct1Plan() {
        std::lock_guard<std::mutex> lock(mutex());
        fftw_destroy_plan(plan_);
    }

    // new-array execute is thread safe
    void execute(const double* in, double* out) const {
        fftw_execute_r2r(plan_, const_cast<double*>(in), out);
    }

    static std::shared_ptr<const Dct1Plan> get(std::size_t n) {
        std::lock_guard<std::mutex> lock(mutex());
        static std::map<std::size_t, std::shared_ptr<const Dct1Plan>> cache;
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
        auto plan = std::shared_ptr<const Dct1Plan>(new Dct1Plan(n, 0));
        cache.emplace(n, plan);
        return plan;
    }

    static std::mutex& mutex() {
        static std::mutex m;
        return m;
    }

private:
    // caller holds the planner mutex
    explicit Dct1Plan(std::size_t n, int) {
        std::vector<double> scratch_in(n), scratch_out(n);
        plan_ = fftw_plan_r2r_1d(static_cast<int>(n), scratch_in.data(), scratch_out.data(), FFTW_REDFT00,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan_ == nullptr) throw SolverFailure("FFTW could not create a DCT-I plan");
    }

    fftw_plan plan_ = nullptr;
};

}  // namespace detail

/// Discrete eigenvalue lambda_k of -laplacian for cosine mode k.
inline double laplacian_eigenvalue(const Grid& g, std::size_t k) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(k) / (2.0 * static_cast<double>(g.n - 1)));
    return 4.0 * s * s / (g.h() * g.h());
}

/// Discrete cosine mode k sampled on the grid.
inline GridFunction cosine_mode(const Grid& g, std::size_t k) {
    GridFunction out(g);
    for (std::size_t i = 0; i < g.n; ++i)
        out[i] = std::cos(std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(g.n - 1));
    return out;
}

class HeatSemigroup {
public:
    explicit HeatSemigroup(const Grid& g) : grid_(g), plan_(detail::Dct1Plan::get(g.n)), lambda_(g.n) {
        for (std::size_t k = 0; k < g.n; ++k) lambda_[static_cast<Eigen::Index>(k)] = laplacian_eigenvalue(g, k);
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] const Vec& eigenvalues() const noexcept { return lambda_; }

    /// Cosine coefficients c_k with p = sum_k c_k phi_k.
    [[nodiscard]] Vec to_modes(const Vec& p) const {
        Vec c(p.size());
        plan_->execute(p.data(), c.data());
        const double s = 1.0 / static_cast<double>(grid_.n - 1);
        c *= s;
        c[0] *= 0.5;
        c[c.size() - 1] *= 0.5;
        return c;
    }
    [[nodiscard]] Vec from_modes(const Vec& c) const {
        Vec scaled = c;
        const Eigen::Index last = c.size() - 1;
        for (Eigen::Index k = 1; k < last; ++k) scaled[k] *= 0.5;
        Vec p(c.size());
        plan_->execute(scaled.data(), p.data());
        return p;
    }

    /// exp(t kappa laplacian) p.
    [[nodiscard]] GridFunction apply(double kappa, double t, const GridFunction& p) const {
        if (p.grid != grid_) throw GridMismatch("semigroup applied on a different grid");
        if (kappa == 0.0 || t == 0.0) return p;
        Vec c(p.values.size());
        plan_->execute(p.values.data(), c.data());
        c.array() *= (-(t * kappa) * lambda_.array()).exp();
        GridFunction out(grid_);
        plan_->execute(c.data(), out.values.data());
        out.values /= 2.0 * static_cast<double>(grid_.n - 1);
        return out;
    }

    /// Same as `apply` with the mode multipliers exp(-t kappa lambda_k) supplied.
    [[nodiscard]] GridFunction apply_multipliers(const Vec& multipliers, const GridFunction& p) const {
        Vec c(p.values.size());
        plan_->execute(p.values.data(), c.data());
        c.array() *= multipliers.array();
        GridFunction out(grid_);
        plan_->execute(c.data(), out.values.data());
        out.values /= 2.0 * static_cast<double>(grid_.n - 1);
        return out;
    }
    [[nodiscard]] Vec multipliers(double kappa, double t) const {
        return (-(t * kappa) * lambda_.array()).exp().matrix();
    }

private:
    Grid grid_;
    std::shared_ptr<const detail::Dct1Plan> plan_;
    Vec lambda_;
};

inline GridFunction heat_semigroup_apply(double kappa, double t, const GridFunction& p) {
    if (kappa < 0.0 || t < 0.0) throw ValidationError("heat semigroup needs kappa >= 0 and t >= 0");
    return HeatSemigroup(p.grid).apply(kappa, t, p);
}

}  // namespace mgt
