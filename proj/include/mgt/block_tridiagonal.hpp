#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "mgt/errors.hpp"

namespace mgt {

/// Scalar tridiagonal operator; lower[0] and upper[n-1] are unused.
struct Tridiagonal {
    Eigen::VectorXd lower, diag, upper;

    explicit Tridiagonal(std::size_t n = 0)
        : lower(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
          diag(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
          upper(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(diag.size()); }

    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        const Eigen::Index n = diag.size();
        Eigen::VectorXd y = diag.cwiseProduct(x);
        for (Eigen::Index i = 1; i < n; ++i) y[i] += lower[i] * x[i - 1];
        for (Eigen::Index i = 0; i + 1 < n; ++i) y[i] += upper[i] * x[i + 1];
        return y;
    }
};

/// Block tridiagonal system with 3x3 blocks, solved by block Thomas elimination.
class BlockTridiagonal3 {
public:
    using Block = Eigen::Matrix3d;
    using Column = Eigen::Vector3d;

    explicit BlockTridiagonal3(std::size_t n)
        : lower_(n, Block::Zero()), diag_(n, Block::Zero()), upper_(n, Block::Zero()) {}

    [[nodiscard]] std::size_t size() const { return diag_.size(); }
    Block& lower(std::size_t i) { return lower_[i]; }
    Block& diag(std::size_t i) { return diag_[i]; }
    Block& upper(std::size_t i) { return upper_[i]; }

    /// Solves in place; throws SolverFailure on a (numerically) singular pivot block.
    [[nodiscard]] std::vector<Column> solve(std::vector<Column> rhs) const {
        const std::size_t n = diag_.size();
        std::vector<Block> c(n);
        Eigen::PartialPivLU<Block> lu;
        Block pivot = diag_[0];
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) {
                pivot = diag_[i] - lower_[i] * c[i - 1];
                rhs[i] -= lower_[i] * rhs[i - 1];
            }
            lu.compute(pivot);
            const double det = lu.determinant();
            const double scale = pivot.cwiseAbs().maxCoeff();
            if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale * scale * scale)
                throw SolverFailure("singular block in tridiagonal solve at row " + std::to_string(i));
            if (i + 1 < n) c[i] = lu.solve(upper_[i]);
            rhs[i] = lu.solve(rhs[i]);
        }
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
        return rhs;
    }

private:
    std::vector<Block> lower_, diag_, upper_;
};

}  // namespace mgt
