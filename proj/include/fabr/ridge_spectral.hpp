#pragma once

#include "fabr/matrix.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fabr {

/// Relative threshold below which eigenvalues / thin-basis directions count as numerically zero.
inline constexpr double kRankTolerance = 1e-10;

/// Gram eigenvalues at or below kNullTolerance * max are treated as zero by annihilation-mode
/// solves and by sketch truncation.
inline constexpr double kNullTolerance = 1e-15;

/// Orthonormal eigenvectors (columns) with eigenvalues sorted nonincreasing.
struct EigPairs {
    Matrix vectors;
    Vector values;

    Index rank() const noexcept { return values.size(); }
};

/// Full symmetric eigendecomposition of (A + A^T) / 2 via LAPACK dsyevd.
/// Throws NumericError (with size and norm) if the solver does not converge.
EigPairs sym_eig(const Matrix& a);

/// sym_eig for a matrix known to be PSD: eigenvalues in (-1e-10 * lambda_max, 0) are clipped to 0,
/// anything more negative throws NumericError.
EigPairs psd_eig(const Matrix& a);

/// Clipping rule of psd_eig applied to an existing decomposition.
void clip_psd(EigPairs& eig);

/// Adds alpha * S * S^T to the lower triangle of the square `gram` (BLAS dsyrk). The upper triangle is untouched.
void gram_update(Matrix& gram, const Matrix& s, double alpha = 1.0);

/// Strictly increasing, strictly positive shrinkage values.
class RidgeGrid {
public:
    RidgeGrid() = default;
    /// Throws DomainError unless every z > 0 and the list is strictly increasing.
    explicit RidgeGrid(std::vector<double> z_values);

    std::span<const double> values() const noexcept { return z_; }
    std::size_t size() const noexcept { return z_.size(); }
    double operator[](std::size_t i) const noexcept { return z_[i]; }
    bool empty() const noexcept { return z_.empty(); }

    bool operator==(const RidgeGrid&) const = default;

private:
    std::vector<double> z_;
};

/// How a decomposition of lower rank than N treats the orthogonal complement of span(V).
enum class SpectrumMode {
    /// Add the (1/z) Y_perp / n term: the exact resolvent of the rank-deficient matrix.
    exact,
    /// Drop the complement and any numerically-zero eigenpairs (rank-nu truncation semantics).
    annihilate,
};

/// Dual weights Q(z) = (Psi/N + zI)^{-1} Y / N for each z, in grid order.
struct RidgeSolution {
    std::vector<Matrix> q;            // one N x K matrix per grid value
    std::vector<double> label_means;  // K, re-added at prediction
    Index n_train = 0;
    std::optional<Index> checkpoint;  // number of blocks folded when this was solved
    double elapsed_ms = 0.0;          // fitting wall time up to this solve, when recorded
};

/// For each z: V (D + zI)^{-1} V^T Y / n, reusing one decomposition of Psi/N.
/// In exact mode the complement term (Y - V V^T Y) / (z n) is added; in annihilation mode
/// eigenpairs with value <= kNullTolerance * max are skipped.
std::vector<Matrix> multi_z_apply(const EigPairs& eig, const Matrix& y, const RidgeGrid& grid, Index n,
                                  SpectrumMode mode);

/// Reference primal solve: (S^T S / N + zI)^{-1} S^T Y / N per z. Forms the P x P matrix; oracle use only.
std::vector<Matrix> primal_direct_beta(const Matrix& s, const Matrix& y, const RidgeGrid& grid);

/// beta_k(z) = S_k^T Q(z) for each block; result[k][zi] is width_k x K.
std::vector<std::vector<Matrix>> dual_to_beta(std::span<const Matrix> blocks, const RidgeSolution& sol);

/// Stacked beta(z) (P x K per z) from a block list.
std::vector<Matrix> stack_beta(const std::vector<std::vector<Matrix>>& per_block);

/// argmax_k (scores[m, k] + label_means[k]); ties go to the smallest index.
Labels classify(const Matrix& scores, std::span<const double> label_means);

} // namespace fabr
