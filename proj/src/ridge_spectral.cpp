#include "fabr/ridge_spectral.hpp"

#include "fabr/errors.hpp"

#include <cblas.h>
#include <fmt/format.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fabr {

EigPairs sym_eig(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DomainError(fmt::format("sym_eig needs a square matrix, got {} x {}", a.rows(), a.cols()));
    }
    const Index n = a.rows();
    EigPairs out;
    if (n == 0) {
        out.vectors.resize(0, 0);
        out.values.resize(0);
        return out;
    }
    Matrix work = 0.5 * (a + a.transpose());
    Vector ascending(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n), work.data(),
                                           static_cast<lapack_int>(n), ascending.data());
    if (info != 0) {
        throw NumericError(fmt::format("dsyevd failed (info={}) on a {} x {} matrix with Frobenius norm {}", info,
                                       n, n, a.norm()));
    }
    out.values = ascending.reverse();
    out.vectors = work.rowwise().reverse();
    return out;
}

void gram_update(Matrix& gram, const Matrix& s, double alpha) {
    if (gram.rows() != s.rows() || gram.cols() != s.rows()) {
        throw DomainError(fmt::format("gram_update: {} x {} Gram for {} rows", gram.rows(), gram.cols(), s.rows()));
    }
    if (s.rows() == 0 || s.cols() == 0) return;
    cblas_dsyrk(CblasColMajor, CblasLower, CblasNoTrans, static_cast<blasint>(s.rows()), static_cast<blasint>(s.cols()),
                alpha, s.data(), static_cast<blasint>(s.rows()), 1.0, gram.data(), static_cast<blasint>(gram.rows()));
}

void clip_psd(EigPairs& eig) {
    if (eig.values.size() == 0) return;
    const double top = std::max(eig.values(0), 0.0);
    const double floor = -kRankTolerance * top;
    for (Index i = 0; i < eig.values.size(); ++i) {
        double& v = eig.values(i);
        if (v < 0.0) {
            if (v < floor && v < -std::numeric_limits<double>::min()) {
                throw NumericError(fmt::format(
                    "matrix expected PSD has eigenvalue {} (largest {}), below the clipping floor", v, top));
            }
            v = 0.0;
        }
    }
}

EigPairs psd_eig(const Matrix& a) {
    EigPairs eig = sym_eig(a);
    clip_psd(eig);
    return eig;
}

RidgeGrid::RidgeGrid(std::vector<double> z_values) : z_(std::move(z_values)) {
    for (std::size_t i = 0; i < z_.size(); ++i) {
        if (!(z_[i] > 0.0) || !std::isfinite(z_[i])) {
            throw DomainError(fmt::format("shrinkage z must be positive and finite, got {}", z_[i]));
        }
        if (i > 0 && !(z_[i] > z_[i - 1])) {
            throw DomainError(fmt::format("shrinkage grid must be strictly increasing ({} after {})", z_[i],
                                          z_[i - 1]));
        }
    }
}

std::vector<Matrix> multi_z_apply(const EigPairs& eig, const Matrix& y, const RidgeGrid& grid, Index n,
                                  SpectrumMode mode) {
    if (eig.vectors.rows() != y.rows()) {
        throw DomainError(fmt::format("eigenvectors have {} rows but targets have {}", eig.vectors.rows(), y.rows()));
    }
    if (n <= 0) {
        throw DomainError(fmt::format("n must be positive, got {}", n));
    }

    Index r = eig.rank();
    if (mode == SpectrumMode::annihilate && r > 0) {
        const double cutoff = kNullTolerance * std::max(eig.values(0), 0.0);
        while (r > 0 && !(eig.values(r - 1) > cutoff)) --r;
    }
    const auto basis = eig.vectors.leftCols(r);
    const auto values = eig.values.head(r);

    const Matrix coeffs = basis.transpose() * y; // r x K, shared by every z
    Matrix complement;
    if (mode == SpectrumMode::exact && r < y.rows()) {
        complement = y - basis * coeffs;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<Matrix> out;
    out.reserve(grid.size());
    for (const double z : grid.values()) {
        const Vector scale = (values.array() + z).inverse() * inv_n;
        Matrix q = basis * (scale.asDiagonal() * coeffs);
        if (complement.size() > 0) {
            q += complement * (inv_n / z);
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<Matrix> primal_direct_beta(const Matrix& s, const Matrix& y, const RidgeGrid& grid) {
    if (s.rows() != y.rows()) {
        throw DomainError(fmt::format("features have {} rows but targets have {}", s.rows(), y.rows()));
    }
    const double n = static_cast<double>(s.rows());
    const Matrix cov = (s.transpose() * s) / n;
    const Matrix rhs = (s.transpose() * y) / n;
    std::vector<Matrix> out;
    out.reserve(grid.size());
    for (const double z : grid.values()) {
        Matrix system = cov;
        system.diagonal().array() += z;
        out.push_back(system.llt().solve(rhs));
    }
    return out;
}

std::vector<std::vector<Matrix>> dual_to_beta(std::span<const Matrix> blocks, const RidgeSolution& sol) {
    std::vector<std::vector<Matrix>> out;
    out.reserve(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].rows() != sol.n_train) {
            throw DomainError(fmt::format("block {} has {} rows but the solution was fit on N={}", k,
                                          blocks[k].rows(), sol.n_train));
        }
        std::vector<Matrix> per_z;
        per_z.reserve(sol.q.size());
        for (const Matrix& q : sol.q) {
            per_z.push_back(blocks[k].transpose() * q);
        }
        out.push_back(std::move(per_z));
    }
    return out;
}

std::vector<Matrix> stack_beta(const std::vector<std::vector<Matrix>>& per_block) {
    std::vector<Matrix> out;
    if (per_block.empty()) return out;
    const std::size_t nz = per_block.front().size();
    for (std::size_t zi = 0; zi < nz; ++zi) {
        Index rows = 0;
        for (const auto& b : per_block) rows += b[zi].rows();
        Matrix stacked(rows, per_block.front()[zi].cols());
        Index at = 0;
        for (const auto& b : per_block) {
            stacked.middleRows(at, b[zi].rows()) = b[zi];
            at += b[zi].rows();
        }
        out.push_back(std::move(stacked));
    }
    return out;
}

Labels classify(const Matrix& scores, std::span<const double> label_means) {
    if (static_cast<Index>(label_means.size()) != scores.cols()) {
        throw DomainError(
            fmt::format("{} label means for {} score columns", label_means.size(), scores.cols()));
    }
    Labels out(static_cast<std::size_t>(scores.rows()), 0);
    if (scores.cols() == 0) return out;
    for (Index m = 0; m < scores.rows(); ++m) {
        int best = 0;
        double best_value = scores(m, 0) + label_means[0];
        for (Index k = 1; k < scores.cols(); ++k) {
            const double v = scores(m, k) + label_means[static_cast<std::size_t>(k)];
            if (v > best_value) {
                best_value = v;
                best = static_cast<int>(k);
            }
        }
        out[static_cast<std::size_t>(m)] = best;
    }
    return out;
}

} // namespace fabr
