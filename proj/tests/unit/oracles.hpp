#pragma once

// Reference computations used by the unit tests. Deliberately naive: dense solves,
// explicit loops, a generator unrelated to the library's.

#include "fabr/matrix.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using fabr::Index;
using fabr::Matrix;

inline Matrix random_matrix(std::mt19937_64& gen, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
    return m;
}

inline std::vector<int> random_labels(std::mt19937_64& gen, Index n, int k) {
    std::uniform_int_distribution<int> dist(0, k - 1);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = dist(gen);
    return y;
}

/// (S^T S / N + zI)^{-1} S^T Y / N by a pivoted QR solve.
inline Matrix primal_beta(const Matrix& s, const Matrix& y, double z) {
    const double n = static_cast<double>(s.rows());
    Matrix a = s.transpose() * s / n;
    a.diagonal().array() += z;
    return a.colPivHouseholderQr().solve(s.transpose() * y / n);
}

/// (Psi/N + zI)^{-1} Y / N by a partial-pivot LU solve.
inline Matrix dual_q(const Matrix& psi, const Matrix& y, double z) {
    const double n = static_cast<double>(psi.rows());
    Matrix a = psi / n;
    a.diagonal().array() += z;
    return a.partialPivLu().solve(y / n);
}

inline double rel_err(const Matrix& got, const Matrix& want) {
    const double denom = std::max(want.norm(), 1e-300);
    return (got - want).norm() / denom;
}

inline double spectral_norm_sym(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
}

inline double min_eig(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double max_eig(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("fabr_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace oracle
