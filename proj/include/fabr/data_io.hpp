#pragma once

#include "fabr/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace fabr {

/// Element type stored in a FABM file.
enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

struct CsvOptions {
    bool skip_header = false;
};

// FABM layout (all little-endian):
//   "FABM" | u32 version (=1) | u8 dtype | 3 reserved zero bytes | u64 rows | u64 cols | values row-major
inline constexpr std::uint32_t kFabmVersion = 1;
inline constexpr std::size_t kFabmHeaderBytes = 28;

/// Loads a FABM file, or a CSV file when the magic bytes are absent.
/// Throws FormatError on a malformed header and DataError on NaN/Inf.
Matrix load_matrix(const std::filesystem::path& path, const CsvOptions& csv = {});

/// dtype recorded in a FABM file header.
Dtype peek_dtype(const std::filesystem::path& path);

void save_matrix(const Matrix& m, const std::filesystem::path& path, Dtype dtype = Dtype::f64);

/// Stream forms, used to embed matrices inside model files.
void write_matrix(std::ostream& out, const Matrix& m, Dtype dtype = Dtype::f64);
Matrix read_matrix(std::istream& in, const std::string& source_name);

Matrix parse_csv(std::istream& in, const CsvOptions& options, const std::string& source_name);

struct LabeledDataset {
    Matrix features;  // N x d
    Labels labels;    // length N, values in [0, num_classes)
    int num_classes = 2;

    Index size() const noexcept { return features.rows(); }
};

/// Checks labels.size() == rows, K >= 2 and every label in range.
void validate(const LabeledDataset& ds);

/// Labels are stored on disk as an N x 1 FABM matrix of integral values.
Labels labels_from_matrix(const Matrix& column);
Matrix labels_to_matrix(std::span<const int> labels);

struct EncodedLabels {
    Matrix matrix;                    // N x K
    std::vector<double> column_means; // length K, zero when not demeaned
    bool demeaned = false;
};

EncodedLabels one_hot_encode(std::span<const int> labels, int num_classes, bool demean);

/// Binary task: X, beta, eps i.i.d. N(0,1); label 1 iff X beta + eps is strictly above its sample median.
LabeledDataset synth_classification(Index n, Index d, std::uint64_t seed);

/// Rows [begin, end) of ds.
LabeledDataset slice_rows(const LabeledDataset& ds, Index begin, Index end);

/// Rows at the given indices, in the given order.
LabeledDataset take_rows(const LabeledDataset& ds, std::span<const Index> rows);

/// Exactly n_train / K rows per class go to train (sampled without replacement);
/// both outputs keep the original row order.
std::pair<LabeledDataset, LabeledDataset> train_test_split_stratified(const LabeledDataset& ds, Index n_train,
                                                                       std::uint64_t seed);

} // namespace fabr
