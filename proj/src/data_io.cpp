#include "fabr/data_io.hpp"

#include "fabr/errors.hpp"
#include "fabr/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace fabr {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'A', 'B', 'M'};

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(p[i]) << (8 * i);
    }
    return value;
}

std::string os_error(const std::filesystem::path& path, const char* what) {
    return fmt::format("{} '{}': {}", what, path.string(), std::strerror(errno));
}

void check_finite(const Matrix& m, const std::string& source) {
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (!std::isfinite(m(r, c))) {
                throw DataError(fmt::format("{}: non-finite value at row {}, col {}", source, r, c));
            }
        }
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace

void write_matrix(std::ostream& out, const Matrix& m, Dtype dtype) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kFabmVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    const std::array<char, 3> reserved{};
    out.write(reserved.data(), reserved.size());
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));

    const std::size_t width = dtype == Dtype::f32 ? 4 : 8;
    std::vector<char> row(static_cast<std::size_t>(m.cols()) * width);
    for (Index r = 0; r < m.rows(); ++r) {
        char* p = row.data();
        for (Index c = 0; c < m.cols(); ++c) {
            if (dtype == Dtype::f32) {
                const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
                for (int i = 0; i < 4; ++i) *p++ = static_cast<char>((bits >> (8 * i)) & 0xFF);
            } else {
                const auto bits = std::bit_cast<std::uint64_t>(m(r, c));
                for (int i = 0; i < 8; ++i) *p++ = static_cast<char>((bits >> (8 * i)) & 0xFF);
            }
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

Matrix read_matrix(std::istream& in, const std::string& source_name) {
    std::array<unsigned char, kFabmHeaderBytes> header{};
    if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
        throw FormatError(fmt::format("{}: truncated FABM header", source_name));
    }
    if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError(fmt::format("{}: bad magic bytes", source_name));
    }
    const auto version = get_le<std::uint32_t>(header.data() + 4);
    if (version != kFabmVersion) {
        throw FormatError(fmt::format("{}: unsupported FABM version {}", source_name, version));
    }
    const std::uint8_t code = header[8];
    if (code != 1 && code != 2) {
        throw FormatError(fmt::format("{}: unknown dtype code {}", source_name, code));
    }
    if (header[9] != 0 || header[10] != 0 || header[11] != 0) {
        throw FormatError(fmt::format("{}: reserved header bytes are not zero", source_name));
    }
    const auto rows = get_le<std::uint64_t>(header.data() + 12);
    const auto cols = get_le<std::uint64_t>(header.data() + 20);
    const std::size_t width = code == 1 ? 4 : 8;
    constexpr auto kMaxElems = static_cast<std::uint64_t>(std::numeric_limits<Index>::max()) / 8;
    if (rows > kMaxElems || cols > kMaxElems || (cols != 0 && rows > kMaxElems / cols)) {
        throw FormatError(fmt::format("{}: implausible dimensions {} x {}", source_name, rows, cols));
    }

    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    std::vector<unsigned char> row(static_cast<std::size_t>(cols) * width);
    for (Index r = 0; r < m.rows(); ++r) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()))) {
            throw FormatError(fmt::format("{}: payload truncated at row {}", source_name, r));
        }
        const unsigned char* p = row.data();
        for (Index c = 0; c < m.cols(); ++c, p += width) {
            m(r, c) = width == 4 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                                 : std::bit_cast<double>(get_le<std::uint64_t>(p));
        }
    }
    check_finite(m, source_name);
    return m;
}

Matrix parse_csv(std::istream& in, const CsvOptions& options, const std::string& source_name) {
    std::vector<double> values;
    Index cols = -1;
    Index rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.skip_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        Index count = 0;
        std::string_view rest = line;
        for (;;) {
            const auto comma = rest.find(',');
            const std::string_view field = trim(rest.substr(0, comma));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size()) {
                throw FormatError(
                    fmt::format("{}: line {}: cannot parse '{}' as a number", source_name, line_no, field));
            }
            if (!std::isfinite(v)) {
                throw DataError(fmt::format("{}: non-finite value at row {}, col {}", source_name, rows, count));
            }
            values.push_back(v);
            ++count;
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cols >= 0 && count != cols) {
            throw FormatError(
                fmt::format("{}: line {} has {} fields, expected {}", source_name, line_no, count, cols));
        }
        cols = count;
        ++rows;
    }
    Matrix m(rows, std::max<Index>(cols, 0));
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            m(r, c) = values[static_cast<std::size_t>(r * m.cols() + c)];
        }
    }
    return m;
}

Matrix load_matrix(const std::filesystem::path& path, const CsvOptions& csv) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(os_error(path, "cannot open"));
    }
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    const bool is_fabm = in.gcount() == 4 && magic == kMagic;
    in.clear();
    in.seekg(0);
    if (!is_fabm) {
        return parse_csv(in, csv, path.string());
    }
    Matrix m = read_matrix(in, path.string());
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError(fmt::format("{}: trailing bytes after payload", path.string()));
    }
    return m;
}

Dtype peek_dtype(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(os_error(path, "cannot open"));
    }
    std::array<char, 9> head{};
    if (!in.read(head.data(), head.size()) || std::memcmp(head.data(), kMagic.data(), 4) != 0) {
        throw FormatError(fmt::format("{}: not a FABM file", path.string()));
    }
    const auto code = static_cast<std::uint8_t>(head[8]);
    if (code != 1 && code != 2) {
        throw FormatError(fmt::format("{}: unknown dtype code {}", path.string(), code));
    }
    return static_cast<Dtype>(code);
}

void save_matrix(const Matrix& m, const std::filesystem::path& path, Dtype dtype) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(os_error(path, "cannot open for writing"));
    }
    write_matrix(out, m, dtype);
    out.flush();
    if (!out) {
        throw IoError(os_error(path, "write failed"));
    }
}

void validate(const LabeledDataset& ds) {
    if (ds.num_classes < 2) {
        throw DomainError(fmt::format("num_classes must be >= 2, got {}", ds.num_classes));
    }
    if (static_cast<Index>(ds.labels.size()) != ds.features.rows()) {
        throw DomainError(
            fmt::format("{} labels for {} feature rows", ds.labels.size(), ds.features.rows()));
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
            throw DomainError(fmt::format("label {} at row {} outside [0, {})", ds.labels[i], i, ds.num_classes));
        }
    }
}

Labels labels_from_matrix(const Matrix& column) {
    if (column.cols() != 1 && column.rows() > 0) {
        throw FormatError(fmt::format("label matrix must have one column, got {}", column.cols()));
    }
    Labels labels(static_cast<std::size_t>(column.rows()));
    for (Index i = 0; i < column.rows(); ++i) {
        const double v = column(i, 0);
        if (v != std::floor(v) || v < 0 || v > std::numeric_limits<int>::max()) {
            throw DataError(fmt::format("label at row {} is not a non-negative integer: {}", i, v));
        }
        labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
    }
    return labels;
}

Matrix labels_to_matrix(std::span<const int> labels) {
    Matrix m(static_cast<Index>(labels.size()), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        m(static_cast<Index>(i), 0) = labels[i];
    }
    return m;
}

EncodedLabels one_hot_encode(std::span<const int> labels, int num_classes, bool demean) {
    if (num_classes < 1) {
        throw DomainError("num_classes must be positive");
    }
    const auto n = static_cast<Index>(labels.size());
    EncodedLabels out;
    out.matrix = Matrix::Zero(n, num_classes);
    out.column_means.assign(static_cast<std::size_t>(num_classes), 0.0);
    out.demeaned = demean;
    for (Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= num_classes) {
            throw DomainError(fmt::format("label {} at row {} outside [0, {})", y, i, num_classes));
        }
        out.matrix(i, y) = 1.0;
    }
    if (demean && n > 0) {
        for (int k = 0; k < num_classes; ++k) {
            const double mean = out.matrix.col(k).sum() / static_cast<double>(n);
            out.column_means[static_cast<std::size_t>(k)] = mean;
            out.matrix.col(k).array() -= mean;
        }
    }
    return out;
}

LabeledDataset synth_classification(Index n, Index d, std::uint64_t seed) {
    if (n < 2 || d < 1) {
        throw DomainError(fmt::format("synth_classification needs n >= 2 and d >= 1 (got n={}, d={})", n, d));
    }
    LabeledDataset ds;
    ds.num_classes = 2;
    ds.features.resize(n, d);

    const NormalStream xs(seed, stream::id(stream::kSynthFeatures, 0));
    const NormalStream bs(seed, stream::id(stream::kSynthCoefficients, 0));
    const NormalStream es(seed, stream::id(stream::kSynthNoise, 0));

    std::vector<double> row(static_cast<std::size_t>(d));
    for (Index i = 0; i < n; ++i) {
        xs.fill(static_cast<std::uint64_t>(i * d), row.data(), static_cast<std::uint64_t>(d));
        for (Index j = 0; j < d; ++j) ds.features(i, j) = row[static_cast<std::size_t>(j)];
    }
    Vector beta(d);
    bs.fill(0, beta.data(), static_cast<std::uint64_t>(d));
    Vector noise(n);
    es.fill(0, noise.data(), static_cast<std::uint64_t>(n));

    const Vector response = ds.features * beta + noise;
    std::vector<double> sorted(response.data(), response.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const auto half = static_cast<std::size_t>(n / 2);
    const double median = (n % 2 == 1) ? sorted[half] : 0.5 * (sorted[half - 1] + sorted[half]);

    ds.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        ds.labels[static_cast<std::size_t>(i)] = response(i) > median ? 1 : 0;
    }
    return ds;
}

LabeledDataset slice_rows(const LabeledDataset& ds, Index begin, Index end) {
    if (begin < 0 || end < begin || end > ds.size()) {
        throw DomainError(fmt::format("row slice [{}, {}) outside [0, {})", begin, end, ds.size()));
    }
    LabeledDataset out;
    out.num_classes = ds.num_classes;
    out.features = ds.features.middleRows(begin, end - begin);
    out.labels.assign(ds.labels.begin() + begin, ds.labels.begin() + end);
    return out;
}

LabeledDataset take_rows(const LabeledDataset& ds, std::span<const Index> rows) {
    LabeledDataset out;
    out.num_classes = ds.num_classes;
    out.features.resize(static_cast<Index>(rows.size()), ds.features.cols());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Index>(i)) = ds.features.row(rows[i]);
        out.labels[i] = ds.labels[static_cast<std::size_t>(rows[i])];
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split_stratified(const LabeledDataset& ds, Index n_train,
                                                                       std::uint64_t seed) {
    validate(ds);
    const int k = ds.num_classes;
    if (n_train < 0 || n_train % k != 0) {
        throw DomainError(fmt::format("n_train={} is not divisible by the number of classes {}", n_train, k));
    }
    const Index per_class = n_train / k;

    std::vector<std::vector<Index>> members(static_cast<std::size_t>(k));
    for (Index i = 0; i < ds.size(); ++i) {
        members[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
    }

    std::vector<char> in_train(static_cast<std::size_t>(ds.size()), 0);
    for (int c = 0; c < k; ++c) {
        auto& idx = members[static_cast<std::size_t>(c)];
        if (static_cast<Index>(idx.size()) < per_class) {
            throw DomainError(fmt::format("class {} has {} rows, needs {} for the training split", c, idx.size(),
                                          per_class));
        }
        // Partial Fisher-Yates: the first per_class slots become a uniform sample.
        UniformSequence rng(seed, stream::id(stream::kSplitShuffle, static_cast<std::uint64_t>(c)));
        for (Index i = 0; i < per_class; ++i) {
            const auto remaining = static_cast<std::uint64_t>(idx.size()) - static_cast<std::uint64_t>(i);
            const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.below(remaining));
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
            in_train[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
        }
    }

    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    for (Index i = 0; i < ds.size(); ++i) {
        (in_train[static_cast<std::size_t>(i)] ? train_rows : test_rows).push_back(i);
    }
    return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

} // namespace fabr
