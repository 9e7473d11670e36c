#include "fabr/model_io.hpp"

#include "fabr/data_io.hpp"
#include "fabr/errors.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

namespace fabr {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'A', 'B', 'R'};

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const std::string& source) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw FormatError(fmt::format("{}: truncated model file", source));
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

std::string read_bytes(std::istream& in, std::uint64_t n, const std::string& source) {
    constexpr std::uint64_t kMaxText = 1ull << 30;
    if (n > kMaxText) throw FormatError(fmt::format("{}: implausible text length {}", source, n));
    std::string s(static_cast<std::size_t>(n), '\0');
    if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw FormatError(fmt::format("{}: truncated model file", source));
    }
    return s;
}

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt_one) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += fmt_one(items[i]);
    }
    return out;
}

using Header = std::map<std::string, std::string, std::less<>>;

class HeaderReader {
public:
    HeaderReader(const std::string& text, std::string source) : source_(std::move(source)) {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw FormatError(fmt::format("{}: bad header line '{}'", source_, line));
            values_[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }

    const std::string& text(std::string_view key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw FormatError(fmt::format("{}: header key '{}' missing", source_, key));
        return it->second;
    }

    template <typename T>
    T integer(std::string_view key) const {
        const std::string& s = text(key);
        T v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw FormatError(fmt::format("{}: header key '{}' is not an integer", source_, key));
        }
        return v;
    }

    double real(std::string_view key) const { return parse_real(text(key), key); }

    std::vector<double> reals(std::string_view key) const {
        std::vector<double> out;
        const std::string& s = text(key);
        if (s.empty()) return out;
        std::size_t start = 0;
        while (true) {
            const auto comma = s.find(',', start);
            out.push_back(parse_real(s.substr(start, comma - start), key));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    }

private:
    double parse_real(std::string_view s, std::string_view key) const {
        double v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw FormatError(fmt::format("{}: header key '{}' is not a number", source_, key));
        }
        return v;
    }

    std::string source_;
    Header values_;
};

std::string_view kind_name(SolverKind k) { return k == SolverKind::lowrank ? "lowrank" : "full"; }
std::string_view mode_name(SpectrumMode m) { return m == SpectrumMode::annihilate ? "annihilate" : "exact"; }

struct Section {
    std::string name;
    const Matrix* matrix;
};

void write_member(std::ostream& out, const DualModel& m, const SketchState* sketch) {
    std::string h;
    h += fmt::format("kind={}\n", kind_name(m.kind));
    h += fmt::format("seed={}\n", m.plan.master_seed);
    h += fmt::format("p={}\n", m.plan.total_features);
    h += fmt::format("p1={}\n", m.plan.block_width);
    h += fmt::format("activation={}\n", to_string(m.plan.activation));
    h += fmt::format("weight_scale={}\n", num(m.plan.weight_scale));
    h += fmt::format("input_dim={}\n", m.plan.input_dim);
    h += fmt::format("z={}\n", join(std::vector<double>(m.grid.values().begin(), m.grid.values().end()), num));
    h += fmt::format("mode={}\n", mode_name(m.mode));
    h += fmt::format("nu={}\n", m.rank_cap);
    h += fmt::format("num_classes={}\n", m.num_classes);
    h += fmt::format("demean={}\n", m.demeaned ? 1 : 0);
    h += fmt::format("n_train={}\n", m.n_train());
    h += fmt::format("label_means={}\n", join(m.final_solution.label_means, num));
    h += fmt::format("final_checkpoint={}\n", m.final_solution.checkpoint.value_or(0));
    std::vector<Index> cps;
    for (const auto& c : m.checkpoints) cps.push_back(c.checkpoint.value_or(0));
    h += fmt::format("checkpoints={}\n", join(cps, [](Index v) { return std::to_string(v); }));
    h += fmt::format("beta={}\n", m.beta.empty() ? 0 : 1);
    h += fmt::format("sketch={}\n", sketch ? 1 : 0);
    if (sketch) {
        h += fmt::format("sketch_blocks={}\n", sketch->blocks_folded);
        h += fmt::format("sketch_discarded_sum={}\n", num(sketch->discarded_sum));
        h += fmt::format("sketch_discarded_per_fold={}\n", join(sketch->discarded_per_fold, num));
    }

    std::vector<Section> sections;
    std::vector<std::string> names;
    sections.push_back({"train_inputs", &m.train_inputs});
    for (std::size_t zi = 0; zi < m.final_solution.q.size(); ++zi) {
        sections.push_back({fmt::format("q.final.{}", zi), &m.final_solution.q[zi]});
    }
    for (std::size_t c = 0; c < m.checkpoints.size(); ++c) {
        for (std::size_t zi = 0; zi < m.checkpoints[c].q.size(); ++zi) {
            sections.push_back({fmt::format("q.cp{}.{}", c, zi), &m.checkpoints[c].q[zi]});
        }
    }
    for (std::size_t zi = 0; zi < m.beta.size(); ++zi) {
        sections.push_back({fmt::format("beta.{}", zi), &m.beta[zi]});
    }
    Matrix values;
    if (sketch) {
        values = sketch->values;
        sections.push_back({"sketch.basis", &sketch->basis});
        sections.push_back({"sketch.values", &values});
    }

    put_le<std::uint64_t>(out, h.size());
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections.size()));
    for (const auto& s : sections) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
        out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
        write_matrix(out, *s.matrix, Dtype::f64);
    }
}

std::optional<Index> opt_checkpoint(Index v) {
    return v > 0 ? std::optional<Index>(v) : std::nullopt;
}

void read_member(std::istream& in, const std::string& source, DualModel& m, std::optional<SketchState>& sketch) {
    const auto header_len = get_le<std::uint64_t>(in, source);
    const HeaderReader h(read_bytes(in, header_len, source), source);

    const std::string& kind = h.text("kind");
    if (kind == "full") {
        m.kind = SolverKind::full;
    } else if (kind == "lowrank") {
        m.kind = SolverKind::lowrank;
    } else {
        throw FormatError(fmt::format("{}: unknown solver kind '{}'", source, kind));
    }
    m.plan.master_seed = h.integer<std::uint64_t>("seed");
    m.plan.total_features = h.integer<Index>("p");
    m.plan.block_width = h.integer<Index>("p1");
    m.plan.activation = parse_activation(h.text("activation"));
    m.plan.weight_scale = h.real("weight_scale");
    m.plan.input_dim = h.integer<Index>("input_dim");
    try {
        m.plan.validate();
        m.grid = RidgeGrid(h.reals("z"));
    } catch (const DomainError& e) {
        throw FormatError(fmt::format("{}: {}", source, e.what()));
    }
    const std::string& mode = h.text("mode");
    if (mode == "exact") {
        m.mode = SpectrumMode::exact;
    } else if (mode == "annihilate") {
        m.mode = SpectrumMode::annihilate;
    } else {
        throw FormatError(fmt::format("{}: unknown spectrum mode '{}'", source, mode));
    }
    m.rank_cap = h.integer<Index>("nu");
    m.num_classes = h.integer<int>("num_classes");
    m.demeaned = h.integer<int>("demean") != 0;
    const auto n_train = h.integer<Index>("n_train");
    const std::vector<double> means = h.reals("label_means");
    const std::vector<double> cp_values = h.reals("checkpoints");
    const bool has_beta = h.integer<int>("beta") != 0;
    const bool has_sketch = h.integer<int>("sketch") != 0;

    std::map<std::string, Matrix, std::less<>> sections;
    const auto count = get_le<std::uint32_t>(in, source);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get_le<std::uint32_t>(in, source);
        std::string name = read_bytes(in, len, source);
        sections[name] = read_matrix(in, fmt::format("{} [{}]", source, name));
    }
    auto take = [&](const std::string& name) {
        auto it = sections.find(name);
        if (it == sections.end()) throw FormatError(fmt::format("{}: section '{}' missing", source, name));
        return std::move(it->second);
    };

    m.train_inputs = take("train_inputs");
    if (m.train_inputs.rows() != n_train || m.train_inputs.cols() != m.plan.input_dim) {
        throw FormatError(fmt::format("{}: training inputs are {} x {}, header says {} x {}", source,
                                      m.train_inputs.rows(), m.train_inputs.cols(), n_train, m.plan.input_dim));
    }
    auto solution = [&](const std::string& prefix, Index checkpoint) {
        RidgeSolution s;
        s.label_means = means;
        s.n_train = n_train;
        s.checkpoint = opt_checkpoint(checkpoint);
        for (std::size_t zi = 0; zi < m.grid.size(); ++zi) {
            Matrix q = take(fmt::format("{}.{}", prefix, zi));
            if (q.rows() != n_train || q.cols() != static_cast<Index>(means.size())) {
                throw FormatError(fmt::format("{}: section {}.{} has shape {} x {}", source, prefix, zi, q.rows(),
                                              q.cols()));
            }
            s.q.push_back(std::move(q));
        }
        return s;
    };
    m.final_solution = solution("q.final", h.integer<Index>("final_checkpoint"));
    m.checkpoints.clear();
    for (std::size_t c = 0; c < cp_values.size(); ++c) {
        m.checkpoints.push_back(solution(fmt::format("q.cp{}", c), static_cast<Index>(cp_values[c])));
    }
    m.beta.clear();
    if (has_beta) {
        for (std::size_t zi = 0; zi < m.grid.size(); ++zi) m.beta.push_back(take(fmt::format("beta.{}", zi)));
    }
    sketch.reset();
    if (has_sketch) {
        SketchState s;
        s.basis = take("sketch.basis");
        const Matrix values = take("sketch.values");
        if (values.cols() != 1 || values.rows() != s.basis.cols()) {
            throw FormatError(fmt::format("{}: sketch values do not match the basis", source));
        }
        s.values = values.col(0);
        s.rank_cap = m.rank_cap;
        s.blocks_folded = h.integer<Index>("sketch_blocks");
        s.discarded_sum = h.real("sketch_discarded_sum");
        s.discarded_per_fold = h.reals("sketch_discarded_per_fold");
        sketch = std::move(s);
    }
}

} // namespace

void write_model(std::ostream& out, const ModelBundle& bundle) {
    if (!bundle.sketches.empty() && bundle.sketches.size() != bundle.members.size()) {
        throw DomainError("model bundle: sketches must be empty or one per member");
    }
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kModelVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.members.size()));
    for (std::size_t i = 0; i < bundle.members.size(); ++i) {
        write_member(out, bundle.members[i], bundle.sketches.empty() ? nullptr : &bundle.sketches[i]);
    }
}

ModelBundle read_model(std::istream& in, const std::string& source_name) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError(fmt::format("{}: not a model file", source_name));
    }
    const auto version = get_le<std::uint32_t>(in, source_name);
    if (version != kModelVersion) {
        throw FormatError(fmt::format("{}: unsupported model version {}", source_name, version));
    }
    const auto members = get_le<std::uint32_t>(in, source_name);
    if (members == 0) throw FormatError(fmt::format("{}: model has no members", source_name));
    ModelBundle bundle;
    std::vector<std::optional<SketchState>> sketches;
    for (std::uint32_t i = 0; i < members; ++i) {
        DualModel m;
        std::optional<SketchState> s;
        read_member(in, source_name, m, s);
        bundle.members.push_back(std::move(m));
        sketches.push_back(std::move(s));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError(fmt::format("{}: trailing bytes after the last member", source_name));
    }
    bool all = true;
    for (const auto& s : sketches) all = all && s.has_value();
    if (all) {
        for (auto& s : sketches) bundle.sketches.push_back(std::move(*s));
    }
    return bundle;
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing: {}", path.string(), std::strerror(errno)));
    write_model(out, bundle);
    out.flush();
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

ModelBundle load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}': {}", path.string(), std::strerror(errno)));
    return read_model(in, path.string());
}

} // namespace fabr
