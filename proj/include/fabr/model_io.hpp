#pragma once

#include "fabr/lowrank_solver.hpp"
#include "fabr/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace fabr {

// Model file layout (little-endian):
//   "FABR" | u32 version | u32 member count
//   per member: u64 header length | header text (key=value lines)
//               | u32 section count | sections
//   section: u32 name length | name | embedded FABM matrix (f64)
inline constexpr std::uint32_t kModelVersion = 1;

/// One fitted model or every member of a mini-batch ensemble. `sketches` is either empty or
/// parallel to `members` (the final (V, d) pair of each low-rank member).
struct ModelBundle {
    std::vector<DualModel> members;
    std::vector<SketchState> sketches;
};

void write_model(std::ostream& out, const ModelBundle& bundle);
ModelBundle read_model(std::istream& in, const std::string& source_name);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
/// Throws IoError when the file cannot be opened and FormatError when it is malformed.
ModelBundle load_model(const std::filesystem::path& path);

} // namespace fabr
