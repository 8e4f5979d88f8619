#ifndef WSGAT_AUTODIFF_CHECKPOINT_HPP
#define WSGAT_AUTODIFF_CHECKPOINT_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wsgat/autodiff/matrix.hpp"

namespace wsgat::autodiff {

struct NamedArray {
    std::string name;
    Matrix value;
};

// Checkpoint layout, all integers little-endian:
//
//   magic   8 bytes  "WSGATCK1"
//   count   u64      number of arrays
//   repeated count times:
//     name_len u32, name bytes (UTF-8, no terminator)
//     ndim     u32 (always 2 here)
//     dims     ndim x u64 (rows, cols)
//     values   rows*cols x f64 (IEEE-754 binary64, row-major)

void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

}  // namespace wsgat::autodiff

#endif  // WSGAT_AUTODIFF_CHECKPOINT_HPP
