#include "wsgat/autodiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "wsgat/errors.hpp"

namespace wsgat::autodiff {

namespace {

constexpr char kMagic[8] = {'W', 'S', 'G', 'A', 'T', 'C', 'K', '1'};

template <class T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw CheckpointError("checkpoint truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& arrays) {
    out.write(kMagic, sizeof(kMagic));
    put_le<std::uint64_t>(out, arrays.size());
    for (const auto& a : arrays) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        put_le<std::uint32_t>(out, 2);
        put_le<std::uint64_t>(out, a.value.rows());
        put_le<std::uint64_t>(out, a.value.cols());
        for (double v : a.value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw CheckpointError("checkpoint write failed");
}

std::vector<NamedArray> read_checkpoint(std::istream& in) {
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw CheckpointError("not a checkpoint file (bad magic)");
    const auto count = get_le<std::uint64_t>(in);
    std::vector<NamedArray> arrays;
    for (std::uint64_t k = 0; k < count; ++k) {
        NamedArray a;
        const auto name_len = get_le<std::uint32_t>(in);
        a.name.resize(name_len);
        if (!in.read(a.name.data(), name_len)) throw CheckpointError("checkpoint truncated");
        const auto ndim = get_le<std::uint32_t>(in);
        if (ndim != 2) throw CheckpointError("unsupported ndim " + std::to_string(ndim));
        const auto rows = get_le<std::uint64_t>(in);
        const auto cols = get_le<std::uint64_t>(in);
        std::vector<double> values(rows * cols);
        for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
        a.value = Matrix(rows, cols, std::move(values));
        arrays.push_back(std::move(a));
    }
    return arrays;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
    write_checkpoint(out, arrays);
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
    return read_checkpoint(in);
}

}  // namespace wsgat::autodiff
