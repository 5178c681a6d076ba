// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace a1o {

namespace {

constexpr char kMagic[4] = {'A', '1', 'O', 'C'};

template <typename T>
void put_le(std::ostream& out, T value)
{
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in)
{
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw CheckpointError("checkpoint truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::map<std::string, Tensor>& tensors)
{
    if (tensors.size() > std::numeric_limits<std::uint32_t>::max()) throw CheckpointError("too many tensors");
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [path, t] : tensors) {
        if (path.size() > std::numeric_limits<std::uint16_t>::max()) throw CheckpointError("path too long: " + path);
        if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw CheckpointError("rank too large: " + path);
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(path.size()));
        out.write(path.data(), static_cast<std::streamsize>(path.size()));
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
        for (auto e : t.shape()) {
            if (e > std::numeric_limits<std::uint32_t>::max()) throw CheckpointError("extent too large: " + path);
            put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
        }
        for (auto v : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw CheckpointError("checkpoint write failed");
}

std::map<std::string, Tensor> read_checkpoint(std::istream& in)
{
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto count = get_le<std::uint32_t>(in);
    std::map<std::string, Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get_le<std::uint16_t>(in);
        std::string path(len, '\0');
        if (!in.read(path.data(), len)) throw CheckpointError("checkpoint truncated in path");
        const auto rank = get_le<std::uint8_t>(in);
        Shape shape(rank);
        for (auto& e : shape) e = get_le<std::uint32_t>(in);
        std::vector<double> values(shape_size(shape));
        for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
        try {
            if (!out.emplace(path, Tensor(std::move(shape), std::move(values))).second)
                throw CheckpointError("duplicate path in checkpoint: " + path);
        } catch (const DimensionError& e) {
            throw CheckpointError("bad tensor '" + path + "': " + e.what());
        } catch (const ContractError& e) {
            throw CheckpointError("bad tensor '" + path + "': " + e.what());
        }
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& file, const std::map<std::string, Tensor>& tensors)
{
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + file.string() + " for writing");
    write_checkpoint(out, tensors);
}

std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + file.string());
    return read_checkpoint(in);
}

}  // namespace a1o
