// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/tensor/archive.hpp"

#include <fstream>
#include <iterator>

#include "simtrace/wire/codec.hpp"

namespace simtrace::nn {

namespace {
constexpr char kMagic[4] = {'S', 'T', 'N', 'A'};
}  // namespace

const Tensor& Archive::at(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw ArchiveError("archive has no tensor named '" + name + "'");
}

bool Archive::contains(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return true;
    }
    return false;
}

std::vector<std::uint8_t> serialize_archive(const Archive& a) {
    std::vector<std::uint8_t> out;
    wire::ByteWriter w(out);
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kArchiveVersion);
    w.u16(0);
    w.u32(static_cast<std::uint32_t>(a.metadata.size()));
    for (const auto& [k, v] : a.metadata) {
        w.string(k);
        w.string(v);
    }
    w.u32(static_cast<std::uint32_t>(a.tensors.size()));
    for (const auto& [name, t] : a.tensors) {
        w.string(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double x : t.vec()) w.f64(x);
    }
    return out;
}

Archive deserialize_archive(std::span<const std::uint8_t> bytes) {
    try {
        wire::ByteReader r(bytes);
        for (char c : kMagic) {
            if (r.u8() != static_cast<std::uint8_t>(c)) throw ArchiveError("not a tensor archive (bad magic)");
        }
        const auto version = r.u16();
        if (version != kArchiveVersion) {
            throw ArchiveError("unsupported archive version " + std::to_string(version));
        }
        r.u16();
        Archive a;
        const auto meta = r.u32();
        for (std::uint32_t i = 0; i < meta; ++i) {
            auto k = r.string();
            a.metadata[k] = r.string();
        }
        const auto count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            auto name = r.string();
            const auto rank = r.u32();
            if (rank > 8) throw ArchiveError("tensor '" + name + "' has implausible rank");
            Shape shape(rank);
            std::uint64_t n = 1;
            for (auto& d : shape) {
                d = r.u32();
                n *= d;
                if (n * 8 > r.remaining()) throw ArchiveError("tensor '" + name + "' truncated");
            }
            std::vector<double> data(n);
            for (auto& x : data) x = r.f64();
            a.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
        }
        if (r.remaining() != 0) throw ArchiveError("trailing bytes after archive");
        return a;
    } catch (const wire::ProtocolError& e) {
        throw ArchiveError(std::string("corrupt archive: ") + e.what());
    }
}

void save_archive(const Archive& a, const std::filesystem::path& path) {
    const auto bytes = serialize_archive(a);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ArchiveError("cannot write " + tmp);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw ArchiveError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Archive load_archive(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArchiveError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_archive(bytes);
}

}  // namespace simtrace::nn
