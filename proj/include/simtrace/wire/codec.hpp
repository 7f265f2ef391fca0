// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "simtrace/wire/message.hpp"

namespace simtrace::wire {

// Frame layout: u32 LE payload length, then payload = kind byte + fields.
// Field encodings (all little-endian):
//   string  : u32 byte length + UTF-8 bytes
//   bool    : 1 byte (0 or 1)
//   f64     : IEEE-754 binary64
//   Value   : tag byte, then F64 f64 | I64 i64 | Bool u8 | String string |
//             Tensor (u32 rank, rank x u32 dims, prod(dims) x f64)
//   Distribution : tag byte, u32 parameter count, count x f64
inline constexpr std::size_t kFrameHeaderSize = 4;
inline constexpr std::size_t kMaxPayloadSize = std::size_t{1} << 30;

class EncodeError : public std::runtime_error {
public:
    EncodeError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NeedMoreBytes {
    std::size_t count = 0;  // bytes missing before the frame can be decoded
    friend bool operator==(const NeedMoreBytes&, const NeedMoreBytes&) = default;
};

struct Decoded {
    Message message;
    std::size_t consumed = 0;  // full frame length including the header
};

using DecodeResult = std::variant<Decoded, NeedMoreBytes>;

// Throws EncodeError when a field violates its invariants.
std::vector<std::uint8_t> encode(const Message& m);
void encode_into(const Message& m, std::vector<std::uint8_t>& out);

// Decodes the first frame in `bytes`. Throws ProtocolError on malformed payloads.
DecodeResult decode(std::span<const std::uint8_t> bytes);

// Shared low-level field codecs, reused by the trace record format.
class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);
    void boolean(bool v) { u8(v ? 1 : 0); }
    void string(std::string_view s);
    void value(const Value& v);
    void distribution(const Distribution& d);
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    std::size_t size() const { return out_.size(); }

private:
    std::vector<std::uint8_t>& out_;
};

// Bounds-checked reader; throws ProtocolError on any overrun or bad field.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();
    bool boolean();
    std::string string();
    Value value();
    Distribution distribution();
    std::span<const std::uint8_t> bytes(std::size_t n);
    std::size_t remaining() const { return in_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const;
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace simtrace::wire
