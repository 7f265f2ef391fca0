// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/wire/codec.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace simtrace::wire {

std::string to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::Handshake: return "Handshake";
        case MessageKind::HandshakeResult: return "HandshakeResult";
        case MessageKind::Run: return "Run";
        case MessageKind::RunResult: return "RunResult";
        case MessageKind::SampleRequest: return "SampleRequest";
        case MessageKind::SampleReply: return "SampleReply";
        case MessageKind::ObserveNotify: return "ObserveNotify";
        case MessageKind::ObserveAck: return "ObserveAck";
    }
    return "Unknown(" + std::to_string(static_cast<int>(kind)) + ")";
}

// ---- ByteWriter ----

void ByteWriter::u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::string(std::string_view s) {
    if (s.size() > kMaxPayloadSize) throw EncodeError("string", "string too long");
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
}

void ByteWriter::value(const Value& v) {
    u8(static_cast<std::uint8_t>(v.tag()));
    switch (v.tag()) {
        case ValueTag::F64: f64(v.as_f64()); break;
        case ValueTag::I64: i64(v.as_i64()); break;
        case ValueTag::Bool: boolean(v.as_bool()); break;
        case ValueTag::String: string(v.as_string()); break;
        case ValueTag::Tensor: {
            const auto& t = v.as_tensor();
            if (!t.consistent()) throw EncodeError("tensor", "tensor data length does not match shape");
            u32(static_cast<std::uint32_t>(t.shape.size()));
            for (auto d : t.shape) u32(d);
            for (double x : t.data) f64(x);
            break;
        }
    }
}

void ByteWriter::distribution(const Distribution& d) {
    try {
        d.validate();
    } catch (const InvalidDistribution& e) {
        throw EncodeError(e.field(), e.what());
    }
    u8(static_cast<std::uint8_t>(d.tag));
    u32(static_cast<std::uint32_t>(d.params.size()));
    for (double p : d.params) f64(p);
}

// ---- ByteReader ----

void ByteReader::need(std::size_t n) const {
    if (n > remaining()) throw ProtocolError("truncated field in payload");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return in_[pos_++];
}

std::uint16_t ByteReader::u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

bool ByteReader::boolean() {
    const auto b = u8();
    if (b > 1) throw ProtocolError("boolean byte must be 0 or 1");
    return b == 1;
}

std::string ByteReader::string() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
}

Value ByteReader::value() {
    const auto tag = u8();
    switch (static_cast<ValueTag>(tag)) {
        case ValueTag::F64: return f64();
        case ValueTag::I64: return i64();
        case ValueTag::Bool: return boolean();
        case ValueTag::String: return string();
        case ValueTag::Tensor: {
            const auto rank = u32();
            if (rank > 32) throw ProtocolError("tensor rank too large");
            TensorValue t;
            t.shape.resize(rank);
            for (auto& d : t.shape) d = u32();
            std::uint64_t count = 1;
            const std::uint64_t limit = remaining() / 8;
            const bool empty = std::find(t.shape.begin(), t.shape.end(), 0u) != t.shape.end();
            for (auto d : t.shape) {
                if (empty) {
                    count = 0;
                    break;
                }
                if (count > limit / d) throw ProtocolError("tensor larger than payload");
                count *= d;
            }
            need(count * 8);
            t.data.resize(count);
            for (auto& x : t.data) x = f64();
            return Value(std::move(t));
        }
    }
    throw ProtocolError("unknown value tag " + std::to_string(tag));
}

Distribution ByteReader::distribution() {
    const auto tag = u8();
    if (tag < 1 || tag > 6) throw ProtocolError("unknown distribution tag " + std::to_string(tag));
    const auto n = u32();
    need(std::uint64_t{n} * 8);
    Distribution d{static_cast<DistTag>(tag), std::vector<double>(n)};
    for (auto& p : d.params) p = f64();
    try {
        d.validate();
    } catch (const InvalidDistribution& e) {
        throw ProtocolError(std::string("invalid distribution: ") + e.what());
    }
    return d;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
}

// ---- messages ----

namespace {

struct BodyWriter {
    ByteWriter& w;
    void operator()(const Handshake& m) const {
        w.u8(m.version);
        w.string(m.system_name);
    }
    void operator()(const HandshakeResult& m) const {
        w.u8(m.version);
        w.string(m.system_name);
        w.string(m.model_name);
    }
    void operator()(const Run& m) const {
        w.boolean(m.observation.has_value());
        if (m.observation) w.value(*m.observation);
    }
    void operator()(const RunResult& m) const { w.value(m.result); }
    void operator()(const SampleRequest& m) const {
        if (m.address.empty()) throw EncodeError("address", "sample address must be nonempty");
        w.string(m.address);
        w.string(m.name);
        w.distribution(m.distribution);
        w.boolean(m.control);
        w.boolean(m.replace);
    }
    void operator()(const SampleReply& m) const { w.value(m.value); }
    void operator()(const ObserveNotify& m) const {
        if (m.address.empty()) throw EncodeError("address", "observe address must be nonempty");
        w.string(m.address);
        w.distribution(m.distribution);
        w.value(m.observed_value);
    }
    void operator()(const ObserveAck&) const {}
};

Message read_body(MessageKind kind, ByteReader& r) {
    switch (kind) {
        case MessageKind::Handshake: {
            Handshake m;
            m.version = r.u8();
            m.system_name = r.string();
            return m;
        }
        case MessageKind::HandshakeResult: {
            HandshakeResult m;
            m.version = r.u8();
            m.system_name = r.string();
            m.model_name = r.string();
            return m;
        }
        case MessageKind::Run: {
            Run m;
            if (r.boolean()) m.observation = r.value();
            return m;
        }
        case MessageKind::RunResult: return RunResult{r.value()};
        case MessageKind::SampleRequest: {
            SampleRequest m;
            m.address = r.string();
            if (m.address.empty()) throw ProtocolError("empty sample address");
            m.name = r.string();
            m.distribution = r.distribution();
            m.control = r.boolean();
            m.replace = r.boolean();
            return m;
        }
        case MessageKind::SampleReply: return SampleReply{r.value()};
        case MessageKind::ObserveNotify: {
            ObserveNotify m;
            m.address = r.string();
            if (m.address.empty()) throw ProtocolError("empty observe address");
            m.distribution = r.distribution();
            m.observed_value = r.value();
            return m;
        }
        case MessageKind::ObserveAck: return ObserveAck{};
    }
    throw ProtocolError("unknown message kind " + std::to_string(static_cast<int>(kind)));
}

}  // namespace

void encode_into(const Message& m, std::vector<std::uint8_t>& out) {
    const auto start = out.size();
    ByteWriter w(out);
    w.u32(0);
    w.u8(static_cast<std::uint8_t>(kind_of(m)));
    std::visit(BodyWriter{w}, m);
    const auto payload = out.size() - start - kFrameHeaderSize;
    if (payload > kMaxPayloadSize) {
        out.resize(start);
        throw EncodeError("payload", "message exceeds maximum payload size");
    }
    for (int i = 0; i < 4; ++i) out[start + i] = static_cast<std::uint8_t>(payload >> (8 * i));
}

std::vector<std::uint8_t> encode(const Message& m) {
    std::vector<std::uint8_t> out;
    encode_into(m, out);
    return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameHeaderSize) return NeedMoreBytes{kFrameHeaderSize - bytes.size()};
    std::size_t payload = 0;
    for (int i = 0; i < 4; ++i) payload |= static_cast<std::size_t>(bytes[i]) << (8 * i);
    if (payload == 0) throw ProtocolError("empty payload");
    if (payload > kMaxPayloadSize) throw ProtocolError("payload length exceeds limit");
    const auto total = kFrameHeaderSize + payload;
    if (bytes.size() < total) return NeedMoreBytes{total - bytes.size()};

    ByteReader r(bytes.subspan(kFrameHeaderSize, payload));
    const auto kind = r.u8();
    if (kind < 1 || kind > 8) throw ProtocolError("unknown message kind byte " + std::to_string(kind));
    Message m = read_body(static_cast<MessageKind>(kind), r);
    if (r.remaining() != 0) throw ProtocolError("trailing bytes in payload");
    return Decoded{std::move(m), total};
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789ABCDEF";
    std::string s;
    s.reserve(bytes.size() * 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) s.push_back(' ');
        s.push_back(digits[bytes[i] >> 4]);
        s.push_back(digits[bytes[i] & 0xF]);
    }
    return s;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    std::vector<std::uint8_t> out;
    int hi = -1;
    for (char c : hex) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else continue;  // separators
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<std::uint8_t>(hi << 4 | v));
            hi = -1;
        }
    }
    if (hi >= 0) throw std::invalid_argument("odd number of hex digits");
    return out;
}

}  // namespace simtrace::wire
