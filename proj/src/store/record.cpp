// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/store/record.hpp"

#include "simtrace/wire/codec.hpp"

namespace simtrace::store {

namespace {

enum : std::uint8_t { kControl = 1, kReplace = 2, kProposed = 4, kReused = 8 };
enum : std::uint8_t { kNoObservation = 0, kDerived = 1, kStored = 2 };

void put_string(wire::ByteWriter& w, const std::string& s, AddressDictionary* dict) {
    if (dict) {
        w.u32(dict->intern(s));
    } else {
        w.string(s);
    }
}

std::string get_string(wire::ByteReader& r, const AddressDictionary* dict) {
    if (!dict) return r.string();
    const auto id = r.u32();
    if (id >= dict->size()) throw StoreError("record refers to unknown dictionary id " + std::to_string(id));
    return dict->lookup(id);
}

}  // namespace

void encode_record(const Trace& t, AddressDictionary* dict, std::vector<std::uint8_t>& out) {
    wire::ByteWriter w(out);
    w.u32(static_cast<std::uint32_t>(t.entries.size()));
    for (const auto& e : t.entries) {
        w.u8(static_cast<std::uint8_t>(e.kind));
        put_string(w, e.address.full, dict);
        w.u32(e.address.instance);
        put_string(w, e.name, dict);
        const std::uint8_t flags = (e.control ? kControl : 0) | (e.replace ? kReplace : 0) |
                                   (e.proposed ? kProposed : 0) | (e.reused ? kReused : 0);
        w.u8(flags);
        w.distribution(e.distribution);
        w.value(e.value);
        if (e.proposed) w.f64(e.log_q);
    }
    if (!t.observation) {
        w.u8(kNoObservation);
    } else if (derive_observation(t.entries) == t.observation) {
        w.u8(kDerived);
    } else {
        w.u8(kStored);
        w.value(*t.observation);
    }
    w.value(t.result);
}

Trace decode_record(std::span<const std::uint8_t> bytes, const AddressDictionary* dict) {
    try {
        wire::ByteReader r(bytes);
        Trace t;
        const auto n = r.u32();
        if (n > r.remaining()) throw StoreError("entry count exceeds record size");
        t.entries.resize(n);
        for (auto& e : t.entries) {
            const auto kind = r.u8();
            if (kind > 2) throw StoreError("bad entry kind " + std::to_string(kind));
            e.kind = static_cast<EntryKind>(kind);
            e.address.full = get_string(r, dict);
            e.address.instance = r.u32();
            e.name = get_string(r, dict);
            const auto flags = r.u8();
            e.control = flags & kControl;
            e.replace = flags & kReplace;
            e.proposed = flags & kProposed;
            e.reused = flags & kReused;
            e.distribution = r.distribution();
            e.value = r.value();
            if (e.proposed) e.log_q = r.f64();
            e.log_prob = e.distribution.log_density(e.value);
        }
        const auto mode = r.u8();
        if (mode == kDerived) {
            t.observation = derive_observation(t.entries);
        } else if (mode == kStored) {
            t.observation = r.value();
        } else if (mode != kNoObservation) {
            throw StoreError("bad observation mode " + std::to_string(mode));
        }
        t.result = r.value();
        if (r.remaining() != 0) throw StoreError("trailing bytes in trace record");
        t.finalize();
        return t;
    } catch (const wire::ProtocolError& e) {
        throw StoreError(std::string("corrupt trace record: ") + e.what());
    }
}

std::size_t record_size(const Trace& t, bool shorthand) {
    std::vector<std::uint8_t> out;
    AddressDictionary dict;
    encode_record(t, shorthand ? &dict : nullptr, out);
    return out.size();
}

}  // namespace simtrace::store
