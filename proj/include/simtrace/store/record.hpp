// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "simtrace/trace/address.hpp"
#include "simtrace/trace/trace.hpp"

namespace simtrace::store {

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Pruned trace record. Per-entry log densities, trace totals, the weight and
// type_id are dropped and recomputed on read; so is an observation that the
// observed entries already imply.
//
//   u32 entry count
//   per entry: u8 kind | address | u32 instance | name | u8 flags | distribution | value | [f64 log_q]
//   u8 observation mode (0 none, 1 derived, 2 stored) | [value] | result value
//
// address and name are u32 dictionary ids, or inline strings when no
// dictionary is given. flags: bit0 control, bit1 replace, bit2 proposed, bit3 reused.
void encode_record(const Trace& t, AddressDictionary* dict, std::vector<std::uint8_t>& out);
Trace decode_record(std::span<const std::uint8_t> bytes, const AddressDictionary* dict);

// Encoded size with and without shorthand ids.
std::size_t record_size(const Trace& t, bool shorthand);

}  // namespace simtrace::store
