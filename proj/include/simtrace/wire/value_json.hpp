// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "simtrace/wire/value.hpp"

namespace simtrace {

// JSON form of a Value, used for observation files:
//   1.5                              F64 (any JSON number)
//   {"int": 2}                       I64
//   true / false                     Bool
//   "text"                           String
//   {"shape": [4, 8, 8], "data": []} Tensor, row-major
// Doubles are written with enough digits to read back bit-identical.
std::string value_to_json(const Value& v);
Value value_from_json(const std::string& text);

void write_value_file(const std::string& path, const Value& v);
Value read_value_file(const std::string& path);

}  // namespace simtrace
