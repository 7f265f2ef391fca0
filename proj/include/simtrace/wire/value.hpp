// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace simtrace {

enum class ValueTag : std::uint8_t {
    F64 = 1,
    I64 = 2,
    Bool = 3,
    String = 4,
    Tensor = 5,
};

// Dense row-major f64 array carried on the wire.
struct TensorValue {
    std::vector<std::uint32_t> shape;
    std::vector<double> data;

    std::size_t element_count() const;
    bool consistent() const { return element_count() == data.size(); }
};

bool operator==(const TensorValue& a, const TensorValue& b);

// Tagged scalar/tensor payload. Equality on doubles is bitwise, so NaN payloads
// compare equal to themselves and -0.0 differs from 0.0.
class Value {
public:
    using Storage = std::variant<double, std::int64_t, bool, std::string, TensorValue>;

    Value() : storage_(0.0) {}
    Value(double v) : storage_(v) {}  // NOLINT(google-explicit-constructor)
    Value(std::int64_t v) : storage_(v) {}  // NOLINT
    Value(int v) : storage_(static_cast<std::int64_t>(v)) {}  // NOLINT
    Value(bool v) : storage_(v) {}  // NOLINT
    Value(std::string v) : storage_(std::move(v)) {}  // NOLINT
    Value(const char* v) : storage_(std::string(v)) {}  // NOLINT
    Value(TensorValue v) : storage_(std::move(v)) {}  // NOLINT

    static Value tensor(std::vector<std::uint32_t> shape, std::vector<double> data);

    ValueTag tag() const { return static_cast<ValueTag>(storage_.index() + 1); }
    bool is_f64() const { return std::holds_alternative<double>(storage_); }
    bool is_i64() const { return std::holds_alternative<std::int64_t>(storage_); }
    bool is_bool() const { return std::holds_alternative<bool>(storage_); }
    bool is_string() const { return std::holds_alternative<std::string>(storage_); }
    bool is_tensor() const { return std::holds_alternative<TensorValue>(storage_); }

    double as_f64() const { return std::get<double>(storage_); }
    std::int64_t as_i64() const { return std::get<std::int64_t>(storage_); }
    bool as_bool() const { return std::get<bool>(storage_); }
    const std::string& as_string() const { return std::get<std::string>(storage_); }
    const TensorValue& as_tensor() const { return std::get<TensorValue>(storage_); }

    // Numeric view: F64 as is, I64 and Bool converted. Throws for String/Tensor.
    double to_double() const;
    // Flattened numeric view; scalars yield a single element.
    std::vector<double> flatten() const;

    const Storage& storage() const { return storage_; }

    friend bool operator==(const Value& a, const Value& b);

private:
    Storage storage_;
};

std::string to_string(ValueTag tag);
std::string to_string(const Value& v);

}  // namespace simtrace
