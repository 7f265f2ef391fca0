// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/wire/value.hpp"

#include <bit>
#include <sstream>
#include <stdexcept>

namespace simtrace {

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

std::size_t TensorValue::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

bool operator==(const TensorValue& a, const TensorValue& b) {
    if (a.shape != b.shape || a.data.size() != b.data.size()) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (!same_bits(a.data[i], b.data[i])) return false;
    }
    return true;
}

Value Value::tensor(std::vector<std::uint32_t> shape, std::vector<double> data) {
    TensorValue t{std::move(shape), std::move(data)};
    if (!t.consistent()) throw std::invalid_argument("tensor data length does not match shape");
    return Value(std::move(t));
}

double Value::to_double() const {
    switch (tag()) {
        case ValueTag::F64: return as_f64();
        case ValueTag::I64: return static_cast<double>(as_i64());
        case ValueTag::Bool: return as_bool() ? 1.0 : 0.0;
        case ValueTag::Tensor:
            if (as_tensor().data.size() == 1) return as_tensor().data[0];
            break;
        case ValueTag::String: break;
    }
    throw std::invalid_argument("value of tag " + to_string(tag()) + " is not a numeric scalar");
}

std::vector<double> Value::flatten() const {
    if (is_tensor()) return as_tensor().data;
    return {to_double()};
}

bool operator==(const Value& a, const Value& b) {
    if (a.tag() != b.tag()) return false;
    if (a.is_f64()) return same_bits(a.as_f64(), b.as_f64());
    return a.storage_ == b.storage_;
}

std::string to_string(ValueTag tag) {
    switch (tag) {
        case ValueTag::F64: return "F64";
        case ValueTag::I64: return "I64";
        case ValueTag::Bool: return "Bool";
        case ValueTag::String: return "String";
        case ValueTag::Tensor: return "Tensor";
    }
    return "Unknown";
}

std::string to_string(const Value& v) {
    std::ostringstream os;
    os.precision(17);
    switch (v.tag()) {
        case ValueTag::F64: os << v.as_f64(); break;
        case ValueTag::I64: os << v.as_i64(); break;
        case ValueTag::Bool: os << (v.as_bool() ? "true" : "false"); break;
        case ValueTag::String: os << '"' << v.as_string() << '"'; break;
        case ValueTag::Tensor: {
            const auto& t = v.as_tensor();
            os << "tensor[";
            for (std::size_t i = 0; i < t.shape.size(); ++i) os << (i ? "x" : "") << t.shape[i];
            os << "]";
            break;
        }
    }
    return os.str();
}

}  // namespace simtrace
