// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/wire/value_json.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace simtrace {

using nlohmann::json;

std::string value_to_json(const Value& v) {
    json j;
    switch (v.tag()) {
        case ValueTag::F64: j = v.as_f64(); break;
        case ValueTag::I64: j = json{{"int", v.as_i64()}}; break;
        case ValueTag::Bool: j = v.as_bool(); break;
        case ValueTag::String: j = v.as_string(); break;
        case ValueTag::Tensor: j = json{{"shape", v.as_tensor().shape}, {"data", v.as_tensor().data}}; break;
    }
    return j.dump();
}

Value value_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("observation is not valid JSON: ") + e.what());
    }
    if (j.is_number()) return j.get<double>();
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_object() && j.contains("int") && j.size() == 1 && j["int"].is_number_integer()) {
        return j["int"].get<std::int64_t>();
    }
    if (j.is_object() && j.contains("shape") && j.contains("data") && j.size() == 2) {
        try {
            auto v = Value::tensor(j["shape"].get<std::vector<std::uint32_t>>(), j["data"].get<std::vector<double>>());
            if (!v.as_tensor().consistent()) throw std::invalid_argument("tensor shape does not match data length");
            return v;
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("bad tensor observation: ") + e.what());
        }
    }
    throw std::invalid_argument("unsupported observation JSON: " + text.substr(0, 80));
}

void write_value_file(const std::string& path, const Value& v) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << value_to_json(v) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

Value read_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return value_from_json(ss.str());
}

}  // namespace simtrace
