// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/nn/settings.hpp"

#include <charconv>
#include <fstream>

namespace simtrace::nn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const auto n = to_uint(key, v);
    if (n == 0) throw ConfigError(key + ": must be at least 1");
    return static_cast<std::size_t>(n);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        auto next = v.find(sep, pos);
        if (next == std::string::npos) next = v.size();
        out.push_back(trim(v.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

}  // namespace

void apply_setting(TrainingSettings& s, const std::string& key, const std::string& value) {
    auto& n = s.network;
    auto& t = s.train;
    try {
        if (key == "preset") {
            const auto shape = n.obs_shape;
            if (value == "desk") {
                n = NetworkConfig::desk();
            } else if (value == "full") {
                n = NetworkConfig{};
            } else {
                throw ConfigError("preset: expected desk or full, got '" + value + "'");
            }
            n.obs_shape = shape;
        } else if (key == "lstm_hidden") {
            n.lstm_hidden = to_count(key, value);
        } else if (key == "obs_embed_dim") {
            n.obs_embed_dim = to_count(key, value);
        } else if (key == "sample_embed_dim") {
            n.sample_embed_dim = to_count(key, value);
        } else if (key == "address_embed_dim") {
            n.address_embed_dim = to_count(key, value);
        } else if (key == "mixture_components") {
            n.mixture_components = to_count(key, value);
        } else if (key == "obs_embedder") {
            n.obs_embedder = parse_obs_embedder(value);
        } else if (key == "cnn") {
            cnn_preset(value);
            n.cnn = value;
        } else if (key == "obs_shape") {
            n.obs_shape.clear();
            for (const auto& d : split(value, 'x')) n.obs_shape.push_back(to_count(key, d));
            s.obs_shape_set = true;
        } else if (key == "init_seed") {
            n.init_seed = to_uint(key, value);
        } else if (key == "minibatch") {
            t.minibatch = to_count(key, value);
        } else if (key == "iterations") {
            t.iterations = to_uint(key, value);
        } else if (key == "validate_every") {
            t.validate_every = to_uint(key, value);
        } else if (key == "validation_size") {
            t.validation_size = to_uint(key, value);
        } else if (key == "checkpoint_every") {
            t.checkpoint_every = to_uint(key, value);
        } else if (key == "buckets") {
            s.buckets = to_count(key, value);
        } else if (key == "seed") {
            s.seed = to_uint(key, value);
        } else if (key == "optimizer") {
            t.optimizer.kind = parse_optimizer(value);
        } else if (key == "beta1") {
            t.optimizer.beta1 = to_double(key, value);
        } else if (key == "beta2") {
            t.optimizer.beta2 = to_double(key, value);
        } else if (key == "eps") {
            t.optimizer.eps = to_double(key, value);
        } else if (key == "larc_eta") {
            t.optimizer.larc_eta = to_double(key, value);
        } else if (key == "schedule") {
            t.schedule.kind = parse_schedule(value);
        } else if (key == "lr") {
            t.schedule.lr0 = to_double(key, value);
        } else if (key == "lr_final") {
            t.schedule.lr_final = to_double(key, value);
        } else if (key == "power") {
            t.schedule.power = to_double(key, value);
        } else if (key == "total") {
            t.schedule.total = to_count(key, value);
        } else if (key == "milestones") {
            t.schedule.milestones.clear();
            for (const auto& m : split(value, ',')) t.schedule.milestones.push_back(to_uint(key, m));
        } else if (key == "gamma") {
            t.schedule.gamma = to_double(key, value);
        } else if (key == "lr_scaling_alpha") {
            s.lr_scaling_alpha = to_double(key, value);
            if (s.lr_scaling_alpha < 0 || s.lr_scaling_alpha > 0.5) throw ConfigError("lr_scaling_alpha must be in [0, 0.5]");
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

TrainingSettings parse_settings(std::istream& in, TrainingSettings s) {
    std::string line;
    std::size_t lineno = 0;
    bool total_set = false;
    std::vector<std::pair<std::string, std::string>> entries;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        if (key == "preset") {
            entries.insert(entries.begin(), {key, trim(line.substr(eq + 1))});
        } else {
            entries.emplace_back(key, trim(line.substr(eq + 1)));
        }
        total_set |= key == "total";
    }
    for (const auto& [k, v] : entries) apply_setting(s, k, v);
    if (!total_set) s.train.schedule.total = std::max<std::uint64_t>(1, s.train.iterations);
    return s;
}

TrainingSettings load_settings(const std::string& path, TrainingSettings base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    return parse_settings(in, std::move(base));
}

}  // namespace simtrace::nn
