// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>

#include "simtrace/nn/network.hpp"
#include "simtrace/nn/trainer.hpp"

namespace simtrace::nn {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Everything a training run reads from its config file.
struct TrainingSettings {
    NetworkConfig network = NetworkConfig::desk();
    bool obs_shape_set = false;  // otherwise taken from the first trace
    TrainConfig train;
    std::size_t buckets = 1;
    std::uint64_t seed = 1;
    // Multiply lr by workers^alpha; 0 leaves lr unchanged.
    double lr_scaling_alpha = 0.0;
};

// Flat "key = value" lines; '#' starts a comment. Keys:
//   preset                desk | full (applied before the other keys)
//   lstm_hidden, obs_embed_dim, sample_embed_dim, address_embed_dim,
//   mixture_components, obs_embedder (mlp|cnn3d), cnn (preset name),
//   obs_shape (e.g. 4x8x8), init_seed
//   minibatch, iterations, validate_every, validation_size, checkpoint_every,
//   buckets, seed
//   optimizer (adam|adam-larc), beta1, beta2, eps, larc_eta
//   schedule (constant|multistep|poly), lr, lr_final, power, total,
//   milestones (comma separated), gamma, lr_scaling_alpha
// Unknown keys and malformed values throw ConfigError. A poly schedule
// without `total` decays over `iterations`.
TrainingSettings parse_settings(std::istream& in, TrainingSettings base = {});
TrainingSettings load_settings(const std::string& path, TrainingSettings base = {});

// Applies one key; shared by the file parser and command-line overrides.
void apply_setting(TrainingSettings& s, const std::string& key, const std::string& value);

}  // namespace simtrace::nn
