// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "simtrace/sim/model.hpp"

namespace simtrace::models {

// Built-in models by name: "conjugate", "discrete", "cascade".
std::unique_ptr<sim::Model> make_model(const std::string& name);
std::vector<std::string> model_names();

}  // namespace simtrace::models
