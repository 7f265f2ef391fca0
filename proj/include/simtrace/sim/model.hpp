// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simtrace/sim/stream.hpp"
#include "simtrace/trace/address.hpp"

namespace simtrace::sim {

class ModelContext;

// A simulator program. Every random choice goes through the context.
class Model {
public:
    virtual ~Model() = default;
    virtual std::string name() const = 0;
    virtual Value run(ModelContext& ctx) = 0;
};

using ModelFactory = std::function<std::unique_ptr<Model>()>;

// Simulator-side view of one run. Frames pushed with FrameScope form the
// call-site part of every address.
class ModelContext {
public:
    ModelContext(FrameStream& stream, std::optional<Value> observation, AddressCache& cache);

    Value sample(const Distribution& dist, const std::string& name = "", bool control = true, bool replace = false);
    // Sends the run observation if one was supplied, otherwise `generated`.
    void observe(const Distribution& dist, const Value& generated);

    const std::optional<Value>& observation() const { return observation_; }

    void push_frame(std::string frame) { frames_.push_back(std::move(frame)); }
    void pop_frame() { frames_.pop_back(); }

private:
    std::string current_address(DistTag tag);

    FrameStream& stream_;
    std::optional<Value> observation_;
    AddressCache& cache_;
    std::vector<std::string> frames_;
};

class FrameScope {
public:
    FrameScope(ModelContext& ctx, std::string frame) : ctx_(ctx) { ctx_.push_frame(std::move(frame)); }
    ~FrameScope() { ctx_.pop_frame(); }
    FrameScope(const FrameScope&) = delete;
    FrameScope& operator=(const FrameScope&) = delete;

private:
    ModelContext& ctx_;
};

// Serves one controller session on `stream` until the peer disconnects.
// Exceptions thrown by the model close the connection.
void serve(FrameStream& stream, Model& model);

}  // namespace simtrace::sim
