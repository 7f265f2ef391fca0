// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "simtrace/comm/collective.hpp"
#include "simtrace/nn/network.hpp"
#include "simtrace/nn/optim.hpp"
#include "simtrace/sim/gateway.hpp"
#include "simtrace/store/dataset.hpp"
#include "simtrace/store/sampler.hpp"

namespace simtrace::nn {

// Loss went non-finite; a checkpoint was written first when configured.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Held-out traces: original index 49 mod 50.
bool is_validation_index(std::uint64_t original_index);

// Registers every latent address in the dataset; returns the number of new
// address layers.
std::size_t pregenerate_layers(ProposalNetwork& net, const store::TraceDataset& ds);

// Supplies slices of a deterministic global minibatch stream.
class MinibatchSource {
public:
    virtual ~MinibatchSource() = default;
    // Traces [begin, end) of the global minibatch for `step`.
    virtual std::vector<Trace> slice(std::uint64_t step, std::size_t global_batch, std::size_t begin,
                                     std::size_t end) = 0;
    // Held-out traces, same for every rank.
    virtual std::vector<Trace> validation(std::size_t max_traces) = 0;
};

// Offline: length-bucketed, shuffled chunks of the training split, one chunk
// per global minibatch, replanned with a new seed every epoch.
class DatasetSource : public MinibatchSource {
public:
    DatasetSource(store::TraceDataset ds, std::uint64_t seed, std::size_t buckets = 1);
    std::vector<Trace> slice(std::uint64_t step, std::size_t global_batch, std::size_t begin, std::size_t end) override;
    std::vector<Trace> validation(std::size_t max_traces) override;

    std::size_t training_size() const { return train_.size(); }

private:
    void plan_epoch(std::uint64_t epoch, std::size_t global_batch);

    store::TraceDataset ds_;
    std::uint64_t seed_;
    std::size_t buckets_;
    std::vector<std::size_t> train_, held_out_;
    std::vector<std::uint32_t> lengths_;
    std::optional<std::uint64_t> epoch_;
    store::MinibatchPlan plan_;
};

// Online: fresh prior traces from a simulator; trace i of step s uses run
// index s * B + i, so every rank simulates only its own slice.
class OnlineSource : public MinibatchSource {
public:
    OnlineSource(const std::string& endpoint_spec, std::uint64_t seed);
    std::vector<Trace> slice(std::uint64_t step, std::size_t global_batch, std::size_t begin, std::size_t end) override;
    std::vector<Trace> validation(std::size_t max_traces) override;

private:
    sim::SimulatorEndpoint endpoint_;
    std::uint64_t seed_;
};

struct TrainConfig {
    std::size_t minibatch = 64;  // global, split across ranks
    std::uint64_t iterations = 1000;
    OptimizerConfig optimizer;
    ScheduleConfig schedule;
    std::uint64_t validate_every = 0;  // 0 disables
    std::size_t validation_size = 256;
    std::filesystem::path checkpoint;  // empty disables
    std::uint64_t checkpoint_every = 0;
};

struct IterationLog {
    std::uint64_t iteration = 0;
    double loss = 0;
    double lr = 0;
    double traces_per_second = 0;
    std::size_t used = 0;  // global usable traces
    std::size_t skipped = 0;
    std::optional<double> validation_loss;
};

struct TrainResult {
    std::vector<IterationLog> log;
    std::uint64_t skipped_traces = 0;
};

struct GradientResult {
    double loss = 0;  // -(1/used) sum log q; 0 when nothing was usable
    LossStats stats;
    std::vector<std::optional<std::vector<double>>> grads;  // canonical order
};

// Minibatch loss and gradients; parameters the batch never reached are nullopt.
GradientResult compute_gradients(ProposalNetwork& net, std::span<const Trace> batch);

// Mean negative log q over the traces, without gradients. NaN when none usable.
double evaluate_loss(ProposalNetwork& net, std::span<const Trace> traces, LossStats* stats = nullptr);

// One synchronous data-parallel step on this rank's slice; returns the global
// minibatch loss. Ranks with different slice sizes are weighted by trace count.
IterationLog train_step(ProposalNetwork& net, Optimizer& opt, comm::Collective& group, std::span<const Trace> slice,
                        double lr);

class Trainer {
public:
    Trainer(ProposalNetwork& net, TrainConfig cfg, comm::Collective& group);

    // Lines of JSON, one per iteration, written by rank 0 only.
    void set_log_stream(std::ostream* out) { log_out_ = out; }

    TrainResult run(MinibatchSource& source);
    void save_checkpoint(const std::filesystem::path& path) const;
    // Restores network weights, optimizer moments and the iteration counter.
    static void load_checkpoint(const std::filesystem::path& path, ProposalNetwork& net, Optimizer& opt);

    Optimizer& optimizer() { return opt_; }

private:
    ProposalNetwork& net_;
    TrainConfig cfg_;
    comm::Collective& group_;
    Optimizer opt_;
    std::ostream* log_out_ = nullptr;
};

}  // namespace simtrace::nn
