// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/nn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <limits>

namespace simtrace::nn {

bool is_validation_index(std::uint64_t original_index) { return original_index % 50 == 49; }

std::size_t pregenerate_layers(ProposalNetwork& net, const store::TraceDataset& ds) {
    std::size_t added = 0;
    std::uint64_t last_type = 0;
    bool have_last = false;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        // Within a run of one type the address set cannot change.
        if (have_last && ds.type_id(i) == last_type) continue;
        added += net.register_trace(ds.read(i));
        last_type = ds.type_id(i);
        have_last = true;
    }
    return added;
}

DatasetSource::DatasetSource(store::TraceDataset ds, std::uint64_t seed, std::size_t buckets)
    : ds_(std::move(ds)), seed_(seed), buckets_(buckets) {
    for (std::size_t i = 0; i < ds_.size(); ++i) {
        if (is_validation_index(ds_.original_index(i))) {
            held_out_.push_back(i);
        } else {
            train_.push_back(i);
            lengths_.push_back(ds_.entry(i).latent_count);
        }
    }
    if (train_.empty()) throw std::invalid_argument("dataset has no training traces");
}

void DatasetSource::plan_epoch(std::uint64_t epoch, std::size_t global_batch) {
    plan_ = store::plan_minibatches(lengths_, global_batch, 1, seed_ + epoch * 0x9E3779B97F4A7C15ULL, buckets_);
    epoch_ = epoch;
}

std::vector<Trace> DatasetSource::slice(std::uint64_t step, std::size_t global_batch, std::size_t begin,
                                        std::size_t end) {
    const std::uint64_t per_epoch = (train_.size() + global_batch - 1) / global_batch;
    const std::uint64_t epoch = step / per_epoch;
    if (epoch_ != epoch) plan_epoch(epoch, global_batch);
    const auto& c = plan_.chunks[step % per_epoch];
    std::vector<Trace> out;
    for (std::size_t k = c.begin + begin; k < std::min(c.begin + end, c.end); ++k) out.push_back(ds_.read(train_[k]));
    return out;
}

std::vector<Trace> DatasetSource::validation(std::size_t max_traces) {
    std::vector<Trace> out;
    for (std::size_t k = 0; k < held_out_.size() && out.size() < max_traces; ++k) out.push_back(ds_.read(held_out_[k]));
    return out;
}

OnlineSource::OnlineSource(const std::string& endpoint_spec, std::uint64_t seed) : endpoint_(endpoint_spec), seed_(seed) {}

std::vector<Trace> OnlineSource::slice(std::uint64_t step, std::size_t global_batch, std::size_t begin,
                                       std::size_t end) {
    sim::Gateway gw(endpoint_);
    sim::PriorPolicy prior;
    std::vector<Trace> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(gw.execute(std::nullopt, prior, seed_, step * global_batch + i));
    return out;
}

std::vector<Trace> OnlineSource::validation(std::size_t max_traces) {
    return sim::sample_prior(endpoint_, max_traces, seed_ ^ 0x76616C6964ULL);
}

namespace {

// Traces the network can score; unknown ones are counted when frozen.
std::vector<Trace> usable(const ProposalNetwork& net, std::span<const Trace> batch, std::size_t& skipped) {
    std::vector<Trace> out;
    skipped = 0;
    for (const auto& t : batch) {
        if (net.frozen() && !net.knows(t)) {
            ++skipped;
        } else {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace

GradientResult compute_gradients(ProposalNetwork& net, std::span<const Trace> batch) {
    GradientResult r;
    std::size_t skipped = 0;
    const auto traces = usable(net, batch, skipped);
    for (auto& [name, p] : net.parameters()) {
        Tensor h = p;
        h.zero_grad();
    }
    if (!traces.empty()) {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = net.minibatch_loss(traces, &r.stats);
        }
        backward(tape, loss);
        r.loss = loss.item();
    }
    r.stats.skipped = skipped;
    for (const auto& [name, p] : net.parameters()) {
        if (p.has_grad()) {
            const auto gr = p.grad();
            r.grads.emplace_back(std::vector<double>(gr.begin(), gr.end()));
        } else {
            r.grads.emplace_back(std::nullopt);
        }
    }
    return r;
}

double evaluate_loss(ProposalNetwork& net, std::span<const Trace> traces, LossStats* stats) {
    std::size_t skipped = 0;
    const auto ok = usable(net, traces, skipped);
    LossStats s;
    double loss = std::numeric_limits<double>::quiet_NaN();
    if (!ok.empty()) loss = net.minibatch_loss(ok, &s).item();
    s.skipped = skipped;
    if (stats) *stats = s;
    return loss;
}

IterationLog train_step(ProposalNetwork& net, Optimizer& opt, comm::Collective& group, std::span<const Trace> slice,
                        double lr) {
    auto g = compute_gradients(net, slice);
    const double used = static_cast<double>(g.stats.used);
    std::vector<double> counts{used, g.loss * used, static_cast<double>(g.stats.skipped)};
    group.allreduce_mean(counts);
    const double n = static_cast<double>(group.world_size());
    IterationLog log;
    log.lr = lr;
    log.used = static_cast<std::size_t>(std::llround(counts[0] * n));
    log.skipped = static_cast<std::size_t>(std::llround(counts[2] * n));
    if (log.used == 0) {
        log.loss = std::numeric_limits<double>::quiet_NaN();
        return log;
    }
    log.loss = counts[1] / counts[0];
    if (!std::isfinite(log.loss)) return log;

    // Rank gradients are per-trace means; reweight so the average over ranks
    // is the mean over all usable traces.
    const double weight = used / counts[0];
    auto params = net.parameters();
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < params.size(); ++i) {
        sizes.push_back(params[i].second.numel());
        if (g.grads[i] && weight != 1.0) {
            for (auto& x : *g.grads[i]) x *= weight;
        }
    }
    const auto avg = comm::average_gradients(group, g.grads, sizes);
    opt.step(params, avg, lr);
    ++net.step;
    return log;
}

Trainer::Trainer(ProposalNetwork& net, TrainConfig cfg, comm::Collective& group)
    : net_(net), cfg_(std::move(cfg)), group_(group), opt_(cfg_.optimizer) {
    if (cfg_.minibatch == 0) throw std::invalid_argument("minibatch must be positive");
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    auto a = net_.to_archive();
    opt_.save_state(a);
    save_archive(a, path);
}

void Trainer::load_checkpoint(const std::filesystem::path& path, ProposalNetwork& net, Optimizer& opt) {
    const auto a = load_archive(path);
    net = ProposalNetwork::from_archive(a);
    opt.load_state(a);
}

TrainResult Trainer::run(MinibatchSource& source) {
    net_.freeze();
    group_.verify_layout(net_.layout_hash());
    auto params = net_.parameters();
    if (group_.world_size() > 1) {
        std::vector<double> flat;
        for (const auto& [name, p] : params) flat.insert(flat.end(), p.data().begin(), p.data().end());
        group_.broadcast(std::span<double>(flat), 0);
        std::size_t at = 0;
        for (auto& [name, p] : params) {
            Tensor h = p;
            for (auto& x : h.data()) x = flat[at++];
        }
    }

    const auto rank = group_.rank(), world = group_.world_size();
    const std::size_t begin = cfg_.minibatch * rank / world, end = cfg_.minibatch * (rank + 1) / world;
    std::vector<Trace> validation;
    if (cfg_.validate_every > 0) {
        const auto all = source.validation(cfg_.validation_size);
        const std::size_t vb = all.size() * rank / world, ve = all.size() * (rank + 1) / world;
        validation.assign(all.begin() + static_cast<std::ptrdiff_t>(vb), all.begin() + static_cast<std::ptrdiff_t>(ve));
    }

    TrainResult result;
    for (std::uint64_t it = net_.step; it < cfg_.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = learning_rate(cfg_.schedule, it);
        const auto slice = source.slice(it, cfg_.minibatch, begin, end);
        auto log = train_step(net_, opt_, group_, slice, lr);
        log.iteration = it + 1;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.traces_per_second = secs > 0 ? static_cast<double>(log.used) / secs : 0.0;
        result.skipped_traces += log.skipped;

        if (log.used > 0 && !std::isfinite(log.loss)) {
            if (!cfg_.checkpoint.empty() && rank == 0) save_checkpoint(cfg_.checkpoint);
            throw TrainingDiverged("loss is not finite at iteration " + std::to_string(log.iteration));
        }
        const bool last = it + 1 == cfg_.iterations;
        if (cfg_.validate_every > 0 && (log.iteration % cfg_.validate_every == 0 || last)) {
            LossStats s;
            const double local = validation.empty() ? 0.0 : evaluate_loss(net_, validation, &s);
            std::vector<double> v{static_cast<double>(s.used), s.used ? local * static_cast<double>(s.used) : 0.0};
            group_.allreduce_mean(v);
            if (v[0] > 0) log.validation_loss = v[1] / v[0];
        }
        if (rank == 0 && log_out_) {
            nlohmann::json j{{"iteration", log.iteration}, {"loss", log.loss},     {"lr", log.lr},
                             {"traces_per_s", log.traces_per_second}, {"traces", log.used}, {"skipped", log.skipped}};
            if (log.validation_loss) j["validation_loss"] = *log.validation_loss;
            *log_out_ << j.dump() << '\n' << std::flush;
        }
        if (rank == 0 && !cfg_.checkpoint.empty() &&
            ((cfg_.checkpoint_every > 0 && log.iteration % cfg_.checkpoint_every == 0) || last)) {
            save_checkpoint(cfg_.checkpoint);
        }
        result.log.push_back(log);
    }
    return result;
}

}  // namespace simtrace::nn
