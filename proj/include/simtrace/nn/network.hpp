// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtrace/sim/policy.hpp"
#include "simtrace/tensor/archive.hpp"
#include "simtrace/tensor/ops.hpp"
#include "simtrace/trace/trace.hpp"

namespace simtrace::nn {

enum class ObsEmbedder : std::uint8_t { MLP = 0, CNN3D = 1 };

std::string to_string(ObsEmbedder e);
ObsEmbedder parse_obs_embedder(const std::string& s);

// One 3D conv stage of the observation embedder; pool=0 means no pooling after it.
struct ConvLayer {
    std::size_t out_channels;
    std::size_t kernel;
    std::size_t padding;
    std::size_t pool;
};

std::vector<ConvLayer> cnn_preset(const std::string& name);

struct NetworkConfig {
    std::size_t lstm_hidden = 512;
    std::size_t obs_embed_dim = 256;
    std::size_t sample_embed_dim = 4;
    std::size_t address_embed_dim = 64;
    std::size_t mixture_components = 10;
    ObsEmbedder obs_embedder = ObsEmbedder::MLP;
    std::string cnn = "cnn3d-small";
    // Observation shape; flattened for the MLP, [D,H,W] for the CNN.
    std::vector<std::size_t> obs_shape{1};
    std::uint64_t init_seed = 1;

    static NetworkConfig desk();
    void validate() const;
    std::size_t obs_numel() const;
};

class UnknownAddress : public std::runtime_error {
public:
    explicit UnknownAddress(const std::string& key)
        : std::runtime_error("no network layers for address " + key), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class HeadKind : std::uint8_t { None = 0, Mixture = 1, Categorical = 2 };

// Per-address layers, created at first encounter.
struct AddressLayers {
    std::string key;
    DistTag tag;
    std::size_t value_dim;  // width of the encoded sample
    HeadKind head;
    std::size_t categories = 0;
    Tensor embed;                   // [1, A]
    Tensor sample_w, sample_b;      // [S, value_dim], [S]
    Tensor head_w1, head_b1;        // [H, H], [H]
    Tensor head_w2, head_b2;        // [out, H], [out]
};

struct LossStats {
    std::size_t used = 0;
    std::size_t skipped = 0;
    std::size_t sub_minibatches = 0;
};

// True for draws the network proposes for (controlled, not rejection-loop).
inline bool is_proposal_site(bool control, bool replace) { return control && !replace; }

class ProposalNetwork {
public:
    explicit ProposalNetwork(NetworkConfig cfg);

    const NetworkConfig& config() const { return cfg_; }

    // Adds layers for every latent address of `t`; returns how many were new.
    // Throws UnknownAddress when frozen and an address is missing.
    std::size_t register_trace(const Trace& t);
    bool knows(const Trace& t) const;
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    std::size_t address_count() const { return layers_.size(); }
    const AddressLayers* layers(const std::string& key) const;
    std::vector<std::string> address_keys() const;

    // Canonical order: core parameters, then address layers sorted by key.
    std::vector<std::pair<std::string, Tensor>> parameters() const;
    std::size_t parameter_count() const;
    std::uint64_t layout_hash() const;

    // [B, obs_embed_dim] for the given observations.
    Tensor embed_observations(std::span<const Value* const> observations) const;

    // Per-trace sum of log q over proposal sites, for traces sharing one type.
    Tensor batch_log_q(std::span<const Trace* const> traces) const;
    // Scalar log q of a single trace.
    Tensor trace_log_q(const Trace& t) const;

    // -(1/B) sum log q over the usable traces. Unknown addresses are skipped
    // when frozen and registered otherwise.
    Tensor minibatch_loss(std::span<const Trace> traces, LossStats* stats = nullptr);

    std::uint64_t step = 0;

    Archive to_archive() const;
    static ProposalNetwork from_archive(const Archive& a);
    void save(const std::filesystem::path& path) const { save_archive(to_archive(), path); }
    static ProposalNetwork load(const std::filesystem::path& path) { return from_archive(load_archive(path)); }

    // Building blocks shared with the inference-time proposal source.
    Tensor encode_values(const AddressLayers& l, std::span<const Value* const> values,
                         std::span<const Distribution* const> priors) const;
    Tensor sample_embedding(const AddressLayers& l, const Tensor& encoded) const;
    Tensor address_embedding(const AddressLayers& l, std::size_t rows) const;
    LstmState lstm_step(const Tensor& input, const LstmState& s) const;
    Tensor head_output(const AddressLayers& l, const Tensor& h) const;

    struct MixtureParams {
        Tensor logits, means, stds;
        std::vector<double> low, high;
    };
    MixtureParams mixture_params(const Tensor& raw, std::span<const Distribution* const> priors) const;

private:
    AddressLayers make_layers(const std::string& key, const TraceEntry& e) const;
    Tensor init_param(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out,
                      double gain = 1.0) const;
    void build_core();

    NetworkConfig cfg_;
    bool frozen_ = false;
    std::vector<std::pair<std::string, Tensor>> core_;
    std::map<std::string, AddressLayers> layers_;
};

// Proposal source backed by a trained network, for GuidedPolicy.
class NetworkProposalSource : public sim::ProposalSource {
public:
    explicit NetworkProposalSource(const ProposalNetwork& net) : net_(net) {}

    void begin_run(const std::optional<Value>& observation) override;
    std::unique_ptr<sim::ProposalDistribution> propose(const sim::SiteInfo& site) override;
    void record(const sim::SiteInfo& site, const Value& value) override;

    // Runs that hit an address with no layers; later sites use the prior.
    std::size_t lost_runs() const { return lost_runs_; }

private:
    bool advance(const sim::SiteInfo& site);

    const ProposalNetwork& net_;
    Tensor obs_embed_;
    LstmState state_;
    Tensor prev_embed_;
    std::string current_key_;
    bool current_replace_ = false;
    bool stepped_ = false;  // step for current_key_ done, value not yet recorded
    bool lost_ = false;
    std::size_t lost_runs_ = 0;
};

// Mixture of truncated normals as a sampling proposal.
class MixtureProposal : public sim::ProposalDistribution {
public:
    MixtureProposal(std::vector<double> weights, std::vector<double> means, std::vector<double> stds, double low,
                    double high);
    Value sample(CounterRng& rng) const override;
    double log_prob(const Value& v) const override;

private:
    std::vector<double> weights_, means_, stds_;
    double low_, high_;
};

}  // namespace simtrace::nn
