// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace simtrace::nn {

namespace {

constexpr double kStdFloor = 1e-4;
constexpr double kInf = std::numeric_limits<double>::infinity();

Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

bool bounded(const Distribution& d) { return std::isfinite(d.support_low()) && std::isfinite(d.support_high()); }

std::size_t parse_size(const std::map<std::string, std::string>& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) throw ArchiveError("checkpoint metadata lacks '" + key + "'");
    return static_cast<std::size_t>(std::stoull(it->second));
}

std::vector<std::size_t> parse_shape(const std::string& s) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto next = s.find('x', pos);
        if (next == std::string::npos) next = s.size();
        out.push_back(static_cast<std::size_t>(std::stoull(s.substr(pos, next - pos))));
        pos = next + 1;
    }
    return out;
}

std::string shape_key(const std::vector<std::size_t>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
}

}  // namespace

std::string to_string(ObsEmbedder e) { return e == ObsEmbedder::CNN3D ? "cnn3d" : "mlp"; }

ObsEmbedder parse_obs_embedder(const std::string& s) {
    if (s == "mlp") return ObsEmbedder::MLP;
    if (s == "cnn3d") return ObsEmbedder::CNN3D;
    throw std::invalid_argument("unknown observation embedder '" + s + "' (expected mlp or cnn3d)");
}

std::vector<ConvLayer> cnn_preset(const std::string& name) {
    if (name == "cnn3d-small") return {{8, 3, 1, 0}, {8, 3, 1, 2}};
    if (name == "cnn3d-full") {
        return {{64, 3, 0, 0}, {64, 3, 0, 2}, {128, 3, 0, 0}, {128, 3, 0, 0}, {128, 3, 0, 2}};
    }
    throw std::invalid_argument("unknown CNN preset '" + name + "'");
}

NetworkConfig NetworkConfig::desk() {
    NetworkConfig c;
    c.lstm_hidden = 64;
    c.obs_embed_dim = 32;
    c.mixture_components = 5;
    return c;
}

void NetworkConfig::validate() const {
    for (auto [v, name] : {std::pair{lstm_hidden, "lstm_hidden"}, {obs_embed_dim, "obs_embed_dim"},
                           {sample_embed_dim, "sample_embed_dim"}, {address_embed_dim, "address_embed_dim"},
                           {mixture_components, "mixture_components"}}) {
        if (v < 1) throw std::invalid_argument(std::string(name) + " must be at least 1");
    }
    if (obs_shape.empty() || obs_numel() == 0) throw std::invalid_argument("observation shape must be nonempty");
    if (obs_embedder == ObsEmbedder::CNN3D) {
        if (obs_shape.size() != 3) throw std::invalid_argument("cnn3d embedder needs a [D,H,W] observation shape");
        cnn_preset(cnn);
    }
}

std::size_t NetworkConfig::obs_numel() const {
    return std::accumulate(obs_shape.begin(), obs_shape.end(), std::size_t{1}, std::multiplies<>());
}

ProposalNetwork::ProposalNetwork(NetworkConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_core();
}

Tensor ProposalNetwork::init_param(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out,
                                   double gain) const {
    Tensor t(std::move(shape));
    t.set_requires_grad(true);
    if (fan_in == 0) return t;  // biases start at zero
    const double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    CounterRng rng(cfg_.init_seed, fnv1a64(name), 0);
    for (auto& x : t.vec()) x = a * (2.0 * rng.uniform() - 1.0);
    return t;
}

void ProposalNetwork::build_core() {
    const std::size_t E = cfg_.obs_embed_dim, H = cfg_.lstm_hidden;
    auto add = [&](const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out) {
        core_.emplace_back(name, init_param(name, std::move(shape), fan_in, fan_out));
    };
    if (cfg_.obs_embedder == ObsEmbedder::MLP) {
        const std::size_t n = cfg_.obs_numel();
        add("obs/w1", {E, n}, n, E);
        add("obs/b1", {E}, 0, 0);
        add("obs/w2", {E, E}, E, E);
        add("obs/b2", {E}, 0, 0);
    } else {
        std::size_t c = 1, d = cfg_.obs_shape[0], h = cfg_.obs_shape[1], w = cfg_.obs_shape[2];
        const auto layers = cnn_preset(cfg_.cnn);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const std::string p = "obs/conv" + std::to_string(i);
            const std::size_t k3 = l.kernel * l.kernel * l.kernel;
            add(p + "/k", {l.out_channels, c, l.kernel, l.kernel, l.kernel}, c * k3, l.out_channels * k3);
            add(p + "/b", {l.out_channels}, 0, 0);
            auto shrink = [&](std::size_t n) {
                if (n + 2 * l.padding < l.kernel) throw std::invalid_argument("observation too small for " + cfg_.cnn);
                n = n + 2 * l.padding - l.kernel + 1;
                return l.pool ? n / l.pool : n;
            };
            d = shrink(d);
            h = shrink(h);
            w = shrink(w);
            if (d == 0 || h == 0 || w == 0) throw std::invalid_argument("observation too small for " + cfg_.cnn);
            c = l.out_channels;
        }
        const std::size_t flat = c * d * h * w;
        add("obs/fc/w", {E, flat}, flat, E);
        add("obs/fc/b", {E}, 0, 0);
    }
    const std::size_t X = E + cfg_.address_embed_dim + cfg_.sample_embed_dim;
    add("lstm/w", {4 * H, X}, X, H);
    add("lstm/u", {4 * H, H}, H, H);
    add("lstm/b", {4 * H}, 0, 0);
    auto& b = core_.back().second;
    for (std::size_t j = H; j < 2 * H; ++j) b.vec()[j] = 1.0;  // forget gate open
}

AddressLayers ProposalNetwork::make_layers(const std::string& key, const TraceEntry& e) const {
    const std::size_t A = cfg_.address_embed_dim, S = cfg_.sample_embed_dim, H = cfg_.lstm_hidden;
    const std::size_t K = cfg_.mixture_components;
    AddressLayers l;
    l.key = key;
    l.tag = e.distribution.tag;
    switch (l.tag) {
        case DistTag::Categorical:
            l.categories = e.distribution.category_count();
            l.value_dim = l.categories;
            break;
        case DistTag::MultivariateNormalDiag: l.value_dim = e.distribution.dimension(); break;
        default: l.value_dim = 1;
    }
    l.head = HeadKind::None;
    if (is_proposal_site(e.control, e.replace)) {
        if (e.distribution.is_continuous_scalar()) l.head = HeadKind::Mixture;
        if (l.tag == DistTag::Categorical) l.head = HeadKind::Categorical;
    }
    const std::string p = "addr/" + key + "/";
    l.embed = init_param(p + "embed", {1, A}, 1, A);
    l.sample_w = init_param(p + "sample_w", {S, l.value_dim}, l.value_dim, S);
    l.sample_b = init_param(p + "sample_b", {S}, 0, 0);
    if (l.head != HeadKind::None) {
        const std::size_t out = l.head == HeadKind::Mixture ? 3 * K : l.categories;
        l.head_w1 = init_param(p + "head_w1", {H, H}, H, H);
        l.head_b1 = init_param(p + "head_b1", {H}, 0, 0);
        // small output weights: near-uniform weights and means near the prior midpoint at step 0
        l.head_w2 = init_param(p + "head_w2", {out, H}, H, out, 0.1);
        l.head_b2 = init_param(p + "head_b2", {out}, 0, 0);
    }
    return l;
}

std::size_t ProposalNetwork::register_trace(const Trace& t) {
    std::size_t added = 0;
    for (const auto& e : t.entries) {
        if (!e.is_latent()) continue;
        auto key = e.address.key();
        if (layers_.contains(key)) continue;
        if (frozen_) throw UnknownAddress(key);
        layers_.emplace(key, make_layers(key, e));
        ++added;
    }
    return added;
}

bool ProposalNetwork::knows(const Trace& t) const {
    for (const auto& e : t.entries) {
        if (e.is_latent() && !layers_.contains(e.address.key())) return false;
    }
    return true;
}

const AddressLayers* ProposalNetwork::layers(const std::string& key) const {
    auto it = layers_.find(key);
    return it == layers_.end() ? nullptr : &it->second;
}

std::vector<std::string> ProposalNetwork::address_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, l] : layers_) out.push_back(k);
    return out;
}

std::vector<std::pair<std::string, Tensor>> ProposalNetwork::parameters() const {
    auto out = core_;
    for (const auto& [k, l] : layers_) {
        const std::string p = "addr/" + k + "/";
        out.emplace_back(p + "embed", l.embed);
        out.emplace_back(p + "sample_w", l.sample_w);
        out.emplace_back(p + "sample_b", l.sample_b);
        if (l.head != HeadKind::None) {
            out.emplace_back(p + "head_w1", l.head_w1);
            out.emplace_back(p + "head_b1", l.head_b1);
            out.emplace_back(p + "head_w2", l.head_w2);
            out.emplace_back(p + "head_b2", l.head_b2);
        }
    }
    return out;
}

std::size_t ProposalNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : parameters()) n += t.numel();
    return n;
}

std::uint64_t ProposalNetwork::layout_hash() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, t] : parameters()) {
        h = fnv1a64(name, h);
        h = fnv1a64(shape_string(t.shape()), h);
    }
    return h;
}

Tensor ProposalNetwork::embed_observations(std::span<const Value* const> observations) const {
    const std::size_t B = observations.size(), n = cfg_.obs_numel();
    std::vector<double> flat;
    flat.reserve(B * n);
    for (const auto* v : observations) {
        auto x = v->flatten();
        if (x.size() != n) {
            throw ShapeError("observation has " + std::to_string(x.size()) + " elements, network expects " +
                             std::to_string(n));
        }
        flat.insert(flat.end(), x.begin(), x.end());
    }
    auto p = [&](std::size_t i) -> const Tensor& { return core_[i].second; };
    if (cfg_.obs_embedder == ObsEmbedder::MLP) {
        const Tensor x({B, n}, std::move(flat));
        return relu(linear(relu(linear(x, p(0), p(1))), p(2), p(3)));
    }
    Tensor x({B, 1, cfg_.obs_shape[0], cfg_.obs_shape[1], cfg_.obs_shape[2]}, std::move(flat));
    const auto layers = cnn_preset(cfg_.cnn);
    std::size_t i = 0;
    for (const auto& l : layers) {
        x = relu(conv3d(x, p(i), p(i + 1), 1, l.padding));
        if (l.pool) x = maxpool3d(x, l.pool);
        i += 2;
    }
    x = reshape(x, {B, x.numel() / B});
    return relu(linear(x, p(i), p(i + 1)));
}

Tensor ProposalNetwork::encode_values(const AddressLayers& l, std::span<const Value* const> values,
                                      std::span<const Distribution* const> priors) const {
    const std::size_t B = values.size();
    Tensor out({B, l.value_dim});
    for (std::size_t r = 0; r < B; ++r) {
        const auto& prior = *priors[r];
        double* row = out.vec().data() + r * l.value_dim;
        if (l.tag == DistTag::Categorical) {
            const auto k = values[r]->as_i64();
            if (k < 0 || static_cast<std::size_t>(k) >= l.value_dim) {
                throw ShapeError("categorical value " + std::to_string(k) + " out of range at " + l.key);
            }
            row[k] = 1.0;
        } else if (l.tag == DistTag::MultivariateNormalDiag) {
            const auto x = values[r]->flatten();
            const auto d = prior.dimension();
            if (x.size() != l.value_dim || d != l.value_dim) throw ShapeError("vector sample size changed at " + l.key);
            for (std::size_t j = 0; j < d; ++j) row[j] = (x[j] - prior.params[j]) / prior.params[d + j];
        } else {
            row[0] = (values[r]->to_double() - prior.location()) / prior.scale();
        }
    }
    return out;
}

Tensor ProposalNetwork::sample_embedding(const AddressLayers& l, const Tensor& encoded) const {
    return relu(linear(encoded, l.sample_w, l.sample_b));
}

Tensor ProposalNetwork::address_embedding(const AddressLayers& l, std::size_t rows) const {
    return embedding(l.embed, std::vector<std::size_t>(rows, 0));
}

LstmState ProposalNetwork::lstm_step(const Tensor& input, const LstmState& s) const {
    const std::size_t n = core_.size();
    return lstm_cell(input, s.h, s.c, core_[n - 3].second, core_[n - 2].second, core_[n - 1].second);
}

Tensor ProposalNetwork::head_output(const AddressLayers& l, const Tensor& h) const {
    return linear(relu(linear(h, l.head_w1, l.head_b1)), l.head_w2, l.head_b2);
}

ProposalNetwork::MixtureParams ProposalNetwork::mixture_params(const Tensor& raw,
                                                               std::span<const Distribution* const> priors) const {
    const std::size_t B = raw.dim(0), K = cfg_.mixture_components;
    MixtureParams m;
    const bool box = std::all_of(priors.begin(), priors.end(), [](const Distribution* d) { return bounded(*d); });
    Tensor offset({B, K}), width({B, K});
    for (std::size_t r = 0; r < B; ++r) {
        const auto& d = *priors[r];
        m.low.push_back(d.support_low());
        m.high.push_back(d.support_high());
        const double o = box ? m.low.back() : d.location();
        const double w = box ? m.high.back() - m.low.back() : d.scale();
        std::fill_n(offset.vec().data() + r * K, K, o);
        std::fill_n(width.vec().data() + r * K, K, w);
    }
    m.logits = slice_cols(raw, 0, K);
    const Tensor mraw = slice_cols(raw, K, K);
    m.means = add(offset, mul(width, box ? sigmoid(mraw) : mraw));
    m.stds = add_scalar(mul(width, softplus(slice_cols(raw, 2 * K, K))), kStdFloor);
    return m;
}

Tensor ProposalNetwork::batch_log_q(std::span<const Trace* const> traces) const {
    const std::size_t B = traces.size();
    if (B == 0) throw std::invalid_argument("batch_log_q needs at least one trace");
    std::vector<std::vector<const TraceEntry*>> rows(B);
    std::vector<const Value*> obs(B);
    for (std::size_t r = 0; r < B; ++r) {
        for (const auto& e : traces[r]->entries) {
            if (e.is_latent()) rows[r].push_back(&e);
        }
        if (!traces[r]->observation) throw std::invalid_argument("trace has no observation to condition on");
        obs[r] = &*traces[r]->observation;
        if (rows[r].size() != rows[0].size()) throw std::invalid_argument("batch_log_q needs traces of one type");
    }
    const Tensor obs_embed = embed_observations(obs);
    const std::size_t H = cfg_.lstm_hidden;
    LstmState state{zeros(B, H), zeros(B, H)};
    Tensor prev = zeros(B, cfg_.sample_embed_dim);
    std::optional<Tensor> total;
    std::vector<const Value*> values(B);
    std::vector<const Distribution*> priors(B);
    for (std::size_t t = 0; t < rows[0].size(); ++t) {
        const TraceEntry& e0 = *rows[0][t];
        const auto key = e0.address.key();
        const AddressLayers* l = layers(key);
        if (!l) throw UnknownAddress(key);
        for (std::size_t r = 0; r < B; ++r) {
            if (rows[r][t]->address != e0.address) throw std::invalid_argument("batch_log_q needs traces of one type");
            values[r] = &rows[r][t]->value;
            priors[r] = &rows[r][t]->distribution;
        }
        state = lstm_step(concat({obs_embed, address_embedding(*l, B), prev}), state);
        if (l->head != HeadKind::None && is_proposal_site(e0.control, e0.replace)) {
            const Tensor raw = head_output(*l, state.h);
            Tensor lq;
            if (l->head == HeadKind::Mixture) {
                auto m = mixture_params(raw, priors);
                std::vector<double> v(B);
                for (std::size_t r = 0; r < B; ++r) v[r] = values[r]->to_double();
                lq = truncated_normal_mixture_log_prob(m.logits, m.means, m.stds, v, m.low, m.high);
            } else {
                std::vector<std::size_t> idx(B);
                for (std::size_t r = 0; r < B; ++r) idx[r] = static_cast<std::size_t>(values[r]->as_i64());
                lq = gather_cols(log_softmax(raw), idx);
            }
            total = total ? add(*total, lq) : lq;
        }
        prev = sample_embedding(*l, encode_values(*l, values, priors));
    }
    return total ? *total : Tensor({B});
}

Tensor ProposalNetwork::trace_log_q(const Trace& t) const {
    const Trace* p = &t;
    return sum(batch_log_q(std::span<const Trace* const>(&p, 1)));
}

Tensor ProposalNetwork::minibatch_loss(std::span<const Trace> traces, LossStats* stats) {
    LossStats local;
    std::vector<std::uint64_t> order;
    std::map<std::uint64_t, std::vector<const Trace*>> groups;
    for (const auto& t : traces) {
        if (!knows(t)) {
            if (frozen_) {
                ++local.skipped;
                continue;
            }
            register_trace(t);
        }
        auto& g = groups[t.type_id];
        if (g.empty()) order.push_back(t.type_id);
        g.push_back(&t);
        ++local.used;
    }
    local.sub_minibatches = order.size();
    if (stats) *stats = local;
    if (local.used == 0) throw std::invalid_argument("minibatch has no usable traces");
    std::optional<Tensor> total;
    for (auto type : order) {
        const Tensor s = sum(batch_log_q(groups[type]));
        total = total ? add(*total, s) : s;
    }
    return scale(*total, -1.0 / static_cast<double>(local.used));
}

Archive ProposalNetwork::to_archive() const {
    Archive a;
    auto& m = a.metadata;
    m["format"] = "simtrace-proposal-network";
    m["lstm_hidden"] = std::to_string(cfg_.lstm_hidden);
    m["obs_embed_dim"] = std::to_string(cfg_.obs_embed_dim);
    m["sample_embed_dim"] = std::to_string(cfg_.sample_embed_dim);
    m["address_embed_dim"] = std::to_string(cfg_.address_embed_dim);
    m["mixture_components"] = std::to_string(cfg_.mixture_components);
    m["obs_embedder"] = to_string(cfg_.obs_embedder);
    m["cnn"] = cfg_.cnn;
    m["obs_shape"] = shape_key(cfg_.obs_shape);
    m["init_seed"] = std::to_string(cfg_.init_seed);
    m["step"] = std::to_string(step);
    m["frozen"] = frozen_ ? "1" : "0";
    m["addresses"] = std::to_string(layers_.size());
    std::size_t i = 0;
    for (const auto& [k, l] : layers_) {
        const std::string p = "address." + std::to_string(i++) + ".";
        m[p + "key"] = k;
        m[p + "tag"] = std::to_string(static_cast<int>(l.tag));
        m[p + "value_dim"] = std::to_string(l.value_dim);
        m[p + "head"] = std::to_string(static_cast<int>(l.head));
        m[p + "categories"] = std::to_string(l.categories);
    }
    for (const auto& [name, t] : parameters()) a.tensors.emplace_back(name, detach(t));
    return a;
}

ProposalNetwork ProposalNetwork::from_archive(const Archive& a) {
    const auto& m = a.metadata;
    if (!m.contains("format") || m.at("format") != "simtrace-proposal-network") {
        throw ArchiveError("archive is not a proposal network checkpoint");
    }
    NetworkConfig c;
    c.lstm_hidden = parse_size(m, "lstm_hidden");
    c.obs_embed_dim = parse_size(m, "obs_embed_dim");
    c.sample_embed_dim = parse_size(m, "sample_embed_dim");
    c.address_embed_dim = parse_size(m, "address_embed_dim");
    c.mixture_components = parse_size(m, "mixture_components");
    c.obs_embedder = parse_obs_embedder(m.at("obs_embedder"));
    c.cnn = m.at("cnn");
    c.obs_shape = parse_shape(m.at("obs_shape"));
    c.init_seed = parse_size(m, "init_seed");
    ProposalNetwork net(c);
    net.step = parse_size(m, "step");
    const auto n = parse_size(m, "addresses");
    for (std::size_t i = 0; i < n; ++i) {
        const std::string p = "address." + std::to_string(i) + ".";
        TraceEntry proto;
        const auto key = m.at(p + "key");
        proto.distribution.tag = static_cast<DistTag>(parse_size(m, p + "tag"));
        const auto head = static_cast<HeadKind>(parse_size(m, p + "head"));
        proto.control = head != HeadKind::None;
        proto.replace = false;
        const auto cats = parse_size(m, p + "categories");
        const auto vdim = parse_size(m, p + "value_dim");
        if (proto.distribution.tag == DistTag::Categorical) proto.distribution.params.assign(cats, 1.0 / cats);
        if (proto.distribution.tag == DistTag::MultivariateNormalDiag) proto.distribution.params.assign(2 * vdim, 1.0);
        auto l = net.make_layers(key, proto);
        l.head = head;
        if (head == HeadKind::None) l.head_w1 = l.head_b1 = l.head_w2 = l.head_b2 = Tensor();
        net.layers_.emplace(key, std::move(l));
    }
    for (auto& [name, t] : net.parameters()) {
        const auto& src = a.at(name);
        if (src.shape() != t.shape()) throw ArchiveError("parameter '" + name + "' has mismatched shape");
        t.vec() = src.vec();
    }
    if (m.at("frozen") == "1") net.freeze();
    return net;
}

// ---- inference-time proposals ----

void NetworkProposalSource::begin_run(const std::optional<Value>& observation) {
    if (!observation) throw std::invalid_argument("network proposals need an observation");
    const Value* o = &*observation;
    obs_embed_ = net_.embed_observations(std::span<const Value* const>(&o, 1));
    const std::size_t H = net_.config().lstm_hidden;
    state_ = {zeros(1, H), zeros(1, H)};
    prev_embed_ = zeros(1, net_.config().sample_embed_dim);
    current_key_.clear();
    current_replace_ = false;
    stepped_ = false;
    lost_ = false;
}

bool NetworkProposalSource::advance(const sim::SiteInfo& site) {
    if (lost_) return false;
    auto key = site.address.key();
    if (key == current_key_ && (stepped_ || (site.replace && current_replace_))) {
        // proposal already computed, or a redraw inside a rejection loop: the
        // step input does not depend on the rejected value
        stepped_ = true;
        return true;
    }
    const AddressLayers* l = net_.layers(key);
    if (!l) {
        lost_ = true;
        ++lost_runs_;
        return false;
    }
    state_ = net_.lstm_step(concat({obs_embed_, net_.address_embedding(*l, 1), prev_embed_}), state_);
    current_key_ = std::move(key);
    current_replace_ = site.replace;
    stepped_ = true;
    return true;
}

std::unique_ptr<sim::ProposalDistribution> NetworkProposalSource::propose(const sim::SiteInfo& site) {
    if (!advance(site)) return nullptr;
    const AddressLayers* l = net_.layers(current_key_);
    if (l->head == HeadKind::None) return nullptr;
    if (l->tag != site.prior.tag) return nullptr;
    const Tensor raw = net_.head_output(*l, state_.h);
    if (l->head == HeadKind::Categorical) {
        if (site.prior.category_count() != l->categories) return nullptr;
        const Tensor p = softmax(raw);
        return std::make_unique<sim::DistributionProposal>(Distribution::categorical(p.vec()));
    }
    const Distribution* prior = &site.prior;
    auto m = net_.mixture_params(raw, std::span<const Distribution* const>(&prior, 1));
    const Tensor w = softmax(m.logits);
    return std::make_unique<MixtureProposal>(w.vec(), m.means.vec(), m.stds.vec(), m.low[0], m.high[0]);
}

void NetworkProposalSource::record(const sim::SiteInfo& site, const Value& value) {
    if (!advance(site)) return;
    const AddressLayers* l = net_.layers(current_key_);
    const Value* v = &value;
    const Distribution* prior = &site.prior;
    prev_embed_ = net_.sample_embedding(*l, net_.encode_values(*l, std::span<const Value* const>(&v, 1),
                                                               std::span<const Distribution* const>(&prior, 1)));
    stepped_ = false;
}

MixtureProposal::MixtureProposal(std::vector<double> weights, std::vector<double> means, std::vector<double> stds,
                                 double low, double high)
    : weights_(std::move(weights)), means_(std::move(means)), stds_(std::move(stds)), low_(low), high_(high) {}

Value MixtureProposal::sample(CounterRng& rng) const {
    const double u = rng.uniform();
    std::size_t k = 0;
    double cdf = weights_[0];
    while (u >= cdf && k + 1 < weights_.size()) cdf += weights_[++k];
    const double alpha = (low_ - means_[k]) / stds_[k], beta = (high_ - means_[k]) / stds_[k];
    const double z = math::sample_std_truncated_normal(alpha, beta, rng.uniform());
    return std::clamp(means_[k] + stds_[k] * z, low_, high_);
}

double MixtureProposal::log_prob(const Value& v) const {
    const double x = v.to_double();
    if (x < low_ || x > high_) return -kInf;
    double mx = -kInf;
    std::vector<double> terms(weights_.size());
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        terms[k] = std::log(weights_[k]) + math::truncated_normal_log_pdf(x, means_[k], stds_[k], low_, high_);
        mx = std::max(mx, terms[k]);
    }
    if (std::isinf(mx)) return mx;
    double s = 0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

}  // namespace simtrace::nn
