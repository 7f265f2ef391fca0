// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

// simtrace: dataset generation, sorting, training, inference and reports.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

#include "simtrace/comm/collective.hpp"
#include "simtrace/infer/diagnostics.hpp"
#include "simtrace/infer/importance.hpp"
#include "simtrace/infer/posterior.hpp"
#include "simtrace/infer/rmh.hpp"
#include "simtrace/nn/settings.hpp"
#include "simtrace/nn/trainer.hpp"
#include "simtrace/store/dataset.hpp"
#include "simtrace/store/sampler.hpp"
#include "simtrace/wire/value_json.hpp"

using namespace simtrace;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string endpoint;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t shard_size = 10000;
};

void cmd_simulate(const SimulateArgs& a) {
    if (a.n == 0) throw UsageError("--n must be positive");
    sim::SimulatorEndpoint ep(a.endpoint);
    sim::Gateway gw(ep);
    sim::PriorPolicy prior;
    store::ShardWriter writer(a.out, a.shard_size);
    for (std::size_t i = 0; i < a.n; ++i) writer.add(gw.execute(std::nullopt, prior, a.seed, i));
    const auto ds = writer.finish();
    std::cout << "wrote " << ds.size() << " traces in " << ds.shards().size() << " shards to " << a.out << "\n";
}

// ---------------------------------------------------------------- dataset

struct SortArgs {
    std::string in, out;
    std::size_t shard_size = 10000, run_size = 100000, workers = 1;
};

void cmd_sort(const SortArgs& a) {
    const auto ds = store::TraceDataset::open(a.in);
    const auto sorted = store::sort_by_type(ds, a.out, {a.shard_size, a.run_size, a.workers});
    std::cout << "sorted " << sorted.size() << " traces into " << sorted.shards().size() << " shards at " << a.out << "\n";
}

struct InspectArgs {
    std::string in;
    std::size_t minibatch = 64;
    std::uint64_t seed = 0;
};

void cmd_inspect(const InspectArgs& a) {
    const auto ds = store::TraceDataset::open(a.in);
    std::map<std::uint64_t, std::size_t> types;
    std::vector<std::uint64_t> type_ids(ds.size());
    double latents = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        type_ids[i] = ds.type_id(i);
        ++types[type_ids[i]];
        latents += ds.entry(i).latent_count;
    }
    std::cout << "traces " << ds.size() << "\n"
              << "shards " << ds.shards().size() << "\n"
              << "sorted " << (ds.sorted() ? "yes" : "no") << "\n"
              << "addresses " << ds.dictionary().size() << "\n"
              << "trace_types " << types.size() << "\n"
              << "mean_latents " << (ds.size() ? latents / static_cast<double>(ds.size()) : 0.0) << "\n";
    if (ds.size() > 0) {
        const auto plan = store::plan_minibatches(ds, a.minibatch, 1, a.seed);
        std::cout << "mean_sub_minibatches " << store::mean_sub_minibatches(plan, type_ids) << " (minibatch "
                  << a.minibatch << ")\n";
    }
    std::vector<std::pair<std::size_t, std::uint64_t>> by_count;
    for (const auto& [t, c] : types) by_count.emplace_back(c, t);
    std::sort(by_count.rbegin(), by_count.rend());
    for (std::size_t i = 0; i < std::min<std::size_t>(10, by_count.size()); ++i) {
        std::cout << "type " << std::hex << std::setw(16) << std::setfill('0') << by_count[i].second << std::dec
                  << std::setfill(' ') << " count " << by_count[i].first << "\n";
    }
}

struct ObservationArgs {
    std::string in, out;
    std::size_t index = 0;
};

void cmd_observation(const ObservationArgs& a) {
    const auto ds = store::TraceDataset::open(a.in);
    if (a.index >= ds.size()) throw UsageError("--index out of range");
    const auto t = ds.read(a.index);
    if (!t.observation) throw std::runtime_error("trace has no observation");
    write_value_file(a.out, *t.observation);
    std::cout << "wrote observation of trace " << a.index << " to " << a.out << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string dataset, endpoint, config, checkpoint, log, resume, rendezvous = "127.0.0.1:29500";
    std::vector<std::string> overrides;
    std::uint32_t rank = 0, world = 1;
    std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a) {
    if (a.dataset.empty() == a.endpoint.empty()) throw UsageError("give exactly one of --dataset or --endpoint");
    if (a.world == 0 || a.rank >= a.world) throw UsageError("need 0 <= --rank < --world");
    nn::TrainingSettings s;
    if (!a.config.empty()) s = nn::load_settings(a.config);
    for (const auto& o : a.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
        nn::apply_setting(s, o.substr(0, eq), o.substr(eq + 1));
    }
    if (a.seed) s.seed = *a.seed;
    if (s.lr_scaling_alpha > 0) {
        s.train.schedule.lr0 = nn::scaled_learning_rate(s.train.schedule.lr0, a.world, s.lr_scaling_alpha);
        s.train.schedule.lr_final = nn::scaled_learning_rate(s.train.schedule.lr_final, a.world, s.lr_scaling_alpha);
    }
    s.train.checkpoint = a.rank == 0 ? a.checkpoint : "";

    std::unique_ptr<nn::MinibatchSource> source;
    std::optional<store::TraceDataset> ds;
    Trace first;
    if (!a.dataset.empty()) {
        ds = store::TraceDataset::open(a.dataset);
        if (ds->size() == 0) throw std::runtime_error("dataset is empty");
        first = ds->read(0);
    } else {
        sim::SimulatorEndpoint ep(a.endpoint);
        first = sim::sample_prior(ep, 1, s.seed)[0];
    }
    if (!s.obs_shape_set && first.observation) {
        const auto flat = first.observation->flatten();
        s.network.obs_shape = first.observation->is_tensor()
                                  ? std::vector<std::size_t>(first.observation->as_tensor().shape.begin(),
                                                             first.observation->as_tensor().shape.end())
                                  : std::vector<std::size_t>{flat.size()};
    }

    nn::ProposalNetwork net(s.network);
    auto group = comm::make_group(a.rank, a.world, a.rendezvous);
    nn::Trainer real(net, s.train, *group);
    if (!a.resume.empty()) nn::Trainer::load_checkpoint(a.resume, net, real.optimizer());
    if (ds) {
        if (a.resume.empty()) {
            const auto added = nn::pregenerate_layers(net, *ds);
            if (a.rank == 0) std::cerr << "pre-generated " << added << " address layers, " << net.parameter_count() << " parameters\n";
        }
        source = std::make_unique<nn::DatasetSource>(std::move(*ds), s.seed, s.buckets);
    } else {
        // Online training needs a frozen registry; build it from a prior sample.
        if (a.resume.empty()) {
            sim::SimulatorEndpoint ep(a.endpoint);
            for (const auto& t : sim::sample_prior(ep, std::max<std::size_t>(1000, s.train.minibatch), s.seed ^ 0xA11CE)) {
                net.register_trace(t);
            }
        }
        source = std::make_unique<nn::OnlineSource>(a.endpoint, s.seed);
    }
    std::ofstream log_file;
    if (!a.log.empty() && a.rank == 0) {
        log_file.open(a.log);
        if (!log_file) throw std::runtime_error("cannot write " + a.log);
        real.set_log_stream(&log_file);
    } else if (a.rank == 0) {
        real.set_log_stream(&std::cout);
    }
    const auto result = real.run(*source);
    if (a.rank == 0) {
        std::cerr << "trained " << result.log.size() << " iterations";
        if (!result.log.empty()) std::cerr << ", final loss " << result.log.back().loss;
        std::cerr << ", skipped traces " << result.skipped_traces << "\n";
    }
}

// ---------------------------------------------------------------- infer

struct InferArgs {
    std::string engine = "is", endpoint, observation, checkpoint, out;
    std::size_t n = 0, chains = 1, burn_in = 0, workers = 1;
    bool burn_in_set = false;
    std::string kernel = "prior";
    double step = 0.5;
    std::uint64_t seed = 0;
};

std::string chain_path(const std::string& out, std::size_t i, std::size_t chains) {
    if (chains == 1) return out;
    const fs::path p(out);
    return (p.parent_path() / (p.stem().string() + "-chain" + std::to_string(i) + p.extension().string())).string();
}

void report_weighted(const infer::WeightedTraceSet& ws) {
    const double ess = ws.ess();
    std::cout << "samples " << ws.size() << "\n"
              << "aborted_runs " << ws.aborted << "\n"
              << "ess " << ess << "\n"
              << "ess_fraction " << ess / static_cast<double>(std::max<std::size_t>(1, ws.size())) << "\n"
              << "log_evidence " << infer::estimate_log_evidence(ws) << "\n";
}

void report_moments(const infer::PosteriorSamples& ps) {
    for (std::size_t k = 0; k < ps.keys.size(); ++k) {
        std::vector<double> xs, ws;
        ps.marginal(k, xs, ws);
        if (xs.empty()) continue;
        const auto m = infer::weighted_moments(xs, ws);
        std::cout << "marginal " << ps.keys[k] << " mean " << m.mean << " sd " << std::sqrt(m.variance) << "\n";
    }
}

void cmd_infer(const InferArgs& a) {
    if (a.n == 0) throw UsageError("--n must be positive");
    if (a.chains == 0) throw UsageError("--chains must be positive");
    static const std::set<std::string> engines{"prior", "is", "ic", "rmh"};
    if (!engines.contains(a.engine)) throw UsageError("--engine must be prior, is, ic or rmh");
    if (a.engine != "prior" && a.observation.empty()) throw UsageError("--observation is required for " + a.engine);
    if (a.engine == "ic" && a.checkpoint.empty()) throw UsageError("--checkpoint is required for ic");
    if (a.kernel != "prior" && a.kernel != "random-walk") throw UsageError("--kernel must be prior or random-walk");

    sim::SimulatorEndpoint ep(a.endpoint);
    if (a.engine == "prior") {
        infer::WeightedTraceSet ws;
        ws.traces = sim::sample_prior(ep, a.n, a.seed);
        ws.log_weights.assign(ws.traces.size(), 0.0);
        const auto ps = infer::from_weighted(ws);
        if (!a.out.empty()) infer::write_posterior(a.out, ps);
        std::cout << "samples " << ws.size() << "\n";
        report_moments(ps);
        return;
    }
    const Value obs = read_value_file(a.observation);
    if (a.engine == "is" || a.engine == "ic") {
        infer::ImportanceOptions o;
        o.n = a.n;
        o.seed = a.seed;
        infer::WeightedTraceSet ws;
        if (a.engine == "is") {
            ws = infer::parallel_importance_sample(a.endpoint, obs, o, a.workers);
        } else {
            const auto net = nn::ProposalNetwork::load(a.checkpoint);
            ws = infer::parallel_importance_sample(a.endpoint, obs, o, a.workers,
                                                   [&net] { return std::make_unique<nn::NetworkProposalSource>(net); });
        }
        const auto ps = infer::from_weighted(ws);
        if (!a.out.empty()) infer::write_posterior(a.out, ps);
        report_weighted(ws);
        report_moments(ps);
        return;
    }
    infer::RmhOptions o;
    o.iterations = a.n;
    if (a.burn_in_set) o.burn_in = a.burn_in;
    o.kernel = a.kernel == "prior" ? infer::RmhOptions::Kernel::Prior : infer::RmhOptions::Kernel::RandomWalk;
    o.random_walk_scale = a.step;
    std::vector<infer::PosteriorSamples> chains;
    for (std::size_t c = 0; c < a.chains; ++c) {
        o.seed = a.seed + c;
        const auto chain = infer::rmh_run(ep, obs, o);
        std::cout << "chain " << c << " acceptance " << chain.acceptance_rate() << " skipped " << chain.skipped << "\n";
        chains.push_back(infer::from_chain(chain));
        if (!a.out.empty()) infer::write_posterior(chain_path(a.out, c, a.chains), chains.back());
    }
    report_moments(chains[0]);
    if (chains.size() > 1) {
        for (const auto& key : chains[0].keys) {
            std::vector<std::vector<double>> series;
            for (const auto& ch : chains) {
                const auto col = ch.column(key);
                if (!col) break;
                std::vector<double> xs;
                for (const auto& row : ch.rows) {
                    if (row[*col]) xs.push_back(*row[*col]);
                }
                if (xs.size() < 4) break;
                series.push_back(std::move(xs));
            }
            if (series.size() != chains.size()) continue;
            const auto len = std::min_element(series.begin(), series.end(), [](auto& x, auto& y) { return x.size() < y.size(); })->size();
            for (auto& s : series) s.resize(len);
            try {
                std::cout << "rhat " << key << " " << infer::gelman_rubin(series) << "\n";
            } catch (const std::exception&) {
            }
        }
    }
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    std::vector<std::string> chains;
    std::string address;
    std::size_t max_lag = 50;
};

std::string resolve_key(const infer::PosteriorSamples& ps, const std::string& address) {
    if (ps.column(address)) return address;
    std::vector<std::string> matches;
    for (const auto& k : ps.keys) {
        if (k.find(address) != std::string::npos) matches.push_back(k);
    }
    if (matches.size() == 1) return matches[0];
    if (matches.empty()) throw UsageError("no address matches '" + address + "'");
    std::string msg = "address '" + address + "' is ambiguous:";
    for (const auto& m : matches) msg += "\n  " + m;
    throw UsageError(msg);
}

void cmd_diagnose(const DiagnoseArgs& a) {
    std::vector<std::vector<double>> series;
    std::string key;
    for (const auto& path : a.chains) {
        const auto ps = infer::read_posterior(path);
        if (key.empty()) key = resolve_key(ps, a.address);
        const auto col = ps.column(key);
        if (!col) throw std::runtime_error(path + " has no column " + key);
        std::vector<double> xs;
        for (const auto& row : ps.rows) {
            if (row[*col]) xs.push_back(*row[*col]);
        }
        series.push_back(std::move(xs));
    }
    std::cout << "address " << key << "\n";
    for (std::size_t c = 0; c < series.size(); ++c) {
        const auto& xs = series[c];
        const auto lag = std::min(a.max_lag, xs.size() > 1 ? xs.size() - 1 : 0);
        if (lag == 0) {
            std::cout << "chain " << c << " too short\n";
            continue;
        }
        const auto rho = infer::autocorrelation(xs, lag);
        const auto m = infer::weighted_moments(xs);
        std::cout << "chain " << c << " n " << xs.size() << " mean " << m.mean << " sd " << std::sqrt(m.variance)
                  << " ess " << infer::autocorrelation_ess(xs, lag) << "\n";
        std::cout << "acf " << c;
        for (std::size_t k = 0; k <= std::min<std::size_t>(lag, 10); ++k) std::cout << " " << rho[k];
        std::cout << "\n";
    }
    if (series.size() >= 2) {
        std::size_t len = series[0].size();
        for (const auto& s : series) len = std::min(len, s.size());
        for (auto& s : series) s.resize(len);
        std::cout << "rhat " << infer::gelman_rubin(series) << "\n";
    }
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
    std::string a, b, histograms;
    std::size_t bins = 20;
};

void cmd_compare(const CompareArgs& a) {
    const auto pa = infer::read_posterior(a.a);
    const auto pb = infer::read_posterior(a.b);
    const auto cmp = infer::compare_posteriors(pa, pb, a.bins);
    std::cout << "address,presence_a,presence_b,mean_a,mean_b,w1\n";
    for (const auto& c : cmp) {
        std::cout << c.key << "," << c.presence_a << "," << c.presence_b << "," << c.mean_a << "," << c.mean_b << ","
                  << c.w1 << "\n";
    }
    if (!a.histograms.empty()) {
        std::ofstream out(a.histograms);
        if (!out) throw std::runtime_error("cannot write " + a.histograms);
        out << "address,bin_low,bin_high,mass_a,mass_b\n";
        for (const auto& c : cmp) {
            const auto& h = c.hist_a;
            const auto bins = h.mass.size();
            for (std::size_t i = 0; i < bins; ++i) {
                const double w = (h.high - h.low) / static_cast<double>(bins);
                out << c.key << "," << h.low + w * static_cast<double>(i) << "," << h.low + w * static_cast<double>(i + 1)
                    << "," << h.mass[i] << "," << c.hist_b.mass[i] << "\n";
            }
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simtrace: probabilistic programming runtime for instrumented simulators"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Generate prior traces into a sharded dataset");
    simulate->add_option("--endpoint", sim_args.endpoint, "Simulator endpoint (inproc:<model>, spawn:<cmd>, tcp:<host>:<port>, ipc:<path>)")->required();
    simulate->add_option("--n", sim_args.n, "Number of traces")->required();
    simulate->add_option("--seed", sim_args.seed, "Random seed");
    simulate->add_option("--out", sim_args.out, "Output dataset directory")->required();
    simulate->add_option("--shard-size", sim_args.shard_size, "Traces per shard")->check(CLI::PositiveNumber);

    auto* dataset = app.add_subcommand("dataset", "Dataset tools");
    dataset->require_subcommand(1);
    SortArgs sort_args;
    auto* sort = dataset->add_subcommand("sort", "Sort a dataset by trace type");
    sort->add_option("--in", sort_args.in, "Input dataset")->required();
    sort->add_option("--out", sort_args.out, "Output dataset")->required();
    sort->add_option("--shard-size", sort_args.shard_size, "Traces per output shard")->check(CLI::PositiveNumber);
    sort->add_option("--run-size", sort_args.run_size, "Traces per in-memory run")->check(CLI::PositiveNumber);
    sort->add_option("--workers", sort_args.workers, "Parallel run sorters")->check(CLI::PositiveNumber);
    InspectArgs inspect_args;
    auto* inspect = dataset->add_subcommand("inspect", "Summarise a dataset");
    inspect->add_option("--in", inspect_args.in, "Dataset")->required();
    inspect->add_option("--minibatch", inspect_args.minibatch, "Minibatch size for sub-minibatch count")->check(CLI::PositiveNumber);
    inspect->add_option("--seed", inspect_args.seed, "Random seed for the minibatch plan");
    ObservationArgs obs_args;
    auto* observation = dataset->add_subcommand("observation", "Write one trace's observation as JSON");
    observation->add_option("--in", obs_args.in, "Dataset")->required();
    observation->add_option("--index", obs_args.index, "Trace position")->required();
    observation->add_option("--out", obs_args.out, "Output file")->required();

    TrainArgs train_args;
    std::uint64_t train_seed = 0;
    auto* train = app.add_subcommand("train", "Train a proposal network");
    train->add_option("--dataset", train_args.dataset, "Offline training dataset");
    train->add_option("--endpoint", train_args.endpoint, "Online training from a simulator");
    train->add_option("--config", train_args.config, "Flat key = value config file");
    train->add_option("--set", train_args.overrides, "Config override key=value (repeatable)");
    train->add_option("--checkpoint", train_args.checkpoint, "Checkpoint path written by rank 0");
    train->add_option("--resume", train_args.resume, "Continue from a checkpoint");
    train->add_option("--log", train_args.log, "Line-delimited JSON log (default stdout)");
    train->add_option("--rank", train_args.rank, "Worker rank");
    train->add_option("--world", train_args.world, "Number of workers");
    train->add_option("--rendezvous", train_args.rendezvous, "host:port where rank 0 listens");
    auto* train_seed_opt = train->add_option("--seed", train_seed, "Random seed (overrides config)");

    InferArgs infer_args;
    auto* inf = app.add_subcommand("infer", "Posterior inference for one observation");
    inf->add_option("--engine", infer_args.engine, "prior | is | ic | rmh");
    inf->add_option("--endpoint", infer_args.endpoint, "Simulator endpoint")->required();
    inf->add_option("--observation", infer_args.observation, "Observation JSON file");
    inf->add_option("--n", infer_args.n, "Samples (is, ic, prior) or iterations per chain (rmh)")->required();
    inf->add_option("--checkpoint", infer_args.checkpoint, "Trained network (ic)");
    inf->add_option("--chains", infer_args.chains, "Independent rmh chains");
    auto* burn = inf->add_option("--burn-in", infer_args.burn_in, "rmh burn-in iterations (default 10%)");
    inf->add_option("--kernel", infer_args.kernel, "rmh kernel: prior | random-walk");
    inf->add_option("--step", infer_args.step, "random-walk step in prior scale units");
    inf->add_option("--workers", infer_args.workers, "Parallel simulator instances (is, ic)")->check(CLI::PositiveNumber);
    inf->add_option("--seed", infer_args.seed, "Random seed");
    inf->add_option("--out", infer_args.out, "Posterior CSV (rmh chains get -chain<i> suffixes)");

    DiagnoseArgs diag_args;
    auto* diagnose = app.add_subcommand("diagnose", "Autocorrelation, ESS and Gelman-Rubin for chains");
    diagnose->add_option("--chains", diag_args.chains, "Posterior CSV files, one per chain")->required();
    diagnose->add_option("--address", diag_args.address, "Latent key or unique substring")->required();
    diagnose->add_option("--max-lag", diag_args.max_lag, "Largest autocorrelation lag")->check(CLI::PositiveNumber);

    CompareArgs cmp_args;
    auto* compare = app.add_subcommand("compare", "Per-address histograms and Wasserstein-1 distances");
    compare->add_option("--a", cmp_args.a, "First posterior CSV")->required();
    compare->add_option("--b", cmp_args.b, "Second posterior CSV")->required();
    compare->add_option("--bins", cmp_args.bins, "Histogram bins")->check(CLI::PositiveNumber);
    compare->add_option("--histograms", cmp_args.histograms, "Write histograms as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        if (simulate->parsed()) cmd_simulate(sim_args);
        if (sort->parsed()) cmd_sort(sort_args);
        if (inspect->parsed()) cmd_inspect(inspect_args);
        if (observation->parsed()) cmd_observation(obs_args);
        if (train->parsed()) {
            if (train_seed_opt->count() > 0) train_args.seed = train_seed;
            cmd_train(train_args);
        }
        if (inf->parsed()) {
            infer_args.burn_in_set = burn->count() > 0;
            cmd_infer(infer_args);
        }
        if (diagnose->parsed()) cmd_diagnose(diag_args);
        if (compare->parsed()) cmd_compare(cmp_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const nn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return 0;
}
