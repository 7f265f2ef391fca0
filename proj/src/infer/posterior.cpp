// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/infer/posterior.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "simtrace/infer/diagnostics.hpp"

namespace simtrace::infer {

std::optional<std::size_t> PosteriorSamples::column(const std::string& key) const {
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) return std::nullopt;
    return static_cast<std::size_t>(it - keys.begin());
}

std::vector<double> PosteriorSamples::normalized_weights() const {
    WeightedTraceSet tmp;
    tmp.log_weights = log_weights;
    return tmp.normalized_weights();
}

void PosteriorSamples::marginal(std::size_t col, std::vector<double>& values, std::vector<double>& weights) const {
    const auto w = normalized_weights();
    values.clear();
    weights.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (col < rows[i].size() && rows[i][col] && w[i] > 0) {
            values.push_back(*rows[i][col]);
            weights.push_back(w[i]);
        }
    }
}

namespace {

class Builder {
public:
    void add(const Trace& t, double log_weight) {
        std::vector<std::optional<double>> row(ps.keys.size());
        for (const auto& e : t.entries) {
            if (!e.is_latent() || e.value.is_tensor() || e.value.is_string()) continue;
            const auto key = e.address.key();
            auto [it, inserted] = index_.emplace(key, ps.keys.size());
            if (inserted) ps.keys.push_back(key);
            if (row.size() <= it->second) row.resize(it->second + 1);
            row[it->second] = e.value.to_double();
        }
        ps.type_ids.push_back(t.type_id);
        ps.log_weights.push_back(log_weight);
        ps.rows.push_back(std::move(row));
    }
    PosteriorSamples finish() {
        for (auto& r : ps.rows) r.resize(ps.keys.size());
        return std::move(ps);
    }

private:
    PosteriorSamples ps;
    std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("bad number in posterior file: " + s);
    return v;
}

}  // namespace

PosteriorSamples from_weighted(const WeightedTraceSet& ws) {
    Builder b;
    for (std::size_t i = 0; i < ws.size(); ++i) b.add(ws.traces[i], ws.log_weights[i]);
    return b.finish();
}

PosteriorSamples from_chain(const MarkovChain& chain) {
    Builder b;
    for (auto i : chain.kept()) b.add(chain.at(i), 0.0);
    return b.finish();
}

void write_posterior(std::ostream& os, const PosteriorSamples& ps) {
    os << std::setprecision(17);
    for (std::size_t k = 0; k < ps.keys.size(); ++k) os << "# a" << k << " " << ps.keys[k] << "\n";
    os << "type_id,log_weight";
    for (std::size_t k = 0; k < ps.keys.size(); ++k) os << ",a" << k;
    os << "\n";
    for (std::size_t i = 0; i < ps.size(); ++i) {
        os << ps.type_ids[i] << "," << ps.log_weights[i];
        for (const auto& v : ps.rows[i]) {
            os << ",";
            if (v) os << *v;
        }
        os << "\n";
    }
}

void write_posterior(const std::string& path, const PosteriorSamples& ps) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_posterior(os, ps);
    if (!os) throw std::runtime_error("write failed: " + path);
}

PosteriorSamples read_posterior(std::istream& is) {
    PosteriorSamples ps;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string id, key;
            ls >> id >> key;
            ps.keys.push_back(key);
            continue;
        }
        auto cells = split(line, ',');
        if (!header) {
            if (cells.size() != ps.keys.size() + 2 || cells[0] != "type_id") {
                throw std::runtime_error("posterior header does not match key list");
            }
            header = true;
            continue;
        }
        if (cells.size() != ps.keys.size() + 2) throw std::runtime_error("posterior row has wrong column count");
        ps.type_ids.push_back(std::stoull(cells[0]));
        ps.log_weights.push_back(parse_double(cells[1]));
        std::vector<std::optional<double>> row(ps.keys.size());
        for (std::size_t k = 0; k < ps.keys.size(); ++k) {
            if (!cells[k + 2].empty()) row[k] = parse_double(cells[k + 2]);
        }
        ps.rows.push_back(std::move(row));
    }
    if (!header) throw std::runtime_error("posterior file has no header row");
    return ps;
}

PosteriorSamples read_posterior(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_posterior(is);
}

double wasserstein1(std::vector<double> xa, std::vector<double> wa, std::vector<double> xb, std::vector<double> wb) {
    if (xa.empty() || xb.empty()) throw std::invalid_argument("wasserstein1 of an empty sample");
    auto normalise = [](std::vector<double>& w) {
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto& x : w) x /= s;
    };
    normalise(wa);
    normalise(wb);
    // Walk the merged breakpoints with each CDF accumulated in its own order,
    // so identical inputs give exactly zero.
    auto sorted = [](const std::vector<double>& x, const std::vector<double>& w) {
        std::vector<std::pair<double, double>> p(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) p[i] = {x[i], w[i]};
        std::sort(p.begin(), p.end());
        return p;
    };
    const auto pa = sorted(xa, wa), pb = sorted(xb, wb);
    std::size_t i = 0, j = 0;
    double fa = 0, fb = 0, total = 0;
    double x = std::min(pa[0].first, pb[0].first);
    while (i < pa.size() || j < pb.size()) {
        while (i < pa.size() && pa[i].first <= x) fa += pa[i++].second;
        while (j < pb.size() && pb[j].first <= x) fb += pb[j++].second;
        const double next = std::min(i < pa.size() ? pa[i].first : INFINITY, j < pb.size() ? pb[j].first : INFINITY);
        if (!std::isfinite(next)) break;
        total += std::abs(fa - fb) * (next - x);
        x = next;
    }
    return total;
}

Histogram histogram(const std::vector<double>& xs, const std::vector<double>& ws, double low, double high,
                    std::size_t bins) {
    Histogram h{low, high, std::vector<double>(bins, 0.0)};
    double total = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = ws.empty() ? 1.0 : ws[i];
        total += w;
        if (high <= low) {
            h.mass[0] += w;
            continue;
        }
        auto b = static_cast<long>(std::floor((xs[i] - low) / (high - low) * static_cast<double>(bins)));
        b = std::clamp<long>(b, 0, static_cast<long>(bins) - 1);
        h.mass[static_cast<std::size_t>(b)] += w;
    }
    if (total > 0) {
        for (auto& m : h.mass) m /= total;
    }
    return h;
}

std::vector<MarginalComparison> compare_posteriors(const PosteriorSamples& a, const PosteriorSamples& b,
                                                   std::size_t bins) {
    std::vector<MarginalComparison> out;
    for (std::size_t ka = 0; ka < a.keys.size(); ++ka) {
        const auto kb = b.column(a.keys[ka]);
        if (!kb) continue;
        MarginalComparison c;
        c.key = a.keys[ka];
        std::vector<double> xa, wa, xb, wb;
        a.marginal(ka, xa, wa);
        b.marginal(*kb, xb, wb);
        if (xa.empty() || xb.empty()) continue;
        c.presence_a = std::accumulate(wa.begin(), wa.end(), 0.0);
        c.presence_b = std::accumulate(wb.begin(), wb.end(), 0.0);
        c.mean_a = weighted_moments(xa, wa).mean;
        c.mean_b = weighted_moments(xb, wb).mean;
        c.w1 = wasserstein1(xa, wa, xb, wb);
        const double lo = std::min(*std::min_element(xa.begin(), xa.end()), *std::min_element(xb.begin(), xb.end()));
        const double hi = std::max(*std::max_element(xa.begin(), xa.end()), *std::max_element(xb.begin(), xb.end()));
        c.hist_a = histogram(xa, wa, lo, hi, bins);
        c.hist_b = histogram(xb, wb, lo, hi, bins);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace simtrace::infer
