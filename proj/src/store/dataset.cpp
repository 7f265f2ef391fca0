// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/store/dataset.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <queue>
#include <thread>

#include "simtrace/wire/codec.hpp"

namespace simtrace::store {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'E', 'T', 'L', 'M'};
constexpr std::size_t kIndexEntrySize = 8 + 4 + 8 + 8 + 4;

class Fd {
public:
    explicit Fd(const fs::path& p) : fd_(::open(p.c_str(), O_RDONLY | O_CLOEXEC)) {
        if (fd_ < 0) throw StoreError("cannot open " + p.string() + ": " + std::strerror(errno));
    }
    ~Fd() {
        if (fd_ >= 0) ::close(fd_);
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;

    void pread_all(void* buf, std::size_t n, std::uint64_t offset) const {
        auto* p = static_cast<char*>(buf);
        while (n > 0) {
            const auto r = ::pread(fd_, p, n, static_cast<off_t>(offset));
            if (r < 0 && errno == EINTR) continue;
            if (r <= 0) throw StoreError("short read from shard");
            p += r;
            n -= static_cast<std::size_t>(r);
            offset += static_cast<std::uint64_t>(r);
        }
    }

private:
    int fd_;
};

}  // namespace

std::string shard_file_name(std::size_t ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shard-%05zu.etlm", ordinal);
    return buf;
}

struct TraceDataset::Impl {
    fs::path dir;
    std::vector<ShardInfo> shards;
    std::vector<std::unique_ptr<Fd>> fds;
    std::vector<IndexEntry> index;
    std::vector<std::uint32_t> shard_of;
    AddressDictionary dict;
    bool sorted = true;
};

TraceDataset TraceDataset::open(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw StoreError("dataset directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("shard-", 0) == 0 && e.path().extension() == ".etlm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    TraceDataset ds;
    ds.impl_ = std::make_shared<Impl>();
    auto& im = *ds.impl_;
    im.dir = dir;
    for (std::size_t s = 0; s < files.size(); ++s) {
        // header and index only; records are read on demand
        std::ifstream f(files[s], std::ios::binary);
        if (!f) throw StoreError("cannot open " + files[s].string());
        auto read_some = [&](std::size_t n) {
            std::vector<std::uint8_t> b(n);
            f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(n));
            if (static_cast<std::size_t>(f.gcount()) != n) throw StoreError("truncated shard " + files[s].string());
            return b;
        };
        try {
            auto head = read_some(16);
            wire::ByteReader r(head);
            for (char c : kMagic) {
                if (r.u8() != static_cast<std::uint8_t>(c)) throw StoreError(files[s].string() + " is not a shard file");
            }
            ShardInfo info;
            info.path = files[s];
            info.version = r.u16();
            if (info.version != kShardVersion) {
                throw StoreError("unsupported shard version " + std::to_string(info.version));
            }
            info.sorted = r.u16() & 1;
            info.ordinal = r.u32();
            if (info.ordinal != s) throw StoreError("shard ordinal gap at " + files[s].string());
            const auto delta = r.u32();
            info.dictionary_delta = delta;
            for (std::uint32_t i = 0; i < delta; ++i) {
                auto len_b = read_some(4);
                const auto len = wire::ByteReader(len_b).u32();
                auto str = read_some(len);
                const std::string name(str.begin(), str.end());
                if (im.dict.intern(name) != im.dict.size() - 1) throw StoreError("duplicate dictionary entry");
            }
            auto count_b = read_some(8);
            info.count = wire::ByteReader(count_b).u64();
            auto idx = read_some(info.count * kIndexEntrySize);
            wire::ByteReader ir(idx);
            for (std::size_t i = 0; i < info.count; ++i) {
                IndexEntry e;
                e.offset = ir.u64();
                e.length = ir.u32();
                e.original_index = ir.u64();
                e.type_id = ir.u64();
                e.latent_count = ir.u32();
                im.index.push_back(e);
                im.shard_of.push_back(static_cast<std::uint32_t>(s));
            }
            im.sorted = im.sorted && info.sorted;
            im.shards.push_back(info);
            im.fds.push_back(std::make_unique<Fd>(files[s]));
        } catch (const wire::ProtocolError& e) {
            throw StoreError("corrupt shard header in " + files[s].string() + ": " + e.what());
        }
    }
    if (files.empty()) im.sorted = false;
    return ds;
}

std::size_t TraceDataset::size() const { return impl_ ? impl_->index.size() : 0; }

const IndexEntry& TraceDataset::entry(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("trace index " + std::to_string(i) + " out of range");
    return impl_->index[i];
}

Trace TraceDataset::read(std::size_t i) const {
    const auto& e = entry(i);
    std::vector<std::uint8_t> buf(e.length);
    impl_->fds[impl_->shard_of[i]]->pread_all(buf.data(), buf.size(), e.offset);
    return decode_record(buf, &impl_->dict);
}

std::vector<Trace> TraceDataset::read_all() const {
    std::vector<Trace> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(read(i));
    return out;
}

bool TraceDataset::sorted() const { return impl_ && impl_->sorted; }

const std::vector<ShardInfo>& TraceDataset::shards() const {
    static const std::vector<ShardInfo> none;
    return impl_ ? impl_->shards : none;
}

const AddressDictionary& TraceDataset::dictionary() const {
    static const AddressDictionary none;
    return impl_ ? impl_->dict : none;
}

const fs::path& TraceDataset::directory() const {
    static const fs::path none;
    return impl_ ? impl_->dir : none;
}

// ---- writer ----

ShardWriter::ShardWriter(fs::path dir, std::size_t shard_size, bool sorted)
    : dir_(std::move(dir)), shard_size_(shard_size), sorted_(sorted) {
    if (shard_size_ == 0) throw std::invalid_argument("shard size must be positive");
    fs::create_directories(dir_);
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.path().extension() == ".etlm") {
            throw StoreError("dataset directory " + dir_.string() + " already contains shards");
        }
    }
}

ShardWriter::~ShardWriter() {
    if (!finished_) abort();
}

void ShardWriter::abort() noexcept {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    files_.clear();
}

void ShardWriter::add(const Trace& t) { add(t, total_); }

void ShardWriter::add(const Trace& t, std::uint64_t original_index) {
    if (finished_) throw std::logic_error("ShardWriter already finished");
    IndexEntry e;
    e.offset = records_.size();
    try {
        encode_record(t, &dict_, records_);
    } catch (...) {
        records_.resize(e.offset);
        throw;
    }
    e.length = static_cast<std::uint32_t>(records_.size() - e.offset);
    e.original_index = original_index;
    e.type_id = t.type_id;
    e.latent_count = static_cast<std::uint32_t>(t.latent_count());
    index_.push_back(e);
    ++total_;
    if (index_.size() == shard_size_) flush();
}

void ShardWriter::flush() {
    if (index_.empty()) return;
    std::vector<std::uint8_t> head;
    wire::ByteWriter w(head);
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kShardVersion);
    w.u16(sorted_ ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(files_.size()));
    const auto& names = dict_.entries();
    w.u32(static_cast<std::uint32_t>(names.size() - dict_flushed_));
    for (std::size_t i = dict_flushed_; i < names.size(); ++i) w.string(names[i]);
    w.u64(index_.size());
    const std::uint64_t base = head.size() + index_.size() * kIndexEntrySize;
    for (const auto& e : index_) {
        w.u64(base + e.offset);
        w.u32(e.length);
        w.u64(e.original_index);
        w.u64(e.type_id);
        w.u32(e.latent_count);
    }
    const auto path = dir_ / shard_file_name(files_.size());
    files_.push_back(path);
    try {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw StoreError("cannot create " + path.string());
        f.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
        f.write(reinterpret_cast<const char*>(records_.data()), static_cast<std::streamsize>(records_.size()));
        f.flush();
        if (!f) throw StoreError("write failed for " + path.string() + " (disk full?)");
    } catch (...) {
        abort();
        finished_ = true;
        throw;
    }
    dict_flushed_ = names.size();
    records_.clear();
    index_.clear();
}

TraceDataset ShardWriter::finish() {
    if (finished_) throw std::logic_error("ShardWriter already finished");
    flush();
    finished_ = true;
    return TraceDataset::open(dir_);
}

TraceDataset write_shards(std::span<const Trace> traces, const fs::path& dir, std::size_t shard_size) {
    ShardWriter w(dir, shard_size);
    for (const auto& t : traces) w.add(t);
    return w.finish();
}

// ---- sort ----

TraceDataset sort_by_type(const TraceDataset& in, const fs::path& out_dir, SortOptions opts) {
    if (opts.run_size == 0 || opts.workers == 0) throw std::invalid_argument("run size and workers must be positive");
    const std::size_t n = in.size();
    const std::size_t runs = (n + opts.run_size - 1) / opts.run_size;
    const fs::path tmp = out_dir.string() + ".runs";
    fs::remove_all(tmp);
    struct Cleanup {
        fs::path p;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    } cleanup{tmp};

    auto key_less = [&](std::size_t a, std::size_t b) {
        const auto& ea = in.entry(a);
        const auto& eb = in.entry(b);
        return std::tie(ea.type_id, ea.original_index) < std::tie(eb.type_id, eb.original_index);
    };

    // phase 1: sorted runs, written as their own datasets
    std::vector<std::exception_ptr> errors(runs);
    auto make_run = [&](std::size_t r) {
        try {
            const std::size_t lo = r * opts.run_size, hi = std::min(n, lo + opts.run_size);
            std::vector<std::size_t> order(hi - lo);
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = lo + i;
            std::stable_sort(order.begin(), order.end(), key_less);
            ShardWriter w(tmp / std::to_string(r), opts.run_size, true);
            for (auto i : order) w.add(in.read(i), in.original_index(i));
            w.finish();
        } catch (...) {
            errors[r] = std::current_exception();
        }
    };
    for (std::size_t base = 0; base < runs; base += opts.workers) {
        std::vector<std::thread> pool;
        for (std::size_t r = base; r < std::min(runs, base + opts.workers); ++r) pool.emplace_back(make_run, r);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    // phase 2: k-way merge
    std::vector<TraceDataset> parts;
    for (std::size_t r = 0; r < runs; ++r) parts.push_back(TraceDataset::open(tmp / std::to_string(r)));
    using Head = std::tuple<std::uint64_t, std::uint64_t, std::size_t, std::size_t>;  // type, orig, run, pos
    std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
    for (std::size_t r = 0; r < runs; ++r) {
        if (!parts[r].empty()) heap.emplace(parts[r].type_id(0), parts[r].original_index(0), r, 0);
    }
    ShardWriter out(out_dir, opts.shard_size, true);
    while (!heap.empty()) {
        const auto [type, orig, r, pos] = heap.top();
        heap.pop();
        out.add(parts[r].read(pos), orig);
        if (pos + 1 < parts[r].size()) {
            heap.emplace(parts[r].type_id(pos + 1), parts[r].original_index(pos + 1), r, pos + 1);
        }
    }
    return out.finish();
}

}  // namespace simtrace::store
