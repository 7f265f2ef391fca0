// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "simtrace/store/record.hpp"

namespace simtrace::store {

// Shard file, little-endian:
//   "ETLM" | u16 version | u16 flags (bit0 sorted) | u32 shard ordinal
//   u32 dictionary delta count | delta strings (u32 length + bytes)
//   u64 trace count
//   index: count x {u64 offset, u32 length, u64 original index, u64 type_id, u32 latent count}
//   records (see record.hpp)
// Offsets are from the start of the file. Dictionary ids are global to the
// dataset: shard k's delta extends the dictionary left by shards 0..k-1.
inline constexpr std::uint16_t kShardVersion = 1;
inline constexpr std::size_t kDefaultShardSize = 10000;

struct IndexEntry {
    std::uint64_t offset = 0;
    std::uint32_t length = 0;
    std::uint64_t original_index = 0;
    std::uint64_t type_id = 0;
    std::uint32_t latent_count = 0;
};

struct ShardInfo {
    std::filesystem::path path;
    std::uint16_t version = 0;
    bool sorted = false;
    std::uint32_t ordinal = 0;
    std::size_t dictionary_delta = 0;
    std::size_t count = 0;
};

std::string shard_file_name(std::size_t ordinal);

class TraceDataset {
public:
    TraceDataset() = default;
    static TraceDataset open(const std::filesystem::path& dir);

    std::size_t size() const;
    bool empty() const { return size() == 0; }
    Trace read(std::size_t i) const;
    std::vector<Trace> read_all() const;
    const IndexEntry& entry(std::size_t i) const;
    std::uint64_t type_id(std::size_t i) const { return entry(i).type_id; }
    std::uint64_t original_index(std::size_t i) const { return entry(i).original_index; }

    bool sorted() const;
    const std::vector<ShardInfo>& shards() const;
    const AddressDictionary& dictionary() const;
    const std::filesystem::path& directory() const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

// Streams traces into shards of `shard_size`. If destroyed before finish(),
// or if a write fails, every shard it wrote is removed.
class ShardWriter {
public:
    ShardWriter(std::filesystem::path dir, std::size_t shard_size = kDefaultShardSize, bool sorted = false);
    ~ShardWriter();
    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;

    // Original index defaults to the running count.
    void add(const Trace& t);
    void add(const Trace& t, std::uint64_t original_index);
    TraceDataset finish();
    std::size_t written() const { return total_; }

private:
    void flush();
    void abort() noexcept;

    std::filesystem::path dir_;
    std::size_t shard_size_;
    bool sorted_;
    bool finished_ = false;
    AddressDictionary dict_;
    std::size_t dict_flushed_ = 0;
    std::vector<std::uint8_t> records_;
    std::vector<IndexEntry> index_;
    std::vector<std::filesystem::path> files_;
    std::size_t total_ = 0;
};

TraceDataset write_shards(std::span<const Trace> traces, const std::filesystem::path& dir,
                          std::size_t shard_size = kDefaultShardSize);

struct SortOptions {
    std::size_t shard_size = kDefaultShardSize;
    std::size_t run_size = 100000;  // traces held in memory per sorted run
    std::size_t workers = 1;        // runs sorted concurrently
};

// Stable external merge sort on (type_id, original index).
TraceDataset sort_by_type(const TraceDataset& in, const std::filesystem::path& out_dir, SortOptions opts = {});

}  // namespace simtrace::store
