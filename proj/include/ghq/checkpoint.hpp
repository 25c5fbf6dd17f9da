#pragma once

#include <string>
#include <vector>

#include "ghq/tensor.hpp"

namespace ghq {

// Flat (name, shape, float64 data) records with a JSON metadata string.
// Binary little-endian container; doubles are written raw, so a load/save
// round trip is bit-exact. Layout:
//   magic "GHQC", u32 version, u32 meta_len, meta bytes,
//   u64 n_records, then per record:
//   u32 name_len, name bytes, u32 ndim, u64 dims[ndim], f64 data[prod(dims)]
struct CheckpointRecord {
    std::string name;
    Tensor tensor;
};

void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const std::vector<CheckpointRecord>& records);

struct Checkpoint {
    std::string meta_json;
    std::vector<CheckpointRecord> records;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ghq
