#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tavp/tensor.hpp"

namespace tavp {

// Binary container for a ParamStore snapshot. Layout (all little-endian):
//   magic "TAVP" | u32 version | u32 stage | u64 arch fingerprint
//   | u32 parent count | u64 parent hashes...
//   | u32 tensor count | per tensor: u32 name len, name bytes, u32 ndim,
//     u64 dims..., u64 element offset into the blob
//   | u64 blob element count | f64 data...
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  uint32_t stage = 0;
  uint64_t arch = 0;
  std::vector<uint64_t> parents;  // content hashes of the lineage, oldest first
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const net::ParamStore& store);

// Replaces the contents of `store` with the tensors in the file, preserving
// the file's manifest order. If `store` is non-empty, every tensor in it must
// reappear in the file with an identical shape.
CheckpointMeta load_checkpoint(const std::string& path, net::ParamStore& store);

}  // namespace tavp
