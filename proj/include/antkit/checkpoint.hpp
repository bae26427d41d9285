#pragma once

#include <string>

#include "antkit/arch.hpp"

namespace antkit {

// Single-file model snapshot. Layout:
//   "ANTK" magic, u32 version (1),
//   u64 spec length, spec JSON bytes,
//   u64 tensor count, then per tensor: u32 ndim, u32 dims[ndim], f64 data.
// Little-endian throughout. Tensors are the parameters in declaration order
// followed by every BN running mean/variance pair.
void save_checkpoint(const std::string& path, Network& net);

// Spec embedded in the file, without touching any tensors.
NetworkSpec read_checkpoint_spec(const std::string& path);

// Restores tensors into a network built from the same spec.
void load_checkpoint(const std::string& path, Network& net);

}  // namespace antkit
