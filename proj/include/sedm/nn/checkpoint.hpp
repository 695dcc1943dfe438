#pragma once

#include <string>

#include "sedm/nn/adam.hpp"
#include "sedm/nn/net.hpp"

namespace sedm::nn {

// Checkpoint layout (little-endian):
//   magic "SEDMCKP1"
//   u32   architecture descriptor length, then the descriptor bytes
//   u64   learnable count, u64 buffer count
//   f32   learnables (learnable_refs order), f32 buffers (buffer_refs order)
//   u64   Adam step, f64 first moments, f64 second moments
// Loading rejects a mismatched magic or architecture descriptor.

void save_checkpoint(const std::string& path, const DetectorParams<float>& params,
                     const AdamState& adam);
void load_checkpoint(const std::string& path, DetectorParams<float>& params,
                     AdamState& adam);

}  // namespace sedm::nn
