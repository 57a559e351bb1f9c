#ifndef LLSEG_CHECKPOINT_HPP
#define LLSEG_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "llseg/tensor_nn.hpp"

namespace llseg {

struct NamedTensor {
  std::string name;
  Tensor t;
};

// Flat binary checkpoint: magic "KPRM1", then per tensor
//   u64 name length, name bytes, u64 rank, u64 extents..., f64 values...
// All integers and floats little-endian.
void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Lookup by name; throws if missing or shape differs from `into`.
void restore_tensor(const std::vector<NamedTensor>& ckpt,
                    const std::string& name, Tensor& into);

}  // namespace llseg

#endif
