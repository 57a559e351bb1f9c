#ifndef LLSEG_LABEL_MAP_HPP
#define LLSEG_LABEL_MAP_HPP

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "llseg/tensor_nn.hpp"

namespace llseg {

// Per-pixel class indices.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> idx;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w)
      : height(h), width(w), idx(h * w, 0) {}

  std::uint8_t& at(std::size_t i, std::size_t j) { return idx[i * width + j]; }
  std::uint8_t at(std::size_t i, std::size_t j) const {
    return idx[i * width + j];
  }
  bool operator==(const LabelMap&) const = default;
};

// Per-pixel argmax over the class channel of logits (num_classes x H x W).
LabelMap argmax_labels(const Tensor& logits);

// Nearest-neighbour downsample by an integer factor (top-left pick).
LabelMap downsample_labels(const LabelMap& m, std::size_t factor);

}  // namespace llseg

#endif
