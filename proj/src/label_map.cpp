#include "llseg/label_map.hpp"

namespace llseg {

LabelMap argmax_labels(const Tensor& logits) {
  if (logits.rank() != 3)
    throw std::invalid_argument("argmax_labels expects CxHxW logits");
  const std::size_t c = logits.shape[0];
  const std::size_t h = logits.shape[1];
  const std::size_t w = logits.shape[2];
  LabelMap out(h, w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      std::size_t best = 0;
      double bv = logits.at3(0, i, j);
      for (std::size_t ch = 1; ch < c; ++ch) {
        const double x = logits.at3(ch, i, j);
        if (x > bv) {
          bv = x;
          best = ch;
        }
      }
      out.at(i, j) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

LabelMap downsample_labels(const LabelMap& m, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("downsample factor must be > 0");
  LabelMap out(m.height / factor, m.width / factor);
  for (std::size_t i = 0; i < out.height; ++i)
    for (std::size_t j = 0; j < out.width; ++j)
      out.at(i, j) = m.at(i * factor, j * factor);
  return out;
}

}  // namespace llseg
