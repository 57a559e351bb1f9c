#ifndef LLSEG_SVCONV_HPP
#define LLSEG_SVCONV_HPP

#include "llseg/tensor_nn.hpp"

namespace llseg {

// Per-location normalized propagation kernels: K^2 x H x W, flat offset
// channel c maps to (u, v) = (c / K - half, c % K - half), row-major.
// Weights at every location are nonnegative and sum to one.
struct KernelField {
  std::size_t k = 9;
  Tensor w;  // K^2 x H x W

  std::size_t half() const { return k / 2; }
  std::size_t height() const { return w.shape[1]; }
  std::size_t width() const { return w.shape[2]; }

  // Softmax over the offset channel; always yields a valid field.
  static KernelField from_logits(std::size_t k, const Tensor& logits);
  // Accepts explicit weights; rejects fields whose per-location sums are
  // off by more than 1e-4 or carry negative entries.
  static KernelField from_weights(std::size_t k, Tensor weights);
};

// Eq. form: out(l,i,j) = sum_{u,v in [-half, half]} w_ij(u,v) * f(l, i-u, j-v)
// with zero outside bounds; weights shared across channels l.
Tensor svconv_forward(const Tensor& feature, const KernelField& kernels);

struct SvconvGrads {
  Tensor feature;  // C x H x W
  Tensor weights;  // K^2 x H x W, accumulated across channels
};
SvconvGrads svconv_backward(const Tensor& grad_out, const Tensor& feature,
                            const KernelField& kernels);

// Literal six-nested-loop transcription; the independent oracle.
Tensor svconv_reference(const Tensor& feature, const KernelField& kernels);

}  // namespace llseg

#endif
