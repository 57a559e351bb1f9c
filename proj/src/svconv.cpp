#include "llseg/svconv.hpp"

#include <cmath>

namespace llseg {

namespace {

void check_field_shape(std::size_t k, const Tensor& w) {
  if (k == 0 || k % 2 == 0)
    throw std::invalid_argument("kernel size must be odd positive");
  if (w.rank() != 3 || w.shape[0] != k * k)
    throw std::invalid_argument("kernel field must be K^2 x H x W");
}

void check_compatible(const Tensor& feature, const KernelField& kf) {
  if (feature.rank() != 3)
    throw std::invalid_argument("svconv feature must be CxHxW");
  if (feature.shape[1] != kf.height() || feature.shape[2] != kf.width())
    throw std::invalid_argument("svconv spatial extent mismatch");
}

void check_normalized(const KernelField& kf) {
  const std::size_t kk = kf.k * kf.k;
  for (std::size_t i = 0; i < kf.height(); ++i) {
    for (std::size_t j = 0; j < kf.width(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < kk; ++c) s += kf.w.at3(c, i, j);
      if (std::fabs(s - 1.0) > 1e-4)
        throw std::invalid_argument("kernel field not normalized");
    }
  }
}

}  // namespace

KernelField KernelField::from_logits(std::size_t k, const Tensor& logits) {
  check_field_shape(k, logits);
  KernelField kf;
  kf.k = k;
  kf.w = softmax_over_channels(logits);
  return kf;
}

KernelField KernelField::from_weights(std::size_t k, Tensor weights) {
  check_field_shape(k, weights);
  for (double x : weights.v)
    if (x < 0.0) throw std::invalid_argument("kernel field weight < 0");
  KernelField kf;
  kf.k = k;
  kf.w = std::move(weights);
  check_normalized(kf);
  return kf;
}

Tensor svconv_forward(const Tensor& feature, const KernelField& kernels) {
  check_compatible(feature, kernels);
  check_normalized(kernels);
  const std::size_t c = feature.shape[0];
  const std::size_t h = feature.shape[1];
  const std::size_t wd = feature.shape[2];
  const long half = static_cast<long>(kernels.half());
  const std::size_t k = kernels.k;

  Tensor out({c, h, wd});
  for (std::size_t l = 0; l < c; ++l) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < wd; ++j) {
        double s = 0.0;
        for (long u = -half; u <= half; ++u) {
          const long si = static_cast<long>(i) - u;
          if (si < 0 || si >= static_cast<long>(h)) continue;
          for (long v = -half; v <= half; ++v) {
            const long sj = static_cast<long>(j) - v;
            if (sj < 0 || sj >= static_cast<long>(wd)) continue;
            const std::size_t off =
                static_cast<std::size_t>(u + half) * k +
                static_cast<std::size_t>(v + half);
            s += kernels.w.at3(off, i, j) * feature.at3(l, si, sj);
          }
        }
        out.at3(l, i, j) = s;
      }
    }
  }
  return out;
}

SvconvGrads svconv_backward(const Tensor& grad_out, const Tensor& feature,
                            const KernelField& kernels) {
  check_compatible(feature, kernels);
  if (!grad_out.same_shape(feature))
    throw std::invalid_argument("svconv_backward grad_out shape mismatch");
  const std::size_t c = feature.shape[0];
  const std::size_t h = feature.shape[1];
  const std::size_t wd = feature.shape[2];
  const long half = static_cast<long>(kernels.half());
  const std::size_t k = kernels.k;

  SvconvGrads g;
  g.feature = Tensor(feature.shape);
  g.weights = Tensor(kernels.w.shape);
  for (std::size_t l = 0; l < c; ++l) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < wd; ++j) {
        const double go = grad_out.at3(l, i, j);
        if (go == 0.0) continue;
        for (long u = -half; u <= half; ++u) {
          const long si = static_cast<long>(i) - u;
          if (si < 0 || si >= static_cast<long>(h)) continue;
          for (long v = -half; v <= half; ++v) {
            const long sj = static_cast<long>(j) - v;
            if (sj < 0 || sj >= static_cast<long>(wd)) continue;
            const std::size_t off =
                static_cast<std::size_t>(u + half) * k +
                static_cast<std::size_t>(v + half);
            g.weights.at3(off, i, j) += go * feature.at3(l, si, sj);
            g.feature.at3(l, si, sj) += go * kernels.w.at3(off, i, j);
          }
        }
      }
    }
  }
  return g;
}

Tensor svconv_reference(const Tensor& feature, const KernelField& kernels) {
  check_compatible(feature, kernels);
  check_normalized(kernels);
  const long c = static_cast<long>(feature.shape[0]);
  const long h = static_cast<long>(feature.shape[1]);
  const long wd = static_cast<long>(feature.shape[2]);
  const long half = static_cast<long>(kernels.half());
  const long k = static_cast<long>(kernels.k);

  Tensor out(feature.shape);
  for (long l = 0; l < c; ++l)
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < wd; ++j) {
        double s = 0.0;
        for (long u = -half; u <= half; ++u)
          for (long v = -half; v <= half; ++v) {
            const long si = i - u;
            const long sj = j - v;
            double f = 0.0;
            if (si >= 0 && si < h && sj >= 0 && sj < wd)
              f = feature.at3(static_cast<std::size_t>(l),
                              static_cast<std::size_t>(si),
                              static_cast<std::size_t>(sj));
            s += kernels.w.at3(static_cast<std::size_t>((u + half) * k +
                                                        (v + half)),
                               static_cast<std::size_t>(i),
                               static_cast<std::size_t>(j)) *
                 f;
          }
        out.at3(static_cast<std::size_t>(l), static_cast<std::size_t>(i),
                static_cast<std::size_t>(j)) = s;
      }
  return out;
}

}  // namespace llseg
