#include "llseg/tensor_nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace llseg {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t e : s) {
    if (e == 0) throw std::invalid_argument("tensor extent must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s)
    : shape(std::move(s)), v(shape_product(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> data)
    : shape(std::move(s)), v(std::move(data)) {
  if (v.size() != shape_product(shape))
    throw std::invalid_argument("tensor data length does not match shape");
}

bool Tensor::all_finite() const {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("tensor shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("tensor shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.v[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& x : out.v) x *= s;
  return out;
}

ConvLayer::ConvLayer(std::size_t c_out, std::size_t c_in, std::size_t k)
    : w({c_out, c_in, k, k}), b({c_out}) {
  if (k % 2 == 0) throw std::invalid_argument("conv kernel size must be odd");
}

void ConvLayer::init(std::mt19937_64& rng) {
  const std::size_t fan_in = in_channels() * ksize() * ksize();
  init_uniform(w, fan_in, rng);
  init_uniform(b, fan_in, rng);
}

LinearLayer::LinearLayer(std::size_t d_out, std::size_t d_in)
    : w({d_out, d_in}), b({d_out}) {}

void LinearLayer::init(std::mt19937_64& rng) {
  init_uniform(w, d_in(), rng);
  init_uniform(b, d_in(), rng);
}

void init_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : t.v) x = dist(rng);
}

Tensor conv2d(const Tensor& input, const ConvLayer& layer) {
  if (input.rank() != 3) throw std::invalid_argument("conv2d expects CxHxW");
  if (input.shape[0] != layer.in_channels())
    throw std::invalid_argument("conv2d input channel mismatch");
  const std::size_t c_in = input.shape[0];
  const std::size_t h = input.shape[1];
  const std::size_t wd = input.shape[2];
  const std::size_t c_out = layer.out_channels();
  const std::size_t k = layer.ksize();
  const long pad = static_cast<long>(k / 2);

  Tensor out({c_out, h, wd});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < wd; ++j) out.at3(co, i, j) = layer.b.v[co];
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      for (std::size_t ki = 0; ki < k; ++ki) {
        for (std::size_t kj = 0; kj < k; ++kj) {
          const double wv = layer.w.at4(co, ci, ki, kj);
          if (wv == 0.0) continue;
          const long di = static_cast<long>(ki) - pad;
          const long dj = static_cast<long>(kj) - pad;
          const long i_lo = std::max(0L, -di);
          const long i_hi = std::min<long>(h, static_cast<long>(h) - di);
          const long j_lo = std::max(0L, -dj);
          const long j_hi = std::min<long>(wd, static_cast<long>(wd) - dj);
          for (long i = i_lo; i < i_hi; ++i) {
            const double* src = &input.v[(ci * h + (i + di)) * wd + (j_lo + dj)];
            double* dst = &out.v[(co * h + i) * wd + j_lo];
            for (long j = j_lo; j < j_hi; ++j) *dst++ += wv * *src++;
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                          const ConvLayer& layer) {
  if (input.rank() != 3 || grad_out.rank() != 3)
    throw std::invalid_argument("conv2d_backward expects CxHxW");
  if (input.shape[0] != layer.in_channels())
    throw std::invalid_argument("conv2d_backward input channel mismatch");
  if (grad_out.shape[0] != layer.out_channels() ||
      grad_out.shape[1] != input.shape[1] ||
      grad_out.shape[2] != input.shape[2])
    throw std::invalid_argument("conv2d_backward grad_out shape mismatch");

  const std::size_t c_in = input.shape[0];
  const std::size_t h = input.shape[1];
  const std::size_t wd = input.shape[2];
  const std::size_t c_out = layer.out_channels();
  const std::size_t k = layer.ksize();
  const long pad = static_cast<long>(k / 2);

  ConvGrads g;
  g.input = Tensor(input.shape);
  g.weights = Tensor(layer.w.shape);
  g.bias = Tensor(layer.b.shape);

  for (std::size_t co = 0; co < c_out; ++co) {
    double bs = 0.0;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < wd; ++j) bs += grad_out.at3(co, i, j);
    g.bias.v[co] = bs;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      for (std::size_t ki = 0; ki < k; ++ki) {
        for (std::size_t kj = 0; kj < k; ++kj) {
          const long di = static_cast<long>(ki) - pad;
          const long dj = static_cast<long>(kj) - pad;
          const long i_lo = std::max(0L, -di);
          const long i_hi = std::min<long>(h, static_cast<long>(h) - di);
          const long j_lo = std::max(0L, -dj);
          const long j_hi = std::min<long>(wd, static_cast<long>(wd) - dj);
          const double wv = layer.w.at4(co, ci, ki, kj);
          double ws = 0.0;
          for (long i = i_lo; i < i_hi; ++i) {
            const double* go = &grad_out.v[(co * h + i) * wd + j_lo];
            const double* in = &input.v[(ci * h + (i + di)) * wd + (j_lo + dj)];
            double* gi = &g.input.v[(ci * h + (i + di)) * wd + (j_lo + dj)];
            for (long j = j_lo; j < j_hi; ++j) {
              ws += go[j - j_lo] * in[j - j_lo];
              gi[j - j_lo] += wv * go[j - j_lo];
            }
          }
          g.weights.at4(co, ci, ki, kj) = ws;
        }
      }
    }
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& x : out.v) x = std::max(0.0, x);
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  if (!grad_out.same_shape(input))
    throw std::invalid_argument("relu_backward shape mismatch");
  Tensor out = grad_out;
  for (std::size_t i = 0; i < out.v.size(); ++i)
    if (input.v[i] <= 0.0) out.v[i] = 0.0;
  return out;
}

Tensor softmax_over_channels(const Tensor& input) {
  if (input.rank() != 3)
    throw std::invalid_argument("softmax_over_channels expects CxHxW");
  const std::size_t c = input.shape[0];
  const std::size_t h = input.shape[1];
  const std::size_t wd = input.shape[2];
  Tensor out(input.shape);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < wd; ++j) {
      double m = input.at3(0, i, j);
      for (std::size_t ch = 1; ch < c; ++ch)
        m = std::max(m, input.at3(ch, i, j));
      double sum = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double e = std::exp(input.at3(ch, i, j) - m);
        out.at3(ch, i, j) = e;
        sum += e;
      }
      for (std::size_t ch = 0; ch < c; ++ch) out.at3(ch, i, j) /= sum;
    }
  }
  return out;
}

Tensor softmax_over_channels_backward(const Tensor& grad_out,
                                      const Tensor& softmax_out) {
  if (!grad_out.same_shape(softmax_out))
    throw std::invalid_argument("softmax backward shape mismatch");
  const std::size_t c = softmax_out.shape[0];
  const std::size_t h = softmax_out.shape[1];
  const std::size_t wd = softmax_out.shape[2];
  Tensor out(softmax_out.shape);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < wd; ++j) {
      double dot = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch)
        dot += grad_out.at3(ch, i, j) * softmax_out.at3(ch, i, j);
      for (std::size_t ch = 0; ch < c; ++ch)
        out.at3(ch, i, j) =
            softmax_out.at3(ch, i, j) * (grad_out.at3(ch, i, j) - dot);
    }
  }
  return out;
}

std::vector<double> global_avg_pool(const Tensor& input) {
  if (input.rank() != 3)
    throw std::invalid_argument("global_avg_pool expects CxHxW");
  const std::size_t c = input.shape[0];
  const std::size_t hw = input.shape[1] * input.shape[2];
  std::vector<double> out(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += input.v[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return out;
}

Tensor global_avg_pool_backward(const std::vector<double>& grad_out,
                                const std::vector<std::size_t>& input_shape) {
  if (input_shape.size() != 3 || grad_out.size() != input_shape[0])
    throw std::invalid_argument("global_avg_pool_backward shape mismatch");
  Tensor out(input_shape);
  const std::size_t hw = input_shape[1] * input_shape[2];
  for (std::size_t ch = 0; ch < input_shape[0]; ++ch)
    for (std::size_t i = 0; i < hw; ++i)
      out.v[ch * hw + i] = grad_out[ch] / static_cast<double>(hw);
  return out;
}

std::vector<double> linear(const std::vector<double>& input,
                           const LinearLayer& layer) {
  if (input.size() != layer.d_in())
    throw std::invalid_argument("linear input length mismatch");
  std::vector<double> out(layer.d_out());
  for (std::size_t o = 0; o < layer.d_out(); ++o) {
    double s = layer.b.v[o];
    for (std::size_t i = 0; i < layer.d_in(); ++i)
      s += layer.w.v[o * layer.d_in() + i] * input[i];
    out[o] = s;
  }
  return out;
}

LinearGrads linear_backward(const std::vector<double>& grad_out,
                            const std::vector<double>& input,
                            const LinearLayer& layer) {
  if (input.size() != layer.d_in() || grad_out.size() != layer.d_out())
    throw std::invalid_argument("linear_backward shape mismatch");
  LinearGrads g;
  g.input.assign(layer.d_in(), 0.0);
  g.weights = Tensor(layer.w.shape);
  g.bias = Tensor(layer.b.shape);
  for (std::size_t o = 0; o < layer.d_out(); ++o) {
    g.bias.v[o] = grad_out[o];
    for (std::size_t i = 0; i < layer.d_in(); ++i) {
      g.weights.v[o * layer.d_in() + i] = grad_out[o] * input[i];
      g.input[i] += layer.w.v[o * layer.d_in() + i] * grad_out[o];
    }
  }
  return g;
}

void sgd_step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step parameter/gradient count mismatch");
  if (lr < 0.0) throw std::invalid_argument("sgd_step learning rate < 0");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(*grads[p]))
      throw std::invalid_argument("sgd_step shape mismatch");
    for (std::size_t i = 0; i < params[p]->v.size(); ++i)
      params[p]->v[i] -= lr * grads[p]->v[i];
  }
}

GradCheckReport grad_check(const std::function<double()>& fn,
                           const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic,
                           double step, double eps_abs) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check parameter/gradient count mismatch");
  GradCheckReport rep;
  std::size_t flat = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (std::size_t i = 0; i < t.v.size(); ++i, ++flat) {
      const double saved = t.v[i];
      t.v[i] = saved + step;
      const double fp = fn();
      t.v[i] = saved - step;
      const double fm = fn();
      t.v[i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[p]->v[i];
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), eps_abs});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_index = flat;
      }
    }
  }
  return rep;
}

}  // namespace llseg
