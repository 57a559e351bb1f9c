#ifndef LLSEG_TENSOR_NN_HPP
#define LLSEG_TENSOR_NN_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace llseg {

// Dense row-major tensor of doubles. Shapes are explicit; there is no
// broadcasting and no implicit reshape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  Tensor(std::vector<std::size_t> s, std::vector<double> data);

  std::size_t size() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }

  // rank-3 (c, i, j) accessors
  double& at3(std::size_t c, std::size_t i, std::size_t j) {
    return v[(c * shape[1] + i) * shape[2] + j];
  }
  double at3(std::size_t c, std::size_t i, std::size_t j) const {
    return v[(c * shape[1] + i) * shape[2] + j];
  }
  // rank-4 (o, c, i, j) accessors
  double& at4(std::size_t o, std::size_t c, std::size_t i, std::size_t j) {
    return v[((o * shape[1] + c) * shape[2] + i) * shape[3] + j];
  }
  double at4(std::size_t o, std::size_t c, std::size_t i, std::size_t j) const {
    return v[((o * shape[1] + c) * shape[2] + i) * shape[3] + j];
  }

  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

// Same-padding, stride-1 convolution layer (cross-correlation convention).
struct ConvLayer {
  Tensor w;  // C_out x C_in x k x k
  Tensor b;  // C_out

  ConvLayer() = default;
  ConvLayer(std::size_t c_out, std::size_t c_in, std::size_t k);

  std::size_t out_channels() const { return w.shape[0]; }
  std::size_t in_channels() const { return w.shape[1]; }
  std::size_t ksize() const { return w.shape[2]; }

  void init(std::mt19937_64& rng);
};

struct LinearLayer {
  Tensor w;  // D_out x D_in
  Tensor b;  // D_out

  LinearLayer() = default;
  LinearLayer(std::size_t d_out, std::size_t d_in);

  std::size_t d_out() const { return w.shape[0]; }
  std::size_t d_in() const { return w.shape[1]; }

  void init(std::mt19937_64& rng);
};

// Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
void init_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);

Tensor conv2d(const Tensor& input, const ConvLayer& layer);

struct ConvGrads {
  Tensor input;    // C_in x H x W
  Tensor weights;  // C_out x C_in x k x k
  Tensor bias;     // C_out
};
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                          const ConvLayer& layer);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

// Softmax across channel dimension, independently per spatial location.
Tensor softmax_over_channels(const Tensor& input);
// grad wrt logits, given upstream grad and the softmax output itself.
Tensor softmax_over_channels_backward(const Tensor& grad_out,
                                      const Tensor& softmax_out);

std::vector<double> global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const std::vector<double>& grad_out,
                                const std::vector<std::size_t>& input_shape);

std::vector<double> linear(const std::vector<double>& input,
                           const LinearLayer& layer);
struct LinearGrads {
  std::vector<double> input;
  Tensor weights;
  Tensor bias;
};
LinearGrads linear_backward(const std::vector<double>& grad_out,
                            const std::vector<double>& input,
                            const LinearLayer& layer);

void sgd_step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, double lr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

// Central finite differences against supplied analytic gradients. `fn`
// evaluates the scalar objective at the current parameter values; `params`
// are perturbed in place and restored.
GradCheckReport grad_check(const std::function<double()>& fn,
                           const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic,
                           double step, double eps_abs = 1e-4);

}  // namespace llseg

#endif
