#ifndef LLSEG_PROPAGATION_HPP
#define LLSEG_PROPAGATION_HPP

#include <array>
#include <string>
#include <vector>

#include "llseg/label_map.hpp"
#include "llseg/svconv.hpp"
#include "llseg/tensor_nn.hpp"

namespace llseg {

struct PropagationConfig {
  std::size_t kernel_size = 9;  // odd
  std::size_t c_l = 16;
  std::size_t c_h = 32;
  std::size_t c_r = 16;
  std::size_t num_classes = 4;
  std::size_t min_gap = 2;   // training pair gap range
  std::size_t max_gap = 10;
  bool use_fusion = true;    // false: classify the propagated features only
};

// Maps (F_l^k, F_l^t) to per-location propagation kernel logits.
struct KernelPredictor {
  ConvLayer reduce_key, reduce_cur;   // c_l -> c_r, 3x3
  std::array<ConvLayer, 3> trunk;     // 2c_r -> c_r, then c_r -> c_r twice
  ConvLayer head;                     // 1x1, K^2 channels
};

struct AdaptNet {
  std::array<ConvLayer, 3> layers;  // c_l -> c_r, then c_r -> c_r twice
};

struct FusionHead {
  ConvLayer fuse;        // (c_r + c_h) -> c_r (or c_h -> c_r when ablated)
  ConvLayer classifier;  // 1x1, c_r -> num_classes
};

struct PropagationNets {
  PropagationConfig cfg;
  KernelPredictor predictor;
  AdaptNet adapt;
  FusionHead fusion;

  explicit PropagationNets(const PropagationConfig& cfg = {});
  void init(std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor*>> named_params();
};

KernelField predict_kernels(const Tensor& f_l_key, const Tensor& f_l_cur,
                            const KernelPredictor& net, std::size_t k);

struct PropagateResult {
  Tensor f_h_hat;       // propagated high-level features
  Tensor label_logits;  // num_classes x H x W
};

PropagateResult propagate(const Tensor& f_l_key, const Tensor& f_l_cur,
                          const Tensor& f_h_key, const PropagationNets& nets);

// Clockwork-style baseline: the stale key-frame features are used unchanged.
Tensor copy_baseline(const Tensor& f_l_cur, const Tensor& f_h_key,
                     const PropagationNets& nets);

// Fusion applied to an exact (non-propagated) high feature map; used for
// frame-0 output and for auxiliary label generation.
Tensor full_inference_logits(const Tensor& f_l_cur, const Tensor& f_h_cur,
                             const PropagationNets& nets);

// Mean pixel-wise cross-entropy; optionally fills grad wrt logits.
double cross_entropy_loss(const Tensor& logits, const LabelMap& target,
                          Tensor* grad_logits);

// Per-frame features plus grid-resolution labels for one sequence.
struct SequenceFeatures {
  std::vector<Tensor> f_l;
  std::vector<Tensor> f_h;
  std::vector<LabelMap> labels;  // grid resolution; may be empty per frame
};

// One SGD pass per (key, key+gap) pair; the pair set is drawn once from the
// seed and revisited every epoch. Returns per-epoch mean loss.
std::vector<double> train_propagation(const std::vector<SequenceFeatures>& data,
                                      PropagationNets& nets,
                                      std::size_t epochs, double lr,
                                      std::uint64_t seed);

// Scalar-loss backward through the whole propagate chain; exposed for
// gradient checking.
struct PropagationGrads;
double propagate_loss_and_grads(const Tensor& f_l_key, const Tensor& f_l_cur,
                                const Tensor& f_h_key, const LabelMap& target,
                                const PropagationNets& nets,
                                PropagationGrads& grads);

struct PropagationGrads {
  std::vector<Tensor> g;  // aligned with named_params()
  void reset(PropagationNets& nets);
  std::vector<const Tensor*> ptrs() const;
};

}  // namespace llseg

#endif
