#ifndef LLSEG_SCHEDULER_HPP
#define LLSEG_SCHEDULER_HPP

#include <string>
#include <vector>

#include "llseg/label_map.hpp"
#include "llseg/propagation.hpp"
#include "llseg/tensor_nn.hpp"

namespace llseg {

// Fraction of pixels at which the two label maps disagree.
double segmentation_deviation(const LabelMap& a, const LabelMap& b);

// Mean absolute elementwise difference of two feature maps.
double feature_difference(const Tensor& f_l_key, const Tensor& f_l_cur);

// Regresses the segmentation deviation from low-level feature differences:
// shared channel reduction, difference, conv + ReLU, global pool, linear,
// logistic squashing into [0, 1].
struct DeviationPredictor {
  ConvLayer reduce;  // c_l -> c_r, 3x3
  ConvLayer trunk;   // c_r -> c_r, 3x3
  LinearLayer head;  // c_r -> 1

  DeviationPredictor() = default;
  DeviationPredictor(std::size_t c_l, std::size_t c_r);
  void init(std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor*>> named_params();
};

double predict_deviation(const Tensor& f_l_key, const Tensor& f_l_cur,
                         const DeviationPredictor& net);

struct Policy {
  enum class Kind { fixed_rate, feature_diff_threshold, adaptive };
  Kind kind = Kind::fixed_rate;
  double param = 5.0;  // interval n / tau / theta

  static Policy fixed_rate(std::size_t n);
  static Policy feature_diff_threshold(double tau);
  static Policy adaptive(double theta);
  // Mini-grammar: fixed:<n>, featdiff:<tau>, adaptive:<theta>.
  static Policy parse(const std::string& spec);
  std::string to_string() const;
};

bool decide(const Policy& policy, std::size_t frame_index,
            std::size_t frames_since_key, double predicted_dev,
            double feature_diff);

// Squared-error regression of predicted vs auxiliary deviation over pairs
// with gap in [min_gap, max_gap]. Pair set drawn once from the seed.
std::vector<double> train_scheduler(
    const std::vector<SequenceFeatures>& data,
    const std::vector<std::vector<LabelMap>>& aux_labels,
    DeviationPredictor& net, std::size_t epochs, double lr, std::uint64_t seed,
    std::size_t min_gap = 2, std::size_t max_gap = 10);

// Scalar-loss gradients for one pair; exposed for gradient checking.
double deviation_loss_and_grads(const Tensor& f_l_key, const Tensor& f_l_cur,
                                double target, const DeviationPredictor& net,
                                std::vector<Tensor>& grads);

}  // namespace llseg

#endif
