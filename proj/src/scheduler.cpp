#include "llseg/scheduler.hpp"

#include <cmath>

namespace llseg {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct DevTrace {
  Tensor rk, rc, d, t, a;
  std::vector<double> pooled, y;
  double out = 0.0;
};

DevTrace dev_forward(const Tensor& f_l_key, const Tensor& f_l_cur,
                     const DeviationPredictor& net) {
  if (!f_l_key.same_shape(f_l_cur))
    throw std::invalid_argument("predict_deviation shape mismatch");
  DevTrace tr;
  tr.rk = conv2d(f_l_key, net.reduce);
  tr.rc = conv2d(f_l_cur, net.reduce);
  tr.d = tr.rc - tr.rk;
  tr.t = conv2d(tr.d, net.trunk);
  tr.a = relu(tr.t);
  tr.pooled = global_avg_pool(tr.a);
  tr.y = linear(tr.pooled, net.head);
  tr.out = sigmoid(tr.y[0]);
  return tr;
}

}  // namespace

double segmentation_deviation(const LabelMap& a, const LabelMap& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("segmentation_deviation dimension mismatch");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.idx.size(); ++i)
    if (a.idx[i] != b.idx[i]) ++diff;
  return static_cast<double>(diff) / static_cast<double>(a.idx.size());
}

double feature_difference(const Tensor& f_l_key, const Tensor& f_l_cur) {
  if (!f_l_key.same_shape(f_l_cur))
    throw std::invalid_argument("feature_difference shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f_l_key.v.size(); ++i)
    s += std::fabs(f_l_key.v[i] - f_l_cur.v[i]);
  return s / static_cast<double>(f_l_key.v.size());
}

DeviationPredictor::DeviationPredictor(std::size_t c_l, std::size_t c_r)
    : reduce(c_r, c_l, 3), trunk(c_r, c_r, 3), head(1, c_r) {}

void DeviationPredictor::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  reduce.init(rng);
  trunk.init(rng);
  head.init(rng);
}

std::vector<std::pair<std::string, Tensor*>> DeviationPredictor::named_params() {
  return {
      {"deviation.reduce.w", &reduce.w}, {"deviation.reduce.b", &reduce.b},
      {"deviation.trunk.w", &trunk.w},   {"deviation.trunk.b", &trunk.b},
      {"deviation.head.w", &head.w},     {"deviation.head.b", &head.b},
  };
}

double predict_deviation(const Tensor& f_l_key, const Tensor& f_l_cur,
                         const DeviationPredictor& net) {
  return dev_forward(f_l_key, f_l_cur, net).out;
}

Policy Policy::fixed_rate(std::size_t n) {
  if (n < 1) throw std::invalid_argument("fixed-rate interval must be >= 1");
  return {Kind::fixed_rate, static_cast<double>(n)};
}

Policy Policy::feature_diff_threshold(double tau) {
  if (tau < 0) throw std::invalid_argument("feature-diff threshold must be >= 0");
  return {Kind::feature_diff_threshold, tau};
}

Policy Policy::adaptive(double theta) {
  if (theta < 0 || theta > 1)
    throw std::invalid_argument("adaptive threshold must be in [0, 1]");
  return {Kind::adaptive, theta};
}

Policy Policy::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("policy spec must be kind:value, got " + spec);
  const std::string kind = spec.substr(0, colon);
  const std::string val = spec.substr(colon + 1);
  try {
    if (kind == "fixed") return fixed_rate(std::stoul(val));
    if (kind == "featdiff") return feature_diff_threshold(std::stod(val));
    if (kind == "adaptive") return adaptive(std::stod(val));
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad policy value: " + spec);
  }
  throw std::invalid_argument("unknown policy kind: " + kind);
}

std::string Policy::to_string() const {
  switch (kind) {
    case Kind::fixed_rate:
      return "fixed:" + std::to_string(static_cast<std::size_t>(param));
    case Kind::feature_diff_threshold:
      return "featdiff:" + std::to_string(param);
    case Kind::adaptive:
      return "adaptive:" + std::to_string(param);
  }
  return "?";
}

bool decide(const Policy& policy, std::size_t frame_index,
            std::size_t frames_since_key, double predicted_dev,
            double feature_diff) {
  (void)frame_index;
  switch (policy.kind) {
    case Policy::Kind::fixed_rate:
      return static_cast<double>(frames_since_key) >= policy.param;
    case Policy::Kind::feature_diff_threshold:
      return feature_diff > policy.param;
    case Policy::Kind::adaptive:
      return predicted_dev > policy.param;
  }
  return false;
}

double deviation_loss_and_grads(const Tensor& f_l_key, const Tensor& f_l_cur,
                                double target, const DeviationPredictor& net,
                                std::vector<Tensor>& grads) {
  DevTrace tr = dev_forward(f_l_key, f_l_cur, net);
  const double err = tr.out - target;
  const double loss = err * err;

  // d loss / d y through the logistic
  const double gy = 2.0 * err * tr.out * (1.0 - tr.out);
  LinearGrads lg = linear_backward({gy}, tr.pooled, net.head);
  Tensor g_a = global_avg_pool_backward(lg.input, {tr.a.shape});
  Tensor g_t = relu_backward(g_a, tr.t);
  ConvGrads tg = conv2d_backward(g_t, tr.d, net.trunk);
  // d = rc - rk: opposite-sign grads through the shared reduction layer
  ConvGrads rg_c = conv2d_backward(tg.input, f_l_cur, net.reduce);
  Tensor neg = -1.0 * tg.input;
  ConvGrads rg_k = conv2d_backward(neg, f_l_key, net.reduce);

  grads.assign(6, Tensor());
  grads[0] = rg_c.weights + rg_k.weights;
  grads[1] = rg_c.bias + rg_k.bias;
  grads[2] = std::move(tg.weights);
  grads[3] = std::move(tg.bias);
  grads[4] = std::move(lg.weights);
  grads[5] = std::move(lg.bias);
  return loss;
}

std::vector<double> train_scheduler(
    const std::vector<SequenceFeatures>& data,
    const std::vector<std::vector<LabelMap>>& aux_labels,
    DeviationPredictor& net, std::size_t epochs, double lr, std::uint64_t seed,
    std::size_t min_gap, std::size_t max_gap) {
  if (data.empty()) throw std::invalid_argument("empty training dataset");
  if (aux_labels.size() != data.size())
    throw std::invalid_argument("aux label count mismatch");

  struct Pair {
    std::size_t seq, key, cur;
    double target;
  };
  constexpr std::size_t kPairsPerSequence = 6;
  std::mt19937_64 rng(seed);
  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const std::size_t len = data[s].f_l.size();
    if (len < min_gap + 1) continue;
    for (std::size_t p = 0; p < kPairsPerSequence; ++p) {
      std::uniform_int_distribution<std::size_t> gap_dist(
          min_gap, std::min(max_gap, len - 1));
      const std::size_t gap = gap_dist(rng);
      std::uniform_int_distribution<std::size_t> key_dist(0, len - 1 - gap);
      const std::size_t key = key_dist(rng);
      pairs.push_back(
          {s, key, key + gap,
           segmentation_deviation(aux_labels[s][key], aux_labels[s][key + gap])});
    }
  }
  if (pairs.empty())
    throw std::invalid_argument("no usable training pairs (sequences too short)");

  std::vector<Tensor*> params;
  for (auto& [name, t] : net.named_params()) {
    (void)name;
    params.push_back(t);
  }

  std::vector<double> curve;
  curve.reserve(epochs);
  std::vector<Tensor> grads;
  for (std::size_t e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (const Pair& p : pairs) {
      const SequenceFeatures& sf = data[p.seq];
      const double loss = deviation_loss_and_grads(sf.f_l[p.key], sf.f_l[p.cur],
                                                   p.target, net, grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("scheduler training diverged at epoch " +
                                 std::to_string(e));
      sum += loss;
      if (lr != 0.0) {
        std::vector<const Tensor*> gp;
        for (const Tensor& g : grads) gp.push_back(&g);
        sgd_step(params, gp, lr);
      }
    }
    curve.push_back(sum / static_cast<double>(pairs.size()));
  }
  return curve;
}

}  // namespace llseg
