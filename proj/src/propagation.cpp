#include "llseg/propagation.hpp"

#include <cmath>

namespace llseg {

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape[1] != b.shape[1] || a.shape[2] != b.shape[2])
    throw std::invalid_argument("concat spatial mismatch");
  Tensor out({a.shape[0] + b.shape[0], a.shape[1], a.shape[2]});
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

void split_channels(const Tensor& g, std::size_t c_a, Tensor& ga, Tensor& gb) {
  ga = Tensor({c_a, g.shape[1], g.shape[2]});
  gb = Tensor({g.shape[0] - c_a, g.shape[1], g.shape[2]});
  std::copy(g.v.begin(), g.v.begin() + ga.v.size(), ga.v.begin());
  std::copy(g.v.begin() + ga.v.size(), g.v.end(), gb.v.begin());
}

// All intermediates needed by the backward pass.
struct Trace {
  Tensor rk, rc, x0, t0, a0, t1, a1, t2, a2, logits_k, wfield;
  Tensor f_h_hat;
  Tensor ad0, r0, ad1, r1, ad2;
  Tensor z, fz, rf, logits;
};

Trace forward_trace(const Tensor& f_l_key, const Tensor& f_l_cur,
                    const Tensor& f_h_key, const PropagationNets& nets) {
  if (!f_l_key.same_shape(f_l_cur))
    throw std::invalid_argument("propagate: low-feature shape mismatch");
  Trace tr;
  const KernelPredictor& kp = nets.predictor;
  tr.rk = conv2d(f_l_key, kp.reduce_key);
  tr.rc = conv2d(f_l_cur, kp.reduce_cur);
  tr.x0 = concat_channels(tr.rk, tr.rc);
  tr.t0 = conv2d(tr.x0, kp.trunk[0]);
  tr.a0 = relu(tr.t0);
  tr.t1 = conv2d(tr.a0, kp.trunk[1]);
  tr.a1 = relu(tr.t1);
  tr.t2 = conv2d(tr.a1, kp.trunk[2]);
  tr.a2 = relu(tr.t2);
  tr.logits_k = conv2d(tr.a2, kp.head);
  tr.wfield = softmax_over_channels(tr.logits_k);
  KernelField kf;
  kf.k = nets.cfg.kernel_size;
  kf.w = tr.wfield;
  tr.f_h_hat = svconv_forward(f_h_key, kf);

  if (nets.cfg.use_fusion) {
    tr.ad0 = conv2d(f_l_cur, nets.adapt.layers[0]);
    tr.r0 = relu(tr.ad0);
    tr.ad1 = conv2d(tr.r0, nets.adapt.layers[1]);
    tr.r1 = relu(tr.ad1);
    tr.ad2 = conv2d(tr.r1, nets.adapt.layers[2]);
    tr.z = concat_channels(tr.ad2, tr.f_h_hat);
  } else {
    tr.z = tr.f_h_hat;
  }
  tr.fz = conv2d(tr.z, nets.fusion.fuse);
  tr.rf = relu(tr.fz);
  tr.logits = conv2d(tr.rf, nets.fusion.classifier);
  return tr;
}

}  // namespace

PropagationNets::PropagationNets(const PropagationConfig& c) : cfg(c) {
  if (cfg.kernel_size % 2 == 0 || cfg.kernel_size == 0)
    throw std::invalid_argument("kernel size must be odd");
  const std::size_t kk = cfg.kernel_size * cfg.kernel_size;
  predictor.reduce_key = ConvLayer(cfg.c_r, cfg.c_l, 3);
  predictor.reduce_cur = ConvLayer(cfg.c_r, cfg.c_l, 3);
  predictor.trunk[0] = ConvLayer(cfg.c_r, 2 * cfg.c_r, 3);
  predictor.trunk[1] = ConvLayer(cfg.c_r, cfg.c_r, 3);
  predictor.trunk[2] = ConvLayer(cfg.c_r, cfg.c_r, 3);
  predictor.head = ConvLayer(kk, cfg.c_r, 1);
  adapt.layers[0] = ConvLayer(cfg.c_r, cfg.c_l, 3);
  adapt.layers[1] = ConvLayer(cfg.c_r, cfg.c_r, 3);
  adapt.layers[2] = ConvLayer(cfg.c_r, cfg.c_r, 3);
  const std::size_t fuse_in = cfg.use_fusion ? cfg.c_r + cfg.c_h : cfg.c_h;
  fusion.fuse = ConvLayer(cfg.c_r, fuse_in, 3);
  fusion.classifier = ConvLayer(cfg.num_classes, cfg.c_r, 1);
}

void PropagationNets::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  predictor.reduce_key.init(rng);
  predictor.reduce_cur.init(rng);
  for (ConvLayer& l : predictor.trunk) l.init(rng);
  predictor.head.init(rng);
  for (ConvLayer& l : adapt.layers) l.init(rng);
  fusion.fuse.init(rng);
  fusion.classifier.init(rng);
}

std::vector<std::pair<std::string, Tensor*>> PropagationNets::named_params() {
  std::vector<std::pair<std::string, Tensor*>> p;
  auto add = [&](const std::string& n, ConvLayer& l) {
    p.emplace_back(n + ".w", &l.w);
    p.emplace_back(n + ".b", &l.b);
  };
  add("predictor.reduce_key", predictor.reduce_key);
  add("predictor.reduce_cur", predictor.reduce_cur);
  add("predictor.trunk0", predictor.trunk[0]);
  add("predictor.trunk1", predictor.trunk[1]);
  add("predictor.trunk2", predictor.trunk[2]);
  add("predictor.head", predictor.head);
  add("adapt.l0", adapt.layers[0]);
  add("adapt.l1", adapt.layers[1]);
  add("adapt.l2", adapt.layers[2]);
  add("fusion.fuse", fusion.fuse);
  add("fusion.classifier", fusion.classifier);
  return p;
}

KernelField predict_kernels(const Tensor& f_l_key, const Tensor& f_l_cur,
                            const KernelPredictor& net, std::size_t k) {
  if (!f_l_key.same_shape(f_l_cur))
    throw std::invalid_argument("predict_kernels shape mismatch");
  Tensor rk = conv2d(f_l_key, net.reduce_key);
  Tensor rc = conv2d(f_l_cur, net.reduce_cur);
  Tensor x = concat_channels(rk, rc);
  for (const ConvLayer& l : net.trunk) x = relu(conv2d(x, l));
  return KernelField::from_logits(k, conv2d(x, net.head));
}

PropagateResult propagate(const Tensor& f_l_key, const Tensor& f_l_cur,
                          const Tensor& f_h_key, const PropagationNets& nets) {
  Trace tr = forward_trace(f_l_key, f_l_cur, f_h_key, nets);
  return {std::move(tr.f_h_hat), std::move(tr.logits)};
}

Tensor copy_baseline(const Tensor& f_l_cur, const Tensor& f_h_key,
                     const PropagationNets& nets) {
  return full_inference_logits(f_l_cur, f_h_key, nets);
}

Tensor full_inference_logits(const Tensor& f_l_cur, const Tensor& f_h_cur,
                             const PropagationNets& nets) {
  Tensor z;
  if (nets.cfg.use_fusion) {
    Tensor x = relu(conv2d(f_l_cur, nets.adapt.layers[0]));
    x = relu(conv2d(x, nets.adapt.layers[1]));
    x = conv2d(x, nets.adapt.layers[2]);
    z = concat_channels(x, f_h_cur);
  } else {
    z = f_h_cur;
  }
  return conv2d(relu(conv2d(z, nets.fusion.fuse)), nets.fusion.classifier);
}

double cross_entropy_loss(const Tensor& logits, const LabelMap& target,
                          Tensor* grad_logits) {
  if (logits.rank() != 3 || logits.shape[1] != target.height ||
      logits.shape[2] != target.width)
    throw std::invalid_argument("cross_entropy shape mismatch");
  const std::size_t c = logits.shape[0];
  const std::size_t h = logits.shape[1];
  const std::size_t w = logits.shape[2];
  const double n = static_cast<double>(h * w);
  if (grad_logits) *grad_logits = Tensor(logits.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double m = logits.at3(0, i, j);
      for (std::size_t ch = 1; ch < c; ++ch)
        m = std::max(m, logits.at3(ch, i, j));
      double sum = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch)
        sum += std::exp(logits.at3(ch, i, j) - m);
      const std::uint8_t t = target.at(i, j);
      if (t >= c) throw std::invalid_argument("label out of range");
      loss += -(logits.at3(t, i, j) - m - std::log(sum));
      if (grad_logits) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double p = std::exp(logits.at3(ch, i, j) - m) / sum;
          grad_logits->at3(ch, i, j) =
              (p - (ch == t ? 1.0 : 0.0)) / n;
        }
      }
    }
  }
  return loss / n;
}

void PropagationGrads::reset(PropagationNets& nets) {
  g.clear();
  for (auto& [name, t] : nets.named_params()) {
    (void)name;
    g.emplace_back(t->shape);
  }
}

std::vector<const Tensor*> PropagationGrads::ptrs() const {
  std::vector<const Tensor*> p;
  p.reserve(g.size());
  for (const Tensor& t : g) p.push_back(&t);
  return p;
}

double propagate_loss_and_grads(const Tensor& f_l_key, const Tensor& f_l_cur,
                                const Tensor& f_h_key, const LabelMap& target,
                                const PropagationNets& nets,
                                PropagationGrads& grads) {
  Trace tr = forward_trace(f_l_key, f_l_cur, f_h_key, nets);
  Tensor g_logits;
  const double loss = cross_entropy_loss(tr.logits, target, &g_logits);

  // grads.g layout mirrors named_params(): [reduce_key.w/b, reduce_cur.w/b,
  // trunk0..2, head, adapt0..2, fuse, classifier] with .w then .b each.
  auto slot = [&](std::size_t layer) -> std::pair<Tensor&, Tensor&> {
    return {grads.g[2 * layer], grads.g[2 * layer + 1]};
  };
  const KernelPredictor& kp = nets.predictor;

  ConvGrads cg = conv2d_backward(g_logits, tr.rf, nets.fusion.classifier);
  {
    auto [w, b] = slot(10);  // classifier
    w = w + cg.weights;
    b = b + cg.bias;
  }
  Tensor g_fz = relu_backward(cg.input, tr.fz);
  cg = conv2d_backward(g_fz, tr.z, nets.fusion.fuse);
  {
    auto [w, b] = slot(9);
    w = w + cg.weights;
    b = b + cg.bias;
  }

  Tensor g_fhat;
  if (nets.cfg.use_fusion) {
    Tensor g_ad2;
    split_channels(cg.input, nets.cfg.c_r, g_ad2, g_fhat);
    ConvGrads ag = conv2d_backward(g_ad2, tr.r1, nets.adapt.layers[2]);
    {
      auto [w, b] = slot(8);
      w = w + ag.weights;
      b = b + ag.bias;
    }
    Tensor g_r1 = relu_backward(ag.input, tr.ad1);
    ag = conv2d_backward(g_r1, tr.r0, nets.adapt.layers[1]);
    {
      auto [w, b] = slot(7);
      w = w + ag.weights;
      b = b + ag.bias;
    }
    Tensor g_r0 = relu_backward(ag.input, tr.ad0);
    ag = conv2d_backward(g_r0, f_l_cur, nets.adapt.layers[0]);
    {
      auto [w, b] = slot(6);
      w = w + ag.weights;
      b = b + ag.bias;
    }
  } else {
    g_fhat = std::move(cg.input);
  }

  KernelField kf;
  kf.k = nets.cfg.kernel_size;
  kf.w = tr.wfield;
  SvconvGrads sg = svconv_backward(g_fhat, f_h_key, kf);
  Tensor g_logits_k = softmax_over_channels_backward(sg.weights, tr.wfield);

  cg = conv2d_backward(g_logits_k, tr.a2, kp.head);
  {
    auto [w, b] = slot(5);
    w = w + cg.weights;
    b = b + cg.bias;
  }
  Tensor g_t2 = relu_backward(cg.input, tr.t2);
  cg = conv2d_backward(g_t2, tr.a1, kp.trunk[2]);
  {
    auto [w, b] = slot(4);
    w = w + cg.weights;
    b = b + cg.bias;
  }
  Tensor g_t1 = relu_backward(cg.input, tr.t1);
  cg = conv2d_backward(g_t1, tr.a0, kp.trunk[1]);
  {
    auto [w, b] = slot(3);
    w = w + cg.weights;
    b = b + cg.bias;
  }
  Tensor g_t0 = relu_backward(cg.input, tr.t0);
  cg = conv2d_backward(g_t0, tr.x0, kp.trunk[0]);
  {
    auto [w, b] = slot(2);
    w = w + cg.weights;
    b = b + cg.bias;
  }
  Tensor g_rk, g_rc;
  split_channels(cg.input, nets.cfg.c_r, g_rk, g_rc);
  cg = conv2d_backward(g_rk, f_l_key, kp.reduce_key);
  {
    auto [w, b] = slot(0);
    w = w + cg.weights;
    b = b + cg.bias;
  }
  cg = conv2d_backward(g_rc, f_l_cur, kp.reduce_cur);
  {
    auto [w, b] = slot(1);
    w = w + cg.weights;
    b = b + cg.bias;
  }
  return loss;
}

std::vector<double> train_propagation(const std::vector<SequenceFeatures>& data,
                                      PropagationNets& nets,
                                      std::size_t epochs, double lr,
                                      std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("empty training dataset");

  struct Pair {
    std::size_t seq, key, cur;
  };
  constexpr std::size_t kPairsPerSequence = 4;
  std::mt19937_64 rng(seed);
  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const std::size_t len = data[s].f_l.size();
    if (len < nets.cfg.min_gap + 1) continue;
    for (std::size_t p = 0; p < kPairsPerSequence; ++p) {
      std::uniform_int_distribution<std::size_t> gap_dist(
          nets.cfg.min_gap, std::min(nets.cfg.max_gap, len - 1));
      const std::size_t gap = gap_dist(rng);
      std::uniform_int_distribution<std::size_t> key_dist(0, len - 1 - gap);
      const std::size_t key = key_dist(rng);
      pairs.push_back({s, key, key + gap});
    }
  }
  if (pairs.empty())
    throw std::invalid_argument("no usable training pairs (sequences too short)");

  std::vector<Tensor*> params;
  for (auto& [name, t] : nets.named_params()) {
    (void)name;
    params.push_back(t);
  }
  PropagationGrads grads;

  std::vector<double> curve;
  curve.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (const Pair& p : pairs) {
      const SequenceFeatures& sf = data[p.seq];
      grads.reset(nets);
      const double loss = propagate_loss_and_grads(
          sf.f_l[p.key], sf.f_l[p.cur], sf.f_h[p.key], sf.labels[p.cur], nets,
          grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("propagation training diverged (loss=" +
                                 std::to_string(loss) + " at epoch " +
                                 std::to_string(e) + ")");
      sum += loss;
      if (lr != 0.0) sgd_step(params, grads.ptrs(), lr);
    }
    curve.push_back(sum / static_cast<double>(pairs.size()));
  }
  return curve;
}

}  // namespace llseg
