#include "llseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

namespace llseg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

struct SlowTrackJob {
  double completion_ms = 0.0;  // simulated-clock visibility point
  std::size_t key_index = 0;
  Tensor f_l;
  std::future<Tensor> f_h;
};

RunResult run_impl(const Sequence& seq, const PipelineNets& nets,
                   const Policy& policy, const StageCosts& costs,
                   const ClockConfig& clock, RunMode mode) {
  if (seq.frames.empty()) throw std::invalid_argument("empty frame sequence");
  if (!nets.extractor || !nets.propagation)
    throw std::invalid_argument("pipeline nets missing");
  const bool lls = mode == RunMode::low_latency;
  const bool wall = clock.mode == ClockConfig::Mode::wall;
  if (clock.fps <= 0) throw std::invalid_argument("fps must be positive");
  const double ms_per_frame = 1000.0 / clock.fps;
  const std::size_t num_classes = nets.propagation->cfg.num_classes;
  const bool have_gt = seq.labels.size() == seq.frames.size();

  RunResult out;
  KeyFrameCache cache;
  std::unique_ptr<SlowTrackJob> pending;

  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const double arrival = static_cast<double>(t) * ms_per_frame;
    const auto wall_start = Clock::now();
    FrameRecord rec;
    rec.frame_index = t;
    LabelMap pred;

    if (t == 0) {
      // Cold start: full blocking pass in both modes.
      Tensor f_l = nets.extractor->extract(seq.frames[t]);
      Tensor f_h = nets.extractor->extract_high(f_l);
      Tensor logits = full_inference_logits(f_l, f_h, *nets.propagation);
      pred = argmax_labels(logits);
      auto snap = std::make_shared<KeyFrameCache::Snapshot>();
      snap->key_index = 0;
      snap->f_l = std::move(f_l);
      snap->f_h = std::move(f_h);
      snap->provenance = KeyFrameCache::Provenance::slow_track;
      cache.replace(std::move(snap));
      rec.is_keyframe = true;
      rec.key_index_used = 0;
      rec.latency_ms = wall ? ms_since(wall_start) : costs.s_l_ms + costs.s_h_ms;
    } else {
      // Adopt a finished slow-track job at its simulated visibility point.
      if (pending && pending->completion_ms <= arrival) {
        auto snap = std::make_shared<KeyFrameCache::Snapshot>();
        snap->key_index = pending->key_index;
        snap->f_l = std::move(pending->f_l);
        snap->f_h = pending->f_h.get();
        snap->provenance = KeyFrameCache::Provenance::slow_track;
        cache.replace(std::move(snap));
        pending.reset();
      }
      const auto key = cache.read();
      Tensor f_l = nets.extractor->extract(seq.frames[t]);
      const double fdiff = feature_difference(key->f_l, f_l);
      const double dev =
          nets.deviation ? predict_deviation(key->f_l, f_l, *nets.deviation)
                         : 0.0;
      const bool busy = lls && pending != nullptr;
      const bool is_key =
          !busy && decide(policy, t, t - key->key_index, dev, fdiff);
      PropagateResult pr =
          propagate(key->f_l, f_l, key->f_h, *nets.propagation);
      pred = argmax_labels(pr.label_logits);

      rec.is_keyframe = is_key;
      rec.predicted_dev = dev;
      rec.key_index_used = key->key_index;
      if (is_key) {
        if (lls) {
          // Fast track: cache the propagated features now, refresh later.
          auto snap = std::make_shared<KeyFrameCache::Snapshot>();
          snap->key_index = t;
          snap->f_l = f_l;
          snap->f_h = pr.f_h_hat;
          snap->provenance = KeyFrameCache::Provenance::fast_track;
          cache.replace(std::move(snap));
          pending = std::make_unique<SlowTrackJob>();
          pending->completion_ms = arrival + costs.s_h_ms;
          pending->key_index = t;
          pending->f_l = f_l;
          const ToyExtractor* ex = nets.extractor;
          if (wall) {
            pending->f_h = std::async(std::launch::async,
                                      [ex, f_l]() { return ex->extract_high(f_l); });
          } else {
            std::promise<Tensor> done;
            done.set_value(ex->extract_high(f_l));
            pending->f_h = done.get_future();
          }
        } else {
          Tensor f_h = nets.extractor->extract_high(f_l);
          auto snap = std::make_shared<KeyFrameCache::Snapshot>();
          snap->key_index = t;
          snap->f_l = std::move(f_l);
          snap->f_h = std::move(f_h);
          snap->provenance = KeyFrameCache::Provenance::slow_track;
          cache.replace(std::move(snap));
        }
      }
      if (wall) {
        rec.latency_ms = ms_since(wall_start);
      } else if (is_key && !lls) {
        // Propagation overlaps the blocking S_h forward at key frames.
        rec.latency_ms = costs.s_l_ms + costs.schedule_ms +
                         std::max(costs.propagate_ms, costs.s_h_ms);
      } else {
        rec.latency_ms =
            costs.s_l_ms + costs.schedule_ms + costs.propagate_ms;
      }
    }

    if (have_gt) {
      const LabelMap gt = downsample_labels(seq.labels[t], 2);
      rec.miou = miou(pred, gt, num_classes);
    }
    out.records.push_back(rec);
    out.predictions.push_back(std::move(pred));
  }
  if (pending) pending->f_h.wait();
  return out;
}

}  // namespace

std::shared_ptr<const KeyFrameCache::Snapshot> KeyFrameCache::read() const {
  std::lock_guard<std::mutex> lock(mu_);
  return snap_;
}

void KeyFrameCache::replace(std::shared_ptr<const Snapshot> snap) {
  std::lock_guard<std::mutex> lock(mu_);
  snap_ = std::move(snap);
}

RunResult run_blocking(const Sequence& seq, const PipelineNets& nets,
                       const Policy& policy, const StageCosts& costs,
                       const ClockConfig& clock) {
  return run_impl(seq, nets, policy, costs, clock, RunMode::blocking);
}

RunResult run_low_latency(const Sequence& seq, const PipelineNets& nets,
                          const Policy& policy, const StageCosts& costs,
                          const ClockConfig& clock) {
  return run_impl(seq, nets, policy, costs, clock, RunMode::low_latency);
}

RunSummary evaluate(const std::vector<FrameRecord>& records,
                    const std::vector<LabelMap>& predictions,
                    const std::vector<LabelMap>& gt_grid,
                    std::size_t num_classes) {
  if (records.empty()) throw std::invalid_argument("no frame records");
  if (!gt_grid.empty() && (gt_grid.size() != records.size() ||
                           predictions.size() != records.size()))
    throw std::invalid_argument("records/ground-truth misalignment");
  RunSummary s;
  std::size_t keys = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const FrameRecord& r = records[i];
    if (r.frame_index != i)
      throw std::invalid_argument("records/ground-truth misalignment");
    if (r.is_keyframe) ++keys;
    s.mean_latency_ms += r.latency_ms;
    s.max_latency_ms = std::max(s.max_latency_ms, r.latency_ms);
    if (i > 0)
      s.max_latency_ms_after_first =
          std::max(s.max_latency_ms_after_first, r.latency_ms);
    if (!gt_grid.empty()) {
      s.mean_miou += r.miou;
      s.pixel_acc += pixel_accuracy(predictions[i], gt_grid[i]);
      s.class_acc += class_accuracy(predictions[i], gt_grid[i], num_classes);
    }
  }
  const double n = static_cast<double>(records.size());
  s.mean_latency_ms /= n;
  if (!gt_grid.empty()) {
    s.mean_miou /= n;
    s.pixel_acc /= n;
    s.class_acc /= n;
  }
  s.update_ratio = static_cast<double>(keys) / n;
  return s;
}

std::vector<double> simulated_completion_times(double fps,
                                               const StageCosts& costs,
                                               const std::vector<SimEvent>& events,
                                               RunMode mode) {
  if (fps <= 0) throw std::invalid_argument("fps must be positive");
  const double ms_per_frame = 1000.0 / fps;
  std::vector<double> out;
  out.reserve(events.size());
  double slow_busy_until = -1.0;
  for (const SimEvent& e : events) {
    const double arrival = static_cast<double>(e.frame_index) * ms_per_frame;
    double latency;
    if (e.frame_index == 0) {
      latency = costs.s_l_ms + costs.s_h_ms;
    } else if (!e.is_keyframe) {
      latency = costs.s_l_ms + costs.schedule_ms + costs.propagate_ms;
    } else if (mode == RunMode::blocking) {
      latency = costs.s_l_ms + costs.schedule_ms +
                std::max(costs.propagate_ms, costs.s_h_ms);
    } else {
      latency = costs.s_l_ms + costs.schedule_ms + costs.propagate_ms;
      if (arrival >= slow_busy_until)  // single worker; else request dropped
        slow_busy_until = arrival + costs.s_h_ms;
    }
    out.push_back(arrival + latency);
  }
  return out;
}

std::vector<SweepPoint> sweep_thresholds(
    const std::vector<Sequence>& validation, const PipelineNets& nets,
    Policy::Kind kind, const std::vector<double>& thresholds, RunMode mode,
    const StageCosts& costs, const ClockConfig& clock) {
  if (thresholds.empty()) throw std::invalid_argument("empty threshold list");
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  std::vector<SweepPoint> out;
  for (double th : sorted) {
    Policy policy;
    switch (kind) {
      case Policy::Kind::fixed_rate:
        policy = Policy::fixed_rate(static_cast<std::size_t>(th));
        break;
      case Policy::Kind::feature_diff_threshold:
        policy = Policy::feature_diff_threshold(th);
        break;
      case Policy::Kind::adaptive:
        policy = Policy::adaptive(th);
        break;
    }
    double ratio = 0.0, miou_sum = 0.0;
    for (const Sequence& seq : validation) {
      RunResult rr = mode == RunMode::blocking
                         ? run_blocking(seq, nets, policy, costs, clock)
                         : run_low_latency(seq, nets, policy, costs, clock);
      std::vector<LabelMap> gt;
      for (const LabelMap& l : seq.labels) gt.push_back(downsample_labels(l, 2));
      RunSummary s = evaluate(rr.records, rr.predictions, gt,
                              nets.propagation->cfg.num_classes);
      ratio += s.update_ratio;
      miou_sum += s.mean_miou;
    }
    const double n = static_cast<double>(validation.size());
    out.push_back({th, ratio / n, miou_sum / n});
  }
  return out;
}

}  // namespace llseg
