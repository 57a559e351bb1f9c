#ifndef LLSEG_PIPELINE_HPP
#define LLSEG_PIPELINE_HPP

#include <memory>
#include <mutex>
#include <vector>

#include "llseg/propagation.hpp"
#include "llseg/scheduler.hpp"
#include "llseg/synthvideo.hpp"

namespace llseg {

struct StageCosts {
  double s_l_ms = 61.0;
  double s_h_ms = 299.0;
  double schedule_ms = 20.0;
  double propagate_ms = 38.0;
};

enum class RunMode { blocking, low_latency };

struct ClockConfig {
  enum class Mode { simulated, wall };
  Mode mode = Mode::simulated;
  double fps = 17.0;
};

struct FrameRecord {
  std::size_t frame_index = 0;
  bool is_keyframe = false;
  double predicted_dev = 0.0;
  std::size_t key_index_used = 0;
  double latency_ms = 0.0;
  double miou = 0.0;  // vs grid ground truth, when available
};

// The (F_l^k, F_h^k, frame index) triple. Replacement swaps a snapshot
// pointer under a lock; readers always observe a pair from one frame.
class KeyFrameCache {
 public:
  enum class Provenance { fast_track, slow_track };
  struct Snapshot {
    std::size_t key_index = 0;
    Tensor f_l, f_h;
    Provenance provenance = Provenance::slow_track;
  };

  std::shared_ptr<const Snapshot> read() const;
  void replace(std::shared_ptr<const Snapshot> snap);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snap_;
};

struct PipelineNets {
  const ToyExtractor* extractor = nullptr;
  const PropagationNets* propagation = nullptr;
  const DeviationPredictor* deviation = nullptr;  // may be null for fixed/featdiff
};

struct RunResult {
  std::vector<FrameRecord> records;
  std::vector<LabelMap> predictions;  // grid resolution, one per frame
};

// Algorithm-style baseline: a key frame blocks on the full S_h forward.
RunResult run_blocking(const Sequence& seq, const PipelineNets& nets,
                       const Policy& policy, const StageCosts& costs,
                       const ClockConfig& clock);

// Late key-frame replacement: key frames emit the fast-track (propagated)
// output; one background slow-track job refreshes the cache afterwards.
// While the slow track is busy, new key-frame decisions are suppressed.
RunResult run_low_latency(const Sequence& seq, const PipelineNets& nets,
                          const Policy& policy, const StageCosts& costs,
                          const ClockConfig& clock);

struct RunSummary {
  double mean_miou = 0.0;
  double pixel_acc = 0.0;
  double class_acc = 0.0;
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double max_latency_ms_after_first = 0.0;
  double update_ratio = 0.0;
};

RunSummary evaluate(const std::vector<FrameRecord>& records,
                    const std::vector<LabelMap>& predictions,
                    const std::vector<LabelMap>& gt_grid,
                    std::size_t num_classes);

// Deterministic per-frame completion times for a fixed key-frame pattern;
// one background worker, a second overlapping slow-track request is dropped.
struct SimEvent {
  std::size_t frame_index = 0;
  bool is_keyframe = false;
};
std::vector<double> simulated_completion_times(double fps,
                                               const StageCosts& costs,
                                               const std::vector<SimEvent>& events,
                                               RunMode mode);

struct SweepPoint {
  double threshold = 0.0;
  double update_ratio = 0.0;
  double mean_miou = 0.0;
};

// Runs the pipeline once per threshold over all validation sequences and
// reports (update ratio, mean mIoU), ordered by threshold.
std::vector<SweepPoint> sweep_thresholds(
    const std::vector<Sequence>& validation, const PipelineNets& nets,
    Policy::Kind kind, const std::vector<double>& thresholds, RunMode mode,
    const StageCosts& costs, const ClockConfig& clock);

}  // namespace llseg

#endif
