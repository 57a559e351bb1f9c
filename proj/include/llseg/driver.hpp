#ifndef LLSEG_DRIVER_HPP
#define LLSEG_DRIVER_HPP

#include <optional>
#include <string>
#include <vector>

#include "llseg/pipeline.hpp"

namespace llseg {

struct GenerateParams {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t sequences = 8;
  std::size_t length = 30;
  SceneConfig scene;   // per-sequence seed derived from `seed`
  bool mixed = false;  // cycle static / translating / scene-change profiles
};
void cmd_generate(const GenerateParams& p);

struct Dataset {
  std::vector<Sequence> sequences;
  std::size_t num_classes = 4;
};
Dataset load_dataset(const std::string& dir);

SequenceFeatures compute_features(const Sequence& seq, const ToyExtractor& ex);

struct TrainPropagationParams {
  std::string data_dir;
  std::string checkpoint_out;
  std::string loss_csv;  // optional
  std::size_t epochs = 50;
  double lr = 0.5;
  std::uint64_t seed = 0;
  PropagationConfig cfg;
  std::uint64_t extractor_seed = 0x10053eedULL;
};
std::vector<double> cmd_train_propagation(const TrainPropagationParams& p);

struct TrainSchedulerParams {
  std::string data_dir;
  std::string prop_checkpoint;
  std::string checkpoint_out;
  std::string loss_csv;  // optional
  std::size_t epochs = 50;
  double lr = 0.2;
  std::uint64_t seed = 0;
};
std::vector<double> cmd_train_scheduler(const TrainSchedulerParams& p);

// Trained model bundle restored from checkpoints.
struct LoadedModel {
  PropagationConfig cfg;
  ToyExtractor extractor;
  PropagationNets propagation;
  std::optional<DeviationPredictor> deviation;

  PipelineNets nets() const;
};
LoadedModel load_model(const std::string& prop_checkpoint,
                       const std::string& sched_checkpoint = "");

void save_propagation_checkpoint(const std::string& path,
                                 const PropagationConfig& cfg,
                                 std::uint64_t extractor_seed,
                                 ToyExtractor& ex, PropagationNets& nets);
void save_scheduler_checkpoint(const std::string& path, std::size_t c_l,
                               std::size_t c_r, DeviationPredictor& net);

struct RunParams {
  std::string data_dir;
  std::string prop_checkpoint;
  std::string sched_checkpoint;  // required for adaptive policies
  std::string csv_out;           // optional
  std::string json_out;          // optional
  RunMode mode = RunMode::low_latency;
  std::string policy = "adaptive:0.1";
  StageCosts costs;
  ClockConfig clock;
};
RunSummary cmd_run(const RunParams& p);

struct SweepParams {
  std::string data_dir;
  std::string prop_checkpoint;
  std::string sched_checkpoint;
  std::string out_csv;
  std::string family = "adaptive";  // fixed | featdiff | adaptive
  std::vector<double> thresholds;
  RunMode mode = RunMode::low_latency;
  StageCosts costs;
  ClockConfig clock;
};
std::vector<SweepPoint> cmd_sweep(const SweepParams& p);

struct BenchParams {
  std::string prop_checkpoint;
  std::string sched_checkpoint;  // optional
  std::string out_json;          // optional
  StageCosts costs;
  std::size_t wall_reps = 5;
  std::uint64_t seed = 0;
};
std::string cmd_bench(const BenchParams& p);  // returns the JSON text

}  // namespace llseg

#endif
