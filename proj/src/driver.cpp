#include "llseg/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "llseg/checkpoint.hpp"

namespace fs = std::filesystem;

namespace llseg {

namespace {

std::string seq_dir_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "seq_%03zu", i);
  return buf;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

void write_loss_csv(const std::string& path, const std::vector<double>& curve) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write loss csv: " + path);
  os << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e)
    os << e << "," << fmt(curve[e]) << "\n";
}

std::size_t read_num_classes(const std::string& seq_dir) {
  std::ifstream is((fs::path(seq_dir) / "meta.json").string());
  if (!is) throw std::runtime_error("missing meta.json in " + seq_dir);
  nlohmann::json meta = nlohmann::json::parse(is);
  return meta.at("num_classes").get<std::size_t>();
}

Tensor config_tensor(const PropagationConfig& cfg, std::uint64_t ex_seed) {
  return Tensor({7}, {static_cast<double>(cfg.kernel_size),
                      static_cast<double>(cfg.c_l),
                      static_cast<double>(cfg.c_h),
                      static_cast<double>(cfg.c_r),
                      static_cast<double>(cfg.num_classes),
                      cfg.use_fusion ? 1.0 : 0.0,
                      static_cast<double>(ex_seed)});
}

Policy policy_for(const std::string& family, double threshold) {
  if (family == "fixed")
    return Policy::fixed_rate(static_cast<std::size_t>(threshold));
  if (family == "featdiff") return Policy::feature_diff_threshold(threshold);
  if (family == "adaptive") return Policy::adaptive(threshold);
  throw std::invalid_argument("unknown policy family: " + family);
}

}  // namespace

void cmd_generate(const GenerateParams& p) {
  if (p.length < 1) throw std::invalid_argument("length must be >= 1");
  if (p.sequences < 1) throw std::invalid_argument("sequences must be >= 1");
  fs::create_directories(p.out_dir);
  std::mt19937_64 profile_rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < p.sequences; ++i) {
    SceneConfig cfg = p.scene;
    cfg.seed = p.seed * 1000003ULL + i;
    if (p.mixed) {
      cfg.texture_flicker = true;
      switch (i % 3) {
        case 0:  // stable scene, noisy sensor
          cfg.max_speed = 0.0;
          cfg.scene_change_prob = 0.0;
          cfg.texture_amplitude = 0.05 + 0.15 * unit(profile_rng);
          break;
        case 1:  // steadily translating shapes
          cfg.max_speed = 1.0 + unit(profile_rng);
          cfg.scene_change_prob = 0.0;
          cfg.texture_amplitude = 0.03 + 0.04 * unit(profile_rng);
          break;
        default:  // occasional abrupt scene change
          cfg.max_speed = 1.0 + unit(profile_rng);
          cfg.scene_change_prob = 0.08;
          cfg.texture_amplitude = 0.03 + 0.08 * unit(profile_rng);
          break;
      }
    }
    Sequence seq = generate_sequence(cfg, p.length);
    save_sequence((fs::path(p.out_dir) / seq_dir_name(i)).string(), seq, cfg);
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  if (fs::is_directory(fs::path(dir) / "frames")) {
    ds.sequences.push_back(load_sequence(dir));
    ds.num_classes = read_num_classes(dir);
    return ds;
  }
  std::vector<fs::path> subdirs;
  if (!fs::is_directory(dir))
    throw std::runtime_error("dataset directory missing: " + dir);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::is_directory(e.path() / "frames"))
      subdirs.push_back(e.path());
  if (subdirs.empty())
    throw std::runtime_error("no sequences found in " + dir);
  std::sort(subdirs.begin(), subdirs.end());
  for (const fs::path& sd : subdirs)
    ds.sequences.push_back(load_sequence(sd.string()));
  ds.num_classes = read_num_classes(subdirs.front().string());
  return ds;
}

SequenceFeatures compute_features(const Sequence& seq, const ToyExtractor& ex) {
  SequenceFeatures sf;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    sf.f_l.push_back(ex.extract(seq.frames[t]));
    sf.f_h.push_back(ex.extract_high(sf.f_l.back()));
    if (t < seq.labels.size())
      sf.labels.push_back(downsample_labels(seq.labels[t], 2));
  }
  return sf;
}

void save_propagation_checkpoint(const std::string& path,
                                 const PropagationConfig& cfg,
                                 std::uint64_t extractor_seed,
                                 ToyExtractor& ex, PropagationNets& nets) {
  std::vector<NamedTensor> out;
  out.push_back({"config", config_tensor(cfg, extractor_seed)});
  for (auto& [name, t] : ex.named_params()) out.push_back({name, *t});
  for (auto& [name, t] : nets.named_params()) out.push_back({name, *t});
  save_checkpoint(path, out);
}

void save_scheduler_checkpoint(const std::string& path, std::size_t c_l,
                               std::size_t c_r, DeviationPredictor& net) {
  std::vector<NamedTensor> out;
  out.push_back({"config", Tensor({2}, {static_cast<double>(c_l),
                                        static_cast<double>(c_r)})});
  for (auto& [name, t] : net.named_params()) out.push_back({name, *t});
  save_checkpoint(path, out);
}

std::vector<double> cmd_train_propagation(const TrainPropagationParams& p) {
  Dataset ds = load_dataset(p.data_dir);
  PropagationConfig cfg = p.cfg;
  cfg.num_classes = ds.num_classes;
  ToyExtractor ex(p.extractor_seed, cfg.c_l, cfg.c_h);
  std::vector<SequenceFeatures> feats;
  for (const Sequence& s : ds.sequences)
    feats.push_back(compute_features(s, ex));

  PropagationNets nets(cfg);
  nets.init(p.seed);
  std::vector<double> curve;
  if (p.epochs > 0)
    curve = train_propagation(feats, nets, p.epochs, p.lr, p.seed + 1);
  if (!p.checkpoint_out.empty())
    save_propagation_checkpoint(p.checkpoint_out, cfg, p.extractor_seed, ex,
                                nets);
  write_loss_csv(p.loss_csv, curve);
  return curve;
}

std::vector<double> cmd_train_scheduler(const TrainSchedulerParams& p) {
  if (!fs::exists(p.prop_checkpoint))
    throw std::runtime_error(
        "scheduler training requires a propagation checkpoint (auxiliary "
        "labels come from the trained pipeline); missing: " +
        p.prop_checkpoint);
  LoadedModel model = load_model(p.prop_checkpoint);
  Dataset ds = load_dataset(p.data_dir);
  std::vector<SequenceFeatures> feats;
  std::vector<std::vector<LabelMap>> aux;
  for (const Sequence& s : ds.sequences) {
    feats.push_back(compute_features(s, model.extractor));
    std::vector<LabelMap> labels;
    for (std::size_t t = 0; t < s.frames.size(); ++t)
      labels.push_back(argmax_labels(full_inference_logits(
          feats.back().f_l[t], feats.back().f_h[t], model.propagation)));
    aux.push_back(std::move(labels));
  }

  DeviationPredictor net(model.cfg.c_l, model.cfg.c_r);
  net.init(p.seed);
  std::vector<double> curve;
  if (p.epochs > 0)
    curve = train_scheduler(feats, aux, net, p.epochs, p.lr, p.seed + 1);
  if (!p.checkpoint_out.empty())
    save_scheduler_checkpoint(p.checkpoint_out, model.cfg.c_l, model.cfg.c_r,
                              net);
  write_loss_csv(p.loss_csv, curve);
  return curve;
}

PipelineNets LoadedModel::nets() const {
  PipelineNets n;
  n.extractor = &extractor;
  n.propagation = &propagation;
  n.deviation = deviation ? &*deviation : nullptr;
  return n;
}

LoadedModel load_model(const std::string& prop_checkpoint,
                       const std::string& sched_checkpoint) {
  std::vector<NamedTensor> ckpt = load_checkpoint(prop_checkpoint);
  Tensor cfg_t({7});
  restore_tensor(ckpt, "config", cfg_t);
  PropagationConfig cfg;
  cfg.kernel_size = static_cast<std::size_t>(cfg_t.v[0]);
  cfg.c_l = static_cast<std::size_t>(cfg_t.v[1]);
  cfg.c_h = static_cast<std::size_t>(cfg_t.v[2]);
  cfg.c_r = static_cast<std::size_t>(cfg_t.v[3]);
  cfg.num_classes = static_cast<std::size_t>(cfg_t.v[4]);
  cfg.use_fusion = cfg_t.v[5] != 0.0;
  const std::uint64_t ex_seed = static_cast<std::uint64_t>(cfg_t.v[6]);

  LoadedModel model{cfg, ToyExtractor(ex_seed, cfg.c_l, cfg.c_h),
                    PropagationNets(cfg), std::nullopt};
  for (auto& [name, t] : model.extractor.named_params())
    restore_tensor(ckpt, name, *t);
  for (auto& [name, t] : model.propagation.named_params())
    restore_tensor(ckpt, name, *t);

  if (!sched_checkpoint.empty()) {
    std::vector<NamedTensor> sck = load_checkpoint(sched_checkpoint);
    Tensor sc({2});
    restore_tensor(sck, "config", sc);
    DeviationPredictor dev(static_cast<std::size_t>(sc.v[0]),
                           static_cast<std::size_t>(sc.v[1]));
    for (auto& [name, t] : dev.named_params()) restore_tensor(sck, name, *t);
    model.deviation = std::move(dev);
  }
  return model;
}

RunSummary cmd_run(const RunParams& p) {
  const Policy policy = Policy::parse(p.policy);
  if (policy.kind == Policy::Kind::adaptive && p.sched_checkpoint.empty())
    throw std::runtime_error("adaptive policy requires a scheduler checkpoint");
  LoadedModel model = load_model(p.prop_checkpoint, p.sched_checkpoint);
  Dataset ds = load_dataset(p.data_dir);

  std::ofstream csv;
  if (!p.csv_out.empty()) {
    csv.open(p.csv_out);
    if (!csv) throw std::runtime_error("cannot write csv: " + p.csv_out);
    csv << "frame_index,is_keyframe,predicted_dev,key_index_used,latency_ms,"
           "miou\n";
  }

  RunSummary agg;
  std::size_t total_frames = 0, total_keys = 0;
  for (const Sequence& seq : ds.sequences) {
    RunResult rr = p.mode == RunMode::blocking
                       ? run_blocking(seq, model.nets(), policy, p.costs,
                                      p.clock)
                       : run_low_latency(seq, model.nets(), policy, p.costs,
                                         p.clock);
    std::vector<LabelMap> gt;
    for (const LabelMap& l : seq.labels) gt.push_back(downsample_labels(l, 2));
    RunSummary s =
        evaluate(rr.records, rr.predictions, gt, model.cfg.num_classes);
    const double n = static_cast<double>(rr.records.size());
    agg.mean_miou += s.mean_miou * n;
    agg.pixel_acc += s.pixel_acc * n;
    agg.class_acc += s.class_acc * n;
    agg.mean_latency_ms += s.mean_latency_ms * n;
    agg.max_latency_ms = std::max(agg.max_latency_ms, s.max_latency_ms);
    agg.max_latency_ms_after_first =
        std::max(agg.max_latency_ms_after_first, s.max_latency_ms_after_first);
    total_frames += rr.records.size();
    for (const FrameRecord& r : rr.records) {
      if (r.is_keyframe) ++total_keys;
      if (csv.is_open())
        csv << r.frame_index << "," << (r.is_keyframe ? 1 : 0) << ","
            << fmt(r.predicted_dev) << "," << r.key_index_used << ","
            << fmt(r.latency_ms) << "," << fmt(r.miou) << "\n";
    }
  }
  const double n = static_cast<double>(total_frames);
  agg.mean_miou /= n;
  agg.pixel_acc /= n;
  agg.class_acc /= n;
  agg.mean_latency_ms /= n;
  agg.update_ratio = static_cast<double>(total_keys) / n;

  if (!p.json_out.empty()) {
    nlohmann::ordered_json j = {
        {"mean_miou", agg.mean_miou},
        {"pixel_acc", agg.pixel_acc},
        {"class_acc", agg.class_acc},
        {"mean_latency_ms", agg.mean_latency_ms},
        {"max_latency_ms", agg.max_latency_ms},
        {"max_latency_ms_after_first", agg.max_latency_ms_after_first},
        {"update_ratio", agg.update_ratio},
    };
    std::ofstream js(p.json_out);
    if (!js) throw std::runtime_error("cannot write json: " + p.json_out);
    js << j.dump(2) << "\n";
  }
  return agg;
}

std::vector<SweepPoint> cmd_sweep(const SweepParams& p) {
  if (p.thresholds.empty()) throw std::invalid_argument("empty threshold list");
  (void)policy_for(p.family, p.thresholds.front());  // validate family early
  const bool adaptive = p.family == "adaptive";
  if (adaptive && p.sched_checkpoint.empty())
    throw std::runtime_error("adaptive sweep requires a scheduler checkpoint");
  LoadedModel model = load_model(p.prop_checkpoint, p.sched_checkpoint);
  Dataset ds = load_dataset(p.data_dir);

  Policy::Kind kind = policy_for(p.family, p.thresholds.front()).kind;
  std::vector<SweepPoint> points =
      sweep_thresholds(ds.sequences, model.nets(), kind, p.thresholds, p.mode,
                       p.costs, p.clock);
  if (!p.out_csv.empty()) {
    std::ofstream os(p.out_csv);
    if (!os) throw std::runtime_error("cannot write csv: " + p.out_csv);
    os << "threshold,update_ratio,mean_miou\n";
    for (const SweepPoint& pt : points)
      os << fmt(pt.threshold) << "," << fmt(pt.update_ratio) << ","
         << fmt(pt.mean_miou) << "\n";
  }
  return points;
}

std::string cmd_bench(const BenchParams& p) {
  const StageCosts& c = p.costs;
  const double basic = c.s_l_ms + c.s_h_ms;
  const double non_key = c.s_l_ms + c.schedule_ms + c.propagate_ms;
  nlohmann::ordered_json sim = {
      {"s_l_ms", c.s_l_ms},
      {"s_h_ms", c.s_h_ms},
      {"basic_ms", basic},
      {"schedule_ms", c.schedule_ms},
      {"propagate_ms", c.propagate_ms},
      {"non_key_frame_ms", non_key},
  };
  if (basic > 0.0) {
    sim["ratios"] = {
        {"s_l", c.s_l_ms / basic},           {"s_h", c.s_h_ms / basic},
        {"schedule", c.schedule_ms / basic}, {"propagate", c.propagate_ms / basic},
        {"non_key_frame", non_key / basic},
    };
  } else {
    sim["ratios"] = nullptr;
    std::fprintf(stderr, "warning: zero basic-network cost, ratios undefined\n");
  }

  nlohmann::ordered_json j;
  j["simulated"] = sim;

  if (!p.prop_checkpoint.empty()) {
    LoadedModel model = load_model(p.prop_checkpoint, p.sched_checkpoint);
    SceneConfig sc;
    sc.seed = p.seed;
    Sequence seq = generate_sequence(sc, 2);
    using WallClock = std::chrono::steady_clock;
    auto time_ms = [&](auto&& fn) {
      double total = 0.0;
      for (std::size_t r = 0; r < p.wall_reps; ++r) {
        const auto t0 = WallClock::now();
        fn();
        total += std::chrono::duration<double, std::milli>(WallClock::now() -
                                                           t0)
                     .count();
      }
      return total / static_cast<double>(p.wall_reps);
    };
    Tensor f_l0 = model.extractor.extract(seq.frames[0]);
    Tensor f_l1 = model.extractor.extract(seq.frames[1]);
    Tensor f_h0 = model.extractor.extract_high(f_l0);
    nlohmann::ordered_json wall;
    wall["s_l_ms"] = time_ms([&] { model.extractor.extract(seq.frames[1]); });
    wall["s_h_ms"] = time_ms([&] { model.extractor.extract_high(f_l1); });
    wall["propagate_ms"] =
        time_ms([&] { propagate(f_l0, f_l1, f_h0, model.propagation); });
    if (model.deviation)
      wall["schedule_ms"] =
          time_ms([&] { predict_deviation(f_l0, f_l1, *model.deviation); });
    j["wall"] = wall;
  }

  const std::string text = j.dump(2) + "\n";
  if (!p.out_json.empty()) {
    std::ofstream os(p.out_json);
    if (!os) throw std::runtime_error("cannot write json: " + p.out_json);
    os << text;
  }
  return text;
}

}  // namespace llseg
