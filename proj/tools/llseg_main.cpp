// Command-line front end; talks to the engine through the C API only.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "llseg/llseg.h"

namespace {

int report(int code) {
  if (code != LLSEG_OK) std::fprintf(stderr, "error: %s\n", llseg_last_error());
  return code;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

bool parse_costs(const std::string& spec, llseg_stage_costs* c) {
  const std::vector<double> v = parse_list(spec);
  if (v.size() != 4) return false;
  *c = {v[0], v[1], v[2], v[3]};
  return true;
}

// sim:<fps> or wall
bool parse_clock(const std::string& spec, int* wall, double* fps) {
  if (spec == "wall") {
    *wall = 1;
    return true;
  }
  if (spec.rfind("sim:", 0) == 0) {
    *wall = 0;
    *fps = std::stod(spec.substr(4));
    return *fps > 0;
  }
  return false;
}

int cat_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    std::fprintf(stderr, "error: cannot read %s\n", path.c_str());
    return 1;
  }
  std::cout << is.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-latency video semantic segmentation engine"};
  app.require_subcommand(1);

  // generate
  llseg_generate_params gen;
  llseg_generate_params_init(&gen);
  std::string gen_out;
  auto* cmd_gen = app.add_subcommand("generate", "Generate synthetic sequences");
  cmd_gen->add_option("--out", gen_out, "Output dataset directory")->required();
  cmd_gen->add_option("--seed", gen.seed, "Generator seed");
  cmd_gen->add_option("--sequences", gen.sequences, "Number of sequences");
  cmd_gen->add_option("--length", gen.length, "Frames per sequence");
  cmd_gen->add_option("--width", gen.width, "Frame width");
  cmd_gen->add_option("--height", gen.height, "Frame height");
  cmd_gen->add_option("--shapes", gen.num_shapes, "Shapes per scene");
  cmd_gen->add_option("--classes", gen.num_classes, "Number of classes");
  cmd_gen->add_option("--max-speed", gen.max_speed, "Max shape speed (px/frame)");
  cmd_gen->add_option("--texture", gen.texture_amplitude, "Noise amplitude");
  cmd_gen->add_flag("--flicker", gen.texture_flicker, "Resample noise per frame");
  cmd_gen->add_option("--change-prob", gen.scene_change_prob,
                      "Scene change probability per frame");
  cmd_gen->add_flag("--mixed", gen.mixed,
                    "Cycle static/translating/scene-change profiles");

  // train <stage>
  llseg_train_params tr;
  llseg_train_params_init(&tr);
  std::string tr_stage, tr_data, tr_out, tr_loss, tr_prop;
  auto* cmd_tr = app.add_subcommand("train", "Train a module");
  cmd_tr->add_option("stage", tr_stage, "propagation | scheduler")
      ->required()
      ->check(CLI::IsMember({"propagation", "scheduler"}));
  cmd_tr->add_option("--data", tr_data, "Dataset directory")->required();
  cmd_tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  cmd_tr->add_option("--loss-csv", tr_loss, "Loss curve CSV path");
  cmd_tr->add_option("--prop-ckpt", tr_prop,
                     "Propagation checkpoint (scheduler stage)");
  cmd_tr->add_option("--epochs", tr.epochs, "Training epochs");
  cmd_tr->add_option("--lr", tr.lr, "Learning rate");
  cmd_tr->add_option("--seed", tr.seed, "Training seed");
  cmd_tr->add_option("--kernel-size", tr.kernel_size, "Propagation kernel K");
  cmd_tr->add_option("--c-l", tr.c_l, "Low feature channels");
  cmd_tr->add_option("--c-h", tr.c_h, "High feature channels");
  cmd_tr->add_option("--c-r", tr.c_r, "Reduced channels");
  bool tr_no_fusion = false;
  cmd_tr->add_flag("--no-fusion", tr_no_fusion,
                   "Classify propagated features only");

  // run
  llseg_run_params run;
  llseg_run_params_init(&run);
  std::string run_data, run_prop, run_sched, run_policy = "adaptive:0.1";
  std::string run_csv, run_json, run_mode = "low-latency", run_clock = "sim:17";
  std::string run_costs;
  bool run_stdout = false;
  auto* cmd_run = app.add_subcommand("run", "Run the pipeline over a dataset");
  cmd_run->add_option("--data", run_data, "Dataset directory")->required();
  cmd_run->add_option("--prop-ckpt", run_prop, "Propagation checkpoint")
      ->required();
  cmd_run->add_option("--sched-ckpt", run_sched, "Scheduler checkpoint");
  cmd_run->add_option("--policy", run_policy,
                      "fixed:<n> | featdiff:<tau> | adaptive:<theta>");
  cmd_run->add_option("--mode", run_mode, "blocking | low-latency")
      ->check(CLI::IsMember({"blocking", "low-latency"}));
  cmd_run->add_option("--clock", run_clock, "sim:<fps> | wall");
  cmd_run->add_option("--costs", run_costs, "s_l,s_h,schedule,propagate (ms)");
  cmd_run->add_option("--csv", run_csv, "Per-frame CSV output");
  cmd_run->add_option("--json", run_json, "Summary JSON output");
  cmd_run->add_flag("--stdout", run_stdout, "Print summary JSON to stdout");

  // sweep
  llseg_sweep_params sw;
  llseg_sweep_params_init(&sw);
  std::string sw_data, sw_prop, sw_sched, sw_family = "adaptive";
  std::string sw_thresholds, sw_csv, sw_mode = "low-latency", sw_clock = "sim:17";
  std::string sw_costs;
  bool sw_stdout = false;
  auto* cmd_sw = app.add_subcommand("sweep", "Threshold sweep for one policy");
  cmd_sw->add_option("--data", sw_data, "Dataset directory")->required();
  cmd_sw->add_option("--prop-ckpt", sw_prop, "Propagation checkpoint")
      ->required();
  cmd_sw->add_option("--sched-ckpt", sw_sched, "Scheduler checkpoint");
  cmd_sw->add_option("--family", sw_family, "fixed | featdiff | adaptive")
      ->check(CLI::IsMember({"fixed", "featdiff", "adaptive"}));
  cmd_sw->add_option("--thresholds", sw_thresholds, "Comma-separated list")
      ->required();
  cmd_sw->add_option("--out", sw_csv, "Sweep CSV output")->required();
  cmd_sw->add_option("--mode", sw_mode, "blocking | low-latency")
      ->check(CLI::IsMember({"blocking", "low-latency"}));
  cmd_sw->add_option("--clock", sw_clock, "sim:<fps> | wall");
  cmd_sw->add_option("--costs", sw_costs, "s_l,s_h,schedule,propagate (ms)");
  cmd_sw->add_flag("--stdout", sw_stdout, "Print the CSV to stdout");

  // bench
  llseg_bench_params bn;
  llseg_bench_params_init(&bn);
  std::string bn_prop, bn_sched, bn_json, bn_costs;
  bool bn_stdout = false;
  auto* cmd_bn = app.add_subcommand("bench", "Latency table");
  cmd_bn->add_option("--prop-ckpt", bn_prop, "Propagation checkpoint");
  cmd_bn->add_option("--sched-ckpt", bn_sched, "Scheduler checkpoint");
  cmd_bn->add_option("--out", bn_json, "Latency table JSON output");
  cmd_bn->add_option("--costs", bn_costs, "s_l,s_h,schedule,propagate (ms)");
  cmd_bn->add_option("--wall-reps", bn.wall_reps, "Wall-clock repetitions");
  cmd_bn->add_option("--seed", bn.seed, "Bench input seed");
  cmd_bn->add_flag("--stdout", bn_stdout, "Print the JSON to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return LLSEG_ERR_USAGE;
  }

  if (cmd_gen->parsed()) {
    gen.out_dir = gen_out.c_str();
    return report(llseg_generate(&gen));
  }

  if (cmd_tr->parsed()) {
    tr.data_dir = tr_data.c_str();
    tr.checkpoint_out = tr_out.c_str();
    tr.loss_csv = tr_loss.empty() ? nullptr : tr_loss.c_str();
    tr.use_fusion = tr_no_fusion ? 0 : 1;
    if (tr_stage == "propagation") return report(llseg_train_propagation(&tr));
    if (tr_prop.empty()) {
      std::fprintf(stderr,
                   "error: train scheduler requires --prop-ckpt (auxiliary "
                   "labels come from the trained propagation pipeline)\n");
      return LLSEG_ERR_USAGE;
    }
    tr.prop_checkpoint = tr_prop.c_str();
    return report(llseg_train_scheduler(&tr));
  }

  if (cmd_run->parsed()) {
    if (!run_costs.empty() && !parse_costs(run_costs, &run.costs)) {
      std::fprintf(stderr, "error: --costs wants four comma-separated values\n");
      return LLSEG_ERR_USAGE;
    }
    if (!parse_clock(run_clock, &run.wall_clock, &run.fps)) {
      std::fprintf(stderr, "error: bad --clock spec: %s\n", run_clock.c_str());
      return LLSEG_ERR_USAGE;
    }
    run.policy = run_policy.c_str();
    run.low_latency = run_mode == "low-latency" ? 1 : 0;
    run.csv_out = run_csv.empty() ? nullptr : run_csv.c_str();
    run.json_out = run_json.empty() ? nullptr : run_json.c_str();
    llseg_engine* eng = nullptr;
    int rc = report(llseg_engine_open(run_data.c_str(), run_prop.c_str(),
                                      run_sched.empty() ? nullptr
                                                        : run_sched.c_str(),
                                      &eng));
    if (rc != LLSEG_OK) return rc;
    llseg_run_summary s;
    rc = report(llseg_run(eng, &run, &s));
    llseg_engine_close(eng);
    if (rc == LLSEG_OK && run_stdout)
      std::printf(
          "{\"mean_miou\": %.10g, \"pixel_acc\": %.10g, \"class_acc\": %.10g, "
          "\"mean_latency_ms\": %.10g, \"max_latency_ms\": %.10g, "
          "\"max_latency_ms_after_first\": %.10g, \"update_ratio\": %.10g}\n",
          s.mean_miou, s.pixel_acc, s.class_acc, s.mean_latency_ms,
          s.max_latency_ms, s.max_latency_ms_after_first, s.update_ratio);
    return rc;
  }

  if (cmd_sw->parsed()) {
    if (!sw_costs.empty() && !parse_costs(sw_costs, &sw.costs)) {
      std::fprintf(stderr, "error: --costs wants four comma-separated values\n");
      return LLSEG_ERR_USAGE;
    }
    int wall = 0;
    if (!parse_clock(sw_clock, &wall, &sw.fps)) {
      std::fprintf(stderr, "error: bad --clock spec: %s\n", sw_clock.c_str());
      return LLSEG_ERR_USAGE;
    }
    std::vector<double> thresholds;
    try {
      thresholds = parse_list(sw_thresholds);
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: bad --thresholds list\n");
      return LLSEG_ERR_USAGE;
    }
    if (thresholds.empty()) {
      std::fprintf(stderr, "error: empty --thresholds list\n");
      return LLSEG_ERR_USAGE;
    }
    sw.family = sw_family.c_str();
    sw.thresholds = thresholds.data();
    sw.num_thresholds = thresholds.size();
    sw.out_csv = sw_csv.c_str();
    sw.low_latency = sw_mode == "low-latency" ? 1 : 0;
    llseg_engine* eng = nullptr;
    int rc = report(llseg_engine_open(sw_data.c_str(), sw_prop.c_str(),
                                      sw_sched.empty() ? nullptr
                                                       : sw_sched.c_str(),
                                      &eng));
    if (rc != LLSEG_OK) return rc;
    rc = report(llseg_sweep(eng, &sw));
    llseg_engine_close(eng);
    if (rc == LLSEG_OK && sw_stdout) return cat_file(sw_csv);
    return rc;
  }

  if (cmd_bn->parsed()) {
    if (!bn_costs.empty() && !parse_costs(bn_costs, &bn.costs)) {
      std::fprintf(stderr, "error: --costs wants four comma-separated values\n");
      return LLSEG_ERR_USAGE;
    }
    if (bn_stdout && bn_json.empty()) {
      std::fprintf(stderr, "error: --stdout requires --out for bench\n");
      return LLSEG_ERR_USAGE;
    }
    bn.prop_checkpoint = bn_prop.empty() ? nullptr : bn_prop.c_str();
    bn.sched_checkpoint = bn_sched.empty() ? nullptr : bn_sched.c_str();
    bn.out_json = bn_json.empty() ? nullptr : bn_json.c_str();
    const int rc = report(llseg_bench(&bn));
    if (rc == LLSEG_OK && bn_stdout) return cat_file(bn_json);
    return rc;
  }

  return LLSEG_ERR_USAGE;
}
