#include "llseg/llseg.h"

#include <cstring>
#include <string>

#include "llseg/driver.hpp"

namespace {

thread_local std::string g_last_error;

int fail(int code, const char* what) {
  g_last_error = what;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return LLSEG_OK;
  } catch (const std::invalid_argument& e) {
    return fail(LLSEG_ERR_USAGE, e.what());
  } catch (const std::exception& e) {
    return fail(LLSEG_ERR_RUNTIME, e.what());
  }
}

std::string str_or_empty(const char* s) { return s ? s : ""; }

llseg::StageCosts to_costs(const llseg_stage_costs& c) {
  return {c.s_l_ms, c.s_h_ms, c.schedule_ms, c.propagate_ms};
}

}  // namespace

struct llseg_engine {
  llseg::LoadedModel model;
  llseg::Dataset dataset;
  std::string data_dir, prop_ckpt, sched_ckpt;
};

extern "C" {

const char* llseg_version(void) { return "llseg 1.0.0"; }

const char* llseg_last_error(void) { return g_last_error.c_str(); }

void llseg_generate_params_init(llseg_generate_params* p) {
  std::memset(p, 0, sizeof(*p));
  p->sequences = 8;
  p->length = 30;
  p->width = 32;
  p->height = 32;
  p->num_shapes = 3;
  p->num_classes = 4;
  p->max_speed = 2.0;
  p->texture_amplitude = 0.05;
}

int llseg_generate(const llseg_generate_params* p) {
  return guarded([&] {
    if (!p || !p->out_dir)
      throw std::invalid_argument("generate: out_dir required");
    llseg::GenerateParams gp;
    gp.out_dir = p->out_dir;
    gp.seed = p->seed;
    gp.sequences = p->sequences;
    gp.length = p->length;
    gp.scene.width = p->width;
    gp.scene.height = p->height;
    gp.scene.num_shapes = p->num_shapes;
    gp.scene.num_classes = p->num_classes;
    gp.scene.max_speed = p->max_speed;
    gp.scene.texture_amplitude = p->texture_amplitude;
    gp.scene.texture_flicker = p->texture_flicker != 0;
    gp.scene.scene_change_prob = p->scene_change_prob;
    gp.mixed = p->mixed != 0;
    llseg::cmd_generate(gp);
  });
}

void llseg_train_params_init(llseg_train_params* p) {
  std::memset(p, 0, sizeof(*p));
  p->epochs = 50;
  p->lr = -1.0;  // module default
  p->kernel_size = 9;
  p->c_l = 16;
  p->c_h = 32;
  p->c_r = 16;
  p->use_fusion = 1;
}

int llseg_train_propagation(const llseg_train_params* p) {
  return guarded([&] {
    if (!p || !p->data_dir || !p->checkpoint_out)
      throw std::invalid_argument("train: data_dir and checkpoint_out required");
    llseg::TrainPropagationParams tp;
    tp.data_dir = p->data_dir;
    tp.checkpoint_out = p->checkpoint_out;
    tp.loss_csv = str_or_empty(p->loss_csv);
    tp.epochs = p->epochs;
    if (p->lr >= 0.0) tp.lr = p->lr;
    tp.seed = p->seed;
    tp.cfg.kernel_size = p->kernel_size;
    tp.cfg.c_l = p->c_l;
    tp.cfg.c_h = p->c_h;
    tp.cfg.c_r = p->c_r;
    tp.cfg.use_fusion = p->use_fusion != 0;
    llseg::cmd_train_propagation(tp);
  });
}

int llseg_train_scheduler(const llseg_train_params* p) {
  return guarded([&] {
    if (!p || !p->data_dir || !p->checkpoint_out || !p->prop_checkpoint)
      throw std::invalid_argument(
          "train scheduler: data_dir, checkpoint_out and prop_checkpoint "
          "required");
    llseg::TrainSchedulerParams tp;
    tp.data_dir = p->data_dir;
    tp.prop_checkpoint = p->prop_checkpoint;
    tp.checkpoint_out = p->checkpoint_out;
    tp.loss_csv = str_or_empty(p->loss_csv);
    tp.epochs = p->epochs;
    if (p->lr >= 0.0) tp.lr = p->lr;
    tp.seed = p->seed;
    llseg::cmd_train_scheduler(tp);
  });
}

int llseg_engine_open(const char* data_dir, const char* prop_checkpoint,
                      const char* sched_checkpoint, llseg_engine** out) {
  return guarded([&] {
    if (!data_dir || !prop_checkpoint || !out)
      throw std::invalid_argument("engine_open: data_dir and prop_checkpoint "
                                  "required");
    auto e = std::make_unique<llseg_engine>(llseg_engine{
        llseg::load_model(prop_checkpoint, str_or_empty(sched_checkpoint)),
        llseg::load_dataset(data_dir), data_dir, prop_checkpoint,
        str_or_empty(sched_checkpoint)});
    *out = e.release();
  });
}

void llseg_engine_close(llseg_engine* e) { delete e; }

void llseg_run_params_init(llseg_run_params* p) {
  std::memset(p, 0, sizeof(*p));
  p->policy = "adaptive:0.1";
  p->low_latency = 1;
  p->fps = 17.0;
  p->costs = {61.0, 299.0, 20.0, 38.0};
}

int llseg_run(llseg_engine* e, const llseg_run_params* p,
              llseg_run_summary* out) {
  return guarded([&] {
    if (!e || !p) throw std::invalid_argument("run: engine and params required");
    llseg::RunParams rp;
    rp.data_dir = e->data_dir;
    rp.prop_checkpoint = e->prop_ckpt;
    rp.sched_checkpoint = e->sched_ckpt;
    rp.csv_out = str_or_empty(p->csv_out);
    rp.json_out = str_or_empty(p->json_out);
    rp.mode = p->low_latency ? llseg::RunMode::low_latency
                             : llseg::RunMode::blocking;
    rp.policy = p->policy ? p->policy : "adaptive:0.1";
    rp.costs = to_costs(p->costs);
    rp.clock.mode = p->wall_clock ? llseg::ClockConfig::Mode::wall
                                  : llseg::ClockConfig::Mode::simulated;
    rp.clock.fps = p->fps;
    llseg::RunSummary s = llseg::cmd_run(rp);
    if (out) {
      out->mean_miou = s.mean_miou;
      out->pixel_acc = s.pixel_acc;
      out->class_acc = s.class_acc;
      out->mean_latency_ms = s.mean_latency_ms;
      out->max_latency_ms = s.max_latency_ms;
      out->max_latency_ms_after_first = s.max_latency_ms_after_first;
      out->update_ratio = s.update_ratio;
    }
  });
}

void llseg_sweep_params_init(llseg_sweep_params* p) {
  std::memset(p, 0, sizeof(*p));
  p->family = "adaptive";
  p->low_latency = 1;
  p->fps = 17.0;
  p->costs = {61.0, 299.0, 20.0, 38.0};
}

int llseg_sweep(llseg_engine* e, const llseg_sweep_params* p) {
  return guarded([&] {
    if (!e || !p || !p->thresholds || p->num_thresholds == 0)
      throw std::invalid_argument("sweep: a nonempty threshold list required");
    llseg::SweepParams sp;
    sp.data_dir = e->data_dir;
    sp.prop_checkpoint = e->prop_ckpt;
    sp.sched_checkpoint = e->sched_ckpt;
    sp.out_csv = str_or_empty(p->out_csv);
    sp.family = p->family ? p->family : "adaptive";
    sp.thresholds.assign(p->thresholds, p->thresholds + p->num_thresholds);
    sp.mode = p->low_latency ? llseg::RunMode::low_latency
                             : llseg::RunMode::blocking;
    sp.costs = to_costs(p->costs);
    sp.clock.fps = p->fps;
    llseg::cmd_sweep(sp);
  });
}

void llseg_bench_params_init(llseg_bench_params* p) {
  std::memset(p, 0, sizeof(*p));
  p->costs = {61.0, 299.0, 20.0, 38.0};
  p->wall_reps = 5;
}

int llseg_bench(const llseg_bench_params* p) {
  return guarded([&] {
    if (!p) throw std::invalid_argument("bench: params required");
    llseg::BenchParams bp;
    bp.prop_checkpoint = str_or_empty(p->prop_checkpoint);
    bp.sched_checkpoint = str_or_empty(p->sched_checkpoint);
    bp.out_json = str_or_empty(p->out_json);
    bp.costs = to_costs(p->costs);
    bp.wall_reps = p->wall_reps == 0 ? 5 : p->wall_reps;
    bp.seed = p->seed;
    llseg::cmd_bench(bp);
  });
}

}  // extern "C"
