/* C API for the low-latency video segmentation engine.
 *
 * All functions return LLSEG_OK on success. On failure the thread-local
 * message from llseg_last_error() describes the problem. Handles are
 * opaque; every handle obtained from an _open call must be released with
 * the matching _close call.
 */
#ifndef LLSEG_LLSEG_H
#define LLSEG_LLSEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LLSEG_API __declspec(dllexport)
#else
#define LLSEG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum llseg_status {
  LLSEG_OK = 0,
  LLSEG_ERR_RUNTIME = 1, /* IO failures, bad checkpoints, diverged training */
  LLSEG_ERR_USAGE = 2    /* invalid arguments */
};

LLSEG_API const char* llseg_version(void);
LLSEG_API const char* llseg_last_error(void);

typedef struct llseg_generate_params {
  const char* out_dir;
  uint64_t seed;
  size_t sequences;
  size_t length;
  size_t width, height;
  size_t num_shapes;
  size_t num_classes;
  double max_speed;
  double texture_amplitude;
  int texture_flicker;
  double scene_change_prob;
  int mixed; /* cycle static / translating / scene-change profiles */
} llseg_generate_params;

LLSEG_API void llseg_generate_params_init(llseg_generate_params* p);
LLSEG_API int llseg_generate(const llseg_generate_params* p);

typedef struct llseg_train_params {
  const char* data_dir;
  const char* checkpoint_out;
  const char* loss_csv;        /* may be NULL */
  const char* prop_checkpoint; /* scheduler training only */
  size_t epochs;
  double lr;
  uint64_t seed;
  size_t kernel_size;
  size_t c_l, c_h, c_r;
  int use_fusion;
} llseg_train_params;

LLSEG_API void llseg_train_params_init(llseg_train_params* p);
LLSEG_API int llseg_train_propagation(const llseg_train_params* p);
LLSEG_API int llseg_train_scheduler(const llseg_train_params* p);

/* A loaded model plus dataset, reusable across runs and sweeps. */
typedef struct llseg_engine llseg_engine;

LLSEG_API int llseg_engine_open(const char* data_dir,
                                const char* prop_checkpoint,
                                const char* sched_checkpoint, /* may be NULL */
                                llseg_engine** out);
LLSEG_API void llseg_engine_close(llseg_engine* e);

typedef struct llseg_stage_costs {
  double s_l_ms, s_h_ms, schedule_ms, propagate_ms;
} llseg_stage_costs;

typedef struct llseg_run_params {
  const char* policy;   /* fixed:<n> | featdiff:<tau> | adaptive:<theta> */
  const char* csv_out;  /* may be NULL */
  const char* json_out; /* may be NULL */
  int low_latency;      /* 0: blocking schedule */
  int wall_clock;       /* 0: simulated clock */
  double fps;
  llseg_stage_costs costs;
} llseg_run_params;

typedef struct llseg_run_summary {
  double mean_miou;
  double pixel_acc;
  double class_acc;
  double mean_latency_ms;
  double max_latency_ms;
  double max_latency_ms_after_first;
  double update_ratio;
} llseg_run_summary;

LLSEG_API void llseg_run_params_init(llseg_run_params* p);
LLSEG_API int llseg_run(llseg_engine* e, const llseg_run_params* p,
                        llseg_run_summary* out);

typedef struct llseg_sweep_params {
  const char* family; /* fixed | featdiff | adaptive */
  const double* thresholds;
  size_t num_thresholds;
  const char* out_csv;
  int low_latency;
  double fps;
  llseg_stage_costs costs;
} llseg_sweep_params;

LLSEG_API void llseg_sweep_params_init(llseg_sweep_params* p);
LLSEG_API int llseg_sweep(llseg_engine* e, const llseg_sweep_params* p);

typedef struct llseg_bench_params {
  const char* prop_checkpoint;  /* may be NULL: cost arithmetic only */
  const char* sched_checkpoint; /* may be NULL */
  const char* out_json;         /* may be NULL */
  llseg_stage_costs costs;
  size_t wall_reps;
  uint64_t seed;
} llseg_bench_params;

LLSEG_API void llseg_bench_params_init(llseg_bench_params* p);
LLSEG_API int llseg_bench(const llseg_bench_params* p);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LLSEG_LLSEG_H */
