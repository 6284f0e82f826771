#ifndef PARABLOW_H
#define PARABLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PbStatus {
  PB_STATUS_OK = 0,
  PB_STATUS_NULL_POINTER = 1,
  PB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The requested quantity does not exist for these parameters.
   */
  PB_STATUS_NOT_APPLICABLE = 3,
  PB_STATUS_NUMERICAL = 4,
  PB_STATUS_IO = 5,
  PB_STATUS_BUFFER_TOO_SMALL = 6,
  PB_STATUS_PANIC = 7,
} PbStatus;

typedef enum PbHalt {
  /**
   * `pb_simulation_run` has not been called yet.
   */
  PB_HALT_NOT_RUN = 0,
  PB_HALT_REACHED_T_END = 1,
  PB_HALT_BLOWUP_THRESHOLD = 2,
  PB_HALT_STEP_UNDERFLOW = 3,
  PB_HALT_NON_FINITE = 4,
} PbHalt;

typedef enum PbVerdict {
  PB_VERDICT_MATCHES_ORACLE = 0,
  PB_VERDICT_BOUND_SATISFIED = 1,
  PB_VERDICT_INCONCLUSIVE = 2,
  PB_VERDICT_VIOLATION = 3,
} PbVerdict;

typedef struct PbSimulation PbSimulation;

typedef struct PbStepControl {
  double cfl;
  double dt_min;
  double dt_max;
  double t_end;
  double stop_threshold;
  double sample_interval;
} PbStepControl;

/**
 * Set `window_start`/`window_end` to NaN for the trailing-decade window and
 * `reference_t0` to NaN when there is no reference singular time.
 */
typedef struct PbFitConfig {
  double window_start;
  double window_end;
  double rel_tol;
  double min_growth;
  double reference_t0;
  /**
   * The reference is an upper bound rather than the exact time.
   */
  bool reference_is_bound;
} PbFitConfig;

typedef struct PbParams {
  double alpha;
  double beta;
  double kappa0;
  bool convective;
} PbParams;

/**
 * One trace sample. `v` and `omega` hold the derivatives of orders 0..3 at x = 0.
 */
typedef struct PbTraceRow {
  double t;
  double e0;
  double e2;
  double l1_omega;
  double diss_v;
  double diss_omega;
  double v[4];
  double omega[4];
  double min_omega;
  double sym_odd;
  double sym_even;
  double spectral_tail;
} PbTraceRow;

typedef struct PbBlowupEstimate {
  double t0_hat;
  double exponent_hat;
  double window_start;
  double window_end;
  double residual;
  size_t samples;
  enum PbVerdict verdict;
} PbBlowupEstimate;

/**
 * Reduced point values. `singular_time` is NaN when none is known.
 */
typedef struct PbReduced {
  double v1;
  double omega2;
  double singular_time;
  /**
   * Whether the values come from an exact closed form.
   */
  bool exact;
} PbReduced;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pb_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to fit) and returns its full length in bytes, excluding the NUL.
 * Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t pb_last_error_message(char *buf, size_t len);

/**
 * Default step control: cfl 0.25, dt in [1e-12, 1e-3], t_end 1, threshold 1e6,
 * sampling every 1e-3.
 */
struct PbStepControl pb_step_control_default(void);

/**
 * Default fit settings: trailing-decade window, 2% tolerance, growth 10, no reference.
 */
struct PbFitConfig pb_fit_config_default(void);

/**
 * Creates a simulation from `n` nodal samples of `v` and `omega` on
 * `x_j = -pi + 2 pi j / n`, starting at t = 0.
 *
 * # Safety
 * `params` and `control` must be valid pointers, `v` and `omega` valid for `n`
 * reads and `out` valid for one write.
 */
enum PbStatus pb_simulation_new(const struct PbParams *params,
                                const struct PbStepControl *control,
                                size_t n,
                                const double *v,
                                const double *omega,
                                bool dealias,
                                struct PbSimulation **out);

/**
 * Creates a simulation from a TOML run configuration, as accepted by the
 * `parablow run` command.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` valid for one write.
 */
enum PbStatus pb_simulation_from_toml(const char *config_toml, struct PbSimulation **out);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from `pb_simulation_new*` not yet freed.
 */
void pb_simulation_free(struct PbSimulation *sim);

/**
 * Changes the end time for the next `pb_simulation_run`.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum PbStatus pb_simulation_set_t_end(struct PbSimulation *sim, double t_end);

/**
 * Advances from the current state to `t_end` (or until a halt condition) and
 * appends the samples to the trace. A run after a halt other than reaching
 * `t_end` resumes from the halted state.
 *
 * # Safety
 * `sim` must be a live handle; `halt` may be null.
 */
enum PbStatus pb_simulation_run(struct PbSimulation *sim, enum PbHalt *halt);

/**
 * Why the last run stopped.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum PbHalt pb_simulation_halt(const struct PbSimulation *sim);

/**
 * Number of trace samples recorded so far.
 *
 * # Safety
 * `sim` must be a live handle.
 */
size_t pb_simulation_trace_len(const struct PbSimulation *sim);

/**
 * Copies trace sample `index`.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for one write.
 */
enum PbStatus pb_simulation_trace_row(const struct PbSimulation *sim,
                                      size_t index,
                                      struct PbTraceRow *out);

/**
 * Grid size of the simulation.
 *
 * # Safety
 * `sim` must be a live handle.
 */
size_t pb_simulation_grid_size(const struct PbSimulation *sim);

/**
 * Copies the current fields into `v` and `omega` (each `len >= n`) and the time
 * into `t`. Any of the outputs may be null.
 *
 * # Safety
 * `sim` must be a live handle; non-null buffers must be valid for `len` writes.
 */
enum PbStatus pb_simulation_state(const struct PbSimulation *sim,
                                  double *v,
                                  double *omega,
                                  size_t len,
                                  double *t);

/**
 * Fits the blow-up law to the recorded trace.
 *
 * # Safety
 * `sim` must be a live handle, `config` valid and `out` valid for one write.
 */
enum PbStatus pb_fit_blowup(const struct PbSimulation *sim,
                            const struct PbFitConfig *config,
                            struct PbBlowupEstimate *out);

/**
 * Reduced values `(V^(1), Omega^(2))` at time `t` from `(v1, omega2)` at t = 0.
 * Uses the closed form when one exists and numerical integration otherwise.
 *
 * # Safety
 * `params` must be valid and `out` valid for one write.
 */
enum PbStatus pb_oracle_reduced(const struct PbParams *params,
                                double v1,
                                double omega2,
                                double t,
                                struct PbReduced *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARABLOW_H */
