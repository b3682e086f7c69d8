#ifndef MBSINDY_H
#define MBSINDY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MbsStatus {
  MBS_STATUS_OK = 0,
  MBS_STATUS_FAILURE = 1,
  MBS_STATUS_INVALID_ARGUMENT = 2,
  MBS_STATUS_NO_MODEL = 3,
  MBS_STATUS_NUMERICAL = 4,
  MBS_STATUS_IO = 5,
  MBS_STATUS_NULL_POINTER = 6,
  MBS_STATUS_PANIC = 7,
} MbsStatus;

typedef enum MbsCase {
  MBS_CASE_PLANAR = 0,
  MBS_CASE_STAR = 1,
} MbsCase;

typedef enum MbsProblem {
  MBS_PROBLEM_STEFAN = 0,
  MBS_PROBLEM_FISHER = 1,
} MbsProblem;

// Field snapshots, boundary curves and their manifest.
typedef struct MbsDataset MbsDataset;

// Result of a discovery run.
typedef struct MbsReport MbsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy of the last error message on this thread, or NULL if none.
char *mbs_last_error_message(void);

// # Safety
// `s` must be NULL or a string returned by this library that has not been freed.
void mbs_string_free(char *s);

// Run the built-in solver with the case defaults, overriding `kappa` and `t_end`
// when they are positive.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle to free with
// [`mbs_dataset_free`].
enum MbsStatus mbs_simulate(enum MbsCase case_,
                            double kappa,
                            double t_end,
                            uint64_t seed,
                            struct MbsDataset **out);

// # Safety
// `dir` must be a NUL-terminated path and `out` a valid pointer.
enum MbsStatus mbs_dataset_read(const char *dir, struct MbsDataset **out);

// # Safety
// `dataset` must be a live handle and `dir` a NUL-terminated path.
enum MbsStatus mbs_dataset_write(const struct MbsDataset *dataset, const char *dir);

// New dataset with Gaussian noise of relative level `eta` added to every field value.
//
// # Safety
// `dataset` must be a live handle and `out` a valid pointer.
enum MbsStatus mbs_dataset_corrupt(const struct MbsDataset *dataset,
                                   double eta,
                                   uint64_t seed,
                                   struct MbsDataset **out);

// Number of stored snapshots, or 0 for NULL.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t mbs_dataset_snapshot_count(const struct MbsDataset *dataset);

// # Safety
// `dataset` must be NULL or a handle not yet freed.
void mbs_dataset_free(struct MbsDataset *dataset);

// Ensemble discovery with the per-problem defaults. A negative `lambda1`
// keeps the default sparsity threshold.
//
// # Safety
// `dataset` must be a live handle and `out` a valid pointer; on success `out`
// receives a handle to free with [`mbs_report_free`].
enum MbsStatus mbs_discover(const struct MbsDataset *dataset,
                            enum MbsProblem problem_,
                            double lambda1,
                            uint64_t seed,
                            struct MbsReport **out);

// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum MbsStatus mbs_report_from_toml(const char *toml, struct MbsReport **out);

// Serialized report; free with [`mbs_string_free`]. NULL on failure.
//
// # Safety
// `report` must be NULL or a live handle.
char *mbs_report_to_toml(const struct MbsReport *report);

// Rendered model such as `d(xi_n)/dt = -0.514 * u_xn`; free with [`mbs_string_free`].
//
// # Safety
// `report` must be NULL or a live handle.
char *mbs_report_equation(const struct MbsReport *report);

// Number of library features, or 0 for NULL.
//
// # Safety
// `report` must be NULL or a live handle.
size_t mbs_report_feature_count(const struct MbsReport *report);

// Copy up to `len` final coefficients, in library order, into `buf`.
// `written` receives the full count.
//
// # Safety
// `buf` must hold `len` doubles; `written` may be NULL.
enum MbsStatus mbs_report_coefficients(const struct MbsReport *report,
                                       double *buf,
                                       size_t len,
                                       size_t *written);

// Relative coefficient error against the dataset's ground truth.
// Fails with `MBS_STATUS_NO_MODEL` when the report carries none.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum MbsStatus mbs_report_epsilon_c(const struct MbsReport *report, double *out);

// # Safety
// `report` must be NULL or a handle not yet freed.
void mbs_report_free(struct MbsReport *report);

// Replay a report to `t_target`. Stefan reports yield the area of the
// uncertainty band; Fisher reports yield the largest field deviation.
//
// # Safety
// `dataset` and `report` must be live handles and `out` a valid pointer.
enum MbsStatus mbs_replay(const struct MbsDataset *dataset,
                          const struct MbsReport *report,
                          double t_target,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBSINDY_H */
