#ifndef ESR_FFI_H
#define ESR_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum EsrStatus {
  ESR_STATUS_OK = 0,
  ESR_STATUS_NULL_POINTER = 1,
  ESR_STATUS_INVALID_UTF8 = 2,
  ESR_STATUS_IO = 3,
  ESR_STATUS_PARSE = 4,
  ESR_STATUS_VALIDATION = 5,
  ESR_STATUS_NUMERICAL_ABORT = 6,
  ESR_STATUS_CALIBRATION = 7,
  ESR_STATUS_OUT_OF_RANGE = 8,
  ESR_STATUS_PANIC = 9,
} EsrStatus;

// Observable selector for [`esr_trajectory_series`].
typedef enum EsrSeries {
  // ns
  ESR_SERIES_TIME = 0,
  // Population of eigenstate `index` (0-based).
  ESR_SERIES_POPULATION = 1,
  // Tip current, pA.
  ESR_SERIES_TIP_CURRENT = 2,
  // Substrate current, pA.
  ESR_SERIES_SUBSTRATE_CURRENT = 3,
  // Renormalized fidelity against |Φ+⟩.
  ESR_SERIES_FIDELITY_PHI_PLUS = 4,
  ESR_SERIES_CONCURRENCE = 5,
  // Weight outside the two-qubit subspace.
  ESR_SERIES_LEAKAGE = 6,
  // `<S^axis>` of spin `index / 3` (0 = transport), axis `index % 3`.
  ESR_SERIES_SPIN = 7,
} EsrSeries;

// A drive schedule.
typedef struct EsrProgram EsrProgram;

// A configured model with its eigenbasis and electrodes.
typedef struct EsrSimulation EsrSimulation;

// Sampled observables of one propagation.
typedef struct EsrTrajectory EsrTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call into the library.
const char *esr_last_error_message(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void esr_string_free(char *s);

// Builds the bundled reference simulation.
//
// # Safety
// `out` must be a valid pointer.
enum EsrStatus esr_simulation_new_reference(struct EsrSimulation **out);

// Builds a simulation from configuration text.
//
// # Safety
// `config` must be a NUL-terminated string and `out` a valid pointer.
enum EsrStatus esr_simulation_from_config(const char *config, struct EsrSimulation **out);

// # Safety
// `sim` must come from this library and not be freed twice. Null is ignored.
void esr_simulation_free(struct EsrSimulation *sim);

// Number of eigenstates; 0 for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
size_t esr_simulation_dimension(const struct EsrSimulation *sim);

// Eigenenergies in GHz above the ground state, ascending.
//
// # Safety
// `sim` must be a live handle and `buf` hold `len` doubles.
enum EsrStatus esr_simulation_energies(const struct EsrSimulation *sim, double *buf, size_t len);

// The bundled Bell-state pulse program.
//
// # Safety
// `out` must be a valid pointer.
enum EsrStatus esr_program_reference(struct EsrProgram **out);

// Parses a pulse file.
//
// # Safety
// `pulses` must be a NUL-terminated string and `out` a valid pointer.
enum EsrStatus esr_program_parse(const char *pulses, struct EsrProgram **out);

// Number of segments; 0 for a null handle.
//
// # Safety
// `program` must be null or a live handle.
size_t esr_program_segment_count(const struct EsrProgram *program);

// Writes the program in the pulse file format; release with
// [`esr_string_free`].
//
// # Safety
// `program` must be a live handle and `out` a valid pointer.
enum EsrStatus esr_program_serialize(const struct EsrProgram *program, char **out);

// # Safety
// `program` must come from this library and not be freed twice. Null is
// ignored.
void esr_program_free(struct EsrProgram *program);

// Propagates the configured initial state through `program`, sampling every
// `sample_interval` ns. `dt <= 0` selects the default step.
//
// # Safety
// `sim` and `program` must be live handles and `out` a valid pointer.
enum EsrStatus esr_simulation_propagate(const struct EsrSimulation *sim,
                                        const struct EsrProgram *program,
                                        double dt,
                                        double sample_interval,
                                        struct EsrTrajectory **out);

// # Safety
// `traj` must come from this library and not be freed twice. Null is
// ignored.
void esr_trajectory_free(struct EsrTrajectory *traj);

// Number of samples; 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t esr_trajectory_len(const struct EsrTrajectory *traj);

// Copies one observable series into `buf` (capacity `len`, at least
// [`esr_trajectory_len`]).
//
// # Safety
// `traj` must be a live handle and `buf` hold `len` doubles.
enum EsrStatus esr_trajectory_series(const struct EsrTrajectory *traj,
                                     enum EsrSeries series,
                                     size_t index,
                                     double *buf,
                                     size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESR_FFI_H */
