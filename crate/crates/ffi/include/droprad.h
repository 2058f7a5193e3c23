#ifndef DROPRAD_H
#define DROPRAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrStatus {
  DR_STATUS_OK = 0,
  DR_STATUS_NULL_POINTER = 1,
  DR_STATUS_INVALID_ARGUMENT = 2,
  DR_STATUS_SHAPE_MISMATCH = 3,
  DR_STATUS_DIVERGED = 4,
  DR_STATUS_CONFIG = 5,
  DR_STATUS_IO = 6,
  DR_STATUS_PANIC = 7,
} DrStatus;

// Activation codes accepted by [`dr_network_new`].
typedef enum DrActivation {
  DR_ACTIVATION_TANH = 0,
  DR_ACTIVATION_CENTERED_SIGMOID = 1,
  DR_ACTIVATION_RELU = 2,
  DR_ACTIVATION_IDENTITY = 3,
} DrActivation;

// Dropout type codes.
typedef enum DrDropoutType {
  DR_DROPOUT_TYPE_I = 1,
  DR_DROPOUT_TYPE_II = 2,
  DR_DROPOUT_TYPE_III = 3,
} DrDropoutType;

typedef enum DrLossKind {
  DR_LOSS_KIND_SQUARE = 0,
  DR_LOSS_KIND_CROSS_ENTROPY_SIGMOID = 1,
} DrLossKind;

typedef enum DrBoundVariant {
  DR_BOUND_VARIANT_EXPECTED = 0,
  DR_BOUND_VARIANT_EMPIRICAL = 1,
} DrBoundVariant;

// Opaque network description.
typedef struct DrNetwork DrNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a
// success. Valid until the next call on the same thread.
const char *dr_last_error_message(void);

// Builds a network from `widths[0..n_widths]` and
// `budgets[0..n_budgets]` (`n_budgets = n_widths + 1`). `activation` is a
// [`DrActivation`] code.
//
// # Safety
// Array pointers must be valid for their lengths; `out` must be writable.
enum DrStatus dr_network_new(size_t input_dim,
                             const size_t *widths,
                             size_t n_widths,
                             const double *budgets,
                             size_t n_budgets,
                             uint32_t activation,
                             double input_bound,
                             struct DrNetwork **out);

// Parses a network from TOML: either a full experiment config (the
// `[network]` section is used) or the network table itself.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum DrStatus dr_network_from_toml(const char *text, struct DrNetwork **out);

// Releases a handle; null is ignored.
//
// # Safety
// `net` must come from a `dr_network_*` constructor and not be used again.
void dr_network_free(struct DrNetwork *net);

// Number of hidden layers `k`.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DrStatus dr_network_depth(const struct DrNetwork *net, size_t *out);

// Length of the flat weight array: layer by layer, vector by vector.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DrStatus dr_network_weight_count(const struct DrNetwork *net, size_t *out);

// Plain network output for flat weights.
//
// # Safety
// Array pointers must be valid for their lengths; `out` must be writable.
enum DrStatus dr_forward(const struct DrNetwork *net,
                         const double *weights,
                         size_t n_weights,
                         const double *x,
                         size_t n_x,
                         double *out);

// Dropout output with masks sampled from `(rho, seed, stream)`.
//
// # Safety
// Array pointers must be valid for their lengths; `out` must be writable.
enum DrStatus dr_forward_dropout_sampled(const struct DrNetwork *net,
                                         uint32_t dropout,
                                         const double *weights,
                                         size_t n_weights,
                                         const double *x,
                                         size_t n_x,
                                         double rho,
                                         uint64_t seed,
                                         uint64_t stream,
                                         double *out);

// `L^k · B̂ · prod B_j`.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DrStatus dr_output_bound(const struct DrNetwork *net, double *out);

// Theoretical complexity bound for `dropout` (a [`DrDropoutType`] code).
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DrStatus dr_theoretical_bound(const struct DrNetwork *net,
                                   uint32_t dropout,
                                   double rho,
                                   size_t n,
                                   double *out);

// Total right-hand side of the generalization bound. `loss` is a
// [`DrLossKind`] code, `variant` a [`DrBoundVariant`] code; `y_bound`
// applies to the square loss and `p_min` to cross entropy.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DrStatus dr_generalization_bound(const struct DrNetwork *net,
                                      double empirical_risk,
                                      double complexity,
                                      uint32_t loss,
                                      double y_bound,
                                      double p_min,
                                      double delta,
                                      size_t n,
                                      uint32_t variant,
                                      double *out);

// `(B/n)·||Σ ε_i x_i ⊙ r_i||` for row-major `xs` and `masks` of shape
// `n × d`.
//
// # Safety
// `xs` and `masks` must hold `n * d` entries, `eps` `n`; `out` must be
// writable.
enum DrStatus dr_closed_form_linear_sup(const double *xs,
                                        const uint8_t *masks,
                                        const double *eps,
                                        size_t n,
                                        size_t d,
                                        double budget,
                                        double *out);

// `rho^p · ||x||^2`.
//
// # Safety
// `x` must hold `d` entries; `out` must be writable.
enum DrStatus dr_moment_analytic(const double *x, size_t d, size_t p, double rho, double *out);

// Least-squares slope of `ln value` against `ln rho`.
//
// # Safety
// `rhos` and `values` must hold `count` entries; outputs must be
// writable.
enum DrStatus dr_fit_loglog_slope(const double *rhos,
                                  const double *values,
                                  size_t count,
                                  double *slope,
                                  double *r_squared);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DROPRAD_H */
