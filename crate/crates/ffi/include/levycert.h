#ifndef LEVYCERT_H
#define LEVYCERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Certificate families reachable through the C API.
 */
typedef enum LcCertKind {
  LC_CERT_KIND_W1 = 0,
  LC_CERT_KIND_TV = 1,
  LC_CERT_KIND_STRONG_ERGODIC = 2,
} LcCertKind;

/**
 * Which distance curve to estimate.
 */
typedef enum LcCurveKind {
  /**
   * Mean coupled distance.
   */
  LC_CURVE_KIND_W1 = 0,
  /**
   * Twice the probability of not yet being coupled.
   */
  LC_CURVE_KIND_TV = 1,
} LcCurveKind;

/**
 * Result codes.
 */
typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_ARGUMENT = 2,
  LC_STATUS_CONFIG = 3,
  LC_STATUS_NUMERIC = 4,
  /**
   * The requested certificate cannot be issued for this scenario.
   */
  LC_STATUS_REJECTED = 5,
  LC_STATUS_IO = 6,
  LC_STATUS_PANIC = 7,
} LcStatus;

/**
 * Opaque certificate handle.
 */
typedef struct LcCertificate LcCertificate;

/**
 * Opaque distance-curve handle.
 */
typedef struct LcCurve LcCurve;

/**
 * Opaque scenario handle.
 */
typedef struct LcScenario LcScenario;

/**
 * Numeric content of a certificate; absent values are NaN.
 */
typedef struct LcCertificateValues {
  double c1;
  double c2;
  double big_c;
  double lambda;
  double kappa;
  double a;
  double j_kappa;
  bool verified;
  bool conditional;
} LcCertificateValues;

/**
 * Closed-form Wasserstein constants.
 */
typedef struct LcW1Constants {
  double c1;
  double c2;
  double big_c;
  double lambda;
} LcW1Constants;

/**
 * Simulation settings; nonpositive `kappa` or `step` select the defaults.
 */
typedef struct LcSimSettings {
  double kappa;
  double epsilon;
  double step;
  double t_max;
  size_t n_paths;
  uint64_t seed;
  size_t record_every;
  bool synchronous;
  /**
   * 0 uses every core.
   */
  size_t workers;
} LcSimSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *lc_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next failing call.
 */
const char *lc_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lc_string_free(char *s);

/**
 * Number of shipped catalog scenarios.
 */
size_t lc_catalog_len(void);

/**
 * Create a handle for catalog scenario `index`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LcStatus lc_scenario_catalog(size_t index, struct LcScenario **out);

/**
 * Parse a flat config and take its `index`-th scenario (sorted by name).
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum LcStatus lc_scenario_from_config(const char *text, size_t index, struct LcScenario **out);

/**
 * Scenario name; release with [`lc_string_free`]. NULL on a null handle.
 *
 * # Safety
 * `s` must be a live scenario handle or NULL.
 */
char *lc_scenario_name(const struct LcScenario *s);

/**
 * # Safety
 * `s` must be a scenario handle from this library or NULL.
 */
void lc_scenario_free(struct LcScenario *s);

/**
 * Issue a certificate; `kappa <= 0` selects the default coupling threshold.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum LcStatus lc_certify(const struct LcScenario *scenario,
                         enum LcCertKind kind,
                         double kappa,
                         struct LcCertificate **out);

/**
 * # Safety
 * `cert` must be a live handle and `out` a valid pointer.
 */
enum LcStatus lc_certificate_values(const struct LcCertificate *cert,
                                    struct LcCertificateValues *out);

/**
 * Provenance text; release with [`lc_string_free`].
 *
 * # Safety
 * `cert` must be a live handle or NULL.
 */
char *lc_certificate_provenance(const struct LcCertificate *cert);

/**
 * # Safety
 * `cert` must be a certificate handle from this library or NULL.
 */
void lc_certificate_free(struct LcCertificate *cert);

/**
 * Closed-form Wasserstein constants from `K₂`, `g₁(2l₀)` and `g₂(2l₀)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LcStatus lc_w1_formula(double k2, double g1, double g2, struct LcW1Constants *out);

/**
 * Simulate a coupled ensemble and reduce it to a distance curve.
 *
 * # Safety
 * `scenario` and `settings` must be valid and `out` a valid pointer.
 */
enum LcStatus lc_simulate_curve(const struct LcScenario *scenario,
                                const struct LcSimSettings *settings,
                                enum LcCurveKind kind,
                                struct LcCurve **out);

/**
 * Number of grid points; 0 for a null handle.
 *
 * # Safety
 * `curve` must be a live handle or NULL.
 */
size_t lc_curve_len(const struct LcCurve *curve);

/**
 * Read grid point `i`; any output pointer may be NULL.
 *
 * # Safety
 * `curve` must be a live handle; non-null outputs must be valid.
 */
enum LcStatus lc_curve_point(const struct LcCurve *curve,
                             size_t i,
                             double *t,
                             double *value,
                             double *stderr);

/**
 * # Safety
 * `curve` must be a curve handle from this library or NULL.
 */
void lc_curve_free(struct LcCurve *curve);

/**
 * Survival of the symmetric birth–death chain with total rate `rate`
 * started at level `k0`, evaluated at `n` times into `out`.
 *
 * # Safety
 * `times` and `out` must point to `n` doubles.
 */
enum LcStatus lc_birth_death_survival(double rate,
                                      size_t k0,
                                      const double *times,
                                      size_t n,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVYCERT_H */
