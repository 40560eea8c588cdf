#ifndef CROWDSPAM_H
#define CROWDSPAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_ARGUMENT = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_INVALID_ARGUMENT = 3,
  CS_STATUS_INSUFFICIENT_BALANCE = 4,
  CS_STATUS_STAKE_ALREADY_OPEN = 5,
  CS_STATUS_CAP_EXCEEDED = 6,
  CS_STATUS_NO_OPEN_STAKE = 7,
  CS_STATUS_MALFORMED_URL = 8,
  CS_STATUS_IO = 9,
  CS_STATUS_CONFIG = 10,
  CS_STATUS_SIMULATION = 11,
  CS_STATUS_PANIC = 12,
} CsStatus;

/**
 * Oracle verdict passed to [`cs_ledger_settle`].
 */
typedef enum {
  CS_VERDICT_ACCEPTED = 0,
  CS_VERDICT_REJECTED_NEGATIVE_WEIGHT = 1,
  CS_VERDICT_REJECTED_DUPLICATE = 2,
} CsVerdict;

/**
 * Opaque ledger handle.
 */
typedef struct CsLedger CsLedger;

/**
 * Opaque whois client handle.
 */
typedef struct CsWhois CsWhois;

/**
 * The five URL features.
 */
typedef struct {
  uint32_t domain_length;
  bool has_dash;
  bool is_redirect;
  uint32_t num_subdomains;
  uint32_t active_duration_days;
} CsFeatures;

typedef struct {
  uint64_t creator_deposit;
  double stake_cap_fraction;
  uint64_t inference_fee;
} CsLedgerParams;

/**
 * Outcome of [`cs_ledger_settle`].
 */
typedef struct {
  uint64_t stake;
  uint64_t reward_paid;
  uint32_t duplicate_divisor;
  bool clamped;
} CsSettlement;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if the most recent
 * status-returning call succeeded.
 * Release with [`cs_string_free`].
 */
char *cs_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library that was not freed yet.
 */
void cs_string_free(char *s);

/**
 * Whois client that reports zero days for every domain. Never NULL.
 */
CsWhois *cs_whois_noop(void);

/**
 * Loads a `domain,active_duration_days` fixture.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
CsStatus cs_whois_fixture_load(const char *path, uint32_t default_days, CsWhois **out);

/**
 * # Safety
 * `whois` must be NULL or a live handle from this library.
 */
void cs_whois_free(CsWhois *whois);

/**
 * Extracts the features of `url`. A NULL `whois` behaves like [`cs_whois_noop`].
 *
 * # Safety
 * `url` must be a NUL-terminated string, `whois` NULL or live, `out` writable.
 */
CsStatus cs_extract_features(const char *url, const CsWhois *whois, CsFeatures *out);

CsLedgerParams cs_ledger_params_default(void);

/**
 * Creates a ledger holding the creator deposit.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
CsStatus cs_ledger_genesis(const CsLedgerParams *params, CsLedger **out);

/**
 * # Safety
 * `ledger` must be NULL or a live handle from this library.
 */
void cs_ledger_free(CsLedger *ledger);

/**
 * # Safety
 * `ledger` must be live and `contributor` a NUL-terminated string.
 */
CsStatus cs_ledger_fund(CsLedger *ledger, const char *contributor, uint64_t amount);

/**
 * # Safety
 * `ledger` must be live and `contributor` a NUL-terminated string.
 */
CsStatus cs_ledger_place_stake(CsLedger *ledger, const char *contributor, uint64_t amount);

/**
 * Settles the open stake of `contributor`. `urls` and `labels` are parallel arrays
 * of length `count` describing the graded batch; labels are 0 (ham) or 1 (spam).
 * `out` may be NULL.
 *
 * # Safety
 * `urls` must point to `count` NUL-terminated strings and `labels` to `count` bytes
 * (either may be NULL when `count` is 0).
 */
CsStatus cs_ledger_settle(CsLedger *ledger,
                          const char *contributor,
                          CsVerdict verdict,
                          double final_weight,
                          uint32_t max_domain_count,
                          const char *const *urls,
                          const uint8_t *labels,
                          uintptr_t count,
                          CsSettlement *out);

/**
 * # Safety
 * `ledger` must be live and `user` a NUL-terminated string.
 */
CsStatus cs_ledger_pay_inference_fee(CsLedger *ledger, const char *user);

/**
 * Free balance of `contributor` (0 for unknown ids).
 *
 * # Safety
 * `ledger` must be live, `contributor` NUL-terminated, `out` writable.
 */
CsStatus cs_ledger_balance(const CsLedger *ledger, const char *contributor, uint64_t *out);

/**
 * # Safety
 * `ledger` must be live and `out` writable.
 */
CsStatus cs_ledger_contract_balance(const CsLedger *ledger, uint64_t *out);

/**
 * # Safety
 * `ledger` must be live and `out` writable.
 */
CsStatus cs_ledger_total_minted(const CsLedger *ledger, uint64_t *out);

/**
 * True when contract, balances and open stakes add up to the minted total.
 *
 * # Safety
 * `ledger` must be NULL or live. NULL yields false.
 */
bool cs_ledger_is_conserved(const CsLedger *ledger);

/**
 * The append-only event log, one event per line. Release with [`cs_string_free`].
 *
 * # Safety
 * `ledger` must be NULL or live. NULL yields NULL.
 */
char *cs_ledger_event_log(const CsLedger *ledger);

/**
 * Runs the simulation described by a TOML config (NULL for defaults) and writes the
 * trace files into `out_dir` (NULL keeps the configured directory).
 *
 * # Safety
 * `config_path` and `out_dir` must be NULL or NUL-terminated strings.
 */
CsStatus cs_simulate(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROWDSPAM_H */
