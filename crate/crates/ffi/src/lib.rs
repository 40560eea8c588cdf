//! C ABI for `crowdspam-core`.
//!
//! Every fallible function returns a [`CsStatus`]; on failure a message is kept in
//! thread-local storage and can be fetched with [`cs_last_error_message`]. Strings
//! handed out by this library must be released with [`cs_string_free`], and handles
//! with their matching `*_free` function. Panics never cross the boundary: they are
//! reported as [`CsStatus::Panic`].
//!
//! The generated header lives at `include/crowdspam.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use crowdspam::cli::{cmd_simulate, resolve_config, Cli, Command};
use crowdspam::config::RunConfig;
use crowdspam::features::{extract_features, FeatureError, FixtureWhois, Label, LabeledUrl, NoopWhois, WhoisClient};
use crowdspam::ledger::{LedgerError, LedgerParams, LedgerState};
use crowdspam::oracle::Verdict;
use crowdspam::ContributorId;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InsufficientBalance = 4,
    StakeAlreadyOpen = 5,
    CapExceeded = 6,
    NoOpenStake = 7,
    MalformedUrl = 8,
    Io = 9,
    Config = 10,
    Simulation = 11,
    Panic = 12,
}

/// Oracle verdict passed to [`cs_ledger_settle`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsVerdict {
    Accepted = 0,
    RejectedNegativeWeight = 1,
    RejectedDuplicate = 2,
}

impl From<CsVerdict> for Verdict {
    fn from(v: CsVerdict) -> Self {
        match v {
            CsVerdict::Accepted => Verdict::Accepted,
            CsVerdict::RejectedNegativeWeight => Verdict::RejectedNegativeWeight,
            CsVerdict::RejectedDuplicate => Verdict::RejectedDuplicate,
        }
    }
}

/// The five URL features.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsFeatures {
    pub domain_length: u32,
    pub has_dash: bool,
    pub is_redirect: bool,
    pub num_subdomains: u32,
    pub active_duration_days: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsLedgerParams {
    pub creator_deposit: u64,
    pub stake_cap_fraction: f64,
    pub inference_fee: u64,
}

/// Outcome of [`cs_ledger_settle`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsSettlement {
    pub stake: u64,
    pub reward_paid: u64,
    pub duplicate_divisor: u32,
    pub clamped: bool,
}

/// Opaque ledger handle.
pub struct CsLedger {
    state: LedgerState,
}

/// Opaque whois client handle.
pub struct CsWhois {
    client: Arc<dyn WhoisClient>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure {
    status: CsStatus,
    message: String,
}

impl Failure {
    fn new(status: CsStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        let status = match e {
            LedgerError::InvalidParameter(_) => CsStatus::InvalidArgument,
            LedgerError::InsufficientBalance { .. } => CsStatus::InsufficientBalance,
            LedgerError::StakeAlreadyOpen(_) => CsStatus::StakeAlreadyOpen,
            LedgerError::CapExceeded { .. } => CsStatus::CapExceeded,
            LedgerError::NoOpenStake(_) => CsStatus::NoOpenStake,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        let status = match e {
            FeatureError::MalformedUrl(_) => CsStatus::MalformedUrl,
            FeatureError::Io { .. } => CsStatus::Io,
            _ => CsStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn guard<F>(f: F) -> CsStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message);
            failure.status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("panic: {message}"));
            CsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(CsStatus::NullArgument, format!("{name} is null")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(CsStatus::NullArgument, format!("{name} is null")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL if the most recent
/// status-returning call succeeded.
/// Release with [`cs_string_free`].
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().clone().map_or(ptr::null_mut(), into_c_string))
}

/// # Safety
/// `s` must be NULL or a string returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Whois client that reports zero days for every domain. Never NULL.
#[no_mangle]
pub extern "C" fn cs_whois_noop() -> *mut CsWhois {
    Box::into_raw(Box::new(CsWhois {
        client: Arc::new(NoopWhois),
    }))
}

/// Loads a `domain,active_duration_days` fixture.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_whois_fixture_load(
    path: *const c_char,
    default_days: u32,
    out: *mut *mut CsWhois,
) -> CsStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let fixture = FixtureWhois::load(path.as_ref(), default_days)?;
        *out = Box::into_raw(Box::new(CsWhois {
            client: Arc::new(fixture),
        }));
        Ok(())
    })
}

/// # Safety
/// `whois` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cs_whois_free(whois: *mut CsWhois) {
    if !whois.is_null() {
        drop(Box::from_raw(whois));
    }
}

/// Extracts the features of `url`. A NULL `whois` behaves like [`cs_whois_noop`].
///
/// # Safety
/// `url` must be a NUL-terminated string, `whois` NULL or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_extract_features(
    url: *const c_char,
    whois: *const CsWhois,
    out: *mut CsFeatures,
) -> CsStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let url = str_arg(url, "url")?;
        let fv = match whois.as_ref() {
            Some(w) => extract_features(url, w.client.as_ref())?,
            None => extract_features(url, &NoopWhois)?,
        };
        *out = CsFeatures {
            domain_length: fv.domain_length,
            has_dash: fv.has_dash,
            is_redirect: fv.is_redirect,
            num_subdomains: fv.num_subdomains,
            active_duration_days: fv.active_duration_days,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn cs_ledger_params_default() -> CsLedgerParams {
    let p = LedgerParams::default();
    CsLedgerParams {
        creator_deposit: p.creator_deposit,
        stake_cap_fraction: p.stake_cap_fraction,
        inference_fee: p.inference_fee,
    }
}

/// Creates a ledger holding the creator deposit.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_genesis(params: *const CsLedgerParams, out: *mut *mut CsLedger) -> CsStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let p = ref_arg(params, "params")?;
        let state = LedgerState::genesis(&LedgerParams {
            creator_deposit: p.creator_deposit,
            stake_cap_fraction: p.stake_cap_fraction,
            inference_fee: p.inference_fee,
        })?;
        *out = Box::into_raw(Box::new(CsLedger { state }));
        Ok(())
    })
}

/// # Safety
/// `ledger` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_free(ledger: *mut CsLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

/// # Safety
/// `ledger` must be live and `contributor` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_fund(ledger: *mut CsLedger, contributor: *const c_char, amount: u64) -> CsStatus {
    guard(|| {
        let ledger = mut_arg(ledger, "ledger")?;
        let id = ContributorId::from(str_arg(contributor, "contributor")?);
        ledger.state.fund_account(&id, amount)?;
        Ok(())
    })
}

/// # Safety
/// `ledger` must be live and `contributor` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_place_stake(
    ledger: *mut CsLedger,
    contributor: *const c_char,
    amount: u64,
) -> CsStatus {
    guard(|| {
        let ledger = mut_arg(ledger, "ledger")?;
        let id = ContributorId::from(str_arg(contributor, "contributor")?);
        ledger.state.place_stake(&id, amount)?;
        Ok(())
    })
}

/// Settles the open stake of `contributor`. `urls` and `labels` are parallel arrays
/// of length `count` describing the graded batch; labels are 0 (ham) or 1 (spam).
/// `out` may be NULL.
///
/// # Safety
/// `urls` must point to `count` NUL-terminated strings and `labels` to `count` bytes
/// (either may be NULL when `count` is 0).
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn cs_ledger_settle(
    ledger: *mut CsLedger,
    contributor: *const c_char,
    verdict: CsVerdict,
    final_weight: f64,
    max_domain_count: u32,
    urls: *const *const c_char,
    labels: *const u8,
    count: usize,
    out: *mut CsSettlement,
) -> CsStatus {
    guard(|| {
        let ledger = mut_arg(ledger, "ledger")?;
        let id = ContributorId::from(str_arg(contributor, "contributor")?);
        let mut batch = Vec::with_capacity(count);
        if count > 0 {
            if urls.is_null() || labels.is_null() {
                return Err(Failure::new(CsStatus::NullArgument, "urls or labels is null"));
            }
            let urls = std::slice::from_raw_parts(urls, count);
            let labels = std::slice::from_raw_parts(labels, count);
            for (i, (&u, &l)) in urls.iter().zip(labels).enumerate() {
                let url = str_arg(u, &format!("urls[{i}]"))?;
                let label = Label::from_bit(l).ok_or_else(|| {
                    Failure::new(CsStatus::InvalidArgument, format!("labels[{i}] = {l} is not 0 or 1"))
                })?;
                batch.push(LabeledUrl::new(url, label));
            }
        }
        let s = ledger
            .state
            .settle(&id, verdict.into(), final_weight, max_domain_count, &batch)?;
        if let Some(out) = out.as_mut() {
            *out = CsSettlement {
                stake: s.stake,
                reward_paid: s.reward_paid,
                duplicate_divisor: s.duplicate_divisor,
                clamped: s.clamped,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `ledger` must be live and `user` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_pay_inference_fee(ledger: *mut CsLedger, user: *const c_char) -> CsStatus {
    guard(|| {
        let ledger = mut_arg(ledger, "ledger")?;
        let id = ContributorId::from(str_arg(user, "user")?);
        ledger.state.pay_inference_fee(&id)?;
        Ok(())
    })
}

/// Free balance of `contributor` (0 for unknown ids).
///
/// # Safety
/// `ledger` must be live, `contributor` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_balance(
    ledger: *const CsLedger,
    contributor: *const c_char,
    out: *mut u64,
) -> CsStatus {
    guard(|| {
        let ledger = ref_arg(ledger, "ledger")?;
        let out = mut_arg(out, "out")?;
        *out = ledger
            .state
            .balance(&ContributorId::from(str_arg(contributor, "contributor")?));
        Ok(())
    })
}

/// # Safety
/// `ledger` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_contract_balance(ledger: *const CsLedger, out: *mut u64) -> CsStatus {
    guard(|| {
        let ledger = ref_arg(ledger, "ledger")?;
        *mut_arg(out, "out")? = ledger.state.contract_balance();
        Ok(())
    })
}

/// # Safety
/// `ledger` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_total_minted(ledger: *const CsLedger, out: *mut u64) -> CsStatus {
    guard(|| {
        let ledger = ref_arg(ledger, "ledger")?;
        *mut_arg(out, "out")? = ledger.state.total_minted();
        Ok(())
    })
}

/// True when contract, balances and open stakes add up to the minted total.
///
/// # Safety
/// `ledger` must be NULL or live. NULL yields false.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_is_conserved(ledger: *const CsLedger) -> bool {
    ledger.as_ref().is_some_and(|l| l.state.is_conserved())
}

/// The append-only event log, one event per line. Release with [`cs_string_free`].
///
/// # Safety
/// `ledger` must be NULL or live. NULL yields NULL.
#[no_mangle]
pub unsafe extern "C" fn cs_ledger_event_log(ledger: *const CsLedger) -> *mut c_char {
    match ledger.as_ref() {
        Some(l) => into_c_string(l.state.event_log()),
        None => ptr::null_mut(),
    }
}

/// Runs the simulation described by a TOML config (NULL for defaults) and writes the
/// trace files into `out_dir` (NULL keeps the configured directory).
///
/// # Safety
/// `config_path` and `out_dir` must be NULL or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cs_simulate(config_path: *const c_char, out_dir: *const c_char) -> CsStatus {
    guard(|| {
        let config_path = opt_str_arg(config_path, "config_path")?;
        let out_dir = opt_str_arg(out_dir, "out_dir")?;
        let cli = Cli {
            config: config_path.map(PathBuf::from),
            seed: None,
            out: out_dir.map(PathBuf::from),
            command: Command::Simulate,
        };
        let config: RunConfig = resolve_config(&cli).map_err(|e| Failure::new(CsStatus::Config, e.to_string()))?;
        cmd_simulate(&config, &mut std::io::sink()).map_err(|e| {
            let status = match e.stage {
                "config" => CsStatus::Config,
                "output" => CsStatus::Io,
                _ => CsStatus::Simulation,
            };
            Failure::new(status, e.to_string())
        })
    })
}
