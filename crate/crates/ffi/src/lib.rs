//! C ABI over the `droprad` library.
//!
//! Every function returns a [`DrStatus`]; results go through out
//! pointers. On failure the message is available from
//! [`dr_last_error_message`] on the same thread. Networks are opaque
//! [`DrNetwork`] handles created by `dr_network_*` and released with
//! [`dr_network_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use droprad::harness::{fit_loglog_slope, ExperimentConfig};
use droprad::{
    BoundVariant, DropoutType, Error, LossSpec, MomentQuery, NetworkSpec, SamplerConfig,
    WeightAssignment,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Diverged = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
}

/// Activation codes accepted by [`dr_network_new`].
#[repr(C)]
pub enum DrActivation {
    Tanh = 0,
    CenteredSigmoid = 1,
    Relu = 2,
    Identity = 3,
}

/// Dropout type codes.
#[repr(C)]
pub enum DrDropoutType {
    I = 1,
    Ii = 2,
    Iii = 3,
}

#[repr(C)]
pub enum DrLossKind {
    Square = 0,
    CrossEntropySigmoid = 1,
}

#[repr(C)]
pub enum DrBoundVariant {
    Expected = 0,
    Empirical = 1,
}

/// Opaque network description.
pub struct DrNetwork {
    spec: NetworkSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(DrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ShapeMismatch { .. } => DrStatus::ShapeMismatch,
            Error::Invalid { .. } => DrStatus::InvalidArgument,
            Error::Diverged(_) => DrStatus::Diverged,
            Error::Config(_) => DrStatus::Config,
            Error::Io(_) => DrStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DrStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DrStatus::Panic
        }
    }
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure(DrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| Failure(DrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn network<'a>(net: *const DrNetwork) -> Result<&'a NetworkSpec, Failure> {
    net.as_ref()
        .map(|n| &n.spec)
        .ok_or_else(|| Failure(DrStatus::NullPointer, "network is null".into()))
}

fn dropout_type(code: u32) -> Result<DropoutType, Failure> {
    match code {
        1 => Ok(DropoutType::I),
        2 => Ok(DropoutType::II),
        3 => Ok(DropoutType::III),
        c => Err(invalid(format!("unknown dropout type {c}"))),
    }
}

/// Message of the last failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a network from `widths[0..n_widths]` and
/// `budgets[0..n_budgets]` (`n_budgets = n_widths + 1`). `activation` is a
/// [`DrActivation`] code.
///
/// # Safety
/// Array pointers must be valid for their lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_network_new(
    input_dim: usize,
    widths: *const usize,
    n_widths: usize,
    budgets: *const f64,
    n_budgets: usize,
    activation: u32,
    input_bound: f64,
    out: *mut *mut DrNetwork,
) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let act = match activation {
            0 => droprad::Activation::Tanh,
            1 => droprad::Activation::CenteredSigmoid,
            2 => droprad::Activation::Relu,
            3 => droprad::Activation::Identity,
            c => return Err(invalid(format!("unknown activation {c}"))),
        };
        let spec = NetworkSpec::new(
            input_dim,
            slice_arg(widths, n_widths, "widths")?.to_vec(),
            slice_arg(budgets, n_budgets, "budgets")?.to_vec(),
            act,
            input_bound,
        )?;
        *out = Box::into_raw(Box::new(DrNetwork { spec }));
        Ok(())
    })
}

/// Parses a network from TOML: either a full experiment config (the
/// `[network]` section is used) or the network table itself.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_network_from_toml(text: *const c_char, out: *mut *mut DrNetwork) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if text.is_null() {
            return Err(Failure(DrStatus::NullPointer, "text is null".into()));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| invalid("text is not UTF-8"))?;
        let spec = match ExperimentConfig::from_toml_str(text) {
            Ok(cfg) => cfg.network,
            Err(full) => ExperimentConfig::from_toml_str(&format!("[network]\n{text}"))
                .map_err(|_| Failure::from(full))?
                .network,
        };
        *out = Box::into_raw(Box::new(DrNetwork { spec }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `net` must come from a `dr_network_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dr_network_free(net: *mut DrNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of hidden layers `k`.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_network_depth(net: *const DrNetwork, out: *mut usize) -> DrStatus {
    guard(|| {
        *out_arg(out, "out")? = network(net)?.depth();
        Ok(())
    })
}

/// Length of the flat weight array: layer by layer, vector by vector.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_network_weight_count(net: *const DrNetwork, out: *mut usize) -> DrStatus {
    guard(|| {
        *out_arg(out, "out")? = network(net)?.layout().total();
        Ok(())
    })
}

/// Plain network output for flat weights.
///
/// # Safety
/// Array pointers must be valid for their lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_forward(
    net: *const DrNetwork,
    weights: *const f64,
    n_weights: usize,
    x: *const f64,
    n_x: usize,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = network(net)?;
        let w = WeightAssignment::from_flat(spec, slice_arg(weights, n_weights, "weights")?.to_vec())?;
        *out = droprad::forward(spec, &w, slice_arg(x, n_x, "x")?)?;
        Ok(())
    })
}

/// Dropout output with masks sampled from `(rho, seed, stream)`.
///
/// # Safety
/// Array pointers must be valid for their lengths; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dr_forward_dropout_sampled(
    net: *const DrNetwork,
    dropout: u32,
    weights: *const f64,
    n_weights: usize,
    x: *const f64,
    n_x: usize,
    rho: f64,
    seed: u64,
    stream: u64,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = network(net)?;
        let kind = dropout_type(dropout)?;
        let w = WeightAssignment::from_flat(spec, slice_arg(weights, n_weights, "weights")?.to_vec())?;
        let masks = droprad::sample_masks(spec, kind, &SamplerConfig::new(rho, seed, stream)?)?;
        *out = droprad::forward_dropout(spec, &w, slice_arg(x, n_x, "x")?, &masks)?;
        Ok(())
    })
}

/// `L^k · B̂ · prod B_j`.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_output_bound(net: *const DrNetwork, out: *mut f64) -> DrStatus {
    guard(|| {
        *out_arg(out, "out")? = droprad::output_bound(network(net)?);
        Ok(())
    })
}

/// Theoretical complexity bound for `dropout` (a [`DrDropoutType`] code).
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_theoretical_bound(
    net: *const DrNetwork,
    dropout: u32,
    rho: f64,
    n: usize,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = droprad::theoretical_complexity_bound(network(net)?, dropout_type(dropout)?, rho, n)?;
        Ok(())
    })
}

/// Total right-hand side of the generalization bound. `loss` is a
/// [`DrLossKind`] code, `variant` a [`DrBoundVariant`] code; `y_bound`
/// applies to the square loss and `p_min` to cross entropy.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dr_generalization_bound(
    net: *const DrNetwork,
    empirical_risk: f64,
    complexity: f64,
    loss: u32,
    y_bound: f64,
    p_min: f64,
    delta: f64,
    n: usize,
    variant: u32,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let loss = match loss {
            0 => LossSpec::square(y_bound),
            1 => LossSpec::cross_entropy(p_min),
            c => return Err(invalid(format!("unknown loss {c}"))),
        };
        let variant = match variant {
            0 => BoundVariant::Expected,
            1 => BoundVariant::Empirical,
            c => return Err(invalid(format!("unknown bound variant {c}"))),
        };
        let report =
            droprad::generalization_bound(empirical_risk, complexity, &loss, network(net)?, delta, n, variant)?;
        *out = report.total_bound;
        Ok(())
    })
}

/// `(B/n)·||Σ ε_i x_i ⊙ r_i||` for row-major `xs` and `masks` of shape
/// `n × d`.
///
/// # Safety
/// `xs` and `masks` must hold `n * d` entries, `eps` `n`; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dr_closed_form_linear_sup(
    xs: *const f64,
    masks: *const u8,
    eps: *const f64,
    n: usize,
    d: usize,
    budget: f64,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let total = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let xs = slice_arg(xs, total, "xs")?;
        let masks = slice_arg(masks, total, "masks")?;
        let eps = slice_arg(eps, n, "eps")?;
        if d == 0 {
            return Err(invalid("d must be at least 1"));
        }
        let rows: Vec<Vec<f64>> = xs.chunks(d).map(<[f64]>::to_vec).collect();
        let mrows: Vec<Vec<u8>> = masks.chunks(d).map(<[u8]>::to_vec).collect();
        *out = droprad::closed_form_linear_sup(&rows, &mrows, eps, budget)?;
        Ok(())
    })
}

/// `rho^p · ||x||^2`.
///
/// # Safety
/// `x` must hold `d` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_moment_analytic(x: *const f64, d: usize, p: usize, rho: f64, out: *mut f64) -> DrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let q = MomentQuery::new(slice_arg(x, d, "x")?.to_vec(), p, rho)?;
        *out = droprad::moment_analytic(&q);
        Ok(())
    })
}

/// Least-squares slope of `ln value` against `ln rho`.
///
/// # Safety
/// `rhos` and `values` must hold `count` entries; outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dr_fit_loglog_slope(
    rhos: *const f64,
    values: *const f64,
    count: usize,
    slope: *mut f64,
    r_squared: *mut f64,
) -> DrStatus {
    guard(|| {
        let slope = out_arg(slope, "slope")?;
        let r_squared = out_arg(r_squared, "r_squared")?;
        let pts: Vec<(f64, f64)> = slice_arg(rhos, count, "rhos")?
            .iter()
            .copied()
            .zip(slice_arg(values, count, "values")?.iter().copied())
            .collect();
        let fit = fit_loglog_slope(&pts)?;
        *slope = fit.slope;
        *r_squared = fit.r_squared;
        Ok(())
    })
}
