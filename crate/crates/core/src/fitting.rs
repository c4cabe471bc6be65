//! Nonlinear least-squares extraction of circuit and spin parameters
//! from measured or synthetic traces.
//!
//! The solver is a damped least-squares iteration (Levenberg-Marquardt
//! style) with numerically differentiated Jacobians and a monotone
//! acceptance rule: a step is taken only if it reduces the residual.
//! Parameter bounds are enforced through log / logistic transforms of
//! the internal coordinates, never by clipping.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{spin_frequency_raw, KB_OVER_H_MHZ_PER_MK, MU_B_OVER_H_MHZ_PER_MT};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("trace abscissa must be strictly increasing and finite")]
    BadAbscissa,
    #[error("trace lengths differ: {x} abscissa vs {y} ordinate points")]
    LengthMismatch { x: usize, y: usize },
    #[error("trace has too few points ({n}) for a {params}-parameter fit")]
    TooFewPoints { n: usize, params: usize },
    #[error("no transmission dip found: |S21| has no interior local minimum")]
    DipNotFound,
    #[error("model {model:?} expects {expected} ordinate values per point")]
    WrongOrdinate { model: String, expected: String },
    #[error("abscissa must be positive for this model")]
    NonPositiveAbscissa,
    #[error("normal equations became singular during the fit")]
    SingularNormalEquations,
}

/// A 1-D data trace: abscissa (MHz, mT, mK or s depending on the model)
/// and real or complex ordinates, with optional per-point weights.
#[derive(Debug, Clone)]
pub struct Trace {
    x: Vec<f64>,
    y: TraceValues,
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum TraceValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Trace {
    pub fn real(x: Vec<f64>, y: Vec<f64>) -> Result<Self, FitError> {
        Self::new(x, TraceValues::Real(y), None)
    }

    pub fn complex(x: Vec<f64>, y: Vec<Complex64>) -> Result<Self, FitError> {
        Self::new(x, TraceValues::Complex(y), None)
    }

    pub fn new(x: Vec<f64>, y: TraceValues, weights: Option<Vec<f64>>) -> Result<Self, FitError> {
        if x.len() < 2 || x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FitError::BadAbscissa);
        }
        let ny = match &y {
            TraceValues::Real(v) => v.len(),
            TraceValues::Complex(v) => v.len(),
        };
        if ny != x.len() {
            return Err(FitError::LengthMismatch { x: x.len(), y: ny });
        }
        if let Some(w) = &weights {
            if w.len() != x.len() {
                return Err(FitError::LengthMismatch { x: x.len(), y: w.len() });
            }
        }
        Ok(Self { x, y, weights })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &TraceValues {
        &self.y
    }

    fn real_values(&self, model: &str) -> Result<&[f64], FitError> {
        match &self.y {
            TraceValues::Real(v) => Ok(v),
            TraceValues::Complex(_) => Err(FitError::WrongOrdinate {
                model: model.into(),
                expected: "one real value".into(),
            }),
        }
    }

    fn len(&self) -> usize {
        self.x.len()
    }

    fn sqrt_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.iter().map(|v| v.max(0.0).sqrt()).collect(),
            None => vec![1.0; self.len()],
        }
    }
}

/// One fitted parameter with its standard error (from the Jacobian at
/// the solution, scaled by the residual variance).
#[derive(Debug, Clone, Serialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    /// 2-norm of the weighted residual vector at the solution.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
    /// Residual norms of every accepted iterate, starting point included;
    /// non-increasing by the acceptance rule.
    pub accepted_residuals: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map(|p| p.value).unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut params = serde_json::Map::new();
        for p in &self.params {
            params.insert(
                p.name.clone(),
                json!({"value": p.value, "stderr": p.stderr}),
            );
        }
        json!({
            "params": params,
            "residual": self.residual,
            "converged": self.converged,
            "iterations": self.iterations,
            "warnings": self.warnings,
        })
    }
}

/// Bound-enforcing coordinate transforms for the internal optimizer
/// coordinates.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Identity,
    /// p = exp(u), p > 0.
    Log,
    /// p = 1 / (1 + exp(-u)), p in (0, 1).
    Logistic,
}

impl Transform {
    fn forward(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
            Transform::Logistic => 1.0 / (1.0 + (-u).exp()),
        }
    }

    fn inverse(self, p: f64) -> f64 {
        match self {
            Transform::Identity => p,
            Transform::Log => p.ln(),
            Transform::Logistic => (p / (1.0 - p)).ln(),
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => u.exp(),
            Transform::Logistic => {
                let s = 1.0 / (1.0 + (-u).exp());
                s * (1.0 - s)
            }
        }
    }
}

struct ModelSpec<'a> {
    names: &'a [&'a str],
    transforms: &'a [Transform],
}

struct LmSettings {
    max_iterations: usize,
    ftol: f64,
    xtol: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            ftol: 1e-14,
            xtol: 1e-13,
        }
    }
}

fn numeric_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, u: &[f64], r0: &[f64]) -> DMatrix<f64> {
    let (m, n) = (r0.len(), u.len());
    let mut jac = DMatrix::zeros(m, n);
    let mut up = u.to_vec();
    for k in 0..n {
        let h = 1e-7 * u[k].abs().max(1.0);
        up[k] = u[k] + h;
        let rp = f(&up);
        up[k] = u[k];
        for i in 0..m {
            jac[(i, k)] = (rp[i] - r0[i]) / h;
        }
    }
    jac
}

struct LmOutcome {
    u: Vec<f64>,
    residual_norm: f64,
    converged: bool,
    iterations: usize,
    accepted: Vec<f64>,
    covariance: Option<DMatrix<f64>>,
}

fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(
    f: F,
    u0: Vec<f64>,
    settings: LmSettings,
) -> Result<LmOutcome, FitError> {
    let n = u0.len();
    let mut u = u0;
    let mut r = f(&u);
    let m = r.len();
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut accepted = vec![cost.sqrt()];
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = numeric_jacobian(&f, &u, &r);

    while iterations < settings.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let grad = &jt * DVector::from_column_slice(&r);
        let jtj = &jt * &jac;

        let mut stepped = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                let d = jtj[(k, k)].max(1e-30);
                a[(k, k)] = jtj[(k, k)] + lambda * d;
            }
            let Some(delta) = a.lu().solve(&(-&grad)) else {
                return Err(FitError::SingularNormalEquations);
            };
            let u_new: Vec<f64> = u.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let r_new = f(&u_new);
            let cost_new: f64 = r_new.iter().map(|v| v * v).sum();
            if cost_new.is_finite() && cost_new < cost {
                let step_small = delta
                    .iter()
                    .zip(&u)
                    .all(|(d, uk)| d.abs() <= settings.xtol * (uk.abs() + settings.xtol));
                let cost_drop = (cost - cost_new) <= settings.ftol * cost.max(1e-300);
                u = u_new;
                r = r_new;
                cost = cost_new;
                accepted.push(cost.sqrt());
                lambda = (lambda / 10.0).max(1e-14);
                stepped = true;
                if step_small || cost_drop || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e15 {
                break;
            }
        }
        if converged || !stepped {
            // a fully stalled damping loop means no descent is left at
            // this floating-point accuracy
            converged = true;
            break;
        }
        jac = numeric_jacobian(&f, &u, &r);
    }

    let covariance = if m > n {
        jac = numeric_jacobian(&f, &u, &r);
        let jtj = jac.transpose() * &jac;
        jtj.try_inverse().map(|inv| inv * (cost / (m - n) as f64))
    } else {
        None
    };
    Ok(LmOutcome {
        u,
        residual_norm: cost.sqrt(),
        converged,
        iterations,
        accepted,
        covariance,
    })
}

fn run_fit<F: Fn(&[f64]) -> Vec<f64>>(
    model: ModelSpec<'_>,
    residuals_of_params: F,
    p0: Vec<f64>,
    warnings: Vec<String>,
) -> Result<FitResult, FitError> {
    let transforms = model.transforms.to_vec();
    let u0: Vec<f64> = p0
        .iter()
        .zip(&transforms)
        .map(|(p, t)| t.inverse(*p))
        .collect();
    let to_params = {
        let transforms = transforms.clone();
        move |u: &[f64]| -> Vec<f64> {
            u.iter()
                .zip(&transforms)
                .map(|(u, t)| t.forward(*u))
                .collect()
        }
    };
    let f = |u: &[f64]| residuals_of_params(&to_params(u));
    let outcome = levenberg_marquardt(f, u0, LmSettings::default())?;
    let p = to_params(&outcome.u);
    let params = model
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let stderr_u = outcome
                .covariance
                .as_ref()
                .map(|c| c[(k, k)].max(0.0).sqrt())
                .unwrap_or(f64::NAN);
            FitParam {
                name: (*name).to_string(),
                value: p[k],
                stderr: stderr_u * transforms[k].derivative(outcome.u[k]).abs(),
            }
        })
        .collect();
    Ok(FitResult {
        params,
        residual: outcome.residual_norm,
        converged: outcome.converged,
        iterations: outcome.iterations,
        warnings,
        accepted_residuals: outcome.accepted,
    })
}

fn complex_residuals(model: impl Fn(f64) -> Complex64, x: &[f64], y: &[Complex64], sw: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(2 * x.len());
    for ((xi, yi), w) in x.iter().zip(y).zip(sw) {
        let d = model(*xi) - yi;
        r.push(w * d.re);
        r.push(w * d.im);
    }
    r
}

/// Resonance model S21 = 1 - kappa_c / (i (omega_r - omega) + kappa).
pub fn resonance_model(omega: f64, omega_r: f64, kappa: f64, kappa_c: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - kappa_c / Complex64::new(kappa, omega_r - omega)
}

/// Fit (omega_r, kappa, kappa_c) to a complex S21-versus-frequency trace.
///
/// Initial guesses: dip position for omega_r, half-depth width for
/// kappa, dip depth times kappa for kappa_c. Magnitude-only data can be
/// fitted by passing a complex trace with zero imaginary part only if it
/// is phase-corrected; otherwise use the complex trace directly.
pub fn fit_resonance(trace: &Trace) -> Result<FitResult, FitError> {
    let TraceValues::Complex(y) = &trace.y else {
        return Err(FitError::WrongOrdinate {
            model: "resonance".into(),
            expected: "complex S21 (re, im)".into(),
        });
    };
    if trace.len() < 5 {
        return Err(FitError::TooFewPoints {
            n: trace.len(),
            params: 3,
        });
    }
    let mag: Vec<f64> = y.iter().map(|v| v.norm()).collect();
    let baseline = 0.5 * (mag[0] + mag[mag.len() - 1]);
    let (mut i_min, mut min_val) = (0usize, f64::INFINITY);
    for (i, &v) in mag.iter().enumerate() {
        if v < min_val {
            min_val = v;
            i_min = i;
        }
    }
    let depth = baseline - min_val;
    if i_min == 0 || i_min == mag.len() - 1 || depth <= 1e-3 * baseline.max(1e-12) {
        return Err(FitError::DipNotFound);
    }
    let half = baseline - 0.5 * depth;
    let mut left = i_min;
    while left > 0 && mag[left] < half {
        left -= 1;
    }
    let mut right = i_min;
    while right + 1 < mag.len() && mag[right] < half {
        right += 1;
    }
    let width = (trace.x[right] - trace.x[left]).max(
        // fall back to a couple of grid steps for under-resolved dips
        2.0 * (trace.x[1] - trace.x[0]),
    );
    let kappa0 = 0.5 * width;
    let kappa_c0 = (depth * kappa0).max(1e-6 * kappa0);
    let p0 = vec![trace.x[i_min], kappa0, kappa_c0];

    let sw = trace.sqrt_weights();
    let x = trace.x.clone();
    let y = y.clone();
    run_fit(
        ModelSpec {
            names: &["omega_r_MHz", "kappa_MHz", "kappa_c_MHz"],
            transforms: &[Transform::Identity, Transform::Log, Transform::Log],
        },
        move |p| {
            complex_residuals(|w| resonance_model(w, p[0], p[1], p[2]), &x, &y, &sw)
        },
        p0,
        Vec::new(),
    )
}

/// Effective-linewidth model
/// kappa~(B) = kappa + G^2 gamma / ((Omega_S(B) - omega_-)^2 + gamma^2).
pub fn linewidth_model(b_mt: f64, g_factor: f64, omega_minus: f64, g: f64, gamma: f64, kappa: f64) -> f64 {
    let delta = spin_frequency_raw(g_factor, b_mt) - omega_minus;
    kappa + g * g * gamma / (delta * delta + gamma * gamma)
}

/// Fixed inputs of [`fit_linewidth_vs_field`].
#[derive(Debug, Clone, Copy)]
pub struct LinewidthFixed {
    /// Frequency of the probed normal mode omega_-, MHz.
    pub omega_minus_mhz: f64,
    /// Spin g factor setting Omega_S(B).
    pub g_factor: f64,
}

/// Fit (G_remote, gamma, kappa_bare) to an effective linewidth versus
/// field trace, the Lorentzian-in-B weak-coupling response of a probed
/// mode to a remotely coupled spin ensemble.
pub fn fit_linewidth_vs_field(trace: &Trace, fixed: LinewidthFixed) -> Result<FitResult, FitError> {
    let y = trace.real_values("linewidth-vs-field")?.to_vec();
    if trace.len() < 4 {
        return Err(FitError::TooFewPoints {
            n: trace.len(),
            params: 3,
        });
    }
    let mut warnings = Vec::new();
    let kappa0 = y.iter().copied().fold(f64::INFINITY, f64::min).max(1e-9);
    let (mut i_max, mut max_val) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in y.iter().enumerate() {
        if v > max_val {
            max_val = v;
            i_max = i;
        }
    }
    if i_max == 0 || i_max == y.len() - 1 {
        warnings.push("linewidth peak lies at the edge of the field range".into());
    }
    let height = (max_val - kappa0).max(1e-9);
    let half = kappa0 + 0.5 * height;
    let mut left = i_max;
    while left > 0 && y[left] > half {
        left -= 1;
    }
    let mut right = i_max;
    while right + 1 < y.len() && y[right] > half {
        right += 1;
    }
    let hwhm_b = (0.5 * (trace.x[right] - trace.x[left])).max(trace.x[1] - trace.x[0]);
    let gamma0 = hwhm_b * fixed.g_factor * MU_B_OVER_H_MHZ_PER_MT;
    let g0 = (height * gamma0).sqrt().max(1e-6);
    let p0 = vec![g0, gamma0, kappa0];

    let sw = trace.sqrt_weights();
    let x = trace.x.clone();
    run_fit(
        ModelSpec {
            names: &["G_MHz", "gamma_MHz", "kappa_MHz"],
            transforms: &[Transform::Log, Transform::Log, Transform::Log],
        },
        move |p| {
            x.iter()
                .zip(&y)
                .zip(&sw)
                .map(|((b, yi), w)| {
                    w * (linewidth_model(*b, fixed.g_factor, fixed.omega_minus_mhz, p[0], p[1], p[2])
                        - yi)
                })
                .collect()
        },
        p0,
        warnings,
    )
}

/// Stretched-exponential decay A exp(-(t/T1)^x).
pub fn stretched_exponential_model(t: f64, amplitude: f64, t1: f64, exponent: f64) -> f64 {
    amplitude * (-(t / t1).powf(exponent)).exp()
}

/// Fit (amplitude, T1, x) with T1 > 0 and 0 < x <= 1 to a decaying
/// shift-versus-delay trace.
pub fn fit_stretched_exponential(trace: &Trace) -> Result<FitResult, FitError> {
    let y = trace.real_values("stretched-exp")?.to_vec();
    if trace.x[0] <= 0.0 {
        return Err(FitError::NonPositiveAbscissa);
    }
    if trace.len() < 4 {
        return Err(FitError::TooFewPoints {
            n: trace.len(),
            params: 3,
        });
    }
    let mut warnings = Vec::new();
    let a0 = y[0];
    if y[y.len() - 1].abs() >= a0.abs() || a0 == 0.0 {
        warnings.push("trace does not decay".into());
    }
    let target = a0.abs() / std::f64::consts::E;
    let t1_0 = trace
        .x
        .iter()
        .zip(&y)
        .find(|(_, v)| v.abs() <= target)
        .map(|(t, _)| *t)
        .unwrap_or(trace.x[trace.len() / 2]);
    let p0 = vec![a0, t1_0, 0.5];

    let sw = trace.sqrt_weights();
    let x = trace.x.clone();
    run_fit(
        ModelSpec {
            names: &["amplitude", "T1_s", "exponent"],
            transforms: &[Transform::Identity, Transform::Log, Transform::Logistic],
        },
        move |p| {
            x.iter()
                .zip(&y)
                .zip(&sw)
                .map(|((t, yi), w)| w * (stretched_exponential_model(*t, p[0], p[1], p[2]) - yi))
                .collect()
        },
        p0,
        warnings,
    )
}

/// Thermal polarization model G(T) = G0 sqrt(tanh(g mu_B B / (2 k_B T))).
pub fn thermal_model(t_mk: f64, g_factor: f64, b_mt: f64, g0: f64) -> f64 {
    let arg = g_factor * MU_B_OVER_H_MHZ_PER_MT * b_mt * 0.5 / (KB_OVER_H_MHZ_PER_MK * t_mk);
    g0 * arg.tanh().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct ThermalFixed {
    pub g_factor: f64,
    pub b_mt: f64,
}

/// One-parameter fit of the zero-temperature coupling G(0) to a
/// G-versus-temperature trace. Systematic deviations from the
/// polarization model stay visible in the reported residual.
pub fn fit_thermal_polarization(trace: &Trace, fixed: ThermalFixed) -> Result<FitResult, FitError> {
    let y = trace.real_values("thermal-polarization")?.to_vec();
    if trace.x[0] <= 0.0 {
        return Err(FitError::NonPositiveAbscissa);
    }
    if trace.len() < 2 {
        return Err(FitError::TooFewPoints {
            n: trace.len(),
            params: 1,
        });
    }
    let g0 = y.iter().copied().fold(0.0f64, f64::max).max(1e-6);
    let sw = trace.sqrt_weights();
    let x = trace.x.clone();
    run_fit(
        ModelSpec {
            names: &["G0_MHz"],
            transforms: &[Transform::Log],
        },
        move |p| {
            x.iter()
                .zip(&y)
                .zip(&sw)
                .map(|((t, yi), w)| w * (thermal_model(*t, fixed.g_factor, fixed.b_mt, p[0]) - yi))
                .collect()
        },
        vec![g0],
        Vec::new(),
    )
}

/// Read a trace from CSV. The first column is the abscissa (its header
/// names the unit); two further columns headed `re_*` / `im_*` form a
/// complex ordinate, a single further column a real one. An optional
/// trailing `weight` column is honored.
pub fn trace_from_csv(text: &str) -> Result<Trace, FitError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(FitError::BadAbscissa)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_weight = cols.last().is_some_and(|c| c.eq_ignore_ascii_case("weight"));
    let data_cols = cols.len() - usize::from(has_weight);
    let complex = data_cols >= 3
        && cols[1].to_ascii_lowercase().starts_with("re")
        && cols[2].to_ascii_lowercase().starts_with("im");

    let mut x = Vec::new();
    let mut yr = Vec::new();
    let mut yc = Vec::new();
    let mut weights = Vec::new();
    for line in lines {
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| FitError::BadAbscissa))
            .collect::<Result<_, _>>()?;
        if f.len() != cols.len() {
            return Err(FitError::LengthMismatch {
                x: cols.len(),
                y: f.len(),
            });
        }
        x.push(f[0]);
        if complex {
            yc.push(Complex64::new(f[1], f[2]));
        } else {
            yr.push(f[1]);
        }
        if has_weight {
            weights.push(f[f.len() - 1]);
        }
    }
    let y = if complex {
        TraceValues::Complex(yc)
    } else {
        TraceValues::Real(yr)
    };
    Trace::new(x, y, if has_weight { Some(weights) } else { None })
}

/// Write a trace as CSV with the given column headers.
pub fn trace_to_csv<W: std::io::Write>(
    trace: &Trace,
    x_header: &str,
    mut w: W,
) -> std::io::Result<()> {
    use crate::transmission::fmt_sig;
    match &trace.y {
        TraceValues::Real(y) => {
            writeln!(w, "{x_header},value")?;
            for (x, v) in trace.x.iter().zip(y) {
                writeln!(w, "{},{}", fmt_sig(*x), fmt_sig(*v))?;
            }
        }
        TraceValues::Complex(y) => {
            writeln!(w, "{x_header},re_S21,im_S21")?;
            for (x, v) in trace.x.iter().zip(y) {
                writeln!(w, "{},{},{}", fmt_sig(*x), fmt_sig(v.re), fmt_sig(v.im))?;
            }
        }
    }
    Ok(())
}
