//! Single-excitation Hamiltonian of the chip, exact diagonalization,
//! normal-mode and polariton decompositions, and field-sweep branch
//! tracking.
//!
//! The single-excitation truncation follows from the Holstein-Primakoff
//! linearization and perturbative driving; multi-excitation states are
//! never constructed.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{spin_frequency_raw, thermal_coupling, ChipConfig, ConfigError};

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("matrix is not symmetric within 1e-12 relative (max asymmetry {max_asym:e})")]
    NonSymmetric { max_asym: f64 },
    #[error("matrix is not square or is empty")]
    BadShape,
    #[error("degenerate input: G = 0 and Delta = 0 leave the polariton angle undefined")]
    DegenerateAngle,
    #[error("LER {ler} hosts no spin ensemble")]
    NoSpin { ler: usize },
    #[error("operation requires two distinct LER indices, got ({i}, {j})")]
    BadPair { i: usize, j: usize },
    #[error("field sweep must be strictly increasing and non-negative")]
    BadSweep,
    #[error(
        "branch tracking lost continuity at B = {b_mt} mT (step {step}): \
         best eigenvector overlap {overlap:.3} <= 0.5; use a finer sweep"
    )]
    OverlapLost { b_mt: f64, step: usize, overlap: f64 },
    #[error("sorted level index {level} out of range for dimension {dim}")]
    LevelOutOfRange { level: usize, dim: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One excitation slot of the single-excitation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SlotLabel {
    /// Collective spin excitation on the given 0-based LER position.
    Spin(usize),
    /// Photon excitation on the given 0-based LER position.
    Photon(usize),
}

impl SlotLabel {
    pub fn ler(&self) -> usize {
        match *self {
            SlotLabel::Spin(j) | SlotLabel::Photon(j) => j,
        }
    }
}

impl fmt::Display for SlotLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SlotLabel::Spin(j) => write!(f, "spin_{}", j + 1),
            SlotLabel::Photon(j) => write!(f, "photon_{}", j + 1),
        }
    }
}

/// Ordered excitation slots of a chip.
///
/// The first LER contributes (spin, photon); every later LER contributes
/// (photon, spin). For a pair this gives (spin_1, photon_1, photon_2,
/// spin_2), the ordering of the input-output response vector, and keeps a
/// chain with one spin per LER tridiagonal. Bare LERs contribute only
/// their photon slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleExcitationBasis {
    labels: Vec<SlotLabel>,
    photon_slots: Vec<usize>,
    spin_slots: Vec<Option<usize>>,
}

impl SingleExcitationBasis {
    pub fn for_config(config: &ChipConfig) -> Self {
        let n = config.n_lers();
        let mut labels = Vec::with_capacity(2 * n);
        let mut photon_slots = vec![usize::MAX; n];
        let mut spin_slots = vec![None; n];
        for j in 0..n {
            let has_spin = config.spins[j].is_some();
            if j == 0 && has_spin {
                spin_slots[j] = Some(labels.len());
                labels.push(SlotLabel::Spin(j));
            }
            photon_slots[j] = labels.len();
            labels.push(SlotLabel::Photon(j));
            if j > 0 && has_spin {
                spin_slots[j] = Some(labels.len());
                labels.push(SlotLabel::Spin(j));
            }
        }
        Self {
            labels,
            photon_slots,
            spin_slots,
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[SlotLabel] {
        &self.labels
    }

    pub fn photon_slot(&self, ler: usize) -> usize {
        self.photon_slots[ler]
    }

    pub fn spin_slot(&self, ler: usize) -> Option<usize> {
        self.spin_slots[ler]
    }
}

/// Spin parameters resolved at a given field and the configured
/// temperature: Omega_S,j(B) and the thermally depolarized G_j(B, T).
#[derive(Debug, Clone)]
pub struct FieldPoint {
    pub b_mt: f64,
    /// Per LER: (Omega_S in MHz, effective G in MHz), None for bare LERs.
    pub spins: Vec<Option<(f64, f64)>>,
}

impl FieldPoint {
    pub fn of(config: &ChipConfig, b_mt: f64) -> Self {
        assert!(b_mt >= 0.0, "field sweeps are specified in |B|");
        let spins = config
            .spins
            .iter()
            .map(|s| {
                s.as_ref().map(|s| {
                    let omega_s = spin_frequency_raw(s.g, b_mt);
                    let g_eff =
                        thermal_coupling(s.coupling_mhz, s.g, b_mt, config.temperature_mk);
                    (omega_s, g_eff)
                })
            })
            .collect();
        Self { b_mt, spins }
    }
}

/// Single-excitation Hamiltonian at field `b_mt`, in MHz, in
/// [`SingleExcitationBasis`] order. Real symmetric by construction;
/// constant ground-state offsets are dropped.
pub fn build_hamiltonian(config: &ChipConfig, b_mt: f64) -> DMatrix<f64> {
    let basis = SingleExcitationBasis::for_config(config);
    let point = FieldPoint::of(config, b_mt);
    let dim = basis.dim();
    let mut h = DMatrix::zeros(dim, dim);
    for (j, ler) in config.lers.iter().enumerate() {
        let p = basis.photon_slot(j);
        h[(p, p)] = ler.omega_r_mhz;
        if let Some(s) = basis.spin_slot(j) {
            let (omega_s, g_eff) = point.spins[j].expect("spin slot implies spin params");
            h[(s, s)] = omega_s;
            h[(s, p)] = g_eff;
            h[(p, s)] = g_eff;
        }
    }
    for c in &config.couplings {
        let (pi, pj) = (basis.photon_slot(c.i - 1), basis.photon_slot(c.j - 1));
        h[(pi, pj)] = c.kappa_mhz;
        h[(pj, pi)] = c.kappa_mhz;
    }
    h
}

/// Sorted eigenpairs of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Eigenvalues in MHz, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per eigenvalue, in basis order.
    pub eigenvectors: Vec<DVector<f64>>,
    /// Slot labels of the vector components, when diagonalizing a chip
    /// Hamiltonian (None for bare matrices).
    pub basis: Option<SingleExcitationBasis>,
}

/// Cyclic Jacobi diagonalization. The matrices here are tiny (a handful
/// of slots per chip), where Jacobi reaches machine-precision residuals;
/// general-purpose tridiagonalization-based solvers were observed to
/// leave eigenvector residuals around 1e-4 MHz on clustered spectra,
/// above what the eigenpair invariants allow.
fn jacobi_symmetric(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|k| a[(k, k)]).collect();
    (values, v)
}

/// Eigenvalues only, via the same Jacobi iteration.
fn jacobi_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    jacobi_symmetric(h).0
}

/// Exact diagonalization with a deterministic ordering and sign
/// convention: eigenvalues ascending, exact degeneracies broken by the
/// lexicographic order of each eigenvector's dominant basis label, and
/// each eigenvector's largest-magnitude component made positive.
pub fn eigensolve(
    h: &DMatrix<f64>,
    basis: Option<&SingleExcitationBasis>,
) -> Result<EigenSolution, SpectrumError> {
    if h.nrows() == 0 || h.nrows() != h.ncols() {
        return Err(SpectrumError::BadShape);
    }
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_asym = (0..h.nrows())
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max((h[(i, j)] - h[(j, i)]).abs()));
    if scale > 0.0 && max_asym > 1e-12 * scale {
        return Err(SpectrumError::NonSymmetric { max_asym });
    }

    let (values, vectors) = jacobi_symmetric(h);
    let dim = h.nrows();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let dominant = |col: usize| -> usize {
        let v = vectors.column(col);
        let mut best = 0;
        for i in 1..dim {
            if v[i].abs() > v[best].abs() {
                best = i;
            }
        }
        best
    };

    // break exact-degeneracy ties (e.g. level crossings at kappa = 0)
    // by dominant label, lexicographically
    let tie_eps = 1e-9 * scale.max(1.0);
    let mut run = 0;
    while run < dim {
        let mut end = run + 1;
        while end < dim && (values[order[end]] - values[order[run]]).abs() <= tie_eps {
            end += 1;
        }
        if end - run > 1 {
            order[run..end].sort_by_key(|&c| {
                let slot = dominant(c);
                basis
                    .map(|b| b.labels()[slot].to_string())
                    .unwrap_or_else(|| format!("{slot:04}"))
            });
        }
        run = end;
    }

    let mut eigenvalues = Vec::with_capacity(dim);
    let mut eigenvectors = Vec::with_capacity(dim);
    for &c in &order {
        eigenvalues.push(values[c]);
        let mut v: DVector<f64> = vectors.column(c).into();
        if v[dominant(c)] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.push(v);
    }
    Ok(EigenSolution {
        eigenvalues,
        eigenvectors,
        basis: basis.cloned(),
    })
}

/// Normal modes of a capacitively coupled LER pair and the couplings of
/// each hosted spin ensemble to them.
#[derive(Debug, Clone, Serialize)]
pub struct NormalModes {
    pub omega_plus_mhz: f64,
    pub omega_minus_mhz: f64,
    /// Mixing angle, atan2(2 kappa_12, omega_r(second) - omega_r(first)).
    pub phi_rad: f64,
    /// Per hosted spin: couplings to the (+, -) modes, signed, MHz.
    pub couplings: Vec<NormalModeCoupling>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalModeCoupling {
    /// 0-based LER position hosting the spin.
    pub ler: usize,
    pub g_plus_mhz: f64,
    pub g_minus_mhz: f64,
}

/// Photon normal modes of the pair `(i, j)` (0-based LER positions).
///
/// The + mode is the upper normal mode; its amplitude on the pair is
/// (sin(phi/2), cos(phi/2)) and the - mode's is (cos(phi/2), -sin(phi/2)),
/// so that in the decoupled limit each mode reduces to the matching bare
/// LER. Spin couplings G~ follow from the same rotation and satisfy
/// G~_+^2 + G~_-^2 = G^2.
pub fn normal_modes(
    config: &ChipConfig,
    pair: (usize, usize),
) -> Result<NormalModes, SpectrumError> {
    let (i, j) = pair;
    if i == j || i >= config.n_lers() || j >= config.n_lers() {
        return Err(SpectrumError::BadPair { i, j });
    }
    let (w1, w2) = (config.lers[i].omega_r_mhz, config.lers[j].omega_r_mhz);
    let kappa = config.coupling_between(i, j);
    let delta = w2 - w1;
    let root = delta.hypot(2.0 * kappa);
    let omega_plus = 0.5 * (w1 + w2 + root);
    let omega_minus = 0.5 * (w1 + w2 - root);
    let phi = (2.0 * kappa).atan2(delta);
    let (sin_h, cos_h) = (0.5 * phi).sin_cos();

    let mut couplings = Vec::new();
    for (ler, s) in config.spins.iter().enumerate() {
        let Some(s) = s else { continue };
        let g = s.coupling_mhz;
        if ler == i {
            couplings.push(NormalModeCoupling {
                ler,
                g_plus_mhz: g * sin_h,
                g_minus_mhz: g * cos_h,
            });
        } else if ler == j {
            couplings.push(NormalModeCoupling {
                ler,
                g_plus_mhz: g * cos_h,
                g_minus_mhz: -g * sin_h,
            });
        }
    }
    Ok(NormalModes {
        omega_plus_mhz: omega_plus,
        omega_minus_mhz: omega_minus,
        phi_rad: phi,
        couplings,
    })
}

impl NormalModes {
    pub fn coupling_for(&self, ler: usize) -> Option<NormalModeCoupling> {
        self.couplings.iter().copied().find(|c| c.ler == ler)
    }

    pub fn splitting_mhz(&self) -> f64 {
        self.omega_plus_mhz - self.omega_minus_mhz
    }
}

/// Spin-photon hybridization angle theta_j = atan2(2 G_j, Delta_j) with
/// Delta_j = Omega_S,j - omega_r,j, in (0, pi): theta -> 0 for the spin
/// far above its cavity, pi/2 exactly at resonance, -> pi far below.
pub fn polariton_angle(
    config: &ChipConfig,
    ler: usize,
    b_mt: f64,
) -> Result<f64, SpectrumError> {
    if config.spins[ler].is_none() {
        return Err(SpectrumError::NoSpin { ler });
    }
    let point = FieldPoint::of(config, b_mt);
    let (omega_s, g_eff) = point.spins[ler].expect("spin present");
    let delta = omega_s - config.lers[ler].omega_r_mhz;
    if g_eff == 0.0 && delta == 0.0 {
        return Err(SpectrumError::DegenerateAngle);
    }
    Ok((2.0 * g_eff).atan2(delta))
}

/// Per-slot excitation weight of a normalized eigenvector, with the
/// signed amplitude kept alongside (amplitude signs distinguish
/// symmetric from antisymmetric photon superpositions).
#[derive(Debug, Clone, Serialize)]
pub struct SlotWeight {
    pub label: String,
    pub weight: f64,
    pub amplitude: f64,
}

pub fn probabilities(vector: &DVector<f64>, basis: &SingleExcitationBasis) -> Vec<SlotWeight> {
    basis
        .labels()
        .iter()
        .zip(vector.iter())
        .map(|(label, &a)| SlotWeight {
            label: label.to_string(),
            weight: a * a,
            amplitude: a,
        })
        .collect()
}

/// Strictly increasing, non-negative field grid in mT.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSweep {
    values: Vec<f64>,
}

impl FieldSweep {
    pub fn new(values: Vec<f64>) -> Result<Self, SpectrumError> {
        if values.is_empty()
            || values[0] < 0.0
            || values.iter().any(|v| !v.is_finite())
            || values.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(SpectrumError::BadSweep);
        }
        Ok(Self { values })
    }

    pub fn linspace(lo: f64, hi: f64, steps: usize) -> Result<Self, SpectrumError> {
        if steps == 0 || (steps == 1 && hi != lo) || (steps > 1 && hi <= lo) {
            return Err(SpectrumError::BadSweep);
        }
        if steps == 1 {
            return Self::new(vec![lo]);
        }
        let h = (hi - lo) / (steps - 1) as f64;
        Self::new((0..steps).map(|k| lo + h * k as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One eigenstate continued across a field sweep by maximal eigenvector
/// overlap between consecutive steps.
#[derive(Debug, Clone)]
pub struct PolaritonBranch {
    /// Index of this branch among sorted eigenstates at the sweep start.
    pub start_index: usize,
    pub b_mt: Vec<f64>,
    pub freq_mhz: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

/// Diagonalize across the sweep (in parallel) and continue each
/// eigenstate by maximal-overlap assignment between consecutive steps;
/// ties are broken by the assignment preserving energy order.
pub fn track_branches(
    config: &ChipConfig,
    sweep: &FieldSweep,
) -> Result<Vec<PolaritonBranch>, SpectrumError> {
    let basis = SingleExcitationBasis::for_config(config);
    let solutions: Vec<EigenSolution> = sweep
        .values()
        .par_iter()
        .map(|&b| eigensolve(&build_hamiltonian(config, b), Some(&basis)))
        .collect::<Result<_, _>>()?;

    let dim = basis.dim();
    let n_steps = sweep.len();
    let mut branches: Vec<PolaritonBranch> = (0..dim)
        .map(|k| PolaritonBranch {
            start_index: k,
            b_mt: Vec::with_capacity(n_steps),
            freq_mhz: Vec::with_capacity(n_steps),
            vectors: Vec::with_capacity(n_steps),
        })
        .collect();
    for (k, branch) in branches.iter_mut().enumerate() {
        branch.b_mt.push(sweep.values()[0]);
        branch.freq_mhz.push(solutions[0].eigenvalues[k]);
        branch.vectors.push(solutions[0].eigenvectors[k].clone());
    }

    for (step, sol) in solutions.iter().enumerate().take(n_steps).skip(1) {
        // all (branch, candidate) overlaps, assigned greedily by
        // magnitude; equal overlaps resolved by preserving energy order
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * dim);
        for (bi, branch) in branches.iter().enumerate() {
            let prev = branch.vectors.last().expect("non-empty branch");
            for (ci, cand) in sol.eigenvectors.iter().enumerate() {
                pairs.push((prev.dot(cand).abs(), bi, ci));
            }
        }
        pairs.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| {
                    let da = a.1.abs_diff(a.2);
                    let db = b.1.abs_diff(b.2);
                    da.cmp(&db)
                })
                .then_with(|| a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
        });
        let mut branch_taken = vec![false; dim];
        let mut cand_taken = vec![false; dim];
        let mut assignment = vec![usize::MAX; dim];
        let mut worst: f64 = 1.0;
        for (o, bi, ci) in pairs {
            if branch_taken[bi] || cand_taken[ci] {
                continue;
            }
            branch_taken[bi] = true;
            cand_taken[ci] = true;
            assignment[bi] = ci;
            worst = worst.min(o);
        }
        if worst <= 0.5 {
            return Err(SpectrumError::OverlapLost {
                b_mt: sweep.values()[step],
                step,
                overlap: worst,
            });
        }
        for (bi, branch) in branches.iter_mut().enumerate() {
            let ci = assignment[bi];
            branch.b_mt.push(sweep.values()[step]);
            branch.freq_mhz.push(sol.eigenvalues[ci]);
            branch.vectors.push(sol.eigenvectors[ci].clone());
        }
    }
    Ok(branches)
}

/// Location and size of a minimum of the gap between sorted levels
/// `level` and `level + 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapMinimum {
    pub b_mt: f64,
    pub gap_mhz: f64,
}

/// Minimum over `[b_lo, b_hi]` of the separation between sorted
/// eigenvalues `level` and `level + 1`: coarse scan followed by
/// golden-section refinement around the best bracket.
pub fn min_sorted_gap(
    config: &ChipConfig,
    level: usize,
    b_lo: f64,
    b_hi: f64,
    coarse_steps: usize,
) -> Result<GapMinimum, SpectrumError> {
    let basis = SingleExcitationBasis::for_config(config);
    if level + 1 >= basis.dim() {
        return Err(SpectrumError::LevelOutOfRange {
            level,
            dim: basis.dim(),
        });
    }
    if !b_lo.is_finite() || !b_hi.is_finite() || b_hi <= b_lo || b_lo < 0.0 || coarse_steps < 3 {
        return Err(SpectrumError::BadSweep);
    }
    let gap = |b: f64| -> f64 {
        let h = build_hamiltonian(config, b);
        let mut vals = jacobi_eigenvalues(&h);
        vals.sort_by(f64::total_cmp);
        vals[level + 1] - vals[level]
    };

    let h = (b_hi - b_lo) / (coarse_steps - 1) as f64;
    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for k in 0..coarse_steps {
        let g = gap(b_lo + h * k as f64);
        if g < best {
            best = g;
            best_k = k;
        }
    }
    let mut a = b_lo + h * best_k.saturating_sub(1) as f64;
    let mut b = (b_lo + h * (best_k + 1) as f64).min(b_hi);

    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut fc, mut fd) = (gap(c), gap(d));
    for _ in 0..200 {
        if b - a < 1e-9 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = gap(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = gap(d);
        }
    }
    let b_star = 0.5 * (a + b);
    Ok(GapMinimum {
        b_mt: b_star,
        gap_mhz: gap(b_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, RawChipConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair_config(
        w1: f64,
        w2: f64,
        k12: f64,
        spin1: Option<(f64, f64)>,
        spin2: Option<(f64, f64)>,
    ) -> ChipConfig {
        let mut spins = serde_json::Map::new();
        if let Some((g, cg)) = spin1 {
            spins.insert(
                "A".into(),
                serde_json::json!({"g": g, "G_MHz": cg, "gamma_MHz": 1.0}),
            );
        }
        if let Some((g, cg)) = spin2 {
            spins.insert(
                "B".into(),
                serde_json::json!({"g": g, "G_MHz": cg, "gamma_MHz": 1.0}),
            );
        }
        let doc = serde_json::json!({
            "lers": [
                {"label": "A", "omega_r_MHz": w1, "kappa_MHz": 0.1, "kappa_c_MHz": 0.02},
                {"label": "B", "omega_r_MHz": w2, "kappa_MHz": 0.1, "kappa_c_MHz": 0.02}
            ],
            "spins": spins,
            "couplings": [{"i": 1, "j": 2, "kappa_MHz": k12}]
        });
        let raw: RawChipConfig = serde_json::from_value(doc).unwrap();
        validate_config(&raw).unwrap()
    }

    #[test]
    fn basis_ordering_for_pair() {
        let cfg = pair_config(1700.0, 1710.0, 1.0, Some((2.0, 5.0)), Some((2.0, 3.0)));
        let basis = SingleExcitationBasis::for_config(&cfg);
        let labels: Vec<String> = basis.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, ["spin_1", "photon_1", "photon_2", "spin_2"]);
    }

    #[test]
    fn decoupled_pair_is_diagonal() {
        let cfg = pair_config(1700.0, 1710.0, 0.0, None, None);
        let h = build_hamiltonian(&cfg, 0.0);
        assert_eq!(h, DMatrix::from_diagonal(&DVector::from_vec(vec![1700.0, 1710.0])));
    }

    #[test]
    fn one_spin_pair_matrix_layout() {
        // (spin_1, photon_1, photon_2) with the spin tuned to omega_r1
        let cfg = pair_config(1700.0, 1710.0, 1.06, Some((2.0, 5.0)), None);
        let b = 1700.0 / (2.0 * crate::config::MU_B_OVER_H_MHZ_PER_MT);
        let h = build_hamiltonian(&cfg, b);
        assert_eq!(h.nrows(), 3);
        assert_relative_eq!(h[(0, 0)], 1700.0, max_relative = 1e-12);
        assert_eq!(h[(1, 1)], 1700.0);
        assert_eq!(h[(2, 2)], 1710.0);
        assert_eq!(h[(0, 1)], 5.0);
        assert_eq!(h[(1, 2)], 1.06);
        assert_eq!(h[(0, 2)], 0.0);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn eigensolve_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let sol = eigensolve(&h, None).unwrap();
        assert_eq!(sol.eigenvalues, vec![1.0, 3.0]);
        assert_eq!(sol.eigenvectors[0][1], 1.0);
        assert_eq!(sol.eigenvectors[1][0], 1.0);
    }

    #[test]
    fn eigensolve_symmetric_pair_splitting() {
        // mode splitting 2 kappa for a degenerate pair
        let (w, k) = (2000.0, 3.0);
        let h = DMatrix::from_row_slice(2, 2, &[w, k, k, w]);
        let sol = eigensolve(&h, None).unwrap();
        assert_relative_eq!(sol.eigenvalues[0], w - k, max_relative = 1e-12);
        assert_relative_eq!(sol.eigenvalues[1], w + k, max_relative = 1e-12);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for v in &sol.eigenvectors {
            assert_relative_eq!(v[0].abs(), inv_sqrt2, max_relative = 1e-10);
            assert_relative_eq!(v[1].abs(), inv_sqrt2, max_relative = 1e-10);
        }
        assert_relative_eq!(sol.eigenvectors[1].dot(&sol.eigenvectors[0]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigensolve_jc_block_closed_form() {
        let (omega, wr, g) = (1712.0, 1700.0, 7.0);
        let h = DMatrix::from_row_slice(2, 2, &[omega, g, g, wr]);
        let sol = eigensolve(&h, None).unwrap();
        let mean = 0.5 * (omega + wr);
        let root = 0.5 * ((omega - wr).powi(2) + 4.0 * g * g).sqrt();
        assert_relative_eq!(sol.eigenvalues[0], mean - root, max_relative = 1e-12);
        assert_relative_eq!(sol.eigenvalues[1], mean + root, max_relative = 1e-12);
    }

    #[test]
    fn eigensolve_rejects_asymmetric() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(matches!(
            eigensolve(&h, None),
            Err(SpectrumError::NonSymmetric { .. })
        ));
    }

    #[test]
    fn normal_modes_decoupled_limit() {
        let cfg = pair_config(1700.0, 1710.0, 0.0, None, None);
        let nm = normal_modes(&cfg, (0, 1)).unwrap();
        assert_eq!(nm.omega_plus_mhz, 1710.0);
        assert_eq!(nm.omega_minus_mhz, 1700.0);
        assert_eq!(nm.phi_rad, 0.0);
    }

    #[test]
    fn normal_modes_degenerate_pair() {
        let cfg = pair_config(2000.0, 2000.0, 4.0, None, None);
        let nm = normal_modes(&cfg, (0, 1)).unwrap();
        assert_relative_eq!(nm.omega_plus_mhz, 2004.0, max_relative = 1e-12);
        assert_relative_eq!(nm.omega_minus_mhz, 1996.0, max_relative = 1e-12);
        assert_relative_eq!(nm.phi_rad, std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
    }

    #[test]
    fn normal_modes_fitted_pair_point() {
        let cfg = pair_config(2730.0, 2720.0, 6.49, None, None);
        let nm = normal_modes(&cfg, (0, 1)).unwrap();
        // half of sqrt(10^2 + 4 * 6.49^2)
        assert_relative_eq!(nm.omega_plus_mhz, 2725.0 + 8.192686, epsilon = 1e-5);
        assert_relative_eq!(nm.omega_minus_mhz, 2725.0 - 8.192686, epsilon = 1e-5);
    }

    #[test]
    fn rotated_hamiltonian_preserves_spectrum() {
        // basis-change invariance: (spin, b+, b-) block spectrum equals
        // the lab-frame 3x3 spectrum
        let cfg = pair_config(2730.0, 2720.0, 6.49, Some((2.0, 5.4)), None);
        let b = 97.0;
        let nm = normal_modes(&cfg, (0, 1)).unwrap();
        let c = nm.coupling_for(0).unwrap();
        let omega_s = spin_frequency_raw(2.0, b);
        let rotated = DMatrix::from_row_slice(
            3,
            3,
            &[
                omega_s,
                c.g_plus_mhz,
                c.g_minus_mhz,
                c.g_plus_mhz,
                nm.omega_plus_mhz,
                0.0,
                c.g_minus_mhz,
                0.0,
                nm.omega_minus_mhz,
            ],
        );
        let lab = build_hamiltonian(&cfg, b);
        let a = eigensolve(&rotated, None).unwrap().eigenvalues;
        let e = eigensolve(&lab, None).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&e) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn polariton_angle_conventions() {
        let cfg = pair_config(1700.0, 1710.0, 1.0, Some((2.0, 19.5)), None);
        // resonance: Delta = 0 -> pi/2
        let b_res = 1700.0 / (2.0 * crate::config::MU_B_OVER_H_MHZ_PER_MT);
        assert_relative_eq!(
            polariton_angle(&cfg, 0, b_res).unwrap(),
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-9
        );
        // scalar arctangent: G = 19.5, Delta = -39 -> atan2(39, -39) = 3 pi / 4
        let b = (1700.0 - 39.0) / (2.0 * crate::config::MU_B_OVER_H_MHZ_PER_MT);
        assert_relative_eq!(
            polariton_angle(&cfg, 0, b).unwrap(),
            0.75 * std::f64::consts::PI,
            max_relative = 1e-9
        );
        // decoupled limit: G -> 0 with Delta > 0 -> theta -> 0
        let cfg0 = pair_config(1700.0, 1710.0, 1.0, Some((2.0, 0.0)), None);
        let b_hi = 2.0 * b_res;
        assert_eq!(polariton_angle(&cfg0, 0, b_hi).unwrap(), 0.0);
        // degenerate: G = 0 and Delta = 0
        assert!(matches!(
            polariton_angle(&cfg0, 0, b_res),
            Err(SpectrumError::DegenerateAngle)
        ));
    }

    #[test]
    fn probabilities_basics() {
        let cfg = pair_config(1700.0, 1710.0, 1.0, Some((2.0, 5.0)), None);
        let basis = SingleExcitationBasis::for_config(&cfg);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let w = probabilities(&v, &basis);
        assert_eq!(w[1].weight, 1.0);
        assert_eq!(w[0].weight + w[2].weight, 0.0);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = DVector::from_vec(vec![0.0, s, s]);
        let w = probabilities(&v, &basis);
        assert_relative_eq!(w[1].weight, 0.5, max_relative = 1e-12);
        assert_relative_eq!(w[2].weight, 0.5, max_relative = 1e-12);
        assert!(w[1].amplitude > 0.0 && w[2].amplitude > 0.0);
    }

    #[test]
    fn resonant_jc_upper_polariton_is_half_half() {
        let cfg = pair_config(1700.0, 1000.0, 0.0, Some((2.0, 5.0)), None);
        let b_res = 1700.0 / (2.0 * crate::config::MU_B_OVER_H_MHZ_PER_MT);
        let basis = SingleExcitationBasis::for_config(&cfg);
        let sol = eigensolve(&build_hamiltonian(&cfg, b_res), Some(&basis)).unwrap();
        let upper = &sol.eigenvectors[2];
        let w = probabilities(upper, &basis);
        assert_relative_eq!(w[0].weight, 0.5, epsilon = 1e-9);
        assert_relative_eq!(w[1].weight, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn tracking_far_from_resonance_keeps_sorted_order() {
        let cfg = pair_config(5000.0, 5010.0, 1.0, Some((2.0, 5.0)), Some((2.1, 3.0)));
        let sweep = FieldSweep::linspace(1.0, 5.0, 21).unwrap();
        let branches = track_branches(&cfg, &sweep).unwrap();
        for (k, br) in branches.iter().enumerate() {
            assert_eq!(br.start_index, k);
            for (step, &b) in sweep.values().iter().enumerate() {
                let sol = eigensolve(&build_hamiltonian(&cfg, b), None).unwrap();
                assert_relative_eq!(br.freq_mhz[step], sol.eigenvalues[k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tracking_through_jc_anticrossing_matches_closed_form() {
        // kappa_12 = 0: the chip splits into two independent
        // Jaynes-Cummings doublets, one per (spin, photon) block
        let (g1, g2) = (5.0, 3.0);
        let (w1, w2) = (1700.0, 3000.0);
        let cfg = pair_config(w1, w2, 0.0, Some((2.0, g1)), Some((2.2, g2)));
        let b_res = w1 / (2.0 * crate::config::MU_B_OVER_H_MHZ_PER_MT);
        let sweep = FieldSweep::linspace(b_res - 3.0, b_res + 3.0, 121).unwrap();
        let branches = track_branches(&cfg, &sweep).unwrap();
        let jc = |omega: f64, wr: f64, g: f64| {
            let mean = 0.5 * (omega + wr);
            let root = 0.5 * (omega - wr).hypot(2.0 * g);
            (mean - root, mean + root)
        };
        for (step, &b) in sweep.values().iter().enumerate() {
            let (lo1, hi1) = jc(spin_frequency_raw(2.0, b), w1, g1);
            let (lo2, hi2) = jc(spin_frequency_raw(2.2, b), w2, g2);
            // sorted order over this window: LER-1 doublet, then the
            // LER-2 spin-like branch, then the LER-2 photon-like one
            assert_relative_eq!(branches[0].freq_mhz[step], lo1, max_relative = 1e-9);
            assert_relative_eq!(branches[1].freq_mhz[step], hi1, max_relative = 1e-9);
            assert_relative_eq!(branches[2].freq_mhz[step], lo2, max_relative = 1e-9);
            assert_relative_eq!(branches[3].freq_mhz[step], hi2, max_relative = 1e-9);
        }
        let min = min_sorted_gap(&cfg, 0, b_res - 3.0, b_res + 3.0, 201).unwrap();
        assert_relative_eq!(min.gap_mhz, 2.0 * g1, max_relative = 1e-7);
    }

    #[test]
    fn tracking_follows_character_across_skipped_anticrossing() {
        // a 2-point sweep that jumps over a sharp JC anticrossing: the
        // spin-like branch keeps its character, so the branches exchange
        // energy order instead of bending
        let cfg = pair_config(1700.0, 4000.0, 0.0, Some((2.0, 0.05)), None);
        let b_res = 1700.0 / (2.0 * crate::config::MU_B_OVER_H_MHZ_PER_MT);
        let sweep = FieldSweep::new(vec![b_res - 5.0, b_res + 5.0]).unwrap();
        let branches = track_branches(&cfg, &sweep).unwrap();
        let spin_branch = &branches[0];
        for v in &spin_branch.vectors {
            assert!(v[0].abs() > 0.9, "spin amplitude lost: {v}");
        }
        assert!(spin_branch.freq_mhz[1] > branches[1].freq_mhz[1]);
    }

    proptest! {
        #[test]
        fn hamiltonian_symmetric_and_trace_matches_eigensum(
            w1 in 1000.0..3000.0f64,
            w2 in 1000.0..3000.0f64,
            k12 in 0.0..30.0f64,
            g1 in 0.0..25.0f64,
            g2 in 0.0..25.0f64,
            b in 0.0..120.0f64,
        ) {
            let cfg = pair_config(w1, w2, k12, Some((2.001, g1)), Some((2.003, g2)));
            let h = build_hamiltonian(&cfg, b);
            prop_assert_eq!(&h, &h.transpose());
            let sol = eigensolve(&h, None).unwrap();
            let sum: f64 = sol.eigenvalues.iter().sum();
            let trace = h.trace();
            prop_assert!((sum - trace).abs() <= 1e-9 * trace.abs().max(1.0));
            // orthonormality and residual invariants
            for (i, v) in sol.eigenvectors.iter().enumerate() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-10);
                let r = &h * v - sol.eigenvalues[i] * v;
                let emax = sol.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
                prop_assert!(r.norm() <= 1e-8 * emax.max(1.0));
                for u in sol.eigenvectors.iter().skip(i + 1) {
                    prop_assert!(v.dot(u).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn gtilde_pythagoras(
            w1 in 1000.0..3000.0f64,
            delta in -50.0..50.0f64,
            k12 in 0.0..40.0f64,
            g1 in 0.0..25.0f64,
            g2 in 0.0..25.0f64,
        ) {
            let cfg = pair_config(w1, w1 + delta, k12, Some((2.0, g1)), Some((2.0, g2)));
            let nm = normal_modes(&cfg, (0, 1)).unwrap();
            for c in &nm.couplings {
                let g = if c.ler == 0 { g1 } else { g2 };
                let sum = c.g_plus_mhz.powi(2) + c.g_minus_mhz.powi(2);
                prop_assert!((sum - g * g).abs() <= 1e-12 * (g * g).max(1.0));
            }
            prop_assert!(nm.omega_plus_mhz >= nm.omega_minus_mhz);
            prop_assert!((0.0..=std::f64::consts::PI).contains(&nm.phi_rad));
        }

        #[test]
        fn probabilities_sum_to_one(
            w1 in 1000.0..3000.0f64,
            k12 in 0.0..30.0f64,
            g1 in 0.0..25.0f64,
            b in 0.0..120.0f64,
        ) {
            let cfg = pair_config(w1, w1 + 10.0, k12, Some((2.0, g1)), None);
            let basis = SingleExcitationBasis::for_config(&cfg);
            let sol = eigensolve(&build_hamiltonian(&cfg, b), Some(&basis)).unwrap();
            for v in &sol.eigenvectors {
                let total: f64 = probabilities(v, &basis).iter().map(|w| w.weight).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn spin_frequency_linear_in_field(
            g in 0.5..4.0f64,
            b in 0.0..200.0f64,
            a in 0.01..10.0f64,
        ) {
            let f1 = crate::config::spin_frequency(g, a * b).unwrap();
            let f2 = a * crate::config::spin_frequency(g, b).unwrap();
            prop_assert!((f1 - f2).abs() <= 1e-9 * f2.abs().max(1e-12));
        }
    }
}
