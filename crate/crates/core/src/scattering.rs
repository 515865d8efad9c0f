//! Frequency-domain solution of the reduced Langevin equations.
//!
//! Ports are indexed from zero. The probe frequency `omega` is the detuning
//! from cavity resonance in the rotating frame.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::device::DeviceModel;
use crate::effective::{build_effective_with, EffectiveModel, OffResonant, PumpConfiguration};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Smallest `sigma_min / sigma_max` of `M - i omega I` accepted by the solver.
pub const MIN_RECIPROCAL_CONDITION: f64 = 1e-14;

/// `chi_j(omega) = 1 / (Gamma_j / 2 - i (omega + delta_j))`.
pub fn mechanical_susceptibility(omega: f64, delta_eff: f64, gamma_eff: f64) -> Complex64 {
    1.0 / Complex64::new(gamma_eff / 2.0, -(omega + delta_eff))
}

/// Cavity-sector system matrix after eliminating the mechanics.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub entries: CMatrix,
    pub omega: f64,
    kappas: Vec<f64>,
}

impl DriftMatrix {
    /// `sigma_{rank+1} / sigma_1` of `M - diag(kappa / 2)`; zero when the
    /// coupling part vanishes or has no more than `rank` singular values.
    pub fn low_rank_residual(&self, rank: usize) -> f64 {
        let mut part = self.entries.clone();
        for (k, kappa) in self.kappas.iter().enumerate() {
            part[(k, k)] -= kappa / 2.0;
        }
        let mut sv: Vec<f64> = part.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        if sv.len() <= rank || sv[0] == 0.0 {
            0.0
        } else {
            sv[rank] / sv[0]
        }
    }
}

/// `M_kl = delta_kl kappa_k / 2 + sum_j chi_j G_kj conj(G_lj)`.
pub fn assemble_drift_matrix(effective: &EffectiveModel, device: &DeviceModel, omega: f64) -> DriftMatrix {
    let n = effective.num_cavities();
    let chi = susceptibilities(effective, omega);
    let g = &effective.g;
    let kappas = device.kappas();
    let entries = CMatrix::from_fn(n, n, |k, l| {
        let coupling: Complex64 = chi.iter().enumerate().map(|(j, c)| c * g[k][j] * g[l][j].conj()).sum();
        if k == l { coupling + kappas[k] / 2.0 } else { coupling }
    });
    DriftMatrix { entries, omega, kappas }
}

fn susceptibilities(effective: &EffectiveModel, omega: f64) -> Vec<Complex64> {
    effective
        .delta_eff
        .iter()
        .zip(&effective.gamma_eff)
        .map(|(&d, &g)| mechanical_susceptibility(omega, d, g))
        .collect()
}

/// A dissipative channel feeding noise into the cavity outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bath {
    /// Internal loss of cavity `i`, rate `kappa_int,i`.
    Internal(usize),
    /// Intrinsic bath of mechanical mode `j`, rate `gamma_m,j`.
    Mechanical(usize),
    /// Damping of mode `mode` through the off-resonant coupling to cavity `cavity`.
    OffResonant { cavity: usize, mode: usize },
}

/// Bath channels in the column order used by [`PortResponse::baths`].
pub fn bath_channels(effective: &EffectiveModel) -> Vec<Bath> {
    let (n, m) = (effective.num_cavities(), effective.num_mechanics());
    let mut out: Vec<Bath> = (0..n).map(Bath::Internal).chain((0..m).map(Bath::Mechanical)).collect();
    if effective.delta_omega_m.is_some() {
        for cavity in 0..n {
            for mode in 0..m {
                out.push(Bath::OffResonant { cavity, mode });
            }
        }
    }
    out
}

/// Port response at one probe frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PortResponse {
    pub omega: f64,
    pub s: CMatrix,
    /// Output amplitude per unit intrinsic mechanical input, one column per mode.
    pub mech: CMatrix,
    /// Output amplitude per unit input of every bath in [`bath_channels`] order.
    pub baths: CMatrix,
}

/// Solves the input-output problem at `omega`.
pub fn port_response(effective: &EffectiveModel, device: &DeviceModel, omega: f64) -> Result<PortResponse> {
    check_shapes(effective, device)?;
    let n = effective.num_cavities();
    let m = effective.num_mechanics();
    let drift = assemble_drift_matrix(effective, device, omega);
    let mut a = drift.entries;
    for k in 0..n {
        a[(k, k)] -= I * omega;
    }
    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    let singular = || Error::Singular { omega, condition: if rcond > 0.0 { 1.0 / rcond } else { f64::INFINITY } };
    if !(rcond >= MIN_RECIPROCAL_CONDITION) {
        return Err(singular());
    }
    let inv = a.lu().try_inverse().ok_or_else(singular)?;

    let t: Vec<f64> = device.cavities.iter().map(|c| c.kappa_ext.sqrt()).collect();
    let s = CMatrix::from_fn(n, n, |i, j| {
        let v = t[i] * inv[(i, j)] * t[j];
        if i == j { v - 1.0 } else { v }
    });

    let chi = susceptibilities(effective, omega);
    // Column driving the cavities from a mechanical input of unit rate.
    let mech_column = |j: usize, rate: f64| -> Vec<Complex64> {
        let drive: Vec<Complex64> = (0..n).map(|k| -I * effective.g[k][j] * chi[j] * rate.sqrt()).collect();
        (0..n).map(|i| t[i] * (0..n).map(|k| inv[(i, k)] * drive[k]).sum::<Complex64>()).collect()
    };

    let mut mech = CMatrix::zeros(n, m);
    for j in 0..m {
        for (i, v) in mech_column(j, effective.gamma_int[j]).into_iter().enumerate() {
            mech[(i, j)] = v;
        }
    }

    let channels = bath_channels(effective);
    let extra = effective.off_resonant_damping(&device.kappas());
    let mut baths = CMatrix::zeros(n, channels.len());
    for (col, bath) in channels.iter().enumerate() {
        match *bath {
            Bath::Internal(c) => {
                let rate = device.cavities[c].kappa_int.sqrt();
                for i in 0..n {
                    baths[(i, col)] = t[i] * inv[(i, c)] * rate;
                }
            }
            Bath::Mechanical(j) => baths.set_column(col, &mech.column(j)),
            Bath::OffResonant { cavity, mode } => {
                for (i, v) in mech_column(mode, extra[cavity][mode]).into_iter().enumerate() {
                    baths[(i, col)] = v;
                }
            }
        }
    }
    Ok(PortResponse { omega, s, mech, baths })
}

/// `S(omega) = T (M - i omega I)^-1 T - I`.
pub fn scattering_matrix(effective: &EffectiveModel, device: &DeviceModel, omega: f64) -> Result<CMatrix> {
    port_response(effective, device, omega).map(|r| r.s)
}

/// `S(omega)` without the bath columns and with a 1-norm condition estimate;
/// used in inner optimization loops.
pub(crate) fn scattering_matrix_lite(effective: &EffectiveModel, device: &DeviceModel, omega: f64) -> Result<CMatrix> {
    check_shapes(effective, device)?;
    let n = effective.num_cavities();
    let mut a = assemble_drift_matrix(effective, device, omega).entries;
    for k in 0..n {
        a[(k, k)] -= I * omega;
    }
    let norm1 = |m: &CMatrix| (0..n).map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let an = norm1(&a);
    let inv = a.lu().try_inverse().ok_or(Error::Singular { omega, condition: f64::INFINITY })?;
    let cond = an * norm1(&inv);
    if !(cond.is_finite() && 1.0 / cond >= MIN_RECIPROCAL_CONDITION) {
        return Err(Error::Singular { omega, condition: cond });
    }
    let t: Vec<f64> = device.cavities.iter().map(|c| c.kappa_ext.sqrt()).collect();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let v = t[i] * inv[(i, j)] * t[j];
        if i == j { v - 1.0 } else { v }
    }))
}

fn check_shapes(effective: &EffectiveModel, device: &DeviceModel) -> Result<()> {
    if effective.num_cavities() != device.num_cavities() || effective.num_mechanics() != device.num_mechanics() {
        return Err(Error::Dimension("effective model and device shapes disagree".into()));
    }
    Ok(())
}

/// Responses over a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringResult {
    pub omega_grid: Vec<f64>,
    pub s_matrices: Vec<CMatrix>,
    pub mech_transfer: Vec<CMatrix>,
    pub bath_transfer: Vec<CMatrix>,
    pub channels: Vec<Bath>,
}

impl ScatteringResult {
    pub fn len(&self) -> usize {
        self.omega_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_grid.is_empty()
    }

    /// `|S_ij|^2` along the grid.
    pub fn power(&self, i: usize, j: usize) -> Vec<f64> {
        self.s_matrices.iter().map(|s| s[(i, j)].norm_sqr()).collect()
    }
}

/// `n` uniformly spaced points from `lo` to `hi`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Evaluates [`port_response`] on a uniform grid, in parallel.
pub fn spectrum_sweep(
    effective: &EffectiveModel,
    device: &DeviceModel,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<ScatteringResult> {
    if n_points < 2 {
        return Err(Error::Domain(format!("need at least two grid points, got {n_points}")));
    }
    if !(omega_min < omega_max) {
        return Err(Error::Domain(format!("empty frequency interval [{omega_min}, {omega_max}]")));
    }
    sweep_grid(effective, device, &linspace(omega_min, omega_max, n_points))
}

/// Evaluates [`port_response`] on an arbitrary grid, in parallel.
pub fn sweep_grid(effective: &EffectiveModel, device: &DeviceModel, grid: &[f64]) -> Result<ScatteringResult> {
    let responses: Vec<PortResponse> = grid
        .par_iter()
        .map(|&w| port_response(effective, device, w))
        .collect::<Result<_>>()?;
    let mut out = ScatteringResult {
        omega_grid: grid.to_vec(),
        s_matrices: Vec::with_capacity(grid.len()),
        mech_transfer: Vec::with_capacity(grid.len()),
        bath_transfer: Vec::with_capacity(grid.len()),
        channels: bath_channels(effective),
    };
    for r in responses {
        out.s_matrices.push(r.s);
        out.mech_transfer.push(r.mech);
        out.bath_transfer.push(r.baths);
    }
    Ok(out)
}

/// S matrices over a (phase, frequency) grid with the phase of drive
/// `phase_index` replaced by each grid value. Indexed `[phi][omega]`.
pub fn phase_sweep(
    device: &DeviceModel,
    pumps: &PumpConfiguration,
    mode: OffResonant,
    phase_index: (usize, usize),
    phi_grid: &[f64],
    omega_grid: &[f64],
) -> Result<Vec<Vec<CMatrix>>> {
    let (i, j) = phase_index;
    if i >= pumps.num_cavities() || j >= pumps.num_mechanics() {
        return Err(Error::Dimension(format!("phase index ({i}, {j}) out of range")));
    }
    phi_grid
        .par_iter()
        .map(|&phi| {
            let eff = build_effective_with(device, &pumps.with_phase(i, j, phi), mode)?;
            omega_grid.iter().map(|&w| scattering_matrix(&eff, device, w)).collect()
        })
        .collect()
}

/// Largest singular value.
pub fn max_singular_value(m: &CMatrix) -> f64 {
    m.singular_values().max()
}

/// `1 - sum_k |S_ik|^2` for every output port `i`.
pub fn row_deficit(s: &CMatrix) -> Vec<f64> {
    s.row_iter().map(|r| 1.0 - r.iter().map(|z| z.norm_sqr()).sum::<f64>()).collect()
}

/// `sum_b |T_ib|^2` for every output port `i`.
pub fn bath_power(baths: &CMatrix) -> Vec<f64> {
    baths.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect()
}
