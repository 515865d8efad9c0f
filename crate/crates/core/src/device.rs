//! Static description of the electromechanical circuit and its calibration
//! formulas: LC resonances, participation ratio, vacuum coupling, pump photon
//! numbers, cooperativity and the bias-voltage tuning fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ratio `omega_m / gamma_m` below which a mechanical mode is flagged as
/// poorly resolved.
pub const RESOLVED_QUALITY: f64 = 1e3;

/// One microwave LC resonator coupled to a waveguide port.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityMode {
    pub omega: f64,
    pub kappa_int: f64,
    pub kappa_ext: f64,
    pub inductance: Option<f64>,
    pub stray_capacitance: Option<f64>,
    pub motional_capacitance: Option<f64>,
}

impl CavityMode {
    pub fn new(omega: f64, kappa_int: f64, kappa_ext: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidModel(format!("cavity frequency must be positive, got {omega}")));
        }
        if !(kappa_int >= 0.0) || !kappa_int.is_finite() {
            return Err(Error::InvalidModel(format!("internal loss must be non-negative, got {kappa_int}")));
        }
        if !(kappa_ext > 0.0) || !kappa_ext.is_finite() {
            return Err(Error::InvalidModel(format!("external coupling must be positive, got {kappa_ext}")));
        }
        Ok(Self {
            omega,
            kappa_int,
            kappa_ext,
            inductance: None,
            stray_capacitance: None,
            motional_capacitance: None,
        })
    }

    /// Attaches the lumped-circuit values (henry, farad, farad).
    pub fn with_circuit(mut self, inductance: f64, stray: f64, motional: f64) -> Self {
        self.inductance = Some(inductance);
        self.stray_capacitance = Some(stray);
        self.motional_capacitance = Some(motional);
        self
    }

    /// Total linewidth `kappa_int + kappa_ext`.
    pub fn kappa(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }

    /// Output coupling ratio `kappa_ext / kappa`, in (0, 1].
    pub fn eta(&self) -> f64 {
        self.kappa_ext / self.kappa()
    }
}

/// An in-plane flexural mode of the nanostring.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalMode {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub m_eff: Option<f64>,
    pub x_zpf: Option<f64>,
}

impl MechanicalMode {
    pub fn new(omega_m: f64, gamma_m: f64) -> Result<Self> {
        if !(omega_m > 0.0) || !omega_m.is_finite() {
            return Err(Error::InvalidModel(format!("mechanical frequency must be positive, got {omega_m}")));
        }
        if !(gamma_m > 0.0) || !gamma_m.is_finite() {
            return Err(Error::InvalidModel(format!("mechanical damping must be positive, got {gamma_m}")));
        }
        Ok(Self { omega_m, gamma_m, m_eff: None, x_zpf: None })
    }

    pub fn with_mass(mut self, m_eff: f64, x_zpf: f64) -> Self {
        self.m_eff = Some(m_eff);
        self.x_zpf = Some(x_zpf);
        self
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_m
    }

    pub fn is_resolved(&self) -> bool {
        self.quality_factor() >= RESOLVED_QUALITY
    }
}

/// Vacuum electromechanical rates `g0[i][j]` (rad/s), cavity `i`, mode `j`.
///
/// Entries are magnitudes. The sign of the physical coupling is absorbed into
/// the pump phases.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    g0: Vec<Vec<f64>>,
}

impl CouplingMatrix {
    pub fn new(g0: Vec<Vec<f64>>) -> Result<Self> {
        let cols = g0.first().map_or(0, Vec::len);
        if g0.is_empty() || cols == 0 {
            return Err(Error::InvalidModel("coupling matrix is empty".into()));
        }
        if g0.iter().any(|row| row.len() != cols) {
            return Err(Error::InvalidModel("coupling matrix rows have unequal length".into()));
        }
        if let Some(bad) = g0.iter().flatten().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidModel(format!("vacuum coupling must be finite and non-negative, got {bad}")));
        }
        Ok(Self { g0 })
    }

    pub fn get(&self, cavity: usize, mode: usize) -> f64 {
        self.g0[cavity][mode]
    }

    pub fn rows(&self) -> usize {
        self.g0.len()
    }

    pub fn cols(&self) -> usize {
        self.g0[0].len()
    }

    pub fn as_rows(&self) -> &[Vec<f64>] {
        &self.g0
    }
}

/// Bias-voltage frequency tuning `sign * (alpha1 V^2 + alpha2 V^4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningCurve {
    /// rad/s per V^2
    pub alpha1: f64,
    /// rad/s per V^4
    pub alpha2: f64,
    /// +1 when the resonance moves up with bias, -1 when it moves down.
    pub sign: f64,
}

impl TuningCurve {
    pub fn new(alpha1: f64, alpha2: f64, sign: f64) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidModel(format!("tuning sign must be +1 or -1, got {sign}")));
        }
        Ok(Self { alpha1, alpha2, sign })
    }

    /// Frequency shift (rad/s) at bias `v` volts.
    pub fn shift(&self, v: f64) -> f64 {
        let v2 = v * v;
        self.sign * (self.alpha1 * v2 + self.alpha2 * v2 * v2)
    }

    /// Largest minus smallest shift over `[v_min, v_max]`.
    pub fn span(&self, v_min: f64, v_max: f64) -> f64 {
        // The curve is even and monotone in |V|.
        let lo = if v_min <= 0.0 && v_max >= 0.0 { 0.0 } else { v_min.abs().min(v_max.abs()) };
        let hi = v_min.abs().max(v_max.abs());
        (self.shift(hi) - self.shift(lo)).abs()
    }
}

/// Immutable physical description of the device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub cavities: Vec<CavityMode>,
    pub mechanics: Vec<MechanicalMode>,
    pub couplings: CouplingMatrix,
    pub tuning: Vec<Option<TuningCurve>>,
}

impl DeviceModel {
    pub fn new(
        cavities: Vec<CavityMode>,
        mechanics: Vec<MechanicalMode>,
        couplings: CouplingMatrix,
        tuning: Vec<Option<TuningCurve>>,
    ) -> Result<Self> {
        if cavities.is_empty() || cavities.len() > 3 {
            return Err(Error::InvalidModel(format!("expected 1 to 3 cavities, got {}", cavities.len())));
        }
        if mechanics.is_empty() || mechanics.len() > 2 {
            return Err(Error::InvalidModel(format!("expected 1 or 2 mechanical modes, got {}", mechanics.len())));
        }
        if couplings.rows() != cavities.len() || couplings.cols() != mechanics.len() {
            return Err(Error::Dimension(format!(
                "coupling matrix is {}x{} but device has {} cavities and {} mechanical modes",
                couplings.rows(),
                couplings.cols(),
                cavities.len(),
                mechanics.len()
            )));
        }
        if !tuning.is_empty() && tuning.len() != cavities.len() {
            return Err(Error::Dimension(format!(
                "{} tuning entries for {} cavities",
                tuning.len(),
                cavities.len()
            )));
        }
        for (a, ca) in cavities.iter().enumerate() {
            for cb in &cavities[a + 1..] {
                if ca.omega == cb.omega {
                    return Err(Error::InvalidModel(format!("two cavities share frequency {} rad/s", ca.omega)));
                }
            }
        }
        let tuning = if tuning.is_empty() { vec![None; cavities.len()] } else { tuning };
        Ok(Self { cavities, mechanics, couplings, tuning })
    }

    pub fn num_cavities(&self) -> usize {
        self.cavities.len()
    }

    pub fn num_mechanics(&self) -> usize {
        self.mechanics.len()
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.cavities.iter().map(CavityMode::kappa).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.cavities.iter().map(CavityMode::eta).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.mechanics.iter().map(|m| m.gamma_m).collect()
    }

    /// Indices of mechanical modes with `omega_m / gamma_m` below [`RESOLVED_QUALITY`].
    pub fn poorly_resolved_mechanics(&self) -> Vec<usize> {
        self.mechanics
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_resolved())
            .map(|(j, _)| j)
            .collect()
    }

    /// Keeps only the listed cavities (in the given order).
    pub fn select_cavities(&self, keep: &[usize]) -> Result<Self> {
        if let Some(bad) = keep.iter().find(|&&i| i >= self.num_cavities()) {
            return Err(Error::Dimension(format!("cavity index {bad} out of range")));
        }
        let cavities = keep.iter().map(|&i| self.cavities[i].clone()).collect();
        let g0 = keep.iter().map(|&i| self.couplings.as_rows()[i].clone()).collect();
        let tuning = keep.iter().map(|&i| self.tuning[i]).collect();
        Self::new(cavities, self.mechanics.clone(), CouplingMatrix::new(g0)?, tuning)
    }
}

/// LC resonance `1/sqrt(L C)` in rad/s.
pub fn lc_frequency(inductance: f64, capacitance: f64) -> Result<f64> {
    if !(inductance > 0.0) || !(capacitance > 0.0) {
        return Err(Error::Domain(format!(
            "inductance and capacitance must be positive, got L={inductance}, C={capacitance}"
        )));
    }
    Ok(1.0 / (inductance * capacitance).sqrt())
}

/// Fraction of the total capacitance that is mechanically compliant,
/// `C_m / (C_m + C_s)`.
pub fn participation_ratio(motional: f64, stray: f64) -> Result<f64> {
    if !(motional > 0.0) {
        return Err(Error::Domain(format!("motional capacitance must be positive, got {motional}")));
    }
    if !(stray >= 0.0) {
        return Err(Error::Domain(format!("stray capacitance must be non-negative, got {stray}")));
    }
    Ok(motional / (motional + stray))
}

/// Vacuum electromechanical coupling `|x_zpf * zeta * omega / (2 C_m) * dC_m/dv|`.
pub fn vacuum_coupling(x_zpf: f64, zeta: f64, omega: f64, motional: f64, dc_dv: f64) -> Result<f64> {
    if motional == 0.0 || !motional.is_finite() {
        return Err(Error::Domain("motional capacitance must be non-zero".into()));
    }
    if !(x_zpf > 0.0) || !(zeta > 0.0) || !(omega > 0.0) || !(motional > 0.0) {
        return Err(Error::Domain("x_zpf, zeta, omega and C_m must be positive".into()));
    }
    Ok((x_zpf * zeta * omega / (2.0 * motional) * dc_dv).abs())
}

/// Mean intracavity photon number of a coherent drive of amplitude `amplitude`
/// detuned by `detuning` from a cavity of linewidth `kappa`:
/// `4 E^2 / (kappa^2 + 4 Delta^2)`.
pub fn photons_from_drive(amplitude: f64, kappa: f64, detuning: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("cavity linewidth must be positive, got {kappa}")));
    }
    Ok(4.0 * amplitude * amplitude / (kappa * kappa + 4.0 * detuning * detuning))
}

/// Electromechanical cooperativity `4 g0^2 n / (kappa gamma_m)`.
pub fn cooperativity(g0: f64, photons: f64, kappa: f64, gamma_m: f64) -> f64 {
    4.0 * g0 * g0 * photons / (kappa * gamma_m)
}

/// Photon number that yields the requested cooperativity; inverse of
/// [`cooperativity`].
pub fn photons_for_cooperativity(target: f64, g0: f64, kappa: f64, gamma_m: f64) -> f64 {
    target * kappa * gamma_m / (4.0 * g0 * g0)
}

/// Least-squares coefficients of the bias tuning model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningFit {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Euclidean norm of the fit residuals (rad/s).
    pub residual_norm: f64,
    /// One-sigma standard errors of `(alpha1, alpha2)`; zero when the data
    /// has no residual degrees of freedom.
    pub std_errors: (f64, f64),
}

/// Fits `shift = alpha1 V^2 + alpha2 V^4` (no intercept) by ordinary least
/// squares.
pub fn voltage_tuning_fit(voltages: &[f64], shifts: &[f64]) -> Result<TuningFit> {
    if voltages.len() != shifts.len() {
        return Err(Error::Dimension(format!(
            "{} voltages but {} shifts",
            voltages.len(),
            shifts.len()
        )));
    }
    let mut magnitudes: Vec<f64> = voltages.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    magnitudes.sort_by(f64::total_cmp);
    magnitudes.dedup();
    if magnitudes.len() < 2 {
        return Err(Error::Fit("need at least two distinct non-zero |V| values".into()));
    }

    let n = voltages.len();
    // Scale columns to unit max so V^4 does not swamp the conditioning.
    let vmax = magnitudes[magnitudes.len() - 1];
    let s1 = vmax * vmax;
    let s2 = s1 * s1;
    let design = DMatrix::from_fn(n, 2, |r, c| {
        let v2 = voltages[r] * voltages[r];
        if c == 0 { v2 / s1 } else { v2 * v2 / s2 }
    });
    let rhs = DVector::from_column_slice(shifts);
    let qr = design.clone().qr();
    let r = qr.r();
    if r[(1, 1)].abs() <= 1e-12 * r[(0, 0)].abs() {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let qt_b = qr.q().transpose() * &rhs;
    let beta = r
        .solve_upper_triangular(&qt_b)
        .ok_or_else(|| Error::Fit("triangular solve failed".into()))?;
    let residual = &rhs - &design * &beta;
    let residual_norm = residual.norm();

    let std_errors = if n > 2 {
        let sigma2 = residual_norm * residual_norm / (n - 2) as f64;
        let rinv = r
            .try_inverse()
            .ok_or_else(|| Error::Fit("singular normal matrix".into()))?;
        let cov = &rinv * rinv.transpose() * sigma2;
        (cov[(0, 0)].sqrt() / s1, cov[(1, 1)].sqrt() / s2)
    } else {
        (0.0, 0.0)
    };

    Ok(TuningFit {
        alpha1: beta[0] / s1,
        alpha2: beta[1] / s2,
        residual_norm,
        std_errors,
    })
}
