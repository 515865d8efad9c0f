//! Closed-form two-port results: transmission ratio, isolating phase,
//! forward transmission at the isolating phase, and single-mode conversion.
//!
//! Port and mode labels follow the isolator convention: the control phase
//! sits on the drive coupling cavity 2 to mechanical mode 2, and mode `j`
//! has inverse susceptibility `Sigma_j(omega) = 1 - 2i (omega + delta_j) / Gamma_j`.

use num_complex::Complex64;

use crate::device::{CavityMode, CouplingMatrix, DeviceModel, MechanicalMode};
use crate::effective::EffectiveModel;
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Cooperativity above which the impedance-matched form of the transmission
/// ratio is considered accurate.
pub const HIGH_COOPERATIVITY: f64 = 10.0;

/// Two cavities, two mechanical modes, one control phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPortWorkingPoint {
    /// `C[i][j]` for cavity `i`, mode `j`, referenced to `gammas[j]`.
    pub cooperativities: [[f64; 2]; 2],
    /// Effective mechanical detunings `delta_j` (rad/s).
    pub detunings: [f64; 2],
    pub phi: f64,
    /// Effective mechanical linewidths `Gamma_j` (rad/s).
    pub gammas: [f64; 2],
    pub etas: [f64; 2],
}

impl TwoPortWorkingPoint {
    /// Equal cooperativities and the antisymmetric detuning pattern
    /// `(delta_1, delta_2) = (delta, -delta)`.
    pub fn symmetric(c: f64, delta: f64, phi: f64, gammas: [f64; 2], etas: [f64; 2]) -> Self {
        Self { cooperativities: [[c; 2]; 2], detunings: [delta, -delta], phi, gammas, etas }
    }

    pub fn with_phi(self, phi: f64) -> Self {
        Self { phi, ..self }
    }

    /// `Sigma_j(omega)`.
    pub fn sigma(&self, j: usize, omega: f64) -> Complex64 {
        Complex64::new(1.0, -2.0 * (omega + self.detunings[j]) / self.gammas[j])
    }

    /// True when every cooperativity is large enough for the matched-port
    /// approximation behind [`lambda_ratio`].
    pub fn is_high_cooperativity(&self) -> bool {
        self.cooperativities.iter().flatten().all(|&c| c >= HIGH_COOPERATIVITY)
    }

    fn weights(&self) -> (f64, f64) {
        let c = &self.cooperativities;
        ((c[0][0] * c[1][0]).sqrt(), (c[0][1] * c[1][1]).sqrt())
    }

    /// Resonant couplings realizing this working point for cavities of total
    /// linewidth `kappas`.
    pub fn couplings(&self, kappas: [f64; 2]) -> Vec<Vec<Complex64>> {
        (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| {
                        let mag = (self.cooperativities[i][j] * kappas[i] * self.gammas[j]).sqrt() / 2.0;
                        if (i, j) == (1, 1) { Complex64::from_polar(mag, -self.phi) } else { Complex64::new(mag, 0.0) }
                    })
                    .collect()
            })
            .collect()
    }

    /// Device and effective model (no off-resonant terms) on which the
    /// scattering engine reproduces this working point.
    pub fn engine_model(&self, kappas: [f64; 2]) -> Result<(DeviceModel, EffectiveModel)> {
        let cavities = (0..2)
            .map(|i| CavityMode::new(6.0e10 + 2.0e9 * i as f64, kappas[i] * (1.0 - self.etas[i]), kappas[i] * self.etas[i]))
            .collect::<Result<Vec<_>>>()?;
        let mechanics = vec![MechanicalMode::new(2.7e7, self.gammas[0])?, MechanicalMode::new(3.5e7, self.gammas[1])?];
        let device = DeviceModel::new(cavities, mechanics, CouplingMatrix::new(vec![vec![1.0; 2]; 2])?, vec![])?;
        let eff = EffectiveModel::from_couplings(self.couplings(kappas), self.detunings.to_vec(), self.gammas.to_vec())?;
        Ok((device, eff))
    }
}

/// Backward-to-forward ratio `lambda = S12 / S21`.
pub fn lambda_ratio(wp: &TwoPortWorkingPoint, omega: f64) -> Result<Complex64> {
    let (a, b) = wp.weights();
    let (s1, s2) = (wp.sigma(0, omega), wp.sigma(1, omega));
    let num = a * s2 + b * s1 * Complex64::from_polar(1.0, wp.phi);
    let den = a * s2 + b * s1 * Complex64::from_polar(1.0, -wp.phi);
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularRatio);
    }
    Ok(num / den)
}

/// Phase `phi` giving perfect isolation (`lambda = 0`) at equal
/// cooperativities, from the tangent condition; the branch is chosen by the
/// smaller `|lambda|`.
pub fn optimal_phase(delta: f64, gamma1: f64, gamma2: f64, omega: f64) -> Result<f64> {
    let num = delta * (gamma1 + gamma2) + omega * (gamma2 - gamma1);
    let den = gamma1 * gamma2 / 2.0 - 2.0 * (delta * delta - omega * omega);
    if num == 0.0 && den == 0.0 {
        return Err(Error::NoIsolatingPhase("tangent condition is 0/0".into()));
    }
    if delta == 0.0 && omega == 0.0 {
        return Err(Error::NoIsolatingPhase("zero detuning at zero probe frequency is bidirectional".into()));
    }
    let a = num.atan2(den);
    let b = if a > 0.0 { a - std::f64::consts::PI } else { a + std::f64::consts::PI };
    let wp = TwoPortWorkingPoint::symmetric(1.0, delta, a, [gamma1, gamma2], [1.0, 1.0]);
    let la = lambda_ratio(&wp, omega).map(|l| l.norm()).unwrap_or(f64::INFINITY);
    let lb = lambda_ratio(&wp.with_phi(b), omega).map(|l| l.norm()).unwrap_or(f64::INFINITY);
    Ok(if la <= lb { a } else { b })
}

/// Phase minimizing `|lambda|` for arbitrary cooperativities and per-mode
/// detunings: `e^{i phi} = -sqrt(C11 C21 / C12 C22) Sigma_2 / Sigma_1`.
/// Isolation is perfect when that right-hand side has unit modulus.
pub fn isolating_phase(wp: &TwoPortWorkingPoint, omega: f64) -> Result<f64> {
    let (a, b) = wp.weights();
    if a == 0.0 || b == 0.0 {
        return Err(Error::NoIsolatingPhase("one interference path has zero cooperativity".into()));
    }
    let z = -(a / b) * wp.sigma(1, omega) / wp.sigma(0, omega);
    if z.im == 0.0 && z.re > 0.0 {
        return Err(Error::NoIsolatingPhase("interference paths are in phase for every pump phase".into()));
    }
    Ok(z.arg())
}

/// Forward transmission on resonance at the isolating phase for equal
/// cooperativity `c` and equal damping `gamma`; returns `(S21, |S21|^2)`.
pub fn forward_transmission(c: f64, delta: f64, gamma: f64, eta1: f64, eta2: f64) -> (Complex64, f64) {
    let x = 1.0 + (1.0 + 4.0 * delta * delta / (gamma * gamma)) / (2.0 * c);
    let s = -(eta1 * eta2).sqrt() * 4.0 * I * delta * Complex64::new(1.0, -2.0 * delta / gamma) / (c * gamma * x * x);
    (s, s.norm_sqr())
}

/// Forward transmission on resonance for arbitrary cooperativities and phase.
pub fn forward_transmission_general(wp: &TwoPortWorkingPoint) -> Complex64 {
    let c = &wp.cooperativities;
    let (s1, s2) = (wp.sigma(0, 0.0), wp.sigma(1, 0.0));
    let (a, b) = wp.weights();
    let fwd = a * s2 + b * s1 * Complex64::from_polar(1.0, -wp.phi);
    let bwd = a * s2 + b * s1 * Complex64::from_polar(1.0, wp.phi);
    let d1 = c[0][0] * s2 + c[0][1] * s1 + s1 * s2;
    let d2 = c[1][0] * s2 + c[1][1] * s1 + s1 * s2;
    -2.0 * (wp.etas[0] * wp.etas[1]).sqrt() * s1 * s2 * fwd / (d1 * d2 - fwd * bwd)
}

/// Cooperativity maximizing forward transmission: `2C = 1 + 4 delta^2 / Gamma^2`.
pub fn peak_cooperativity(delta: f64, gamma: f64) -> f64 {
    (1.0 + 4.0 * delta * delta / (gamma * gamma)) / 2.0
}

/// Detuning at which cooperativity `c` is optimal: `(Gamma / 2) sqrt(2C - 1)`.
pub fn peak_detuning(c: f64, gamma: f64) -> Result<f64> {
    if c < 0.5 {
        return Err(Error::Domain(format!("peak condition needs C >= 1/2, got {c}")));
    }
    Ok(gamma / 2.0 * (2.0 * c - 1.0).sqrt())
}

/// Cooperativity whose peak transmission `eta1 eta2 (1 - 1/(2C))` has the
/// requested insertion loss (dB).
pub fn cooperativity_for_insertion_loss(insertion_loss_db: f64, eta_product: f64) -> Result<f64> {
    let t = 10f64.powf(-insertion_loss_db / 10.0);
    if !(t < eta_product) {
        return Err(Error::Domain(format!(
            "insertion loss {insertion_loss_db} dB is below the internal-loss floor {:.3} dB",
            -10.0 * eta_product.log10()
        )));
    }
    Ok(1.0 / (2.0 * (1.0 - t / eta_product)))
}

/// Single-mode conversion `|T|^2 = 4 eta1 eta2 C1 C2 / (1 + C1 + C2)^2`.
pub fn conversion_efficiency(c1: f64, c2: f64, eta1: f64, eta2: f64) -> f64 {
    let d = 1.0 + c1 + c2;
    4.0 * eta1 * eta2 * c1 * c2 / (d * d)
}

/// On-resonance reflections `(|S11|^2, |S22|^2)` of the single-mode converter.
pub fn reflection_coefficients(c1: f64, c2: f64, eta1: f64, eta2: f64) -> (f64, f64) {
    let d = 1.0 + c1 + c2;
    let r1 = (d - 2.0 * eta1 * (1.0 + c2)) / d;
    let r2 = (d - 2.0 * eta2 * (1.0 + c1)) / d;
    (r1 * r1, r2 * r2)
}

/// Conversion bandwidth `Gamma_T = gamma_m + Gamma_1 + Gamma_2`.
pub fn conversion_bandwidth(gamma_m: f64, gamma1: f64, gamma2: f64) -> f64 {
    gamma_m + gamma1 + gamma2
}

/// Optical damping `4 G^2 / kappa` of a single drive.
pub fn optical_damping(g: f64, kappa: f64) -> f64 {
    4.0 * g * g / kappa
}
