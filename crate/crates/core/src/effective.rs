//! Linearized, frame-rotated parameters: resonant couplings `G`, off-resonant
//! couplings `F`, and the renormalized mechanical detunings and damping.

use num_complex::Complex64;

use crate::device::DeviceModel;
use crate::error::{Error, Result};

/// Red-sideband pump settings, one drive per (cavity, mechanical mode).
#[derive(Debug, Clone, PartialEq)]
pub struct PumpConfiguration {
    /// Intracavity photon number `n[i][j]`.
    pub photons: Vec<Vec<f64>>,
    /// Drive phase `phi[i][j]` in radians.
    pub phases: Vec<Vec<f64>>,
    /// Sideband detuning `delta0[j]` (rad/s) shared by all drives on mode `j`.
    pub sideband_detuning: Vec<f64>,
}

impl PumpConfiguration {
    pub fn new(photons: Vec<Vec<f64>>, phases: Vec<Vec<f64>>, sideband_detuning: Vec<f64>) -> Result<Self> {
        let rows = photons.len();
        let cols = photons.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidModel("pump photon matrix is empty".into()));
        }
        if phases.len() != rows
            || photons.iter().chain(&phases).any(|r| r.len() != cols)
            || sideband_detuning.len() != cols
        {
            return Err(Error::Dimension("pump photon, phase and detuning shapes disagree".into()));
        }
        if let Some(bad) = photons.iter().flatten().find(|n| !(**n >= 0.0) || !n.is_finite()) {
            return Err(Error::InvalidModel(format!("photon numbers must be finite and non-negative, got {bad}")));
        }
        if phases.iter().flatten().chain(&sideband_detuning).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("pump phases and detunings must be finite".into()));
        }
        Ok(Self { photons, phases, sideband_detuning })
    }

    /// All pumps off for a device of the given shape.
    pub fn off(cavities: usize, mechanics: usize) -> Self {
        Self {
            photons: vec![vec![0.0; mechanics]; cavities],
            phases: vec![vec![0.0; mechanics]; cavities],
            sideband_detuning: vec![0.0; mechanics],
        }
    }

    pub fn num_cavities(&self) -> usize {
        self.photons.len()
    }

    pub fn num_mechanics(&self) -> usize {
        self.sideband_detuning.len()
    }

    /// Copy with the phase of drive `(i, j)` replaced.
    pub fn with_phase(&self, i: usize, j: usize, phi: f64) -> Self {
        let mut out = self.clone();
        out.phases[i][j] = phi;
        out
    }

    /// Copy with every phase shifted by `offset`.
    pub fn shift_phases(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.phases.iter_mut().flatten().for_each(|p| *p += offset);
        out
    }
}

/// Whether the off-resonant cross couplings `F` enter the effective model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffResonant {
    #[default]
    Include,
    /// Bare rotating-wave model: `F = 0`, `delta = delta0`, `Gamma = gamma`.
    Neglect,
}

/// Linearized couplings and renormalized mechanical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    pub g: Vec<Vec<Complex64>>,
    pub f: Vec<Vec<Complex64>>,
    /// Effective detuning `delta_j` (rad/s).
    pub delta_eff: Vec<f64>,
    /// Effective damping `Gamma_m,j` (rad/s).
    pub gamma_eff: Vec<f64>,
    /// Intrinsic damping `gamma_m,j` (rad/s).
    pub gamma_int: Vec<f64>,
    /// Sideband detunings the model was built with.
    pub delta0: Vec<f64>,
    /// Frame separation `omega_m2 - omega_m1 + delta0_2 - delta0_1`; `None`
    /// for a single mechanical mode.
    pub delta_omega_m: Option<f64>,
}

impl EffectiveModel {
    /// Model with explicit couplings and mechanical parameters and no
    /// off-resonant terms. `gamma` serves as both intrinsic and effective damping.
    pub fn from_couplings(g: Vec<Vec<Complex64>>, delta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let cols = g.first().map_or(0, Vec::len);
        if g.is_empty() || g.iter().any(|r| r.len() != cols) || delta.len() != cols || gamma.len() != cols {
            return Err(Error::Dimension("coupling and mechanical parameter shapes disagree".into()));
        }
        if gamma.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidModel("mechanical damping must be positive".into()));
        }
        let f = vec![vec![Complex64::new(0.0, 0.0); cols]; g.len()];
        Ok(Self {
            g,
            f,
            delta_eff: delta.clone(),
            gamma_eff: gamma.clone(),
            gamma_int: gamma,
            delta0: delta,
            delta_omega_m: None,
        })
    }

    pub fn num_cavities(&self) -> usize {
        self.g.len()
    }

    pub fn num_mechanics(&self) -> usize {
        self.delta_eff.len()
    }

    /// Same model with `F` zeroed and the mechanics reset to their bare values.
    pub fn without_off_resonant(&self) -> Self {
        let mut out = self.clone();
        out.f.iter_mut().flatten().for_each(|x| *x = Complex64::new(0.0, 0.0));
        out.delta_eff = self.delta0.clone();
        out.gamma_eff = self.gamma_int.clone();
        out
    }

    /// Extra damping `4 kappa_i |F_ij|^2 / (4 dw^2 + kappa_i^2)` that cavity
    /// `i` imposes on mode `j`.
    pub fn off_resonant_damping(&self, kappas: &[f64]) -> Vec<Vec<f64>> {
        let dw = self.delta_omega_m.unwrap_or(0.0);
        self.f
            .iter()
            .zip(kappas)
            .map(|(row, &k)| {
                row.iter()
                    .map(|f| {
                        let f2 = f.norm_sqr();
                        if f2 == 0.0 { 0.0 } else { 4.0 * k * f2 / (4.0 * dw * dw + k * k) }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Builds the effective model including off-resonant terms.
pub fn build_effective(device: &DeviceModel, pumps: &PumpConfiguration) -> Result<EffectiveModel> {
    build_effective_with(device, pumps, OffResonant::Include)
}

pub fn build_effective_with(
    device: &DeviceModel,
    pumps: &PumpConfiguration,
    mode: OffResonant,
) -> Result<EffectiveModel> {
    let (nc, nm) = (device.num_cavities(), device.num_mechanics());
    if pumps.num_cavities() != nc || pumps.num_mechanics() != nm {
        return Err(Error::Dimension(format!(
            "pumps are {}x{} but device is {nc}x{nm}",
            pumps.num_cavities(),
            pumps.num_mechanics()
        )));
    }

    // Complex drive amplitude sqrt(n) e^{-i phi} scaled by g0 of the coupled pair.
    let drive = |i: usize, j: usize| Complex64::from_polar(pumps.photons[i][j].sqrt(), -pumps.phases[i][j]);
    let g: Vec<Vec<Complex64>> = (0..nc)
        .map(|i| (0..nm).map(|j| device.couplings.get(i, j) * drive(i, j)).collect())
        .collect();

    let gamma_int = device.gammas();
    let delta0 = pumps.sideband_detuning.clone();
    let zero = Complex64::new(0.0, 0.0);

    if nm == 1 {
        return Ok(EffectiveModel {
            g,
            f: vec![vec![zero; 1]; nc],
            delta_eff: delta0.clone(),
            gamma_eff: gamma_int.clone(),
            gamma_int,
            delta0,
            delta_omega_m: None,
        });
    }

    let dw = device.mechanics[1].omega_m - device.mechanics[0].omega_m + delta0[1] - delta0[0];
    if dw == 0.0 || !dw.is_finite() {
        return Err(Error::Validity(
            "mechanical frames coincide (delta_omega_m = 0); off-resonant model is degenerate".into(),
        ));
    }

    // F_i1 uses the drive addressing mode 2 and vice versa.
    let f: Vec<Vec<Complex64>> = (0..nc)
        .map(|i| {
            vec![
                device.couplings.get(i, 0) * drive(i, 1),
                device.couplings.get(i, 1) * drive(i, 0),
            ]
        })
        .collect();

    let mut model = EffectiveModel {
        g,
        f,
        delta_eff: delta0.clone(),
        gamma_eff: gamma_int.clone(),
        gamma_int,
        delta0,
        delta_omega_m: Some(dw),
    };
    match mode {
        OffResonant::Include => {
            let (d, gm) = renormalize_mechanics(&model.f, &device.kappas(), dw, &model.delta0, &model.gamma_int)?;
            model.delta_eff = d;
            model.gamma_eff = gm;
        }
        OffResonant::Neglect => {
            model.f.iter_mut().flatten().for_each(|x| *x = zero);
        }
    }
    Ok(model)
}

/// Closed-form shifts and damping from the off-resonant couplings.
///
/// Returns `(delta_eff, gamma_eff)` for a two-mode model.
pub fn renormalize_mechanics(
    f: &[Vec<Complex64>],
    kappas: &[f64],
    delta_omega_m: f64,
    delta0: &[f64],
    gamma: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if f.len() != kappas.len() || delta0.len() != 2 || gamma.len() != 2 || f.iter().any(|r| r.len() != 2) {
        return Err(Error::Dimension("renormalization expects N x 2 couplings and two modes".into()));
    }
    if kappas.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Domain("cavity linewidths must be positive".into()));
    }
    if delta_omega_m == 0.0 {
        return Err(Error::Domain("delta_omega_m must be non-zero".into()));
    }
    let dw2 = delta_omega_m * delta_omega_m;
    let mut shift = [0.0; 2];
    let mut damp = [0.0; 2];
    for (row, &k) in f.iter().zip(kappas) {
        let denom = 4.0 * dw2 + k * k;
        for j in 0..2 {
            let w = 4.0 * row[j].norm_sqr() / denom;
            shift[j] += w;
            damp[j] += k * w;
        }
    }
    let delta = vec![
        delta0[0] + delta_omega_m * shift[0],
        delta0[1] - delta_omega_m * shift[1],
    ];
    let gamma_eff = vec![gamma[0] + damp[0], gamma[1] + damp[1]];
    Ok((delta, gamma_eff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ValidityFlag {
    Pass,
    Warn,
    Fail,
}

/// Rotating-wave approximation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// `max |F_ij| / |delta_omega_m|`
    pub f_over_dw: f64,
    /// `max kappa_i / omega_m,j`
    pub kappa_over_omega_m: f64,
    /// `max kappa_i / (2 |delta_omega_m|)`
    pub kappa_over_dw: f64,
    pub flag: ValidityFlag,
}

pub const RWA_WARN: f64 = 0.1;
pub const RWA_FAIL: f64 = 1.0;

/// Compares the coupling and loss rates with the frequency separations that
/// the rotating-wave treatment assumes to be large.
///
/// The linewidth ratio is taken against the half linewidth, `kappa / 2`.
pub fn rwa_validity(effective: &EffectiveModel, device: &DeviceModel) -> ValidityReport {
    let pumped: Vec<bool> = effective
        .g
        .iter()
        .zip(&effective.f)
        .map(|(g, f)| g.iter().chain(f).any(|x| x.norm() > 0.0))
        .collect();
    let kappa_max = device
        .cavities
        .iter()
        .zip(&pumped)
        .filter(|(_, p)| **p)
        .map(|(c, _)| c.kappa())
        .fold(0.0, f64::max);
    let omega_min = device.mechanics.iter().map(|m| m.omega_m).fold(f64::INFINITY, f64::min);
    let f_max = effective.f.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max);

    let (f_over_dw, kappa_over_dw) = match effective.delta_omega_m {
        Some(dw) => (f_max / dw.abs(), kappa_max / (2.0 * dw.abs())),
        None => (0.0, 0.0),
    };
    let kappa_over_omega_m = kappa_max / omega_min;
    let worst = f_over_dw.max(kappa_over_omega_m).max(kappa_over_dw);
    let flag = if worst >= RWA_FAIL {
        ValidityFlag::Fail
    } else if worst >= RWA_WARN {
        ValidityFlag::Warn
    } else {
        ValidityFlag::Pass
    };
    ValidityReport { f_over_dw, kappa_over_omega_m, kappa_over_dw, flag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pumps_off_is_bare() {
        let dev = presets::isolator_device();
        let eff = build_effective(&dev, &PumpConfiguration::off(2, 2)).unwrap();
        assert!(eff.g.iter().chain(&eff.f).flatten().all(|x| x.norm() == 0.0));
        assert_eq!(eff.delta_eff, vec![0.0, 0.0]);
        assert_eq!(eff.gamma_eff, dev.gammas());
        let report = rwa_validity(&eff, &dev);
        assert_eq!(report.flag, ValidityFlag::Pass);
        assert_eq!((report.f_over_dw, report.kappa_over_dw, report.kappa_over_omega_m), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_drive_populates_partner_f() {
        let dev = presets::isolator_device();
        let mut pumps = PumpConfiguration::off(2, 2);
        pumps.photons[0][0] = 1e6;
        pumps.phases[0][0] = 0.3;
        let eff = build_effective(&dev, &pumps).unwrap();
        assert_eq!(eff.f[0][0].norm(), 0.0);
        let g0_12 = dev.couplings.get(0, 1);
        assert_relative_eq!(eff.f[0][1].norm(), g0_12 * 1e3, max_relative = 1e-14);
        assert_relative_eq!(eff.f[0][1].arg(), -0.3, max_relative = 1e-14);
        assert_relative_eq!(eff.g[0][0].norm(), dev.couplings.get(0, 0) * 1e3, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_frames_rejected() {
        let dev = presets::isolator_device();
        let mut pumps = PumpConfiguration::off(2, 2);
        pumps.sideband_detuning = vec![0.0, dev.mechanics[0].omega_m - dev.mechanics[1].omega_m];
        assert!(matches!(build_effective(&dev, &pumps), Err(Error::Validity(_))));
    }

    #[test]
    fn renormalize_identity_and_half_kappa() {
        let zero = vec![vec![c(0.0, 0.0); 2]; 2];
        let (d, g) = renormalize_mechanics(&zero, &[1.0, 2.0], 5.0, &[0.1, -0.2], &[0.3, 0.4]).unwrap();
        assert_eq!((d, g), (vec![0.1, -0.2], vec![0.3, 0.4]));

        let k = 7.0;
        let f = vec![vec![c(k / 2.0, 0.0), c(0.0, 0.0)]];
        let (d, g) = renormalize_mechanics(&f, &[k], k / 2.0, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(g[0], 1.0 + k / 2.0, max_relative = 1e-14);
        assert!(d[0] > 0.0);
        assert_eq!(g[1], 1.0);
    }

    #[test]
    fn shift_signs_opposite() {
        let f = vec![vec![c(1.0, 2.0), c(0.5, -1.0)]];
        let (d, _) = renormalize_mechanics(&f, &[3.0], 4.0, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(d[0] > 0.0 && d[1] < 0.0);
        let (d, _) = renormalize_mechanics(&f, &[3.0], -4.0, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(d[0] < 0.0 && d[1] > 0.0);
    }

    #[test]
    fn shift_decays_with_frame_separation() {
        let f = vec![vec![c(1e3, 0.0), c(2e3, 0.0)]];
        let shift = |dw: f64| renormalize_mechanics(&f, &[1e4], dw, &[0.0, 0.0], &[1.0, 1.0]).unwrap().0[0];
        let (a, b) = (shift(1e7), shift(2e7));
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-5);
    }

    #[test]
    fn neglect_mode_matches_bare_model() {
        let dev = presets::isolator_device();
        let pumps = PumpConfiguration::new(
            vec![vec![1e6, 2e6], vec![3e6, 4e6]],
            vec![vec![0.0, 0.0], vec![0.0, 1.0]],
            vec![100.0, -50.0],
        )
        .unwrap();
        let full = build_effective(&dev, &pumps).unwrap();
        let bare = build_effective_with(&dev, &pumps, OffResonant::Neglect).unwrap();
        assert_eq!(full.without_off_resonant(), bare);
        assert!(full.gamma_eff.iter().zip(&full.gamma_int).all(|(a, b)| a > b));
    }

    #[test]
    fn paper_isolator_is_warn() {
        let dev = presets::isolator_device();
        let pumps = PumpConfiguration::new(vec![vec![1e5; 2]; 2], vec![vec![0.0; 2]; 2], vec![0.0; 2]).unwrap();
        let eff = build_effective(&dev, &pumps).unwrap();
        let report = rwa_validity(&eff, &dev);
        assert_eq!(report.flag, ValidityFlag::Warn, "{report:?}");
    }

    #[test]
    fn tiny_kappa_passes() {
        let dev = presets::isolator_device();
        let dw = dev.mechanics[1].omega_m - dev.mechanics[0].omega_m;
        let mut cav = dev.cavities.clone();
        for cm in &mut cav {
            cm.kappa_int = 0.0;
            cm.kappa_ext = 1e-3 * dw;
        }
        let dev = DeviceModel::new(cav, dev.mechanics.clone(), dev.couplings.clone(), vec![]).unwrap();
        let pumps = PumpConfiguration::new(vec![vec![1.0; 2]; 2], vec![vec![0.0; 2]; 2], vec![0.0; 2]).unwrap();
        let eff = build_effective(&dev, &pumps).unwrap();
        assert_eq!(rwa_validity(&eff, &dev).flag, ValidityFlag::Pass);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pumps_strategy() -> impl Strategy<Value = PumpConfiguration> {
            (
                proptest::collection::vec(0.0..1e7f64, 4),
                proptest::collection::vec(-3.2..3.2f64, 4),
                proptest::collection::vec(-1e3..1e3f64, 2),
            )
                .prop_map(|(n, p, d)| {
                    PumpConfiguration::new(
                        vec![n[..2].to_vec(), n[2..].to_vec()],
                        vec![p[..2].to_vec(), p[2..].to_vec()],
                        d,
                    )
                    .unwrap()
                })
        }

        proptest! {
            #[test]
            fn global_phase_is_invisible(pumps in pumps_strategy(), offset in -6.0..6.0f64) {
                let dev = presets::isolator_device();
                let a = build_effective(&dev, &pumps).unwrap();
                let b = build_effective(&dev, &pumps.shift_phases(offset)).unwrap();
                for (x, y) in a.g.iter().flatten().zip(b.g.iter().flatten()) {
                    prop_assert!((x.norm() - y.norm()).abs() <= 1e-12 * x.norm().max(1.0));
                }
                for j in 0..2 {
                    prop_assert!((a.delta_eff[j] - b.delta_eff[j]).abs() <= 1e-9 * a.delta_eff[j].abs().max(1.0));
                    prop_assert!((a.gamma_eff[j] - b.gamma_eff[j]).abs() <= 1e-9 * a.gamma_eff[j]);
                }
            }

            #[test]
            fn gamma_monotone_in_f(f1 in 0.0..1e5f64, f2 in 0.0..1e5f64, scale in 1.0..3.0f64, dw in 1e5..1e7f64) {
                let k = [1.5e7, 1.2e7];
                let base = vec![vec![c(f1, 0.0), c(f2, 0.0)], vec![c(f2, 0.0), c(f1, 0.0)]];
                let bigger = vec![vec![c(f1 * scale, 0.0), c(f2, 0.0)], vec![c(f2, 0.0), c(f1, 0.0)]];
                let (_, g0) = renormalize_mechanics(&base, &k, dw, &[0.0, 0.0], &[25.0, 50.0]).unwrap();
                let (_, g1) = renormalize_mechanics(&bigger, &k, dw, &[0.0, 0.0], &[25.0, 50.0]).unwrap();
                prop_assert!(g1[0] >= g0[0]);
                prop_assert!(g0[0] >= 25.0 && g0[1] >= 50.0);
            }
        }
    }
}
