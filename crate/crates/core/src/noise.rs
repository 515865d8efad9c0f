//! Thermal occupancies, amplifier chain, output power spectral density and
//! added noise per conversion path.

use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::scattering::{Bath, ScatteringResult};
use crate::units::{from_db, HBAR, K_B};

/// Smallest `|S_ij|` accepted when referring noise to the input.
pub const MIN_REFERRED_TRANSMISSION: f64 = 1e-6;

/// Tolerance below zero accepted by [`infer_amp_noise`].
pub const AMP_NOISE_TOLERANCE: f64 = 0.01;

/// Bose-Einstein occupancy `1 / (exp(hbar omega / kB T) - 1)`, zero at `T = 0`.
pub fn bose_occupancy(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature must be non-negative, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// Bath occupancies seen by the cavities and mechanical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEnvironment {
    pub cavity_temps: Option<Vec<f64>>,
    pub mech_temps: Option<Vec<f64>>,
    /// Photon occupancy of the port and internal baths of each cavity.
    pub cavity_occupancy: Vec<f64>,
    /// Phonon occupancy of each mechanical bath.
    pub mech_occupancy: Vec<f64>,
}

impl ThermalEnvironment {
    pub fn from_occupancies(cavity_occupancy: Vec<f64>, mech_occupancy: Vec<f64>) -> Result<Self> {
        if cavity_occupancy.iter().chain(&mech_occupancy).any(|n| !(*n >= 0.0) || !n.is_finite()) {
            return Err(Error::Domain("occupancies must be finite and non-negative".into()));
        }
        Ok(Self { cavity_temps: None, mech_temps: None, cavity_occupancy, mech_occupancy })
    }

    pub fn from_temperatures(device: &DeviceModel, cavity_temps: Vec<f64>, mech_temps: Vec<f64>) -> Result<Self> {
        if cavity_temps.len() != device.num_cavities() || mech_temps.len() != device.num_mechanics() {
            return Err(Error::Dimension("one temperature per cavity and mechanical mode required".into()));
        }
        let cavity_occupancy = device
            .cavities
            .iter()
            .zip(&cavity_temps)
            .map(|(c, &t)| bose_occupancy(c.omega, t))
            .collect::<Result<_>>()?;
        let mech_occupancy = device
            .mechanics
            .iter()
            .zip(&mech_temps)
            .map(|(m, &t)| bose_occupancy(m.omega_m, t))
            .collect::<Result<_>>()?;
        Ok(Self {
            cavity_temps: Some(cavity_temps),
            mech_temps: Some(mech_temps),
            cavity_occupancy,
            mech_occupancy,
        })
    }

    /// All baths at zero temperature.
    pub fn vacuum(cavities: usize, mechanics: usize) -> Self {
        Self {
            cavity_temps: None,
            mech_temps: None,
            cavity_occupancy: vec![0.0; cavities],
            mech_occupancy: vec![0.0; mechanics],
        }
    }

    fn bath_occupancy(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Internal(i) | Bath::OffResonant { cavity: i, .. } => self.cavity_occupancy[i],
            Bath::Mechanical(j) => self.mech_occupancy[j],
        }
    }
}

/// Gain (dB) and added quanta of the amplifier chain behind each port.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierChain {
    pub gain_db: Vec<f64>,
    pub n_amp: Vec<f64>,
}

impl AmplifierChain {
    pub fn new(gain_db: Vec<f64>, n_amp: Vec<f64>) -> Result<Self> {
        if gain_db.len() != n_amp.len() {
            return Err(Error::Dimension("one gain and one added-noise value per port required".into()));
        }
        if n_amp.iter().any(|n| !(*n >= 0.0)) || gain_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("amplifier noise must be non-negative and gains finite".into()));
        }
        Ok(Self { gain_db, n_amp })
    }
}

/// Whether added noise is quoted at the output or referred back to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Referral {
    /// Divided by `|S_ij|^2`.
    #[default]
    Input,
    /// Quanta at output port `i`, not divided by the path gain.
    Output,
}

fn check_env(scattering: &ScatteringResult, env: &ThermalEnvironment) -> Result<()> {
    let n = scattering.s_matrices.first().map_or(0, |s| s.nrows());
    let m = scattering.mech_transfer.first().map_or(0, |t| t.ncols());
    if env.cavity_occupancy.len() != n || env.mech_occupancy.len() != m {
        return Err(Error::Dimension(format!(
            "environment has {} cavity and {} mechanical baths, scattering has {n} ports and {m} modes",
            env.cavity_occupancy.len(),
            env.mech_occupancy.len()
        )));
    }
    if scattering.s_matrices.len() != scattering.omega_grid.len()
        || scattering.bath_transfer.len() != scattering.omega_grid.len()
    {
        return Err(Error::Dimension("scattering result is not aligned with its grid".into()));
    }
    Ok(())
}

/// Thermal quanta leaving port `port` at grid point `k`, normal ordered:
/// `sum_j |S_ij|^2 N_j + sum_b |T_ib|^2 N_b`.
fn output_quanta(scattering: &ScatteringResult, env: &ThermalEnvironment, k: usize, port: usize) -> f64 {
    let s = &scattering.s_matrices[k];
    let t = &scattering.bath_transfer[k];
    let from_ports: f64 = (0..s.ncols()).map(|j| s[(port, j)].norm_sqr() * env.cavity_occupancy[j]).sum();
    let from_baths: f64 = scattering
        .channels
        .iter()
        .enumerate()
        .map(|(b, &bath)| t[(port, b)].norm_sqr() * env.bath_occupancy(bath))
        .sum();
    from_ports + from_baths
}

/// Single-sided output PSD (W/Hz) of port `port`:
/// `hbar (omega_i + omega) 10^{G/10} (1 + n_amp + n_out(omega))`.
pub fn output_noise_psd(
    scattering: &ScatteringResult,
    device: &DeviceModel,
    env: &ThermalEnvironment,
    chain: &AmplifierChain,
    port: usize,
) -> Result<Vec<f64>> {
    check_env(scattering, env)?;
    if port >= device.num_cavities() || chain.gain_db.len() != device.num_cavities() {
        return Err(Error::Dimension(format!("port {port} or amplifier chain does not match the device")));
    }
    let gain = from_db(chain.gain_db[port]);
    let omega_c = device.cavities[port].omega;
    Ok(scattering
        .omega_grid
        .iter()
        .enumerate()
        .map(|(k, &w)| HBAR * (omega_c + w) * gain * (1.0 + chain.n_amp[port] + output_quanta(scattering, env, k, port)))
        .collect())
}

/// Amplifier added quanta from a pumps-off PSD: `psd / (hbar omega 10^{G/10}) - 1`.
pub fn infer_amp_noise(measured_psd: f64, omega: f64, gain_db: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega}")));
    }
    let n = measured_psd / (HBAR * omega * from_db(gain_db)) - 1.0;
    if n < -AMP_NOISE_TOLERANCE {
        return Err(Error::Calibration(format!(
            "measured PSD lies below the vacuum floor (n_amp = {n:.4})"
        )));
    }
    Ok(n)
}

/// Added quanta on the path `from -> to` along the grid: the thermal output
/// at `to` minus the part carried from the signal port `from`, optionally
/// divided by `|S_to,from|^2`.
pub fn added_noise_per_path(
    scattering: &ScatteringResult,
    env: &ThermalEnvironment,
    to: usize,
    from: usize,
    referral: Referral,
) -> Result<Vec<f64>> {
    check_env(scattering, env)?;
    let n = env.cavity_occupancy.len();
    if to >= n || from >= n {
        return Err(Error::Dimension(format!("path {to}<-{from} out of range")));
    }
    (0..scattering.omega_grid.len())
        .map(|k| {
            let sij = scattering.s_matrices[k][(to, from)];
            let added = output_quanta(scattering, env, k, to) - sij.norm_sqr() * env.cavity_occupancy[from];
            match referral {
                Referral::Output => Ok(added),
                Referral::Input => {
                    if sij.norm() < MIN_REFERRED_TRANSMISSION {
                        Err(Error::ReferredNoise { to, from, magnitude: sij.norm() })
                    } else {
                        Ok(added / sij.norm_sqr())
                    }
                }
            }
        })
        .collect()
}

/// PSD per port and added noise per ordered path over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget {
    pub omega_grid: Vec<f64>,
    pub psd: Vec<Vec<f64>>,
    /// `((to, from), n_add)` for every off-diagonal path that could be referred.
    pub n_add: Vec<((usize, usize), Vec<f64>)>,
}

pub fn noise_budget(
    scattering: &ScatteringResult,
    device: &DeviceModel,
    env: &ThermalEnvironment,
    chain: &AmplifierChain,
    referral: Referral,
) -> Result<NoiseBudget> {
    let n = device.num_cavities();
    let psd = (0..n)
        .map(|p| output_noise_psd(scattering, device, env, chain, p))
        .collect::<Result<_>>()?;
    let mut n_add = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if to == from {
                continue;
            }
            match added_noise_per_path(scattering, env, to, from, referral) {
                Ok(v) => n_add.push(((to, from), v)),
                Err(Error::ReferredNoise { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(NoiseBudget { omega_grid: scattering.omega_grid.clone(), psd, n_add })
}

/// Occupancies that best reproduce a set of added-noise targets.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyFit {
    pub cavity_occupancy: Vec<f64>,
    pub mech_occupancy: Vec<f64>,
    /// Model value for each target, in target order.
    pub predicted: Vec<f64>,
    /// Root-mean-square relative residual.
    pub rms_relative: f64,
}

/// Which occupancies the fit may adjust; the others are held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitParameters {
    MechanicsOnly,
    CavitiesAndMechanics,
}

/// Non-negative least-squares fit of bath occupancies to added-noise targets
/// `((to, from), value)` at grid point `k`, minimizing relative residuals.
pub fn fit_occupancies(
    scattering: &ScatteringResult,
    k: usize,
    targets: &[((usize, usize), f64)],
    referral: Referral,
    params: FitParameters,
) -> Result<OccupancyFit> {
    let n = scattering.s_matrices.first().map_or(0, |s| s.nrows());
    let m = scattering.mech_transfer.first().map_or(0, |t| t.ncols());
    if k >= scattering.omega_grid.len() {
        return Err(Error::Dimension(format!("grid index {k} out of range")));
    }
    if targets.iter().any(|(_, t)| !(*t > 0.0)) {
        return Err(Error::Fit("targets must be positive".into()));
    }

    // Each occupancy enters added noise linearly: column p is the response to
    // a unit occupancy of parameter p.
    let n_params = n + m;
    let unit = |p: usize| -> ThermalEnvironment {
        let mut env = ThermalEnvironment::vacuum(n, m);
        if p < n { env.cavity_occupancy[p] = 1.0 } else { env.mech_occupancy[p - n] = 1.0 }
        env
    };
    let mut design = DMatrix::<f64>::zeros(targets.len(), n_params);
    let mut single = scattering.clone();
    single.omega_grid = vec![scattering.omega_grid[k]];
    single.s_matrices = vec![scattering.s_matrices[k].clone()];
    single.mech_transfer = vec![scattering.mech_transfer[k].clone()];
    single.bath_transfer = vec![scattering.bath_transfer[k].clone()];
    for p in 0..n_params {
        let env = unit(p);
        for (r, &((to, from), target)) in targets.iter().enumerate() {
            design[(r, p)] = added_noise_per_path(&single, &env, to, from, referral)?[0] / target;
        }
    }
    let free: Vec<usize> = match params {
        FitParameters::MechanicsOnly => (n..n_params).collect(),
        FitParameters::CavitiesAndMechanics => (0..n_params).collect(),
    };
    let rhs = DVector::from_element(targets.len(), 1.0);
    let x = nnls_enumerate(&design, &rhs, &free)?;

    let pred = &design * &x;
    let predicted: Vec<f64> = targets.iter().enumerate().map(|(r, (_, t))| pred[r] * t).collect();
    let rms_relative = ((&pred - &rhs).norm_squared() / targets.len() as f64).sqrt();
    Ok(OccupancyFit {
        cavity_occupancy: x.rows(0, n).iter().copied().collect(),
        mech_occupancy: x.rows(n, m).iter().copied().collect(),
        predicted,
        rms_relative,
    })
}

/// Exact non-negative least squares over the columns in `free` by checking
/// every support set; practical for the handful of baths involved.
fn nnls_enumerate(a: &DMatrix<f64>, b: &DVector<f64>, free: &[usize]) -> Result<DVector<f64>> {
    if free.len() > 12 {
        return Err(Error::Fit("too many free occupancies for exhaustive NNLS".into()));
    }
    let mut best = DVector::zeros(a.ncols());
    let mut best_res = b.norm_squared();
    for mask in 1u32..(1 << free.len()) {
        let cols: Vec<usize> = free.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &c)| c).collect();
        let sub = a.select_columns(&cols);
        let Ok(sol) = sub.clone().svd(true, true).solve(b, 1e-14) else { continue };
        if sol.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            continue;
        }
        let res = (&sub * &sol - b).norm_squared();
        if res < best_res - 1e-15 {
            best_res = res;
            best = DVector::zeros(a.ncols());
            for (c, v) in cols.iter().zip(sol.iter()) {
                best[*c] = *v;
            }
        }
    }
    Ok(best)
}

/// One measured PSD sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdSample {
    pub freq_hz: f64,
    pub psd_w_per_hz: f64,
}

pub const PSD_HEADER: [&str; 2] = ["freq_hz", "psd_w_per_hz"];

/// Reads a PSD trace with header exactly `freq_hz,psd_w_per_hz`; lines
/// starting with `#` are comments.
pub fn read_psd_csv<R: Read>(reader: R) -> Result<Vec<PsdSample>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PSD_HEADER {
        return Err(Error::Config(format!(
            "PSD header must be `{}`, found `{}`",
            PSD_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("PSD row {}: column {} is not a number", line + 1, PSD_HEADER[k])))
        };
        out.push(PsdSample { freq_hz: parse(0)?, psd_w_per_hz: parse(1)? });
    }
    Ok(out)
}
