//! Mean-field integration of the Langevin equations with the off-resonant
//! terms kept explicitly, either as `e^{+-i dw t}` factors or through the
//! auxiliary modes `A_i^+-`, `B_j`.
//!
//! Noise inputs are replaced by a coherent probe `A e^{-i omega t}` on one
//! port. The steady state is read out by demodulating the cavity amplitudes at
//! the probe frequency over whole beat periods `2 pi / |dw|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::device::DeviceModel;
use crate::effective::{build_effective, EffectiveModel, PumpConfiguration};
use crate::error::{Error, Result};
use crate::scattering::scattering_matrix;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const MAX_STATE: usize = 13;

/// Default `dt * max_rate`.
pub const DT_FACTOR: f64 = 0.1;
/// Induced photon number above which the probe is no longer weak.
pub const LINEAR_PROBE_PHOTONS: f64 = 1e3;

/// Coherent probe on one port (zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeDrive {
    pub port: usize,
    /// Input amplitude (sqrt(photons/s)).
    pub amplitude: f64,
    /// Rotating-frame detuning `omega` (rad/s).
    pub frequency: f64,
}

impl ProbeDrive {
    pub fn new(port: usize, amplitude: f64, frequency: f64) -> Self {
        Self { port, amplitude, frequency }
    }

    /// Rough intracavity photon number `4 kappa_ext A^2 / kappa^2` on the probed cavity.
    pub fn induced_photons(&self, device: &DeviceModel) -> f64 {
        let c = &device.cavities[self.port];
        4.0 * c.kappa_ext * self.amplitude * self.amplitude / (c.kappa() * c.kappa())
    }
}

/// Which form of the equations is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Cavity and mechanical amplitudes with explicit `e^{+-i dw t}` factors.
    TimeDependent,
    /// Autonomous system extended by the auxiliary modes.
    Extended,
}

/// Complex amplitudes at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub cavity_amps: Vec<Complex64>,
    pub mech_amps: Vec<Complex64>,
    /// `A^+` (per cavity), `A^-` (per cavity), `B` (per mode), in that order.
    pub aux_amps: Option<Vec<Complex64>>,
    pub time: f64,
}

impl MeanFieldState {
    pub fn zero(device: &DeviceModel, formulation: Formulation) -> Self {
        let (n, m) = (device.num_cavities(), device.num_mechanics());
        Self {
            cavity_amps: vec![ZERO; n],
            mech_amps: vec![ZERO; m],
            aux_amps: (formulation == Formulation::Extended).then(|| vec![ZERO; 2 * n + m]),
            time: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.cavity_amps
            .iter()
            .chain(&self.mech_amps)
            .chain(self.aux_amps.iter().flatten())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

type State = [Complex64; MAX_STATE];

/// Coefficients of the linear equations in a flat layout:
/// `a[0..n]`, `b[n..n+m]`, then `A^+`, `A^-`, `B` when extended.
struct System {
    n: usize,
    m: usize,
    len: usize,
    formulation: Formulation,
    half_kappa: Vec<f64>,
    sqrt_kext: Vec<f64>,
    g: Vec<Vec<Complex64>>,
    f: Vec<Vec<Complex64>>,
    delta0: Vec<f64>,
    half_gamma: Vec<f64>,
    dw: f64,
    has_off: bool,
    probe: ProbeDrive,
}

impl System {
    fn new(device: &DeviceModel, eff: &EffectiveModel, probe: ProbeDrive, formulation: Formulation) -> Result<Self> {
        let (n, m) = (device.num_cavities(), device.num_mechanics());
        if eff.num_cavities() != n || eff.num_mechanics() != m {
            return Err(Error::Dimension("effective model and device shapes disagree".into()));
        }
        if probe.port >= n {
            return Err(Error::Dimension(format!("probe port {} out of range", probe.port)));
        }
        let has_off = m == 2 && eff.delta_omega_m.is_some();
        if formulation == Formulation::Extended && !has_off {
            return Err(Error::InvalidModel("extended system needs two mechanical modes".into()));
        }
        let len = match formulation {
            Formulation::TimeDependent => n + m,
            Formulation::Extended => 3 * n + 2 * m,
        };
        Ok(Self {
            n,
            m,
            len,
            formulation,
            half_kappa: device.kappas().iter().map(|k| k / 2.0).collect(),
            sqrt_kext: device.cavities.iter().map(|c| c.kappa_ext.sqrt()).collect(),
            g: eff.g.clone(),
            f: eff.f.clone(),
            delta0: eff.delta0.clone(),
            half_gamma: eff.gamma_int.iter().map(|g| g / 2.0).collect(),
            dw: eff.delta_omega_m.unwrap_or(0.0),
            has_off,
            probe,
        })
    }

    /// Fastest rate in the equations; sets the step size.
    fn max_rate(&self) -> f64 {
        let mut r = self.half_kappa.iter().fold(0.0f64, |a, k| a.max(2.0 * k));
        r = r.max(self.dw.abs()).max(self.probe.frequency.abs());
        r = self.delta0.iter().fold(r, |a, d| a.max(d.abs() + self.dw.abs() * (self.has_off as u8 as f64)));
        self.g.iter().chain(&self.f).flatten().fold(r, |a, z| a.max(z.norm()))
    }

    fn deriv(&self, t: f64, y: &State, out: &mut State, probe_on: bool) {
        let (n, m) = (self.n, self.m);
        let (a, b) = (&y[..n], &y[n..n + m]);
        out.iter_mut().for_each(|z| *z = ZERO);
        let drive = if probe_on {
            Complex64::from_polar(self.probe.amplitude, -self.probe.frequency * t)
        } else {
            ZERO
        };

        for i in 0..n {
            let mut d = -self.half_kappa[i] * a[i];
            for j in 0..m {
                d -= I * self.g[i][j] * b[j];
            }
            if i == self.probe.port {
                d += self.sqrt_kext[i] * drive;
            }
            out[i] = d;
        }
        for j in 0..m {
            let mut d = Complex64::new(-self.half_gamma[j], self.delta0[j]) * b[j];
            for i in 0..n {
                d -= I * self.g[i][j].conj() * a[i];
            }
            out[n + j] = d;
        }
        if !self.has_off {
            return;
        }

        match self.formulation {
            Formulation::TimeDependent => {
                let up = Complex64::from_polar(1.0, self.dw * t);
                let down = up.conj();
                for i in 0..n {
                    out[i] -= I * (self.f[i][0] * b[0] * up + self.f[i][1] * b[1] * down);
                    out[n] -= I * self.f[i][0].conj() * a[i] * down;
                    out[n + 1] -= I * self.f[i][1].conj() * a[i] * up;
                }
            }
            Formulation::Extended => {
                let (ap, am, bb) = (n + m, 2 * n + m, 3 * n + m);
                let big_b = [y[bb], y[bb + 1]];
                for i in 0..n {
                    let (p, q) = (y[ap + i], y[am + i]);
                    out[i] -= I * (self.f[i][0] * big_b[0] + self.f[i][1] * big_b[1]);
                    out[n] -= I * self.f[i][0].conj() * q;
                    out[n + 1] -= I * self.f[i][1].conj() * p;
                    out[ap + i] = Complex64::new(-self.half_kappa[i], self.dw) * p
                        - I * (self.f[i][1] * b[1] + self.g[i][0] * big_b[0]);
                    out[am + i] = -Complex64::new(self.half_kappa[i], self.dw) * q
                        - I * (self.f[i][0] * b[0] + self.g[i][1] * big_b[1]);
                }
                let mut d1 = Complex64::new(-self.half_gamma[0], self.dw + self.delta0[0]) * big_b[0];
                let mut d2 = -Complex64::new(self.half_gamma[1], self.dw - self.delta0[1]) * big_b[1];
                for i in 0..n {
                    d1 -= I * (self.f[i][0].conj() * a[i] + self.g[i][0].conj() * y[ap + i]);
                    d2 -= I * (self.f[i][1].conj() * a[i] + self.g[i][1].conj() * y[am + i]);
                }
                out[bb] = d1;
                out[bb + 1] = d2;
            }
        }
    }

    fn rk4(&self, t: f64, y: &mut State, dt: f64, probe_on: bool) {
        let mut k1 = [ZERO; MAX_STATE];
        let mut k2 = [ZERO; MAX_STATE];
        let mut k3 = [ZERO; MAX_STATE];
        let mut k4 = [ZERO; MAX_STATE];
        let mut tmp = [ZERO; MAX_STATE];
        let len = self.len;
        self.deriv(t, y, &mut k1, probe_on);
        for k in 0..len {
            tmp[k] = y[k] + 0.5 * dt * k1[k];
        }
        self.deriv(t + 0.5 * dt, &tmp, &mut k2, probe_on);
        for k in 0..len {
            tmp[k] = y[k] + 0.5 * dt * k2[k];
        }
        self.deriv(t + 0.5 * dt, &tmp, &mut k3, probe_on);
        for k in 0..len {
            tmp[k] = y[k] + dt * k3[k];
        }
        self.deriv(t + dt, &tmp, &mut k4, probe_on);
        for k in 0..len {
            y[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
    }

    fn pack(&self, s: &MeanFieldState) -> Result<State> {
        let mut y = [ZERO; MAX_STATE];
        if s.cavity_amps.len() != self.n || s.mech_amps.len() != self.m {
            return Err(Error::Dimension("initial state shape does not match the device".into()));
        }
        y[..self.n].copy_from_slice(&s.cavity_amps);
        y[self.n..self.n + self.m].copy_from_slice(&s.mech_amps);
        match (self.formulation, &s.aux_amps) {
            (Formulation::Extended, Some(aux)) if aux.len() == 2 * self.n + self.m => {
                y[self.n + self.m..self.len].copy_from_slice(aux);
            }
            (Formulation::Extended, None) => {}
            (Formulation::TimeDependent, None) => {}
            _ => return Err(Error::Dimension("auxiliary amplitudes do not match the formulation".into())),
        }
        Ok(y)
    }

    fn unpack(&self, y: &State, time: f64) -> MeanFieldState {
        MeanFieldState {
            cavity_amps: y[..self.n].to_vec(),
            mech_amps: y[self.n..self.n + self.m].to_vec(),
            aux_amps: (self.formulation == Formulation::Extended).then(|| y[self.n + self.m..self.len].to_vec()),
            time,
        }
    }

    /// Dense matrix `J` of `dy/dt = J y` (probe off) at time `t`.
    fn jacobian(&self, t: f64) -> DMatrix<Complex64> {
        let mut jac = DMatrix::zeros(self.len, self.len);
        let mut e = [ZERO; MAX_STATE];
        let mut out = [ZERO; MAX_STATE];
        for c in 0..self.len {
            e[c] = Complex64::new(1.0, 0.0);
            self.deriv(t, &e, &mut out, false);
            for r in 0..self.len {
                jac[(r, c)] = out[r];
            }
            e[c] = ZERO;
        }
        jac
    }
}

/// Step-size, stopping and initial-condition settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOptions {
    /// Fixed step (s); `None` picks `DT_FACTOR / max_rate` rounded to divide a beat period.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Relative change of the demodulated amplitudes between windows.
    pub tolerance: f64,
    /// Demodulation window (s); rounded up to whole beat periods.
    pub window: Option<f64>,
    pub initial: Option<MeanFieldState>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { dt: None, t_end: 1.0, tolerance: 1e-8, window: None, initial: None }
    }
}

/// Demodulated steady state.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Cavity amplitudes at the probe frequency.
    pub cavity_amps: Vec<Complex64>,
    pub mech_amps: Vec<Complex64>,
    /// `S_{i,port}` for every output port `i`.
    pub s_column: Vec<Complex64>,
    pub dt: f64,
    pub windows: usize,
    /// Relative change over the last window.
    pub residual: f64,
    pub final_state: MeanFieldState,
}

/// Integrates until the demodulated amplitudes settle.
pub fn integrate_mean_field(
    device: &DeviceModel,
    effective: &EffectiveModel,
    probe: ProbeDrive,
    formulation: Formulation,
    options: &IntegrationOptions,
) -> Result<SteadyState> {
    let sys = System::new(device, effective, probe, formulation)?;
    if !(probe.amplitude > 0.0) {
        return Err(Error::Domain("probe amplitude must be positive".into()));
    }
    let dt_max = DT_FACTOR / sys.max_rate();
    let beat = if sys.has_off { std::f64::consts::TAU / sys.dw.abs() } else { 0.0 };
    let (dt, steps_per_beat) = match (options.dt, beat > 0.0) {
        (Some(dt), _) => (dt, (beat / dt).round().max(1.0) as usize),
        (None, true) => {
            let k = (beat / dt_max).ceil() as usize;
            (beat / k as f64, k)
        }
        (None, false) => (dt_max, 1),
    };
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("invalid step {dt}")));
    }

    // Window: whole beats spanning about one slowest mechanical time constant.
    let slow = effective.gamma_eff.iter().fold(f64::INFINITY, |a, g| a.min(*g)) / 2.0;
    let target = options.window.unwrap_or(1.0 / slow);
    let window_steps = {
        let raw = (target / dt).ceil().max(1.0) as usize;
        raw.div_ceil(steps_per_beat) * steps_per_beat
    };

    let mut y = match &options.initial {
        Some(s) => sys.pack(s)?,
        None => [ZERO; MAX_STATE],
    };
    let mut t = options.initial.as_ref().map_or(0.0, |s| s.time);
    let t0 = t;
    let w = probe.frequency;
    let mut previous: Option<Vec<Complex64>> = None;
    let mut windows = 0;
    let mut residual = f64::INFINITY;

    while t - t0 < options.t_end {
        let mut acc = [ZERO; MAX_STATE];
        for _ in 0..window_steps {
            let phase = Complex64::from_polar(1.0, w * t);
            for k in 0..sys.n + sys.m {
                acc[k] += y[k] * phase;
            }
            sys.rk4(t, &mut y, dt, true);
            t += dt;
        }
        windows += 1;
        let demod: Vec<Complex64> = acc[..sys.n + sys.m].iter().map(|z| z / window_steps as f64).collect();
        if let Some(prev) = &previous {
            let diff: f64 = demod.iter().zip(prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let scale: f64 = demod[..sys.n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            residual = diff / scale.max(f64::MIN_POSITIVE);
            if residual < options.tolerance {
                let cavity_amps = demod[..sys.n].to_vec();
                let s_column = (0..sys.n)
                    .map(|i| {
                        let out = sys.sqrt_kext[i] * cavity_amps[i];
                        let inp = if i == probe.port { probe.amplitude } else { 0.0 };
                        (out - inp) / probe.amplitude
                    })
                    .collect();
                return Ok(SteadyState {
                    cavity_amps,
                    mech_amps: demod[sys.n..].to_vec(),
                    s_column,
                    dt,
                    windows,
                    residual,
                    final_state: sys.unpack(&y, t),
                });
            }
        }
        previous = Some(demod);
    }
    Err(Error::Convergence { t_end: t - t0, residual })
}

/// Advances `initial` by `duration` with fixed step `dt`, probe on unless
/// `probe` is `None`.
pub fn evolve(
    device: &DeviceModel,
    effective: &EffectiveModel,
    probe: Option<ProbeDrive>,
    formulation: Formulation,
    initial: &MeanFieldState,
    duration: f64,
    dt: f64,
) -> Result<MeanFieldState> {
    let p = probe.unwrap_or(ProbeDrive::new(0, 0.0, 0.0));
    let sys = System::new(device, effective, p, formulation)?;
    let steps = (duration / dt).round() as usize;
    let mut y = sys.pack(initial)?;
    let mut t = initial.time;
    for _ in 0..steps {
        sys.rk4(t, &mut y, dt, probe.is_some());
        t += dt;
    }
    Ok(sys.unpack(&y, t))
}

/// Exact steady state of the autonomous extended system by a direct solve,
/// returned as the `S` column for the probed port.
pub fn extended_response(device: &DeviceModel, effective: &EffectiveModel, probe: ProbeDrive) -> Result<Vec<Complex64>> {
    let sys = System::new(device, effective, probe, Formulation::Extended)?;
    let mut a = sys.jacobian(0.0);
    for k in 0..sys.len {
        a[(k, k)] += I * probe.frequency;
    }
    let mut u = DVector::zeros(sys.len);
    u[probe.port] = Complex64::new(sys.sqrt_kext[probe.port] * probe.amplitude, 0.0);
    let y = a
        .lu()
        .solve(&(-u))
        .ok_or(Error::Singular { omega: probe.frequency, condition: f64::INFINITY })?;
    Ok((0..sys.n)
        .map(|i| {
            let inp = if i == probe.port { probe.amplitude } else { 0.0 };
            (sys.sqrt_kext[i] * y[i] - inp) / probe.amplitude
        })
        .collect())
}

/// Largest real part of the eigenvalues of the extended (or, for a single
/// mode, resonant) system matrix; negative means stable.
pub fn max_growth_rate(device: &DeviceModel, effective: &EffectiveModel) -> Result<f64> {
    let formulation = if effective.num_mechanics() == 2 && effective.delta_omega_m.is_some() {
        Formulation::Extended
    } else {
        Formulation::TimeDependent
    };
    let sys = System::new(device, effective, ProbeDrive::new(0, 0.0, 0.0), formulation)?;
    let jac = sys.jacobian(0.0);
    let eig = jac.eigenvalues().ok_or_else(|| Error::Domain("eigenvalue solve failed".into()))?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Per-frequency deviation between the extended time-domain system and the
/// effective frequency-domain model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticReport {
    pub omegas: Vec<f64>,
    /// `||S_td - S_fd|| / ||S_fd||` over the probed column.
    pub deviations: Vec<f64>,
    pub s_time_domain: Vec<Vec<Complex64>>,
    pub s_frequency_domain: Vec<Vec<Complex64>>,
    pub max: f64,
    pub mean: f64,
}

/// Runs [`integrate_mean_field`] on the extended system at each frequency (in
/// parallel) and compares with the effective scattering matrix.
pub fn compare_adiabatic(
    device: &DeviceModel,
    pumps: &PumpConfiguration,
    omega_list: &[f64],
    port: usize,
    options: &IntegrationOptions,
) -> Result<AdiabaticReport> {
    let eff = build_effective(device, pumps)?;
    let formulation = if eff.delta_omega_m.is_some() { Formulation::Extended } else { Formulation::TimeDependent };
    let amplitude = probe_amplitude(device, port);
    let rows: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = omega_list
        .par_iter()
        .map(|&w| {
            let s = scattering_matrix(&eff, device, w)?;
            let fd: Vec<Complex64> = (0..device.num_cavities()).map(|i| s[(i, port)]).collect();
            let td = integrate_mean_field(device, &eff, ProbeDrive::new(port, amplitude, w), formulation, options)?.s_column;
            let norm = fd.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let diff = fd.iter().zip(&td).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            Ok((diff / norm, td, fd))
        })
        .collect::<Result<_>>()?;
    let deviations: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let max = deviations.iter().copied().fold(0.0, f64::max);
    let mean = deviations.iter().sum::<f64>() / deviations.len().max(1) as f64;
    Ok(AdiabaticReport {
        omegas: omega_list.to_vec(),
        s_time_domain: rows.iter().map(|r| r.1.clone()).collect(),
        s_frequency_domain: rows.iter().map(|r| r.2.clone()).collect(),
        deviations,
        max,
        mean,
    })
}

/// Probe amplitude inducing about one photon in the probed cavity.
pub fn probe_amplitude(device: &DeviceModel, port: usize) -> f64 {
    let c = &device.cavities[port];
    c.kappa() / (2.0 * c.kappa_ext.sqrt())
}
