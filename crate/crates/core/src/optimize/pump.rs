use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::nelder_mead::{minimize, NelderMeadOptions};
use crate::device::{cooperativity, photons_for_cooperativity, DeviceModel};
use crate::effective::{build_effective_with, EffectiveModel, OffResonant, PumpConfiguration};
use crate::error::{Error, Result};
use crate::oracles::{isolating_phase, TwoPortWorkingPoint};
use crate::scattering::{linspace, scattering_matrix_lite};
use crate::units::{power_db, to_hz};

/// Largest photon number explored.
pub const MAX_PHOTONS: f64 = 1e8;
/// Power floor (dB) used when a path vanishes.
const FLOOR_DB: f64 = -300.0;
/// Objective assigned to configurations the solver rejects.
const PENALTY: f64 = 1e6;
/// Isolation level defining the reported bandwidth.
pub const BANDWIDTH_LEVEL_DB: f64 = 20.0;

/// What the pumps should realize. Ports are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Transmit `from -> to`, suppress `to -> from`.
    Isolate { from: usize, to: usize },
    /// Transmit `order[0] -> order[1] -> order[2] -> order[0]`, suppress the reverse.
    Circulate { order: [usize; 3] },
    /// Transmit both ways between `a` and `b`.
    Convert { a: usize, b: usize },
    /// Suppress reflection on `port`.
    Match { port: usize },
}

impl TargetKind {
    /// `(to, from)` pairs that should transmit.
    pub fn forward_paths(&self) -> Vec<(usize, usize)> {
        match *self {
            TargetKind::Isolate { from, to } => vec![(to, from)],
            TargetKind::Circulate { order: [a, b, c] } => vec![(b, a), (c, b), (a, c)],
            TargetKind::Convert { a, b } => vec![(b, a), (a, b)],
            TargetKind::Match { .. } => vec![],
        }
    }

    /// `(to, from)` pairs that should be suppressed.
    pub fn backward_paths(&self) -> Vec<(usize, usize)> {
        match *self {
            TargetKind::Isolate { from, to } => vec![(from, to)],
            TargetKind::Circulate { order: [a, b, c] } => vec![(a, b), (b, c), (c, a)],
            TargetKind::Convert { .. } => vec![],
            TargetKind::Match { port } => vec![(port, port)],
        }
    }

    fn ports(&self) -> Vec<usize> {
        match *self {
            TargetKind::Isolate { from, to } => vec![from, to],
            TargetKind::Circulate { order } => order.to_vec(),
            TargetKind::Convert { a, b } => vec![a, b],
            TargetKind::Match { port } => vec![port],
        }
    }
}

/// Objective definition:
/// `insertion_weight * worst forward loss (dB)
///  + isolation_weight * max(0, isolation_goal_db - worst backward isolation (dB))`
/// evaluated on `band_points` frequencies across `band`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTarget {
    pub kind: TargetKind,
    /// Probe band (rad/s).
    pub band: (f64, f64),
    pub band_points: usize,
    pub insertion_weight: f64,
    pub isolation_weight: f64,
    pub isolation_goal_db: f64,
    /// Acceptance thresholds checked by [`OptimizationResult::meets`].
    pub max_insertion_loss_db: Option<f64>,
    pub min_isolation_db: Option<f64>,
}

impl OptimizationTarget {
    pub fn new(kind: TargetKind) -> Self {
        Self {
            kind,
            band: (0.0, 0.0),
            band_points: 1,
            insertion_weight: 1.0,
            isolation_weight: 1.0,
            isolation_goal_db: 60.0,
            max_insertion_loss_db: None,
            min_isolation_db: None,
        }
    }

    pub fn with_band(mut self, lo: f64, hi: f64, points: usize) -> Self {
        self.band = (lo, hi);
        self.band_points = points;
        self
    }

    pub fn with_weights(mut self, insertion: f64, isolation: f64) -> Self {
        self.insertion_weight = insertion;
        self.isolation_weight = isolation;
        self
    }

    pub fn with_goal(mut self, isolation_goal_db: f64) -> Self {
        self.isolation_goal_db = isolation_goal_db;
        self
    }

    pub fn with_thresholds(mut self, max_insertion_loss_db: Option<f64>, min_isolation_db: Option<f64>) -> Self {
        self.max_insertion_loss_db = max_insertion_loss_db;
        self.min_isolation_db = min_isolation_db;
        self
    }

    pub fn validate(&self, device: &DeviceModel) -> Result<()> {
        let n = device.num_cavities();
        let ports = self.kind.ports();
        if ports.iter().any(|&p| p >= n) {
            return Err(Error::Dimension(format!("target ports {ports:?} exceed {n} cavities")));
        }
        let mut sorted = ports.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != ports.len() {
            return Err(Error::Domain(format!("target ports {ports:?} must be distinct")));
        }
        if !(self.band.0 <= self.band.1) || !self.band.0.is_finite() || !self.band.1.is_finite() {
            return Err(Error::Domain("band must be a finite interval lo <= hi".into()));
        }
        if self.band_points == 0 {
            return Err(Error::Domain("band needs at least one point".into()));
        }
        if !(self.insertion_weight >= 0.0 && self.isolation_weight >= 0.0)
            || self.insertion_weight + self.isolation_weight == 0.0
        {
            return Err(Error::Domain("weights must be non-negative and not both zero".into()));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        if self.band_points == 1 || self.band.0 == self.band.1 {
            vec![0.5 * (self.band.0 + self.band.1)]
        } else {
            linspace(self.band.0, self.band.1, self.band_points)
        }
    }

    fn center(&self) -> f64 {
        0.5 * (self.band.0 + self.band.1)
    }
}

/// Which pump parameters are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeParameters {
    pub photons: bool,
    pub phases: bool,
    pub detunings: bool,
}

impl Default for FreeParameters {
    fn default() -> Self {
        Self { photons: true, phases: true, detunings: true }
    }
}

/// Search settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    /// Number of starts including the seed.
    pub starts: usize,
    pub seed: u64,
    /// Evaluations per simplex run.
    pub max_evaluations: usize,
    /// Simplex re-initializations at the best point after convergence.
    pub restarts: usize,
    pub off_resonant: OffResonant,
    pub free: FreeParameters,
    /// Cooperativity range of the random photon-number starts.
    pub start_cooperativity: (f64, f64),
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            max_evaluations: 4000,
            restarts: 2,
            off_resonant: OffResonant::Include,
            free: FreeParameters::default(),
            start_cooperativity: (1.0, 1e3),
        }
    }
}

/// Achieved figures of merit, recomputed from the pumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Achieved {
    /// Worst backward isolation over the band (dB); `inf` when there is no backward path.
    pub isolation_db: f64,
    /// Worst forward insertion loss over the band (dB); zero when there is no forward path.
    pub insertion_loss_db: f64,
    /// Width (Hz) of the contiguous region around band center where every
    /// backward path is suppressed by at least 20 dB (conversion: forward FWHM).
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub start: usize,
    pub run: usize,
    pub evaluations: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResultFlags {
    /// The winning start stopped on its evaluation budget.
    pub budget_exhausted: bool,
    /// Index of the winning start (0 is the seed).
    pub best_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub pumps: PumpConfiguration,
    pub objective: f64,
    pub history: Vec<HistoryEntry>,
    pub achieved: Achieved,
    pub flags: ResultFlags,
}

impl OptimizationResult {
    /// True when every threshold set on `target` is satisfied.
    pub fn meets(&self, target: &OptimizationTarget) -> bool {
        target.max_insertion_loss_db.is_none_or(|m| self.achieved.insertion_loss_db <= m)
            && target.min_isolation_db.is_none_or(|m| self.achieved.isolation_db >= m)
    }
}

/// Objective and figures of merit of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub insertion_loss_db: f64,
    pub isolation_db: f64,
}

fn path_db(s: &crate::scattering::CMatrix, (to, from): (usize, usize)) -> f64 {
    power_db(s[(to, from)].norm_sqr()).max(FLOOR_DB)
}

fn evaluate_model(device: &DeviceModel, eff: &EffectiveModel, target: &OptimizationTarget) -> Result<Evaluation> {
    let fwd = target.kind.forward_paths();
    let bwd = target.kind.backward_paths();
    let mut il = if fwd.is_empty() { 0.0 } else { f64::NEG_INFINITY };
    let mut iso = f64::INFINITY;
    for w in target.grid() {
        let s = scattering_matrix_lite(eff, device, w)?;
        for &p in &fwd {
            il = il.max(-path_db(&s, p));
        }
        for &p in &bwd {
            iso = iso.min(-path_db(&s, p));
        }
    }
    let shortfall = if bwd.is_empty() { 0.0 } else { (target.isolation_goal_db - iso).max(0.0) };
    let objective = target.insertion_weight * il + target.isolation_weight * shortfall;
    Ok(Evaluation { objective, insertion_loss_db: il, isolation_db: iso })
}

/// Objective of `pumps` under `target`; invalid configurations get a penalty.
pub fn evaluate(
    device: &DeviceModel,
    target: &OptimizationTarget,
    pumps: &PumpConfiguration,
    off_resonant: OffResonant,
) -> Result<Evaluation> {
    target.validate(device)?;
    let eff = build_effective_with(device, pumps, off_resonant)?;
    evaluate_model(device, &eff, target)
}

/// Search-space mapping: log photon numbers, gauge-free phases and scaled
/// detunings.
#[derive(Debug, Clone)]
struct Layout {
    n: usize,
    m: usize,
    free: FreeParameters,
    phase_slots: Vec<(usize, usize)>,
    det_scale: f64,
    det_bound: f64,
    base: PumpConfiguration,
}

impl Layout {
    fn new(device: &DeviceModel, free: FreeParameters, base: &PumpConfiguration) -> Self {
        let (n, m) = (device.num_cavities(), device.num_mechanics());
        // Pin a spanning tree of the cavity/mode graph: column 0 and row 0.
        let phase_slots = (1..n).flat_map(|i| (1..m).map(move |j| (i, j))).collect();
        let gmax = device.gammas().into_iter().fold(0.0, f64::max);
        let kmin = device.kappas().into_iter().fold(f64::INFINITY, f64::min);
        Self { n, m, free, phase_slots, det_scale: 25.0 * gmax, det_bound: kmin / 2.0, base: gauge_fixed(base) }
    }

    fn dim(&self) -> usize {
        let f = self.free;
        (f.photons as usize) * self.n * self.m
            + (f.phases as usize) * self.phase_slots.len()
            + (f.detunings && self.m > 1) as usize * self.m
    }

    fn pack(&self, pumps: &PumpConfiguration) -> Vec<f64> {
        let p = gauge_fixed(pumps);
        let mut x = Vec::with_capacity(self.dim());
        if self.free.photons {
            for row in &p.photons {
                x.extend(row.iter().map(|&v| v.clamp(1.0, MAX_PHOTONS).ln()));
            }
        }
        if self.free.phases {
            x.extend(self.phase_slots.iter().map(|&(i, j)| p.phases[i][j]));
        }
        if self.free.detunings && self.m > 1 {
            x.extend(p.sideband_detuning.iter().map(|d| d / self.det_scale));
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> PumpConfiguration {
        let mut p = self.base.clone();
        let mut k = 0;
        if self.free.photons {
            for i in 0..self.n {
                for j in 0..self.m {
                    p.photons[i][j] = x[k].clamp(0.0, MAX_PHOTONS.ln()).exp();
                    k += 1;
                }
            }
        }
        if self.free.phases {
            for &(i, j) in &self.phase_slots {
                p.phases[i][j] = x[k];
                k += 1;
            }
        }
        if self.free.detunings && self.m > 1 {
            for j in 0..self.m {
                p.sideband_detuning[j] = (x[k] * self.det_scale).clamp(-self.det_bound, self.det_bound);
                k += 1;
            }
        }
        p
    }

    fn steps(&self) -> Vec<f64> {
        vec![0.5; self.dim()]
    }

    fn random(&self, device: &DeviceModel, rng: &mut ChaCha8Rng, c_range: (f64, f64)) -> Vec<f64> {
        let mut p = self.base.clone();
        let kappas = device.kappas();
        let gammas = device.gammas();
        for i in 0..self.n {
            for j in 0..self.m {
                let g0 = device.couplings.get(i, j);
                let lo = photons_for_cooperativity(c_range.0, g0, kappas[i], gammas[j]).clamp(1.0, MAX_PHOTONS).ln();
                let hi = photons_for_cooperativity(c_range.1, g0, kappas[i], gammas[j]).clamp(1.0, MAX_PHOTONS).ln();
                p.photons[i][j] = if hi > lo { rng.gen_range(lo..hi) } else { lo }.exp();
            }
        }
        for &(i, j) in &self.phase_slots {
            p.phases[i][j] = rng.gen_range(-PI..PI);
        }
        if self.m > 1 {
            for d in p.sideband_detuning.iter_mut() {
                *d = (rng.gen_range(-3.0..3.0) * self.det_scale).clamp(-self.det_bound, self.det_bound);
            }
        }
        // Only free coordinates are packed; fixed ones come back from `base`.
        self.pack(&p)
    }
}

fn wrap(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

/// Equivalent configuration with `phi_i0 = phi_0j = 0` (same `|S_ij|`).
pub fn gauge_fixed(pumps: &PumpConfiguration) -> PumpConfiguration {
    let mut p = pumps.clone();
    let (n, m) = (p.num_cavities(), p.num_mechanics());
    let ph = &pumps.phases;
    for i in 0..n {
        for j in 0..m {
            p.phases[i][j] = wrap(ph[i][j] - ph[i][0] - ph[0][j] + ph[0][0]);
        }
    }
    p
}

/// Phase on (cavity 1, mode 1) that zeroes the backward path of a two-port
/// isolator at `omega`, given the other pumps of `pumps`.
pub fn analytic_isolator_phase(
    device: &DeviceModel,
    pumps: &PumpConfiguration,
    from: usize,
    to: usize,
    omega: f64,
    off_resonant: OffResonant,
) -> Result<f64> {
    if device.num_cavities() != 2 || device.num_mechanics() != 2 {
        return Err(Error::InvalidModel("analytic isolator phase needs two cavities and two modes".into()));
    }
    let eff = build_effective_with(device, pumps, off_resonant)?;
    let kappas = device.kappas();
    let etas = device.etas();
    // Oracle labelling: forward 0 -> 1; swap the cavities for the other direction.
    let swap = (from, to) == (1, 0);
    let cav = |k: usize| if swap { 1 - k } else { k };
    let mut c = [[0.0; 2]; 2];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 4.0 * eff.g[cav(i)][j].norm_sqr() / (kappas[cav(i)] * eff.gamma_eff[j]);
        }
    }
    let wp = TwoPortWorkingPoint {
        cooperativities: c,
        detunings: [eff.delta_eff[0], eff.delta_eff[1]],
        phi: 0.0,
        gammas: [eff.gamma_eff[0], eff.gamma_eff[1]],
        etas: [etas[cav(0)], etas[cav(1)]],
    };
    let loop_phase = isolating_phase(&wp, omega)?;
    let loop_phase = if swap { -loop_phase } else { loop_phase };
    let ph = &pumps.phases;
    Ok(wrap(loop_phase - ph[0][0] + ph[1][0] + ph[0][1]))
}

/// Equal-cooperativity isolator seed: `C` on all four pumps, detunings at
/// the transmission peak `(+-Gamma/2) sqrt(2C - 1)` and the isolating phase.
pub fn isolator_seed(
    device: &DeviceModel,
    c: f64,
    from: usize,
    to: usize,
    off_resonant: OffResonant,
) -> Result<PumpConfiguration> {
    if device.num_cavities() != 2 || device.num_mechanics() != 2 {
        return Err(Error::InvalidModel("isolator seed needs two cavities and two modes".into()));
    }
    if !(c > 0.5) {
        return Err(Error::Domain(format!("seed cooperativity must exceed 1/2, got {c}")));
    }
    let kappas = device.kappas();
    let gammas = device.gammas();
    let photons = (0..2)
        .map(|i| (0..2).map(|j| photons_for_cooperativity(c, device.couplings.get(i, j), kappas[i], gammas[j])).collect())
        .collect();
    let root = (2.0 * c - 1.0).sqrt();
    let detunings = vec![gammas[0] / 2.0 * root, -gammas[1] / 2.0 * root];
    let mut pumps = PumpConfiguration::new(photons, vec![vec![0.0; 2]; 2], detunings)?;
    let phi = analytic_isolator_phase(device, &pumps, from, to, 0.0, off_resonant)?;
    pumps.phases[1][1] = phi;
    Ok(pumps)
}

/// Pumps on mode `mech_index` only, each giving cooperativity `target_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceMatch {
    pub pumps: PumpConfiguration,
    /// `|S_ii(0)|` per cavity.
    pub residual: Vec<f64>,
}

pub fn impedance_match(device: &DeviceModel, mech_index: usize, target_c: f64) -> Result<ImpedanceMatch> {
    let (n, m) = (device.num_cavities(), device.num_mechanics());
    if mech_index >= m {
        return Err(Error::Dimension(format!("mechanical mode {mech_index} out of range")));
    }
    if !(target_c > 0.0) || !target_c.is_finite() {
        return Err(Error::Domain(format!("target cooperativity must be positive, got {target_c}")));
    }
    let kappas = device.kappas();
    let gamma = device.mechanics[mech_index].gamma_m;
    let mut pumps = PumpConfiguration::off(n, m);
    for i in 0..n {
        pumps.photons[i][mech_index] = photons_for_cooperativity(target_c, device.couplings.get(i, mech_index), kappas[i], gamma);
    }
    let eff = build_effective_with(device, &pumps, OffResonant::Include)?;
    let s = scattering_matrix_lite(&eff, device, 0.0)?;
    let residual = (0..n).map(|i| s[(i, i)].norm()).collect();
    Ok(ImpedanceMatch { pumps, residual })
}

/// Multi-start simplex search. Start 0 is `seed`; the others are drawn from
/// a ChaCha8 stream seeded by `settings.seed`.
pub fn optimize(
    device: &DeviceModel,
    target: &OptimizationTarget,
    seed: &PumpConfiguration,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let layout = Layout::new(device, settings.free, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut starts = vec![layout.pack(seed)];
    while starts.len() < settings.starts.max(1) {
        starts.push(layout.random(device, &mut rng, settings.start_cooperativity));
    }
    let starts: Vec<PumpConfiguration> = starts.iter().map(|x| layout.unpack(x)).collect();
    optimize_from_starts(device, target, seed, &starts, settings)
}

/// Runs one simplex search per start (concurrently) and keeps the best;
/// ties go to the lowest start index.
pub fn optimize_from_starts(
    device: &DeviceModel,
    target: &OptimizationTarget,
    base: &PumpConfiguration,
    starts: &[PumpConfiguration],
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    target.validate(device)?;
    if base.num_cavities() != device.num_cavities() || base.num_mechanics() != device.num_mechanics() {
        return Err(Error::Dimension("seed pumps do not match the device".into()));
    }
    if starts.is_empty() {
        return Err(Error::Domain("at least one start is required".into()));
    }
    let layout = Layout::new(device, settings.free, base);
    let objective = |x: &[f64]| -> f64 {
        let p = layout.unpack(x);
        match build_effective_with(device, &p, settings.off_resonant).and_then(|e| evaluate_model(device, &e, target)) {
            Ok(e) if e.objective.is_finite() => e.objective,
            _ => PENALTY,
        }
    };

    let runs: Vec<(Vec<f64>, f64, bool, Vec<HistoryEntry>)> = starts
        .par_iter()
        .enumerate()
        .map(|(start, p)| {
            let mut x = layout.pack(p);
            let mut history = Vec::new();
            let mut options = NelderMeadOptions::new(x.len());
            options.max_evaluations = settings.max_evaluations;
            options.initial_step = layout.steps();
            let mut value = objective(&x);
            let mut total = 1;
            history.push(HistoryEntry { start, run: 0, evaluations: total, objective: value });
            let mut exhausted = false;
            for run in 0..=settings.restarts {
                let m = minimize(objective, &x, &options);
                history.extend(m.trace.iter().map(|&(e, v)| HistoryEntry {
                    start,
                    run,
                    evaluations: total + e,
                    objective: v,
                }));
                total += m.evaluations;
                exhausted = !m.converged;
                let improved = m.value < value;
                if m.value <= value {
                    x = m.x;
                    value = m.value;
                }
                if !improved && run > 0 {
                    break;
                }
            }
            (x, value, exhausted, history)
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .min_by(|(a, ra), (b, rb)| ra.1.total_cmp(&rb.1).then(a.cmp(b)))
        .map(|(k, _)| k)
        .expect("nonempty");
    let (value, exhausted) = (runs[best].1, runs[best].2);
    let pumps = layout.unpack(&runs[best].0);
    let eff = build_effective_with(device, &pumps, settings.off_resonant)?;
    let eval = evaluate_model(device, &eff, target)?;
    let bandwidth_hz = achieved_bandwidth(device, &eff, target)?;
    Ok(OptimizationResult {
        pumps,
        objective: value,
        history: runs.into_iter().flat_map(|r| r.3).collect(),
        achieved: Achieved {
            isolation_db: eval.isolation_db,
            insertion_loss_db: eval.insertion_loss_db,
            bandwidth_hz,
        },
        flags: ResultFlags { budget_exhausted: exhausted, best_start: best },
    })
}

/// Two-port isolation search seeded by `seed_config` with its (cavity 1,
/// mode 1) phase replaced by the analytic isolating phase.
pub fn optimize_isolation(
    device: &DeviceModel,
    target: &OptimizationTarget,
    seed_config: &PumpConfiguration,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let TargetKind::Isolate { from, to } = target.kind else {
        return Err(Error::Domain("optimize_isolation needs an isolate target".into()));
    };
    target.validate(device)?;
    let mut seed = seed_config.clone();
    seed.phases[1][1] = analytic_isolator_phase(device, seed_config, from, to, target.center(), settings.off_resonant)?;
    optimize(device, target, &seed, settings)
}

/// Three-port circulation search from random starts around `seed_config`.
pub fn optimize_circulation(
    device: &DeviceModel,
    order: [usize; 3],
    band: (f64, f64),
    seed_config: &PumpConfiguration,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    if device.num_cavities() != 3 || device.num_mechanics() != 2 {
        return Err(Error::InvalidModel("circulation needs three cavities and two mechanical modes".into()));
    }
    let points = if band.0 == band.1 { 1 } else { 5 };
    let target = OptimizationTarget::new(TargetKind::Circulate { order }).with_band(band.0, band.1, points).with_goal(20.0);
    optimize(device, &target, seed_config, settings)
}

/// Width (rad/s) of the contiguous interval around `center` where
/// `inside(omega)` holds, with linear interpolation of `level(omega)` at
/// the edges. `level` must be positive inside.
fn contiguous_width<F: Fn(f64) -> Result<f64>>(level: F, center: f64, span: f64, points: usize) -> Result<f64> {
    if level(center)? < 0.0 {
        return Ok(0.0);
    }
    let step = span / points as f64;
    let edge = |dir: f64| -> Result<f64> {
        let mut prev = (center, level(center)?);
        for k in 1..=points {
            let w = center + dir * step * k as f64;
            let v = level(w)?;
            if v < 0.0 {
                let t = prev.1 / (prev.1 - v);
                return Ok(prev.0 + t * (w - prev.0));
            }
            prev = (w, v);
        }
        Ok(prev.0)
    };
    Ok(edge(1.0)? - edge(-1.0)?)
}

/// Width (Hz) of the region around `center` (rad/s) where `|S_{to,from}|^2`
/// stays at least `level_db` below unity.
pub fn isolation_bandwidth(
    device: &DeviceModel,
    eff: &EffectiveModel,
    (to, from): (usize, usize),
    level_db: f64,
    center: f64,
    span: f64,
) -> Result<f64> {
    let level = |w: f64| -> Result<f64> {
        let s = scattering_matrix_lite(eff, device, w)?;
        Ok(-power_db(s[(to, from)].norm_sqr()).min(-FLOOR_DB) - level_db)
    };
    Ok(to_hz(contiguous_width(level, center, span, 2000)?))
}

/// Full width at half maximum (Hz) of `|S_{to,from}|^2` around `center`.
pub fn transmission_fwhm(
    device: &DeviceModel,
    eff: &EffectiveModel,
    (to, from): (usize, usize),
    center: f64,
    span: f64,
) -> Result<f64> {
    let peak = scattering_matrix_lite(eff, device, center)?[(to, from)].norm_sqr();
    let level = |w: f64| -> Result<f64> { Ok(scattering_matrix_lite(eff, device, w)?[(to, from)].norm_sqr() - peak / 2.0) };
    Ok(to_hz(contiguous_width(level, center, span, 4000)?))
}

fn achieved_bandwidth(device: &DeviceModel, eff: &EffectiveModel, target: &OptimizationTarget) -> Result<f64> {
    let gmax = eff.gamma_eff.iter().fold(0.0, |a: f64, b| a.max(*b));
    let g_total: f64 = eff
        .g
        .iter()
        .zip(device.kappas())
        .map(|(row, k)| row.iter().map(|g| 4.0 * g.norm_sqr() / k).sum::<f64>())
        .sum();
    let span = 10.0 * (gmax + g_total).max(1.0);
    let center = target.center();
    let bwd = target.kind.backward_paths();
    if bwd.is_empty() {
        let fwd = target.kind.forward_paths();
        return transmission_fwhm(device, eff, fwd[0], center, span);
    }
    bwd.iter()
        .map(|&p| isolation_bandwidth(device, eff, p, BANDWIDTH_LEVEL_DB, center, span))
        .try_fold(f64::INFINITY, |a, b| b.map(|b| a.min(b)))
}

/// Cooperativity matrix `4 |G_ij|^2 / (kappa_i gamma_j)` of a configuration.
pub fn cooperativities(device: &DeviceModel, pumps: &PumpConfiguration) -> Vec<Vec<f64>> {
    let kappas = device.kappas();
    let gammas = device.gammas();
    (0..device.num_cavities())
        .map(|i| {
            (0..device.num_mechanics())
                .map(|j| cooperativity(device.couplings.get(i, j), pumps.photons[i][j], kappas[i], gammas[j]))
                .collect()
        })
        .collect()
}
