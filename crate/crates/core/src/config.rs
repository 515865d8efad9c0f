//! TOML configuration files: device + pumps, noise environment and
//! optimization targets. Frequencies are in Hz (`*_hz`), angles in degrees
//! and ports are numbered from 1.

use serde::Deserialize;

use crate::device::{CavityMode, CouplingMatrix, DeviceModel, MechanicalMode, TuningCurve};
use crate::effective::{OffResonant, PumpConfiguration};
use crate::error::{Error, Result};
use crate::noise::{AmplifierChain, Referral, ThermalEnvironment};
use crate::optimize::{OptimizationTarget, OptimizerSettings, TargetKind};
use crate::units::hz;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub f_hz: f64,
    pub kappa_int_hz: f64,
    pub kappa_ext_hz: f64,
    #[serde(rename = "L_h")]
    pub inductance_h: Option<f64>,
    #[serde(rename = "Cs_f")]
    pub stray_f: Option<f64>,
    #[serde(rename = "Cm_f")]
    pub motional_f: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MechanicsConfig {
    pub f_hz: f64,
    pub gamma_hz: f64,
    pub m_eff_kg: Option<f64>,
    pub x_zpf_m: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub g0_hz: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    /// Hz/V^2.
    pub alpha1_hz: f64,
    /// Hz/V^4.
    pub alpha2_hz: f64,
    #[serde(default = "one")]
    pub sign: f64,
    /// Bias range (V).
    pub v_range: Option<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PumpsConfig {
    pub photons: Vec<Vec<f64>>,
    pub phase_deg: Option<Vec<Vec<f64>>>,
    pub sideband_detuning_hz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum OffResonantConfig {
    #[default]
    Include,
    Neglect,
}

impl From<OffResonantConfig> for OffResonant {
    fn from(v: OffResonantConfig) -> Self {
        match v {
            OffResonantConfig::Include => OffResonant::Include,
            OffResonantConfig::Neglect => OffResonant::Neglect,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub off_resonant: OffResonantConfig,
}

/// Device and pump description.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub cavity: Vec<CavityConfig>,
    pub mechanics: Vec<MechanicsConfig>,
    pub couplings: CouplingConfig,
    #[serde(default)]
    pub tuning: Vec<TuningConfig>,
    pub pumps: Option<PumpsConfig>,
    #[serde(default)]
    pub model: ModelConfig,
}

impl DeviceConfig {
    pub fn device(&self) -> Result<DeviceModel> {
        let cavities = self
            .cavity
            .iter()
            .map(|c| {
                let mode = CavityMode::new(hz(c.f_hz), hz(c.kappa_int_hz), hz(c.kappa_ext_hz))?;
                Ok(match (c.inductance_h, c.stray_f, c.motional_f) {
                    (Some(l), Some(cs), Some(cm)) => mode.with_circuit(l, cs, cm),
                    (None, None, None) => mode,
                    _ => return Err(Error::Config("L_h, Cs_f and Cm_f must be given together".into())),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mechanics = self
            .mechanics
            .iter()
            .map(|m| {
                let mode = MechanicalMode::new(hz(m.f_hz), hz(m.gamma_hz))?;
                Ok(match (m.m_eff_kg, m.x_zpf_m) {
                    (Some(mass), Some(x)) => mode.with_mass(mass, x),
                    (None, None) => mode,
                    _ => return Err(Error::Config("m_eff_kg and x_zpf_m must be given together".into())),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let g0 = self.couplings.g0_hz.iter().map(|r| r.iter().map(|&g| hz(g)).collect()).collect();
        let tuning = self
            .tuning
            .iter()
            .map(|t| TuningCurve::new(hz(t.alpha1_hz), hz(t.alpha2_hz), t.sign).map(Some))
            .collect::<Result<Vec<_>>>()?;
        DeviceModel::new(cavities, mechanics, CouplingMatrix::new(g0)?, tuning)
    }

    /// Pumps from the `[pumps]` table, or all off when absent.
    pub fn pumps(&self) -> Result<PumpConfiguration> {
        let (n, m) = (self.cavity.len(), self.mechanics.len());
        let Some(p) = &self.pumps else {
            return Ok(PumpConfiguration::off(n, m));
        };
        let phases = match &p.phase_deg {
            Some(rows) => rows.iter().map(|r| r.iter().map(|d| d.to_radians()).collect()).collect(),
            None => vec![vec![0.0; m]; n],
        };
        let detuning = match &p.sideband_detuning_hz {
            Some(d) => d.iter().map(|&v| hz(v)).collect(),
            None => vec![0.0; m],
        };
        PumpConfiguration::new(p.photons.clone(), phases, detuning)
    }

    pub fn off_resonant(&self) -> OffResonant {
        self.model.off_resonant.into()
    }

    /// Bias range (V) of cavity `i`, if recorded.
    pub fn voltage_range(&self, i: usize) -> Option<(f64, f64)> {
        self.tuning.get(i).and_then(|t| t.v_range).map(|[a, b]| (a, b))
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    pub gain_db: Vec<f64>,
    pub n_amp: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OccupancyConfig {
    pub cavity: Vec<f64>,
    pub mechanics: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TemperatureConfig {
    pub cavity_k: Vec<f64>,
    pub mechanics_k: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReferralConfig {
    #[default]
    Input,
    Output,
}

impl From<ReferralConfig> for Referral {
    fn from(v: ReferralConfig) -> Self {
        match v {
            ReferralConfig::Input => Referral::Input,
            ReferralConfig::Output => Referral::Output,
        }
    }
}

/// Added-noise value for the path `from -> to` (1-based) at resonance.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseTarget {
    pub from: usize,
    pub to: usize,
    pub n_add: f64,
}

/// Amplifier chain, bath occupancies and optional fit targets.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub amplifier: AmplifierConfig,
    pub occupancy: Option<OccupancyConfig>,
    pub temperature: Option<TemperatureConfig>,
    #[serde(default)]
    pub referral: ReferralConfig,
    #[serde(default)]
    pub target: Vec<NoiseTarget>,
}

impl NoiseConfig {
    pub fn chain(&self) -> Result<AmplifierChain> {
        AmplifierChain::new(self.amplifier.gain_db.clone(), self.amplifier.n_amp.clone())
    }

    pub fn environment(&self, device: &DeviceModel) -> Result<ThermalEnvironment> {
        match (&self.occupancy, &self.temperature) {
            (Some(o), None) => ThermalEnvironment::from_occupancies(o.cavity.clone(), o.mechanics.clone()),
            (None, Some(t)) => ThermalEnvironment::from_temperatures(device, t.cavity_k.clone(), t.mechanics_k.clone()),
            (None, None) => Ok(ThermalEnvironment::vacuum(device.num_cavities(), device.num_mechanics())),
            (Some(_), Some(_)) => Err(Error::Config("give either [occupancy] or [temperature], not both".into())),
        }
    }

    pub fn referral(&self) -> Referral {
        self.referral.into()
    }

    /// Fit targets as zero-based `((to, from), value)`.
    pub fn targets(&self, ports: usize) -> Result<Vec<((usize, usize), f64)>> {
        self.target
            .iter()
            .map(|t| Ok(((to_index(t.to, ports)?, to_index(t.from, ports)?), t.n_add)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum TargetKindConfig {
    Isolate,
    Circulate,
    Convert,
    Match,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub max_evaluations: Option<usize>,
    pub restarts: Option<usize>,
    pub off_resonant: Option<OffResonantConfig>,
    /// Cooperativity of the analytic isolator seed.
    pub seed_cooperativity: Option<f64>,
}

/// Optimization target file.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKindConfig,
    /// 1-based ports: `[from, to]` (isolate, convert), three ports (circulate) or one (match).
    pub ports: Vec<usize>,
    #[serde(default)]
    pub band_hz: [f64; 2],
    #[serde(default = "one_usize")]
    pub band_points: usize,
    #[serde(default = "one")]
    pub insertion_weight: f64,
    #[serde(default = "one")]
    pub isolation_weight: f64,
    #[serde(default = "default_goal")]
    pub isolation_goal_db: f64,
    pub max_insertion_loss_db: Option<f64>,
    pub min_isolation_db: Option<f64>,
    #[serde(default)]
    pub search: SearchConfig,
}

fn one_usize() -> usize {
    1
}

fn default_goal() -> f64 {
    60.0
}

impl TargetConfig {
    pub fn target(&self, ports: usize) -> Result<OptimizationTarget> {
        let p = self.ports.iter().map(|&k| to_index(k, ports)).collect::<Result<Vec<_>>>()?;
        let need = match self.kind {
            TargetKindConfig::Isolate | TargetKindConfig::Convert => 2,
            TargetKindConfig::Circulate => 3,
            TargetKindConfig::Match => 1,
        };
        if p.len() != need {
            return Err(Error::Config(format!("target kind needs {need} ports, got {}", p.len())));
        }
        let kind = match self.kind {
            TargetKindConfig::Isolate => TargetKind::Isolate { from: p[0], to: p[1] },
            TargetKindConfig::Convert => TargetKind::Convert { a: p[0], b: p[1] },
            TargetKindConfig::Circulate => TargetKind::Circulate { order: [p[0], p[1], p[2]] },
            TargetKindConfig::Match => TargetKind::Match { port: p[0] },
        };
        let [lo, hi] = self.band_hz;
        Ok(OptimizationTarget::new(kind)
            .with_band(hz(lo), hz(hi), self.band_points)
            .with_weights(self.insertion_weight, self.isolation_weight)
            .with_goal(self.isolation_goal_db)
            .with_thresholds(self.max_insertion_loss_db, self.min_isolation_db))
    }

    pub fn settings(&self, default_model: OffResonant) -> OptimizerSettings {
        let d = OptimizerSettings::default();
        let s = &self.search;
        OptimizerSettings {
            starts: s.starts.unwrap_or(d.starts),
            seed: s.seed.unwrap_or(d.seed),
            max_evaluations: s.max_evaluations.unwrap_or(d.max_evaluations),
            restarts: s.restarts.unwrap_or(d.restarts),
            off_resonant: s.off_resonant.map_or(default_model, Into::into),
            ..d
        }
    }
}

fn to_index(port: usize, ports: usize) -> Result<usize> {
    if port == 0 || port > ports {
        return Err(Error::Config(format!("port {port} out of range 1..={ports}")));
    }
    Ok(port - 1)
}

fn parse_error(what: &str, e: toml::de::Error) -> Error {
    Error::Config(format!("{what}: {e}"))
}

/// Parses TOML text after applying `key.path[i]=value` overrides.
pub fn parse_with_overrides<T: serde::de::DeserializeOwned>(text: &str, overrides: &[String], what: &str) -> Result<T> {
    let mut value: toml::Value = toml::from_str(text).map_err(|e| parse_error(what, e))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    T::deserialize(value).map_err(|e| parse_error(what, e))
}

pub fn parse_device(text: &str) -> Result<DeviceConfig> {
    toml::from_str(text).map_err(|e| parse_error("device config", e))
}

pub fn parse_noise(text: &str) -> Result<NoiseConfig> {
    toml::from_str(text).map_err(|e| parse_error("noise config", e))
}

pub fn parse_target(text: &str) -> Result<TargetConfig> {
    toml::from_str(text).map_err(|e| parse_error("target config", e))
}

#[derive(Debug, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Segment>> {
    let bad = || Error::Config(format!("malformed override path `{path}`"));
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(k) => (&part[..k], &part[k..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(bad());
        }
        out.push(Segment::Key(key.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            out.push(Segment::Index(rest[1..close].trim().parse().map_err(|_| bad())?));
            rest = &rest[close + 1..];
        }
    }
    Ok(out)
}

/// Sets `path=value` in a parsed TOML tree; `value` is TOML syntax.
/// Array indices are zero-based: `pumps.photons[1][0]=2e5`.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` must look like key=value")))?;
    let segments = parse_path(path.trim())?;
    let wrapped: toml::Table =
        toml::from_str(&format!("v = {}", raw.trim())).map_err(|e| Error::Config(format!("override `{spec}`: {e}")))?;
    let new = wrapped["v"].clone();
    let missing = || Error::Config(format!("override path `{}` does not exist", path.trim()));
    let mut cur = root;
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        cur = match seg {
            Segment::Key(key) => {
                let table = cur.as_table_mut().ok_or_else(missing)?;
                if last {
                    table.insert(key.clone(), new);
                    return Ok(());
                }
                if matches!(segments[k + 1], Segment::Key(_)) && !table.contains_key(key) {
                    table.insert(key.clone(), toml::Value::Table(toml::Table::new()));
                }
                table.get_mut(key).ok_or_else(missing)?
            }
            Segment::Index(i) => {
                let arr = cur.as_array_mut().ok_or_else(missing)?;
                let slot = arr.get_mut(*i).ok_or_else(missing)?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
        };
    }
    Err(missing())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEVICE: &str = r#"
[[cavity]]
f_hz = 9.55e9
kappa_int_hz = 0.62e6
kappa_ext_hz = 1.8e6

[[cavity]]
f_hz = 9.82e9
kappa_int_hz = 0.28e6
kappa_ext_hz = 1.7e6

[[mechanics]]
f_hz = 4.34e6
gamma_hz = 4.0

[[mechanics]]
f_hz = 5.64e6
gamma_hz = 8.0

[couplings]
g0_hz = [[33.0, 34.0], [13.0, 31.0]]

[pumps]
photons = [[1e5, 2e5], [3e5, 4e5]]
phase_deg = [[0.0, 0.0], [0.0, 90.0]]
sideband_detuning_hz = [100.0, -50.0]
"#;

    #[test]
    fn parses_device_and_pumps() {
        let cfg = parse_device(DEVICE).unwrap();
        let dev = cfg.device().unwrap();
        assert_eq!((dev.num_cavities(), dev.num_mechanics()), (2, 2));
        assert!((dev.cavities[0].kappa_ext - hz(1.8e6)).abs() < 1e-6);
        let p = cfg.pumps().unwrap();
        assert!((p.phases[1][1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((p.sideband_detuning[0] - hz(100.0)).abs() < 1e-12);
        assert_eq!(cfg.off_resonant(), OffResonant::Include);
    }

    #[test]
    fn unknown_field_reports_location() {
        let text = DEVICE.replace("gamma_hz = 4.0", "gamma_hz = 4.0\ngama = 1");
        let err = parse_device(&text).unwrap_err().to_string();
        assert!(err.contains("gama") && err.contains("line"), "{err}");
    }

    #[test]
    fn overrides() {
        let cfg: DeviceConfig = parse_with_overrides(
            DEVICE,
            &["pumps.photons[1][0]=7e5".into(), "cavity[1].kappa_ext_hz = 1.5e6".into(), "model.off_resonant=\"neglect\"".into()],
            "device",
        )
        .unwrap();
        assert_eq!(cfg.pumps.as_ref().unwrap().photons[1][0], 7e5);
        assert_eq!(cfg.cavity[1].kappa_ext_hz, 1.5e6);
        assert_eq!(cfg.off_resonant(), OffResonant::Neglect);
        for bad in ["pumps.photons[5][0]=1", "nothing.here=1", "cavity[x].f_hz=1", "pumps.photons"] {
            assert!(parse_with_overrides::<DeviceConfig>(DEVICE, &[bad.into()], "device").is_err(), "{bad}");
        }
    }

    #[test]
    fn target_file() {
        let t = parse_target(
            r#"
kind = "circulate"
ports = [1, 2, 3]
band_hz = [-50.0, 50.0]
band_points = 3
min_isolation_db = 18.0
[search]
starts = 4
off_resonant = "neglect"
"#,
        )
        .unwrap();
        let target = t.target(3).unwrap();
        assert_eq!(target.kind, TargetKind::Circulate { order: [0, 1, 2] });
        let s = t.settings(OffResonant::Include);
        assert_eq!((s.starts, s.off_resonant), (4, OffResonant::Neglect));
        assert!(t.target(2).is_err());
    }

    #[test]
    fn noise_file() {
        let n = parse_noise(
            r#"
referral = "output"
[amplifier]
gain_db = [67.5, 64.0]
n_amp = [23.0, 23.0]
[occupancy]
cavity = [0.1, 0.2]
mechanics = [50.0, 80.0]
[[target]]
from = 1
to = 2
n_add = 4.0
"#,
        )
        .unwrap();
        assert_eq!(n.referral(), Referral::Output);
        assert_eq!(n.targets(2).unwrap(), vec![((1, 0), 4.0)]);
        let dev = parse_device(DEVICE).unwrap().device().unwrap();
        assert_eq!(n.environment(&dev).unwrap().mech_occupancy, vec![50.0, 80.0]);
        assert!(parse_noise("[amplifier]\ngain_db = [1.0]\n").is_err());
    }
}
