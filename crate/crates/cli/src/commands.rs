use std::f64::consts::PI;
use std::path::Path;

use mechcirc::config::{parse_noise, parse_target, parse_with_overrides, DeviceConfig, TargetKindConfig};
use mechcirc::device::DeviceModel;
use mechcirc::effective::{build_effective_with, rwa_validity, EffectiveModel, OffResonant, PumpConfiguration, ValidityFlag};
use mechcirc::noise::{fit_occupancies, noise_budget, FitParameters, ThermalEnvironment};
use mechcirc::optimize::{
    cooperativities, impedance_match, isolator_seed, optimize as run_optimizer, optimize_isolation, transmission_fwhm,
    OptimizationResult, TargetKind,
};
use mechcirc::oracles::{conversion_efficiency, forward_transmission_general, lambda_ratio, TwoPortWorkingPoint};
use mechcirc::scattering::{
    assemble_drift_matrix, bath_power, linspace, max_singular_value, phase_sweep as sweep_phases, port_response, row_deficit,
    scattering_matrix, sweep_grid,
};
use mechcirc::timedomain::{compare_adiabatic, IntegrationOptions};
use mechcirc::units::{hz, power_db, to_hz};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, RunManifest};
use crate::{Common, VerifyMode, Window};

/// Reported in place of `-inf` dB.
const DB_FLOOR: f64 = -300.0;
const ORACLE_TOL: f64 = 1e-9;
const PASSIVITY_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;
const TIMEDOMAIN_TOL: f64 = 0.01;
const RANDOM_CONFIGS: usize = 8;

struct Loaded {
    manifest: RunManifest,
    cfg: DeviceConfig,
    device: DeviceModel,
    pumps: PumpConfiguration,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load(common: &Common, argv: &[String], seed: u64) -> Result<Loaded> {
    let text = read_text(&common.config)?;
    let what = common.config.display().to_string();
    let cfg: DeviceConfig = parse_with_overrides(&text, &common.set, &what)?;
    let device = cfg.device()?;
    let pumps = cfg.pumps()?;
    let manifest = RunManifest {
        config: common.config.clone(),
        config_sha256: sha256_hex(text.as_bytes()),
        command: argv.to_vec(),
        overrides: common.set.clone(),
        out_dir: common.out_dir.clone(),
        seed,
    };
    Ok(Loaded { manifest, cfg, device, pumps })
}

fn emit(loaded: &Loaded, name: &str, body: &str) -> Result<()> {
    let text = format!("{}{body}", loaded.manifest.header());
    match &loaded.manifest.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn db(z: Complex64) -> f64 {
    power_db(z.norm_sqr()).max(DB_FLOOR)
}

fn table(header: &[String], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

fn grid(window: Window, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(window.omega_min < window.omega_max) {
        return Err(CliError::Config(format!(
            "need omega_min < omega_max and at least 2 points, got [{}, {}] with {points}",
            window.omega_min, window.omega_max
        )));
    }
    Ok(linspace(hz(window.omega_min), hz(window.omega_max), points))
}

/// `"a,b"` of 1-based indices to 0-based, each below the matching limit.
fn indices(spec: &str, limits: &[usize], what: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != limits.len() {
        return Err(CliError::Config(format!("{what} needs {} comma-separated indices, got `{spec}`", limits.len())));
    }
    parts
        .iter()
        .zip(limits)
        .map(|(p, &n)| match p.parse::<usize>() {
            Ok(k) if k >= 1 && k <= n => Ok(k - 1),
            _ => Err(CliError::Config(format!("{what}: `{p}` is not in 1..={n}"))),
        })
        .collect()
}

fn effective(loaded: &Loaded, pumps: &PumpConfiguration) -> Result<EffectiveModel> {
    Ok(build_effective_with(&loaded.device, pumps, loaded.cfg.off_resonant())?)
}

pub fn spectrum(common: &Common, argv: &[String], window: Window, points: usize) -> Result<()> {
    let loaded = load(common, argv, common.seed.unwrap_or(0))?;
    let omegas = grid(window, points)?;
    let eff = effective(&loaded, &loaded.pumps)?;
    let sweep = sweep_grid(&eff, &loaded.device, &omegas)?;
    let n = loaded.device.num_cavities();
    let mut header = vec!["omega_hz".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            header.extend([format!("s{i}{j}_re"), format!("s{i}{j}_im"), format!("s{i}{j}_db")]);
        }
    }
    let rows: Vec<Vec<f64>> = sweep
        .omega_grid
        .iter()
        .zip(&sweep.s_matrices)
        .map(|(&w, s)| {
            let mut r = vec![to_hz(w)];
            for i in 0..n {
                for j in 0..n {
                    let z = s[(i, j)];
                    r.extend([z.re, z.im, db(z)]);
                }
            }
            r
        })
        .collect();
    emit(&loaded, "spectrum.csv", &table(&header, &rows)?)
}

pub fn phase_sweep(
    common: &Common,
    argv: &[String],
    window: Window,
    phase_index: &str,
    (phi_min, phi_max, phi_points): (f64, f64, usize),
    omega_points: usize,
) -> Result<()> {
    let loaded = load(common, argv, common.seed.unwrap_or(0))?;
    let (n, m) = (loaded.device.num_cavities(), loaded.device.num_mechanics());
    let idx = indices(phase_index, &[n, m], "--phase-index")?;
    if phi_points < 2 || !(phi_min < phi_max) {
        return Err(CliError::Config("need phi_min_deg < phi_max_deg and at least 2 phase points".into()));
    }
    let phis_deg = linspace(phi_min, phi_max, phi_points);
    let phis: Vec<f64> = phis_deg.iter().map(|d| d.to_radians()).collect();
    let omegas = grid(window, omega_points)?;
    let mats = sweep_phases(&loaded.device, &loaded.pumps, loaded.cfg.off_resonant(), (idx[0], idx[1]), &phis, &omegas)?;
    let mut header = vec!["phi_deg".to_string(), "omega_hz".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            header.push(format!("s{i}{j}_db"));
        }
    }
    let mut rows = Vec::with_capacity(phis.len() * omegas.len());
    for (phi, row) in phis_deg.iter().zip(&mats) {
        for (&w, s) in omegas.iter().zip(row) {
            let mut r = vec![*phi, to_hz(w)];
            r.extend((0..n).flat_map(|i| (0..n).map(move |j| db(s[(i, j)]))));
            rows.push(r);
        }
    }
    emit(&loaded, "phase_sweep.csv", &table(&header, &rows)?)
}

pub fn convert(
    common: &Common,
    argv: &[String],
    window: Window,
    points: usize,
    ports: &str,
    mode: usize,
    cooperativity: Option<f64>,
) -> Result<()> {
    let loaded = load(common, argv, common.seed.unwrap_or(0))?;
    let dev = &loaded.device;
    let n = dev.num_cavities();
    let p = indices(ports, &[n, n], "--ports")?;
    let (a, b) = (p[0], p[1]);
    if a == b {
        return Err(CliError::Config("--ports must name two different ports".into()));
    }
    let pumps = match cooperativity {
        Some(c) => {
            let j = indices(&mode.to_string(), &[dev.num_mechanics()], "--mode")?[0];
            let mut pumps = impedance_match(dev, j, c)?.pumps;
            for (i, row) in pumps.photons.iter_mut().enumerate() {
                if i != a && i != b {
                    row.iter_mut().for_each(|x| *x = 0.0);
                }
            }
            pumps
        }
        None => loaded.pumps.clone(),
    };
    let eff = effective(&loaded, &pumps)?;
    let omegas = grid(window, points)?;
    let sweep = sweep_grid(&eff, dev, &omegas)?;
    let (a1, b1) = (a + 1, b + 1);
    let header: Vec<String> =
        ["omega_hz".into(), format!("s{b1}{a1}_db"), format!("s{a1}{b1}_db"), format!("s{a1}{a1}_db"), format!("s{b1}{b1}_db")]
            .to_vec();
    let rows: Vec<Vec<f64>> = omegas
        .iter()
        .zip(&sweep.s_matrices)
        .map(|(&w, s)| vec![to_hz(w), db(s[(b, a)]), db(s[(a, b)]), db(s[(a, a)]), db(s[(b, b)])])
        .collect();

    let peak = scattering_matrix(&eff, dev, 0.0)?[(b, a)].norm_sqr();
    let span = hz(window.omega_max.abs().max(window.omega_min.abs()));
    let fwhm = transmission_fwhm(dev, &eff, (b, a), 0.0, span)?;
    let coop = cooperativities(dev, &pumps);
    let j = mode.saturating_sub(1).min(dev.num_mechanics() - 1);
    let oracle = conversion_efficiency(coop[a][j], coop[b][j], dev.cavities[a].eta(), dev.cavities[b].eta());
    let summary = format!(
        "# peak_transmission = {peak}\n# single_mode_oracle = {oracle}\n# cooperativities = ({}, {})\n# fwhm_hz = {fwhm}\n",
        coop[a][j], coop[b][j]
    );
    eprint!("{}", summary.replace("# ", ""));
    emit(&loaded, "convert.csv", &format!("{summary}{}", table(&header, &rows)?))
}

pub fn noise(common: &Common, argv: &[String], env_path: &Path, window: Window, points: usize, fit: bool) -> Result<()> {
    let loaded = load(common, argv, common.seed.unwrap_or(0))?;
    let dev = &loaded.device;
    let noise = parse_noise(&read_text(env_path)?).map_err(|e| CliError::Config(format!("{}: {e}", env_path.display())))?;
    let chain = noise.chain()?;
    if chain.gain_db.len() != dev.num_cavities() {
        return Err(CliError::Config(format!(
            "{} amplifier gains for {} ports",
            chain.gain_db.len(),
            dev.num_cavities()
        )));
    }
    let referral = noise.referral();
    let eff = effective(&loaded, &loaded.pumps)?;
    let omegas = grid(window, points)?;
    let sweep = sweep_grid(&eff, dev, &omegas)?;
    let mut extra = String::new();
    let env = if fit {
        let targets = noise.targets(dev.num_cavities())?;
        if targets.is_empty() {
            return Err(CliError::Config("--fit needs [[target]] entries in the noise file".into()));
        }
        let k = (0..omegas.len()).min_by(|&x, &y| omegas[x].abs().total_cmp(&omegas[y].abs())).unwrap_or(0);
        let f = fit_occupancies(&sweep, k, &targets, referral, FitParameters::MechanicsOnly)?;
        extra.push_str(&format!("# fitted mechanical occupancy = {:?}\n", f.mech_occupancy));
        for (((to, from), t), p) in targets.iter().zip(&f.predicted) {
            extra.push_str(&format!("# fit {} -> {}: target {t}, model {p}\n", from + 1, to + 1));
        }
        ThermalEnvironment::from_occupancies(vec![0.0; dev.num_cavities()], f.mech_occupancy)?
    } else {
        noise.environment(dev)?
    };
    extra.push_str(&format!(
        "# cavity occupancy = {:?}\n# mechanical occupancy = {:?}\n",
        env.cavity_occupancy, env.mech_occupancy
    ));
    let budget = noise_budget(&sweep, dev, &env, &chain, referral)?;
    let mut header = vec!["omega_hz".to_string()];
    header.extend((1..=dev.num_cavities()).map(|p| format!("psd_{p}_w_per_hz")));
    header.extend(budget.n_add.iter().map(|((to, from), _)| format!("n_add_{}to{}", from + 1, to + 1)));
    let rows: Vec<Vec<f64>> = (0..omegas.len())
        .map(|k| {
            let mut r = vec![to_hz(omegas[k])];
            r.extend(budget.psd.iter().map(|p| p[k]));
            r.extend(budget.n_add.iter().map(|(_, v)| v[k]));
            r
        })
        .collect();
    emit(&loaded, "noise.csv", &format!("{extra}{}", table(&header, &rows)?))
}

#[derive(Serialize)]
struct PumpsOut {
    photons: Vec<Vec<f64>>,
    phase_deg: Vec<Vec<f64>>,
    sideband_detuning_hz: Vec<f64>,
}

#[derive(Serialize)]
struct AchievedOut {
    insertion_loss_db: f64,
    isolation_db: f64,
    bandwidth_hz: f64,
}

#[derive(Serialize)]
struct ResultOut {
    meets: bool,
    objective: f64,
    best_start: usize,
    budget_exhausted: bool,
    achieved: AchievedOut,
    pumps: PumpsOut,
}

fn result_toml(res: &OptimizationResult, meets: bool) -> Result<String> {
    let p = &res.pumps;
    let out = ResultOut {
        meets,
        objective: res.objective,
        best_start: res.flags.best_start,
        budget_exhausted: res.flags.budget_exhausted,
        achieved: AchievedOut {
            insertion_loss_db: res.achieved.insertion_loss_db,
            isolation_db: res.achieved.isolation_db,
            bandwidth_hz: res.achieved.bandwidth_hz,
        },
        pumps: PumpsOut {
            photons: p.photons.clone(),
            phase_deg: p.phases.iter().map(|r| r.iter().map(|v| v.to_degrees()).collect()).collect(),
            sideband_detuning_hz: p.sideband_detuning.iter().map(|&d| to_hz(d)).collect(),
        },
    };
    toml::to_string(&out).map_err(|e| CliError::Output(e.to_string()))
}

pub fn optimize(common: &Common, argv: &[String], target_path: &Path) -> Result<()> {
    let tcfg = parse_target(&read_text(target_path)?).map_err(|e| CliError::Config(format!("{}: {e}", target_path.display())))?;
    let seed = common.seed.or(tcfg.search.seed).unwrap_or(0);
    let loaded = load(common, argv, seed)?;
    let dev = &loaded.device;
    let target = tcfg.target(dev.num_cavities())?;
    target.validate(dev)?;
    let settings = mechcirc::optimize::OptimizerSettings { seed, ..tcfg.settings(loaded.cfg.off_resonant()) };

    let pumps_off = loaded.pumps.photons.iter().flatten().all(|&n| n == 0.0);
    let res = match target.kind {
        TargetKind::Isolate { from, to } if tcfg.kind == TargetKindConfig::Isolate && dev.num_mechanics() == 2 && dev.num_cavities() == 2 => {
            let start = if pumps_off {
                isolator_seed(dev, tcfg.search.seed_cooperativity.unwrap_or(5.0), from, to, settings.off_resonant)?
            } else {
                loaded.pumps.clone()
            };
            optimize_isolation(dev, &target, &start, &settings)?
        }
        _ => run_optimizer(dev, &target, &loaded.pumps, &settings)?,
    };
    let meets = res.meets(&target);

    let history: Vec<Vec<f64>> = res
        .history
        .iter()
        .map(|h| vec![h.start as f64, h.run as f64, h.evaluations as f64, h.objective])
        .collect();
    let header: Vec<String> = ["start", "run", "evaluations", "objective"].iter().map(|s| s.to_string()).collect();
    emit(&loaded, "result.toml", &result_toml(&res, meets)?)?;
    if loaded.manifest.out_dir.is_some() {
        emit(&loaded, "history.csv", &table(&header, &history)?)?;
    }
    let summary = format!(
        "insertion loss {:.3} dB, isolation {:.3} dB, bandwidth {:.3} Hz",
        res.achieved.insertion_loss_db, res.achieved.isolation_db, res.achieved.bandwidth_hz
    );
    if meets {
        eprintln!("target met: {summary}");
        Ok(())
    } else {
        Err(CliError::NotMet(format!("target not met: {summary}")))
    }
}

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

fn two_port(loaded: &Loaded) -> Result<(DeviceModel, PumpConfiguration)> {
    let dev = &loaded.device;
    if dev.num_cavities() < 2 || dev.num_mechanics() != 2 {
        return Err(CliError::Config("oracle checks need at least two cavities and exactly two mechanical modes".into()));
    }
    let two = dev.select_cavities(&[0, 1])?;
    let p = &loaded.pumps;
    let pumps = PumpConfiguration::new(p.photons[..2].to_vec(), p.phases[..2].to_vec(), p.sideband_detuning.clone())?;
    if pumps.photons.iter().flatten().all(|&n| n == 0.0) {
        return Ok((two.clone(), isolator_seed(&two, 5.0, 0, 1, OffResonant::Neglect)?));
    }
    Ok((two, pumps))
}

fn oracle_checks(loaded: &Loaded) -> Result<Vec<Check>> {
    let (dev, pumps) = two_port(loaded)?;
    let eff = build_effective_with(&dev, &pumps, OffResonant::Neglect)?;
    let kappas = dev.kappas();
    let g = &eff.g;
    let c = [0, 1].map(|i| [0, 1].map(|j| 4.0 * g[i][j].norm_sqr() / (kappas[i] * eff.gamma_eff[j])));
    let phase = |i: usize, j: usize| -g[i][j].arg();
    let wp = TwoPortWorkingPoint {
        cooperativities: c,
        detunings: [eff.delta_eff[0], eff.delta_eff[1]],
        phi: phase(1, 1) + phase(0, 0) - phase(1, 0) - phase(0, 1),
        gammas: [eff.gamma_eff[0], eff.gamma_eff[1]],
        etas: [dev.cavities[0].eta(), dev.cavities[1].eta()],
    };
    let span = 5.0 * eff.gamma_eff.iter().fold(0.0, |a: f64, b| a.max(*b));
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut used = 0usize;
    for w in linspace(-span, span, 101) {
        let s = scattering_matrix(&eff, &dev, w)?;
        scale = scale.max(s[(1, 0)].norm());
        if let Ok(l) = lambda_ratio(&wp, w) {
            worst = worst.max((s[(0, 1)] - l * s[(1, 0)]).norm());
            used += 1;
        }
    }
    let worst = if scale > 0.0 { worst / scale } else { worst };
    let mut out = vec![check(
        "oracle/ratio",
        used > 0 && worst < ORACLE_TOL,
        format!("S12 vs lambda S21, {used} points, max error {worst:.2e} of max |S21|"),
    )];

    let s21 = scattering_matrix(&eff, &dev, 0.0)?[(1, 0)];
    let expect = forward_transmission_general(&wp);
    let err = (s21 - expect).norm() / expect.norm().max(f64::MIN_POSITIVE);
    out.push(check("oracle/forward", err < ORACLE_TOL, format!("S21(0) vs closed form, relative error {err:.2e}")));

    let cm = 10.0;
    let matched = impedance_match(&dev, 0, cm)?;
    let eff = build_effective_with(&dev, &matched.pumps, OffResonant::Neglect)?;
    let t = scattering_matrix(&eff, &dev, 0.0)?[(1, 0)].norm_sqr();
    let expect = conversion_efficiency(cm, cm, wp.etas[0], wp.etas[1]);
    let err = (t / expect - 1.0).abs();
    out.push(check("oracle/conversion", err < ORACLE_TOL, format!("|S21|^2 at C = {cm}: {t:.6} vs {expect:.6}")));
    Ok(out)
}

fn timedomain_checks(loaded: &Loaded) -> Result<Vec<Check>> {
    let dev = &loaded.device;
    if dev.num_mechanics() != 2 {
        return Err(CliError::Config("time-domain check needs two mechanical modes".into()));
    }
    let eff = build_effective_with(dev, &loaded.pumps, OffResonant::Include)?;
    let rwa = rwa_validity(&eff, dev);
    let port = loaded.pumps.photons.iter().position(|r| r.iter().any(|&n| n > 0.0)).unwrap_or(0);
    let report = compare_adiabatic(dev, &loaded.pumps, &[0.0], port, &IntegrationOptions::default())?;
    let other = if port == 0 { 1.min(dev.num_cavities() - 1) } else { 0 };
    let (td, fd) = (report.s_time_domain[0][other].norm(), report.s_frequency_domain[0][other].norm());
    let dev_rel = if fd > 0.0 { (td - fd).abs() / fd } else { td };
    Ok(vec![
        check(
            "timedomain/adiabatic",
            dev_rel < TIMEDOMAIN_TOL,
            format!(
                "|S{}{}| time domain {td:.6} vs frequency domain {fd:.6} (relative {dev_rel:.2e}, column deviation {:.2e})",
                other + 1,
                port + 1,
                report.max
            ),
        ),
        check(
            "timedomain/rwa",
            rwa.flag != ValidityFlag::Fail,
            format!(
                "{:?}: |F|/dw = {:.3}, kappa/omega_m = {:.3}, kappa/(2 dw) = {:.3}",
                rwa.flag, rwa.f_over_dw, rwa.kappa_over_omega_m, rwa.kappa_over_dw
            ),
        ),
    ])
}

fn invariant_checks(loaded: &Loaded) -> Result<Vec<Check>> {
    let dev = &loaded.device;
    let (n, m) = (dev.num_cavities(), dev.num_mechanics());
    let mut rng = ChaCha8Rng::seed_from_u64(loaded.manifest.seed);
    let mut configs = vec![loaded.pumps.clone()];
    for _ in 0..RANDOM_CONFIGS {
        let photons = (0..n).map(|_| (0..m).map(|_| 10f64.powf(rng.gen_range(2.0..7.0))).collect()).collect();
        let phases = (0..n).map(|_| (0..m).map(|_| rng.gen_range(-PI..PI)).collect()).collect();
        let det = (0..m).map(|_| hz(rng.gen_range(-2e3..2e3))).collect();
        configs.push(PumpConfiguration::new(photons, phases, det)?);
    }
    let (mut sigma, mut budget, mut rank, mut gauge, mut transpose) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut points = 0usize;
    for p in &configs {
        let eff = effective(loaded, p)?;
        let shifted = effective(loaded, &p.shift_phases(0.7))?;
        let mut conj = p.clone();
        conj.phases.iter_mut().flatten().for_each(|v| *v = -*v);
        let conj = effective(loaded, &conj)?;
        let span = (5.0 * eff.gamma_eff.iter().fold(0.0, |a: f64, b| a.max(*b))).max(hz(1e3));
        for w in linspace(-span, span, 41) {
            let r = port_response(&eff, dev, w)?;
            sigma = sigma.max(max_singular_value(&r.s));
            for (d, b) in row_deficit(&r.s).iter().zip(bath_power(&r.baths)) {
                budget = budget.max((d - b).abs());
            }
            rank = rank.max(assemble_drift_matrix(&eff, dev, w).low_rank_residual(m));
            let s2 = scattering_matrix(&shifted, dev, w)?;
            gauge = r.s.iter().zip(s2.iter()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(gauge, f64::max);
            let s3 = scattering_matrix(&conj, dev, w)?;
            transpose = transpose.max((&r.s - s3.transpose()).norm());
            points += 1;
        }
    }
    Ok(vec![
        check("invariants/passivity", sigma <= 1.0 + PASSIVITY_TOL, format!("max sigma_max {sigma:.12} over {points} points")),
        check("invariants/energy", budget < PASSIVITY_TOL, format!("max |1 - sum|S|^2 - bath power| {budget:.2e}")),
        check("invariants/rank", rank < RANK_TOL, format!("max rank-{m} residual {rank:.2e}")),
        check("invariants/gauge", gauge < RANK_TOL, format!("max |S| change under a global phase {gauge:.2e}")),
        check("invariants/reciprocity", transpose < RANK_TOL, format!("max ||S(phi) - S(-phi)^T|| {transpose:.2e}")),
    ])
}

pub fn verify(common: &Common, argv: &[String], mode: VerifyMode) -> Result<()> {
    let loaded = load(common, argv, common.seed.unwrap_or(0))?;
    let mut checks = Vec::new();
    if matches!(mode, VerifyMode::Oracle | VerifyMode::All) {
        checks.extend(oracle_checks(&loaded)?);
    }
    if matches!(mode, VerifyMode::Timedomain | VerifyMode::All) {
        checks.extend(timedomain_checks(&loaded)?);
    }
    if matches!(mode, VerifyMode::Invariants | VerifyMode::All) {
        checks.extend(invariant_checks(&loaded)?);
    }
    let mut body = String::new();
    for c in &checks {
        body.push_str(&format!("{} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    emit(&loaded, "verify.txt", &body)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotMet(format!("verification failed: {}", failed.join(", "))))
    }
}
