use std::f64::consts::PI;

use super::*;
use crate::device::{CavityMode, CouplingMatrix, DeviceModel, MechanicalMode};
use crate::effective::{build_effective_with, OffResonant, PumpConfiguration};
use crate::oracles::{conversion_efficiency, reflection_coefficients};
use crate::presets::{circulator_device, isolator_device};
use crate::scattering::scattering_matrix;

fn neglect() -> OptimizerSettings {
    OptimizerSettings { off_resonant: OffResonant::Neglect, ..Default::default() }
}

fn random_pumps() -> PumpConfiguration {
    PumpConfiguration::new(
        vec![vec![2e5, 1e5], vec![3e4, 4e5], vec![1e6, 2e5]],
        vec![vec![0.3, -1.2], vec![2.0, 0.7], vec![-2.5, 1.1]],
        vec![2e3, -1.5e3],
    )
    .unwrap()
}

fn magnitudes(device: &DeviceModel, pumps: &PumpConfiguration, w: f64) -> Vec<f64> {
    let eff = build_effective_with(device, pumps, OffResonant::Include).unwrap();
    scattering_matrix(&eff, device, w).unwrap().iter().map(|z| z.norm()).collect()
}

#[test]
fn gauge_fixing_preserves_magnitudes() {
    let dev = circulator_device();
    let p = random_pumps();
    let base = magnitudes(&dev, &p, 250.0);
    let shifted = magnitudes(&dev, &p.shift_phases(0.77), 250.0);
    let fixed = gauge_fixed(&p);
    assert_eq!((fixed.phases[0][0], fixed.phases[1][0], fixed.phases[2][0], fixed.phases[0][1]), (0.0, 0.0, 0.0, 0.0));
    let pinned = magnitudes(&dev, &fixed, 250.0);
    for ((a, b), c) in base.iter().zip(&shifted).zip(&pinned) {
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
    }
}

#[test]
fn isolator_meets_paper_figures() {
    let dev = isolator_device();
    let seed = isolator_seed(&dev, 5.0, 0, 1, OffResonant::Neglect).unwrap();
    let target = OptimizationTarget::new(TargetKind::Isolate { from: 0, to: 1 }).with_goal(45.0);
    let seed_eval = evaluate(&dev, &target, &seed, OffResonant::Neglect).unwrap();
    let res = optimize_isolation(&dev, &target, &seed, &neglect()).unwrap();
    assert!(res.objective <= seed_eval.objective + 1e-12);
    assert!(res.achieved.isolation_db >= 40.0, "{:?}", res.achieved);
    assert!(res.achieved.insertion_loss_db <= 2.5, "{:?}", res.achieved);
    assert!(res.achieved.bandwidth_hz > 0.0);
    let again = evaluate(&dev, &target, &res.pumps, OffResonant::Neglect).unwrap();
    assert_eq!(again.objective, res.objective);
}

#[test]
fn analytic_seed_is_fixed_point() {
    let dev = isolator_device();
    let seed = isolator_seed(&dev, 8.0, 0, 1, OffResonant::Neglect).unwrap();
    let target = OptimizationTarget::new(TargetKind::Isolate { from: 0, to: 1 }).with_weights(0.0, 1.0).with_goal(200.0);
    let settings = OptimizerSettings {
        starts: 1,
        free: FreeParameters { photons: false, phases: true, detunings: false },
        ..neglect()
    };
    let res = optimize(&dev, &target, &seed, &settings).unwrap();
    let d = (res.pumps.phases[1][1] - seed.phases[1][1]).rem_euclid(2.0 * PI);
    assert!(d.min(2.0 * PI - d) < 1e-3, "moved by {d}");
    assert!(res.achieved.isolation_db > 100.0);
}

#[test]
fn reverse_direction_seed_isolates() {
    let dev = isolator_device();
    let seed = isolator_seed(&dev, 5.0, 1, 0, OffResonant::Neglect).unwrap();
    let e = evaluate(&dev, &OptimizationTarget::new(TargetKind::Isolate { from: 1, to: 0 }), &seed, OffResonant::Neglect)
        .unwrap();
    assert!(e.isolation_db > 100.0, "{e:?}");
}

#[test]
fn insertion_weight_trades_isolation() {
    let dev = isolator_device();
    let seed = isolator_seed(&dev, 3.0, 0, 1, OffResonant::Include).unwrap();
    let band = (-2.0 * PI * 40.0, 2.0 * PI * 40.0);
    let base = OptimizationTarget::new(TargetKind::Isolate { from: 0, to: 1 }).with_band(band.0, band.1, 5).with_goal(80.0);
    let settings = OptimizerSettings { starts: 2, ..Default::default() };
    let weighted = optimize_isolation(&dev, &base.clone().with_weights(1.0, 0.2), &seed, &settings).unwrap();
    let pure = optimize_isolation(&dev, &base.with_weights(0.0, 1.0), &seed, &settings).unwrap();
    assert!(pure.achieved.isolation_db >= weighted.achieved.isolation_db - 1e-6);
    assert!(pure.achieved.insertion_loss_db >= weighted.achieved.insertion_loss_db - 1e-6);
}

#[test]
fn reversed_order_is_phase_conjugate() {
    let dev = circulator_device();
    let p = random_pumps();
    let mut neg = p.clone();
    neg.phases.iter_mut().flatten().for_each(|v| *v = -*v);
    let fwd = OptimizationTarget::new(TargetKind::Circulate { order: [0, 1, 2] }).with_band(-300.0, 500.0, 4);
    let rev = OptimizationTarget { kind: TargetKind::Circulate { order: [0, 2, 1] }, ..fwd.clone() };
    let a = evaluate(&dev, &fwd, &p, OffResonant::Include).unwrap();
    let b = evaluate(&dev, &rev, &neg, OffResonant::Include).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-9 * a.objective.abs().max(1.0));
}

#[test]
fn pumps_off_is_worst_case() {
    let dev = circulator_device();
    let target = OptimizationTarget::new(TargetKind::Circulate { order: [0, 1, 2] });
    let off = evaluate(&dev, &target, &PumpConfiguration::off(3, 2), OffResonant::Include).unwrap();
    assert!(off.insertion_loss_db >= 300.0 - 1e-9);
    let on = evaluate(&dev, &target, &random_pumps(), OffResonant::Include).unwrap();
    assert!(on.objective < off.objective);
}

#[test]
fn start_order_does_not_matter() {
    let dev = isolator_device();
    let seed = isolator_seed(&dev, 4.0, 0, 1, OffResonant::Neglect).unwrap();
    let target = OptimizationTarget::new(TargetKind::Isolate { from: 0, to: 1 }).with_goal(50.0);
    let starts = vec![
        seed.clone(),
        isolator_seed(&dev, 2.0, 0, 1, OffResonant::Neglect).unwrap(),
        isolator_seed(&dev, 9.0, 0, 1, OffResonant::Neglect).unwrap(),
    ];
    let settings = neglect();
    let a = optimize_from_starts(&dev, &target, &seed, &starts, &settings).unwrap();
    let reversed: Vec<_> = starts.iter().rev().cloned().collect();
    let b = optimize_from_starts(&dev, &target, &seed, &reversed, &settings).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-4);
}

#[test]
fn target_validation() {
    let dev = isolator_device();
    let bad = OptimizationTarget::new(TargetKind::Isolate { from: 0, to: 2 });
    assert!(bad.validate(&dev).is_err());
    let same = OptimizationTarget::new(TargetKind::Isolate { from: 1, to: 1 });
    assert!(same.validate(&dev).is_err());
    let weights = OptimizationTarget::new(TargetKind::Match { port: 0 }).with_weights(0.0, 0.0);
    assert!(weights.validate(&dev).is_err());
    let band = OptimizationTarget::new(TargetKind::Match { port: 0 }).with_band(5.0, 1.0, 3);
    assert!(band.validate(&dev).is_err());
    assert!(optimize_circulation(&dev, [0, 1, 2], (0.0, 0.0), &PumpConfiguration::off(2, 2), &neglect()).is_err());
}

fn matched_device(eta: f64) -> DeviceModel {
    let k = 2e6;
    let cav = vec![CavityMode::new(6e10, k * (1.0 - eta), k * eta).unwrap(), CavityMode::new(6.4e10, k * (1.0 - eta), k * eta).unwrap()];
    DeviceModel::new(cav, vec![MechanicalMode::new(3e7, 30.0).unwrap()], CouplingMatrix::new(vec![vec![200.0], vec![150.0]]).unwrap(), vec![])
        .unwrap()
}

#[test]
fn impedance_match_limits() {
    let m = impedance_match(&matched_device(1.0), 0, 2000.0).unwrap();
    assert!(m.residual.iter().all(|&r| r < 1e-3), "{:?}", m.residual);

    let eta = 0.8;
    for c in [0.5, 3.0, 40.0] {
        let m = impedance_match(&matched_device(eta), 0, c).unwrap();
        let (r1, r2) = reflection_coefficients(c, c, eta, eta);
        assert!((m.residual[0] - r1.sqrt()).abs() < 1e-9);
        assert!((m.residual[1] - r2.sqrt()).abs() < 1e-9);
        assert!((m.residual[0] - (1.0 + 2.0 * c - 2.0 * eta * (1.0 + c)).abs() / (1.0 + 2.0 * c)).abs() < 1e-9);
    }
    assert!(impedance_match(&matched_device(0.5), 1, 1.0).is_err());
    assert!(impedance_match(&matched_device(0.5), 0, -1.0).is_err());
}

#[test]
fn transmission_peaks_near_ninety_five() {
    let (e1, e2) = (0.744, 0.859);
    let best = (1..400)
        .map(|k| k as f64 * 0.5)
        .max_by(|a, b| conversion_efficiency(95.0, *a, e1, e2).total_cmp(&conversion_efficiency(95.0, *b, e1, e2)))
        .unwrap();
    assert!((best - 96.0).abs() <= 0.5);
}

#[test]
fn conversion_bandwidth_reported() {
    let dev = matched_device(0.9);
    let pumps = impedance_match(&dev, 0, 10.0).unwrap().pumps;
    let target = OptimizationTarget::new(TargetKind::Convert { a: 0, b: 1 });
    let settings = OptimizerSettings { starts: 1, free: FreeParameters { photons: false, phases: true, detunings: false }, ..Default::default() };
    let res = optimize(&dev, &target, &pumps, &settings).unwrap();
    // Gamma_T = gamma (1 + C1 + C2).
    assert!((res.achieved.bandwidth_hz / (30.0 * 21.0 / (2.0 * PI)) - 1.0).abs() < 1e-3, "{:?}", res.achieved);
}
