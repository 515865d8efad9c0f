use mechcirc::device::photons_for_cooperativity;
use mechcirc::effective::{renormalize_mechanics, OffResonant};
use mechcirc::optimize::isolator_seed;
use mechcirc::oracles::{conversion_efficiency, cooperativity_for_insertion_loss, optimal_phase, peak_detuning};
use mechcirc::presets::isolator_device;
use mechcirc::units::{hz, to_hz};
use num_complex::Complex64;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * b.abs().max(1e-300), "{a} vs {b}");
}

#[test]
fn closed_forms() {
    close(conversion_efficiency(95.0, 95.0, 0.8, 0.8), FROZEN_CONVERSION, 1e-12);
    let dev = isolator_device();
    let eta = dev.cavities[0].eta() * dev.cavities[1].eta();
    close(cooperativity_for_insertion_loss(2.4, eta).unwrap(), FROZEN_C, 1e-12);
    close(to_hz(peak_detuning(FROZEN_C, hz(190.0)).unwrap()), FROZEN_PEAK_HZ, 1e-12);
    close(optimal_phase(hz(158.5), hz(190.0), hz(407.0), 0.0).unwrap().to_degrees(), FROZEN_TAN_DEG, 1e-10);
}

#[test]
fn literal_renormalization() {
    let dev = isolator_device();
    let k = dev.kappas();
    let gam = [hz(190.0), hz(407.0)];
    let n: Vec<Vec<f64>> = (0..2)
        .map(|i| (0..2).map(|j| photons_for_cooperativity(FROZEN_C, dev.couplings.get(i, j), k[i], gam[j])).collect())
        .collect();
    let f: Vec<Vec<Complex64>> = (0..2)
        .map(|i| {
            vec![
                Complex64::new(dev.couplings.get(i, 0) * n[i][1].sqrt(), 0.0),
                Complex64::new(dev.couplings.get(i, 1) * n[i][0].sqrt(), 0.0),
            ]
        })
        .collect();
    let dw = dev.mechanics[1].omega_m - dev.mechanics[0].omega_m;
    let (d, g) = renormalize_mechanics(&f, &k, dw, &[0.0, 0.0], &dev.gammas()).unwrap();
    close(to_hz(g[0]), FROZEN_GAMMA_HZ[0], 1e-9);
    close(to_hz(g[1]), FROZEN_GAMMA_HZ[1], 1e-9);
    close(to_hz(d[0]), FROZEN_SHIFT_HZ[0], 1e-9);
    close(to_hz(d[1]), FROZEN_SHIFT_HZ[1], 1e-9);
}

#[test]
fn isolator_seed_values() {
    let seed = isolator_seed(&isolator_device(), FROZEN_C, 0, 1, OffResonant::Neglect).unwrap();
    close(seed.photons[0][0], 11231.42699261553, 1e-9);
    close(seed.photons[1][0], 59214.20976580141, 1e-9);
    close(seed.phases[1][1].to_degrees(), -36.66481548059842, 1e-9);
    close(to_hz(seed.sideband_detuning[0]), 6.035986843376642, 1e-9);
}

const FROZEN_CONVERSION: f64 = 0.6333159726981168;
const FROZEN_C: f64 = 5.054142146676989;
const FROZEN_PEAK_HZ: f64 = 286.70937506039047;
const FROZEN_TAN_DEG: f64 = -83.02322205232943;
const FROZEN_GAMMA_HZ: [f64; 2] = [1036.2971731793978, 2485.5623846536373];
const FROZEN_SHIFT_HZ: [f64; 2] = [570.3910536932045, -1570.1962514304366];
