//! Parameters of the reference three-cavity, two-mode nanostring device.

use crate::device::{CavityMode, CouplingMatrix, DeviceModel, MechanicalMode, TuningCurve};
use crate::units::hz;

/// Cavity resonances (Hz).
pub const CAVITY_F_HZ: [f64; 3] = [9.55e9, 9.82e9, 11.32e9];
pub const KAPPA_INT_HZ: [f64; 3] = [0.62e6, 0.28e6, 1.42e6];
pub const KAPPA_EXT_HZ: [f64; 3] = [1.8e6, 1.7e6, 1.58e6];
pub const INDUCTANCE_H: [f64; 3] = [48.2e-9, 48.3e-9, 34.4e-9];
pub const STRAY_F: [f64; 3] = [5.3e-15, 4.98e-15, 5.29e-15];
pub const MOTIONAL_F: f64 = 0.45e-15;

pub const MECH_F_HZ: [f64; 2] = [4.34e6, 5.64e6];
pub const MECH_GAMMA_HZ: [f64; 2] = [4.0, 8.0];
pub const MECH_MASS_KG: [f64; 2] = [4e-15, 2.2e-15];
pub const MECH_XZPF_M: [f64; 2] = [22e-15, 26e-15];

/// Vacuum couplings `g0[i][j] / 2pi` (Hz).
pub const G0_HZ: [[f64; 2]; 3] = [[33.0, 34.0], [13.0, 31.0], [22.0, 45.0]];

/// Bias tuning coefficients `/2pi` (Hz/V^2, Hz/V^4) and direction per cavity.
pub const TUNING_ALPHA1_HZ: f64 = 0.53e6;
pub const TUNING_ALPHA2_HZ: f64 = 0.05e6;
pub const TUNING_SIGN: [f64; 3] = [1.0, -1.0, 1.0];
/// Largest bias magnitude of the tuning sweep (V).
pub const TUNING_V_MAX: f64 = 4.45;

/// Amplifier chain gains (dB) and added quanta per port.
pub const GAIN_DB: [f64; 3] = [67.5, 64.0, 60.5];
pub const N_AMP: [f64; 3] = [23.0, 23.0, 33.0];

/// Full three-cavity circulator device.
pub fn circulator_device() -> DeviceModel {
    let cavities = (0..3)
        .map(|i| {
            CavityMode::new(hz(CAVITY_F_HZ[i]), hz(KAPPA_INT_HZ[i]), hz(KAPPA_EXT_HZ[i]))
                .expect("preset cavity")
                .with_circuit(INDUCTANCE_H[i], STRAY_F[i], MOTIONAL_F)
        })
        .collect();
    let mechanics = (0..2)
        .map(|j| {
            MechanicalMode::new(hz(MECH_F_HZ[j]), hz(MECH_GAMMA_HZ[j]))
                .expect("preset mechanics")
                .with_mass(MECH_MASS_KG[j], MECH_XZPF_M[j])
        })
        .collect();
    let g0 = G0_HZ.iter().map(|row| row.iter().map(|&g| hz(g)).collect()).collect();
    let tuning = TUNING_SIGN
        .iter()
        .map(|&s| Some(TuningCurve::new(hz(TUNING_ALPHA1_HZ), hz(TUNING_ALPHA2_HZ), s).expect("preset tuning")))
        .collect();
    DeviceModel::new(cavities, mechanics, CouplingMatrix::new(g0).expect("preset g0"), tuning)
        .expect("preset device")
}

/// Two-port isolator: cavities 1 and 2 of the circulator device.
pub fn isolator_device() -> DeviceModel {
    circulator_device().select_cavities(&[0, 1]).expect("preset isolator")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let d = circulator_device();
        assert_eq!((d.num_cavities(), d.num_mechanics()), (3, 2));
        let i = isolator_device();
        assert_eq!((i.num_cavities(), i.num_mechanics()), (2, 2));
        assert_eq!(i.couplings.get(1, 1), hz(31.0));
        assert!(d.poorly_resolved_mechanics().is_empty());
    }

    #[test]
    fn cavity_two_spans_thirty_mhz() {
        let d = circulator_device();
        let span = d.tuning[1].unwrap().span(-TUNING_V_MAX, TUNING_V_MAX);
        assert!((span / hz(30e6) - 1.0).abs() < 0.01);
    }
}
