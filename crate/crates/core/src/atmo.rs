//! Speed of sound from temperature / humidity / pressure readings.
//!
//! Uses Cramér's (1993) polynomial for real air, with the water-vapour mole
//! fraction from the Davis saturation-pressure and enhancement-factor
//! formulas. CO2 is fixed at 400 ppm.

use thiserror::Error;

pub const STANDARD_PRESSURE_KPA: f64 = 101.325;
const CO2_MOLE_FRACTION: f64 = 400e-6;

pub const MIN_TEMPERATURE_C: f64 = -30.0;
pub const MAX_TEMPERATURE_C: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtmoError {
    #[error("{quantity} = {value} outside [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("sound speeds must be positive and finite (got {c_old}, {c_new})")]
    NonPositiveSpeed { c_old: f64, c_new: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmoState {
    pub temperature_c: f64,
    pub relative_humidity_pct: f64,
    pub pressure_kpa: f64,
}

impl AtmoState {
    pub fn new(temperature_c: f64, relative_humidity_pct: f64) -> Self {
        Self {
            temperature_c,
            relative_humidity_pct,
            pressure_kpa: STANDARD_PRESSURE_KPA,
        }
    }

    pub fn with_pressure_kpa(mut self, pressure_kpa: f64) -> Self {
        self.pressure_kpa = pressure_kpa;
        self
    }

    pub fn validate(&self) -> Result<(), AtmoError> {
        let check = |quantity, value: f64, min, max| {
            if value.is_finite() && (min..=max).contains(&value) {
                Ok(())
            } else {
                Err(AtmoError::OutOfRange {
                    quantity,
                    value,
                    min,
                    max,
                })
            }
        };
        check("temperature_c", self.temperature_c, MIN_TEMPERATURE_C, MAX_TEMPERATURE_C)?;
        check("relative_humidity_pct", self.relative_humidity_pct, 0.0, 100.0)?;
        // Cramér's fit covers 60..110 kPa; allow a little margin.
        check("pressure_kpa", self.pressure_kpa, 50.0, 120.0)
    }
}

impl Default for AtmoState {
    fn default() -> Self {
        Self::new(20.0, 50.0)
    }
}

/// Saturation vapour pressure over water, Pa.
fn saturation_vapour_pressure_pa(t_kelvin: f64) -> f64 {
    (1.237_884_7e-5 * t_kelvin * t_kelvin - 1.912_131_6e-2 * t_kelvin + 33.937_110_47
        - 6.343_164_5e3 / t_kelvin)
        .exp()
}

fn water_mole_fraction(state: &AtmoState) -> f64 {
    let p = state.pressure_kpa * 1e3;
    let t = state.temperature_c;
    let enhancement = 1.000_62 + 3.14e-8 * p + 5.6e-7 * t * t;
    let psv = saturation_vapour_pressure_pa(t + 273.15);
    state.relative_humidity_pct / 100.0 * enhancement * psv / p
}

/// Speed of sound in m/s.
pub fn speed_of_sound(state: &AtmoState) -> Result<f64, AtmoError> {
    state.validate()?;
    let t = state.temperature_c;
    let p = state.pressure_kpa * 1e3;
    let xw = water_mole_fraction(state);
    let xc = CO2_MOLE_FRACTION;
    let t2 = t * t;
    let c = 331.5024 + 0.603055 * t - 0.000528 * t2
        + (51.471935 + 0.1495874 * t - 0.000782 * t2) * xw
        + (-1.82e-7 + 3.73e-8 * t - 2.93e-10 * t2) * p
        + (-85.20931 - 0.228525 * t + 5.91e-5 * t2) * xc
        - 2.835149 * xw * xw
        - 2.15e-13 * p * p
        + 29.179762 * xc * xc
        + 0.000486 * xw * p * xc;
    Ok(c)
}

/// The time-scaling factor `c_old / c_new` applied by SICER.
///
/// Greater than one when the speed fell (IRs stretch), less than one when it
/// rose (IRs compress).
pub fn scaling_factor(c_old: f64, c_new: f64) -> Result<f64, AtmoError> {
    let ok = |c: f64| c.is_finite() && c > 0.0;
    if !(ok(c_old) && ok(c_new)) {
        return Err(AtmoError::NonPositiveSpeed { c_old, c_new });
    }
    Ok(c_old / c_new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dry_air(t: f64) -> f64 {
        331.3 * (1.0 + t / 273.15).sqrt()
    }

    #[test]
    fn dry_air_reference_points() {
        let c20 = speed_of_sound(&AtmoState::new(20.0, 0.0)).unwrap();
        assert!((c20 - 343.2).abs() < 0.5, "{c20}");
        let c0 = speed_of_sound(&AtmoState::new(0.0, 0.0)).unwrap();
        assert!((c0 - 331.3).abs() < 0.5, "{c0}");
    }

    #[test]
    fn dry_air_matches_ideal_gas_approximation() {
        for i in 0..=400 {
            let t = i as f64 * 0.1;
            let c = speed_of_sound(&AtmoState::new(t, 0.0)).unwrap();
            assert!((c - dry_air(t)).abs() <= 0.5, "T={t}: {c} vs {}", dry_air(t));
        }
    }

    #[test]
    fn humidity_raises_speed() {
        let dry = speed_of_sound(&AtmoState::new(20.0, 0.0)).unwrap();
        let humid = speed_of_sound(&AtmoState::new(20.0, 80.0)).unwrap();
        assert!(humid > dry);
        // Roughly 1 m/s at 20 C, 80 % RH.
        assert!((humid - dry) > 0.7 && (humid - dry) < 1.3, "{}", humid - dry);
    }

    #[test]
    fn monotone_in_temperature_over_window() {
        for rh in [0.0, 30.0, 60.0, 100.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=9000 {
                let t = MIN_TEMPERATURE_C + i as f64 * 0.01;
                let c = speed_of_sound(&AtmoState::new(t, rh)).unwrap();
                assert!(c > prev, "not increasing at T={t}, RH={rh}");
                assert!(c - prev < 0.02 || prev == f64::NEG_INFINITY, "jump at T={t}");
                prev = c;
            }
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(
            speed_of_sound(&AtmoState::new(61.0, 10.0)),
            Err(AtmoError::OutOfRange { quantity: "temperature_c", .. })
        ));
        assert!(speed_of_sound(&AtmoState::new(20.0, 101.0)).is_err());
        assert!(speed_of_sound(&AtmoState::new(20.0, -0.1)).is_err());
    }

    #[test]
    fn pressure_is_accepted() {
        let a = speed_of_sound(&AtmoState::new(20.0, 50.0)).unwrap();
        let b = speed_of_sound(&AtmoState::new(20.0, 50.0).with_pressure_kpa(90.0)).unwrap();
        assert!((a - b).abs() < 0.5);
    }

    #[test]
    fn scaling_factor_examples() {
        assert_eq!(scaling_factor(343.0, 343.0).unwrap(), 1.0);
        assert!((scaling_factor(343.0, 333.0).unwrap() - 1.030030).abs() < 1e-6);
        assert!((scaling_factor(343.0, 353.0).unwrap() - 0.971671).abs() < 1e-6);
        assert!(scaling_factor(0.0, 343.0).is_err());
        assert!(scaling_factor(343.0, -1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn scaling_factor_reciprocal(a in 1.0f64..1000.0, b in 1.0f64..1000.0) {
            let p = scaling_factor(a, b).unwrap() * scaling_factor(b, a).unwrap();
            proptest::prop_assert!((p - 1.0).abs() < 4.0 * f64::EPSILON);
        }
    }
}
