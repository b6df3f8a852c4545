//! Water-filling power allocation over parallel streams.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub water_level: f64,
}

/// Exact water-filling: `P_m = [w - n_m]⁺` with `Σ P_m = total_power`.
///
/// Sorts the noise levels and shrinks the active set from the top until the
/// level computed from the active set exceeds its largest member. A stream
/// whose noise level equals the water level gets zero power.
pub fn waterfill(noise_levels: &[f64], total_power: f64) -> Result<PowerAllocation> {
    if noise_levels.is_empty() {
        return Err(Error::Empty("noise levels"));
    }
    if let Some(bad) = noise_levels.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
        return Err(Error::Domain(format!("noise level {bad} must be finite and positive")));
    }
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::Domain(format!("total power {total_power} must be finite and positive")));
    }
    let mut sorted = noise_levels.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut prefix: f64 = sorted.iter().sum();
    let mut level = 0.0;
    for k in (1..=sorted.len()).rev() {
        level = (total_power + prefix) / k as f64;
        if level > sorted[k - 1] || k == 1 {
            break;
        }
        prefix -= sorted[k - 1];
    }
    let powers = noise_levels.iter().map(|n| (level - n).max(0.0)).collect();
    Ok(PowerAllocation { powers, water_level: level })
}

/// `Σ log₂(1 + P_m / n_m)`.
pub fn parallel_rate(powers: &[f64], noise_levels: &[f64]) -> f64 {
    powers.iter().zip(noise_levels).map(|(p, n)| (1.0 + p / n).log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn three_stream_example() {
        let a = waterfill(&[1.0, 2.0, 4.0], 3.0).unwrap();
        assert_eq!(a.powers, vec![2.0, 1.0, 0.0]);
        assert_eq!(a.water_level, 3.0);
        assert!((parallel_rate(&a.powers, &[1.0, 2.0, 4.0]) - 2.170).abs() < 1e-3);
    }

    #[test]
    fn equal_levels_split_evenly() {
        let a = waterfill(&[0.5; 4], 2.0).unwrap();
        assert!(a.powers.iter().all(|p| (p - 0.5).abs() < 1e-15));
        assert!((a.water_level - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_stream_takes_everything() {
        let a = waterfill(&[7.0], 0.25).unwrap();
        assert_eq!(a.powers, vec![0.25]);
        assert_eq!(a.water_level, 7.25);
    }

    #[test]
    fn boundary_stream_gets_nothing() {
        let a = waterfill(&[1.0, 3.0], 2.0).unwrap();
        assert_eq!(a.powers, vec![2.0, 0.0]);
        assert_eq!(a.water_level, 3.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(waterfill(&[], 1.0), Err(Error::Empty(_))));
        assert!(matches!(waterfill(&[1.0, 0.0], 1.0), Err(Error::Domain(_))));
        assert!(matches!(waterfill(&[1.0, f64::NAN], 1.0), Err(Error::Domain(_))));
        assert!(matches!(waterfill(&[1.0], 0.0), Err(Error::Domain(_))));
        assert!(matches!(waterfill(&[1.0], f64::INFINITY), Err(Error::Domain(_))));
    }

    /// Random feasible allocations never beat water-filling.
    #[test]
    fn beats_random_feasible_allocations() {
        let mut rng = stream(3, Domain::Test, 0);
        for _ in 0..200 {
            let m = rng.random_range(1..=6);
            let noise: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..5.0)).collect();
            let total = rng.random_range(0.1..10.0);
            let best = parallel_rate(&waterfill(&noise, total).unwrap().powers, &noise);
            for _ in 0..200 {
                let w: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = w.iter().sum();
                let p: Vec<f64> = w.iter().map(|x| total * x / s).collect();
                assert!(parallel_rate(&p, &noise) <= best + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn kkt_conditions(noise in prop::collection::vec(1e-3f64..1e3, 1..8), total in 1e-3f64..1e3) {
            let a = waterfill(&noise, total).unwrap();
            let sum: f64 = a.powers.iter().sum();
            prop_assert!((sum - total).abs() <= 1e-9 * total.max(1.0));
            for (p, n) in a.powers.iter().zip(&noise) {
                prop_assert!(*p >= 0.0);
                if *p > 0.0 {
                    prop_assert!((p + n - a.water_level).abs() <= 1e-9 * a.water_level);
                } else {
                    prop_assert!(*n >= a.water_level * (1.0 - 1e-12));
                }
            }
        }

        #[test]
        fn monotone_in_total_power(noise in prop::collection::vec(1e-2f64..1e2, 1..6), p1 in 1e-2f64..1e2, extra in 0.0f64..1e2) {
            let lo = waterfill(&noise, p1).unwrap();
            let hi = waterfill(&noise, p1 + extra).unwrap();
            prop_assert!(hi.water_level >= lo.water_level);
            for (a, b) in lo.powers.iter().zip(&hi.powers) {
                prop_assert!(*b >= *a - 1e-12 * (p1 + extra));
            }
        }

        #[test]
        fn scale_covariant(noise in prop::collection::vec(1e-2f64..1e2, 1..6), total in 1e-2f64..1e2, c in 1e-3f64..1e3) {
            let base = waterfill(&noise, total).unwrap();
            let scaled_noise: Vec<f64> = noise.iter().map(|n| c * n).collect();
            let scaled = waterfill(&scaled_noise, c * total).unwrap();
            for (a, b) in base.powers.iter().zip(&scaled.powers) {
                prop_assert!((c * a - b).abs() <= 1e-9 * c * total);
            }
        }
    }
}
