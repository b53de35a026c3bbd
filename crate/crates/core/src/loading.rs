//! Stochastic loading of the reservoir and the trigger that starts assembly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Occupancy, TargetPattern, TrapArray};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingParams {
    /// Probability that a trap holds one atom after a loading cycle.
    pub p_load: f64,
    /// Duration of one fluorescence image, s.
    pub image_time: f64,
    /// Give up after this many loading cycles.
    pub max_cycles: u64,
}

impl Default for LoadingParams {
    fn default() -> Self {
        LoadingParams {
            p_load: 0.5,
            image_time: 0.050,
            max_cycles: 1_000_000,
        }
    }
}

impl LoadingParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_load) {
            return Err(Error::validation(format!(
                "p_load {} not in [0, 1]",
                self.p_load
            )));
        }
        if !(self.image_time > 0.0 && self.image_time.is_finite()) {
            return Err(Error::validation("image_time must be positive"));
        }
        if self.max_cycles == 0 {
            return Err(Error::validation("max_cycles must be >= 1"));
        }
        Ok(())
    }
}

/// One loading cycle: every trap filled independently with `p_load`.
pub fn sample_loading_with<R: Rng + ?Sized>(n_traps: usize, p_load: f64, rng: &mut R) -> Occupancy {
    Occupancy::from_mask((0..n_traps).map(|_| rng.random_bool(p_load)).collect())
}

pub fn sample_loading(array: &TrapArray, params: &LoadingParams, seed: u64) -> Result<Occupancy> {
    params.validate()?;
    Ok(sample_loading_with(
        array.len(),
        params.p_load,
        &mut rng_from_seed(seed),
    ))
}

/// Occupancy that fired the trigger and how many cycles it took.
#[derive(Clone, Debug, PartialEq)]
pub struct Trigger {
    pub occupancy: Occupancy,
    pub cycles: u64,
}

impl Trigger {
    /// Time spent imaging until the trigger fired.
    pub fn loading_time(&self, params: &LoadingParams) -> f64 {
        self.cycles as f64 * params.image_time
    }
}

/// Reloads the whole array once per image until at least `|pattern|` traps
/// are filled.
pub fn wait_for_trigger_with<R: Rng + ?Sized>(
    array: &TrapArray,
    pattern: &TargetPattern,
    params: &LoadingParams,
    rng: &mut R,
) -> Result<Trigger> {
    params.validate()?;
    if pattern.len() > array.len() {
        return Err(Error::validation(format!(
            "target of {} sites exceeds array of {} traps",
            pattern.len(),
            array.len()
        )));
    }
    for cycle in 1..=params.max_cycles {
        let occupancy = sample_loading_with(array.len(), params.p_load, rng);
        if occupancy.atom_count() >= pattern.len() {
            return Ok(Trigger {
                occupancy,
                cycles: cycle,
            });
        }
    }
    Err(Error::TriggerTimeout {
        cycles: params.max_cycles,
    })
}

pub fn wait_for_trigger(
    array: &TrapArray,
    pattern: &TargetPattern,
    params: &LoadingParams,
    seed: u64,
) -> Result<Trigger> {
    wait_for_trigger_with(array, pattern, params, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_lattice, LatticeKind};

    fn chain(n: usize) -> TrapArray {
        build_lattice(LatticeKind::Chain, &[n], 5.0).unwrap()
    }

    fn params(p: f64) -> LoadingParams {
        LoadingParams {
            p_load: p,
            ..Default::default()
        }
    }

    /// P(Binomial(n, p) >= k) by direct summation.
    fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
        let mut pmf = (1.0 - p).powi(n as i32);
        let mut tail = 0.0;
        for i in 0..=n {
            if i >= k {
                tail += pmf;
            }
            pmf *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
        }
        tail
    }

    #[test]
    fn degenerate_probabilities() {
        let a = chain(7);
        assert_eq!(sample_loading(&a, &params(1.0), 3).unwrap().atom_count(), 7);
        assert_eq!(sample_loading(&a, &params(0.0), 3).unwrap().atom_count(), 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = chain(30);
        assert_eq!(
            sample_loading(&a, &params(0.5), 11).unwrap(),
            sample_loading(&a, &params(0.5), 11).unwrap()
        );
    }

    #[test]
    fn mean_fill_fraction() {
        let a = build_lattice(LatticeKind::Square, &[10, 10], 5.0).unwrap();
        let samples = 10_000;
        let total: usize = (0..samples)
            .map(|s| sample_loading(&a, &params(0.5), s).unwrap().atom_count())
            .sum();
        let mean = total as f64 / (samples as f64 * 100.0);
        assert!((mean - 0.5).abs() <= 0.015, "mean fill {mean}");
    }

    #[test]
    fn invalid_params() {
        let a = chain(3);
        assert!(sample_loading(&a, &params(1.5), 0).is_err());
        let bad = LoadingParams {
            image_time: 0.0,
            ..Default::default()
        };
        assert!(sample_loading(&a, &bad, 0).is_err());
    }

    #[test]
    fn trigger_single_atom_geometric() {
        // Success per cycle 1 - 0.5^2 = 0.75, so the mean is 4/3 cycles.
        let a = chain(2);
        let t = TargetPattern::new(&a, vec![0]).unwrap();
        let runs = 20_000;
        let cycles: u64 = (0..runs)
            .map(|s| wait_for_trigger(&a, &t, &params(0.5), s).unwrap().cycles)
            .sum();
        let mean = cycles as f64 / runs as f64;
        let sd = 0.25f64.sqrt() / 0.75 / (runs as f64).sqrt();
        assert!(mean <= 2.0);
        assert!((mean - 4.0 / 3.0).abs() < 4.0 * sd, "mean cycles {mean}");
    }

    #[test]
    fn trigger_full_array_needs_about_2_pow_n_cycles() {
        let a = chain(10);
        let t = TargetPattern::new(&a, (0..10).collect()).unwrap();
        let runs = 2_000;
        let cycles: u64 = (0..runs)
            .map(|s| wait_for_trigger(&a, &t, &params(0.5), s).unwrap().cycles)
            .sum();
        let mean = cycles as f64 / runs as f64;
        // Geometric with p = 2^-10: sd = sqrt(1-p)/p.
        let p: f64 = 1.0 / 1024.0;
        let se = (1.0 - p).sqrt() / p / (runs as f64).sqrt();
        assert!((mean - 1024.0).abs() < 3.0 * se, "mean cycles {mean}");
    }

    #[test]
    fn trigger_certain_and_timeout() {
        let a = chain(4);
        let t = TargetPattern::new(&a, (0..4).collect()).unwrap();
        assert_eq!(wait_for_trigger(&a, &t, &params(1.0), 0).unwrap().cycles, 1);
        let never = LoadingParams {
            p_load: 0.0,
            max_cycles: 50,
            ..Default::default()
        };
        assert!(matches!(
            wait_for_trigger(&a, &t, &never, 0),
            Err(Error::TriggerTimeout { cycles: 50 })
        ));
    }

    #[test]
    fn first_cycle_trigger_matches_binomial_tail() {
        let n = 10;
        let a = chain(2 * n);
        let t = TargetPattern::new(&a, (0..n).collect()).unwrap();
        let runs = 20_000;
        let mut first = 0;
        for s in 0..runs {
            let trig = wait_for_trigger(&a, &t, &params(0.5), s).unwrap();
            assert!(trig.occupancy.atom_count() >= n);
            if trig.cycles == 1 {
                first += 1;
            }
        }
        let expected = binomial_tail(2 * n as u64, 0.5, n as u64);
        let frac = first as f64 / runs as f64;
        let sigma = (expected * (1.0 - expected) / runs as f64).sqrt();
        assert!(
            (frac - expected).abs() < 3.0 * sigma,
            "{frac} vs {expected}"
        );
        assert!((expected - 0.5).abs() < 0.1);
    }
}
