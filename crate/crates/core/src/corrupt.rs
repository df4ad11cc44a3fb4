//! Seeded corruption of annotation streams: dropped beats and spurious ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::{Annotation, AnnotationList};

/// Spurious beats are kept at least this far from every true beat.
pub const MIN_SPURIOUS_DISTANCE_MS: i64 = 200;
const ATTEMPTS_PER_BEAT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("rate {0} is outside [0, 1)")]
pub struct BadRate(pub f64);

/// Deletes each annotation with probability `fn_rate`, then inserts
/// `round(fp_rate * n)` spurious `N` beats uniformly in `[0, duration_ms)`.
/// Deterministic for a given seed.
pub fn corrupt(
    annotations: &AnnotationList,
    duration_ms: i64,
    fp_rate: f64,
    fn_rate: f64,
    seed: u64,
) -> Result<AnnotationList, BadRate> {
    for r in [fp_rate, fn_rate] {
        if !(0.0..1.0).contains(&r) {
            return Err(BadRate(r));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = annotations.times();
    let mut out: Vec<Annotation> = annotations
        .entries()
        .iter()
        .filter(|_| !rng.random_bool(fn_rate))
        .cloned()
        .collect();
    let wanted = (fp_rate * truth.len() as f64).round() as usize;
    if duration_ms > 0 {
        let mut placed = 0;
        let mut attempts = 0;
        while placed < wanted && attempts < wanted * ATTEMPTS_PER_BEAT {
            attempts += 1;
            let t = rng.random_range(0..duration_ms);
            let i = truth.partition_point(|&b| b < t);
            let clear = [i.checked_sub(1), Some(i)]
                .into_iter()
                .flatten()
                .filter_map(|j| truth.get(j))
                .all(|&b| (b - t).abs() >= MIN_SPURIOUS_DISTANCE_MS);
            if clear {
                out.push(Annotation::beat(t));
                placed += 1;
            }
        }
        if placed < wanted {
            log::warn!("placed only {placed} of {wanted} spurious beats");
        }
    }
    Ok(AnnotationList::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train() -> AnnotationList {
        AnnotationList::from_times((0..1000).map(|i| 400 + 800 * i))
    }

    #[test]
    fn zero_rates_are_identity() {
        let a = train();
        assert_eq!(corrupt(&a, 800_400, 0.0, 0.0, 3).unwrap(), a);
    }

    #[test]
    fn same_seed_same_output() {
        let a = train();
        assert_eq!(
            corrupt(&a, 800_400, 0.05, 0.02, 11).unwrap(),
            corrupt(&a, 800_400, 0.05, 0.02, 11).unwrap()
        );
    }

    #[test]
    fn deletion_count_is_near_the_rate() {
        let a = train();
        let c = corrupt(&a, 800_400, 0.0, 0.02, 5).unwrap();
        let deleted = a.len() - c.len();
        assert!((5..=40).contains(&deleted), "{deleted}");
    }

    #[test]
    fn spurious_beats_keep_their_distance() {
        let a = train();
        let c = corrupt(&a, 800_400, 0.05, 0.0, 9).unwrap();
        assert_eq!(c.len(), 1050);
        let truth = a.times();
        for t in c.times() {
            if !truth.contains(&t) {
                assert!(truth.iter().all(|b| (b - t).abs() >= MIN_SPURIOUS_DISTANCE_MS));
            }
        }
    }

    #[test]
    fn rates_are_validated() {
        assert!(corrupt(&train(), 1000, 1.0, 0.0, 0).is_err());
        assert!(corrupt(&train(), 1000, 0.0, -0.1, 0).is_err());
    }
}
