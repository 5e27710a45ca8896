//! Seed derivation and deterministic trial fan-out.
//!
//! Every random draw in an experiment comes from a ChaCha8 stream keyed by
//! `(master seed, domain)` and selected by trial index, so a trial's
//! randomness never depends on which worker ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for a single-shot run (CLI commands, examples).
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for trial `index` of the experiment labelled `domain`.
pub fn trial_rng(seed: u64, domain: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, domain));
    rng.set_stream(index);
    rng
}

// splitmix64 finaliser over the pair
fn mix(seed: u64, domain: u64) -> u64 {
    let mut z = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `trials` independent trials and returns their results in index order.
///
/// With the `parallel` feature the trials fan out over rayon; results are
/// identical either way.
pub fn run_trials<T, F>(seed: u64, domain: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seed, domain, i as u64);
                f(&mut rng, i)
            })
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials)
            .map(|i| {
                let mut rng = trial_rng(seed, domain, i as u64);
                f(&mut rng, i)
            })
            .collect()
    }
}

/// Folds `trials` independent trials into an accumulator.
///
/// `merge` must be associative and commutative with `init()` as identity;
/// keep accumulators integral so the result does not depend on how the
/// work was split.
pub fn fold_trials<A, I, F, M>(seed: u64, domain: u64, trials: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &mut SimRng, usize) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .fold(&init, |acc, i| {
                let mut rng = trial_rng(seed, domain, i as u64);
                fold(acc, &mut rng, i)
            })
            .reduce(&init, &merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &merge;
        (0..trials).fold(init(), |acc, i| {
            let mut rng = trial_rng(seed, domain, i as u64);
            fold(acc, &mut rng, i)
        })
    }
}
