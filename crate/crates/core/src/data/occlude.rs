use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::ObservedSeries;

/// Hides runs of `block_len` consecutive time points until at most
/// `observed_fraction · n · T` entries remain observed.
///
/// Each row is tiled into consecutive runs starting at a random phase (the
/// first and last runs may be shorter); runs are removed in a seeded random
/// order. Runs never overlap, so no entry is removed twice, and the final
/// count undershoots the target by less than one block.
pub fn occlude_blocks(
    data: &ObservedSeries,
    observed_fraction: f64,
    block_len: usize,
    seed: u64,
) -> Result<ObservedSeries> {
    if !(observed_fraction > 0.0 && observed_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observed fraction {observed_fraction} must lie in (0, 1)"
        )));
    }
    if block_len == 0 {
        return Err(Error::InvalidArgument("block length must be positive".into()));
    }
    let (n, t_count) = (data.n(), data.t_count());
    let target = (observed_fraction * (n * t_count) as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut runs = Vec::new();
    for i in 0..n {
        let phase = rng.random_range(0..block_len);
        let mut start = 0;
        let mut end = if phase == 0 { block_len } else { phase };
        while start < t_count {
            runs.push((i, start, end.min(t_count)));
            start = end;
            end += block_len;
        }
    }
    runs.shuffle(&mut rng);

    let mut mask = data.mask().to_vec();
    let mut observed = data.observed_count();
    for (i, start, end) in runs {
        if observed <= target {
            break;
        }
        let cells = &mut mask[i * t_count + start..i * t_count + end];
        let hit = cells.iter().filter(|&&m| m).count();
        if hit == 0 {
            continue;
        }
        cells.iter_mut().for_each(|m| *m = false);
        observed -= hit;
    }
    data.restrict(mask)
}
