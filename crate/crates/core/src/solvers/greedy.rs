use rand::seq::SliceRandom;
use rand::Rng;

use super::{FailureReason, SolverError, SolverOutcome};
use crate::model::{Assignment, Graph, MAX_PALETTE, UNASSIGNED};

/// Randomized greedy coloring.
///
/// Vertices are visited in a uniformly random order; each receives a color
/// drawn uniformly from those unused by its already-colored neighbors. The
/// run fails at the first vertex with no color left.
pub fn greedy_color<R: Rng + ?Sized>(g: &Graph, palette: usize, rng: &mut R) -> Result<SolverOutcome, SolverError> {
    if palette == 0 || palette > MAX_PALETTE {
        return Err(SolverError::BadPalette(palette));
    }
    let n = g.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in g.edges() {
        adj[u - 1].push(v - 1);
        adj[v - 1].push(u - 1);
    }
    let full: u64 = if palette == 64 { u64::MAX } else { (1u64 << palette) - 1 };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut colors = vec![UNASSIGNED; n];
    for (step, &v) in order.iter().enumerate() {
        let used = adj[v].iter().filter(|&&w| colors[w] != UNASSIGNED).fold(0u64, |acc, &w| acc | (1 << colors[w]));
        let free = full & !used;
        if free == 0 {
            return Ok(SolverOutcome::failure(order[..step].to_vec(), FailureReason::NoColorAvailable { vertex: v }));
        }
        let mut pick = rng.gen_range(0..free.count_ones());
        let mut bits = free;
        while pick > 0 {
            bits &= bits - 1;
            pick -= 1;
        }
        colors[v] = bits.trailing_zeros() as u8;
    }
    Ok(SolverOutcome::success(Assignment::from_raw(palette, colors), order))
}
