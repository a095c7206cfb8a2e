//! Crate-private derivative-free local refinement: coordinate-wise random
//! perturbation with acceptance and an annealed step size. Used by the
//! convex-roof optimizer, the separable-approximation search, and the
//! subspace detectors. Deterministic given the RNG.

use rand_distr::{Distribution, StandardNormal};

pub(crate) struct RefineCfg {
    pub iterations: usize,
    pub init_step: f64,
    pub min_step: f64,
}

impl Default for RefineCfg {
    fn default() -> Self {
        RefineCfg {
            iterations: 200,
            init_step: 0.3,
            min_step: 1e-12,
        }
    }
}

/// Minimize `obj` over `params` in place; returns the best value found.
/// One iteration is a full sweep over coordinates, accepting any improving
/// single-coordinate move. The step expands while sweeps keep succeeding and
/// shrinks when they stop, so the walk covers distance far from an optimum
/// and polishes geometrically near one.
pub(crate) fn coordinate_descent(
    params: &mut [f64],
    mut obj: impl FnMut(&[f64]) -> f64,
    cfg: &RefineCfg,
    rng: &mut impl rand::Rng,
) -> f64 {
    let mut best = obj(params);
    let mut step = cfg.init_step;
    for _ in 0..cfg.iterations {
        let mut accepts = 0usize;
        for i in 0..params.len() {
            let old = params[i];
            let delta: f64 = StandardNormal.sample(rng);
            params[i] = old + step * delta;
            let v = obj(params);
            if v < best {
                best = v;
                accepts += 1;
            } else {
                params[i] = old;
            }
        }
        if 3 * accepts >= params.len() {
            step = (step * 1.6).min(cfg.init_step * 8.0);
        } else if accepts == 0 {
            step *= 0.5;
            if step < cfg.min_step {
                break;
            }
        } else {
            step *= 0.85;
        }
    }
    best
}
