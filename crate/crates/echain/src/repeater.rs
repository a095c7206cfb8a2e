//! Linear repeater chains with m parallel depolarizing channels per link:
//! distill-and-swap sweeps over (n, m) grids, compared against the
//! logarithmic lower-bound curve ln n/γ + O(1).
//!
//! Sweeps run on a scalar Werner-fidelity engine (one f64 per link); the
//! (1+d²)^m Kraus growth makes full matrices infeasible beyond m ≈ 2, and
//! the full-matrix engine exists only to validate the scalar one on tiny
//! grids. Distillation is evaluated in expected-value mode: the fidelity
//! recursion is applied deterministically and success probabilities are
//! reported as metadata, since the bound concerns channel counts rather
//! than repetition time.

use crate::channels::QuantumChannel;
use crate::measures::min_parallel_channels;
use crate::qmath::{
    cr, identity, kron, partial_trace, permute_subsystems, CMatrix, CVector, Subsystem,
};
use crate::states::max_entangled;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scalar surrogate for a two-qubit Werner link: the overlap with φ⁺.
/// Entangled iff fidelity > 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerLink {
    fidelity: f64,
}

impl WernerLink {
    pub fn new(fidelity: f64) -> Result<Self> {
        if !(0.25..=1.0 + 1e-12).contains(&fidelity) {
            return Err(Error::InvalidParam(format!(
                "Werner fidelity {fidelity} outside [1/4, 1]"
            )));
        }
        Ok(WernerLink {
            fidelity: fidelity.min(1.0),
        })
    }

    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }

    pub fn is_entangled(&self) -> bool {
        self.fidelity > 0.5
    }
}

/// Fidelity of one Bell pair sent through a single qubit depolarizing use:
/// F = 1 − 3p/4.
pub fn link_fidelity(p: f64) -> Result<WernerLink> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!("p = {p} outside (0, 1)")));
    }
    WernerLink::new(1.0 - 0.75 * p)
}

/// One recurrence-distillation round on two Werner links: returns the output
/// link and the success probability.
///
/// F' = (F₁F₂ + (1−F₁)(1−F₂)/9) / P,
/// P  = F₁F₂ + F₁(1−F₂)/3 + F₂(1−F₁)/3 + 5(1−F₁)(1−F₂)/9.
pub fn distill_round(a: WernerLink, b: WernerLink) -> (WernerLink, f64) {
    let (f1, f2) = (a.fidelity, b.fidelity);
    let (g1, g2) = (1.0 - f1, 1.0 - f2);
    let p = f1 * f2 + f1 * g2 / 3.0 + f2 * g1 / 3.0 + 5.0 * g1 * g2 / 9.0;
    let f = (f1 * f2 + g1 * g2 / 9.0) / p;
    (
        WernerLink {
            fidelity: f.clamp(0.25, 1.0),
        },
        p,
    )
}

/// Entanglement swapping of two Werner links at a repeater station:
/// F = F₁F₂ + (1−F₁)(1−F₂)/3.
pub fn swap(a: WernerLink, b: WernerLink) -> WernerLink {
    let f = a.fidelity * b.fidelity + (1.0 - a.fidelity) * (1.0 - b.fidelity) / 3.0;
    WernerLink {
        fidelity: f.clamp(0.25, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One raw pair per link, swaps only.
    None,
    /// Binary distillation tree per link, then swaps.
    DistillSwap,
}

/// Sweep description: a (n, m) grid at fixed depolarizing parameter p.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSweepConfig {
    pub p: f64,
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub strategy: Strategy,
    /// Cap on distillation rounds per link (the nesting depth of the
    /// pairing schedule); default is the full binary tree ⌊log₂ m⌋.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    /// β constant of the bound curve; 1/2 makes the k = 2 offset vanish.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta() -> f64 {
    0.5
}

impl ScalingSweepConfig {
    fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParam(format!("p = {} outside (0, 1)", self.p)));
        }
        for (name, list) in [("n_values", &self.n_values), ("m_values", &self.m_values)] {
            if list.is_empty() {
                return Err(Error::InvalidParam(format!("{name} must be nonempty")));
            }
            if list.iter().any(|&v| v == 0) {
                return Err(Error::InvalidParam(format!("{name} entries must be >= 1")));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParam(format!("{name} must be strictly ascending")));
            }
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidParam("beta must be positive".into()));
        }
        Ok(())
    }
}

/// One grid point of the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
    /// Pairs actually consumed by the binary tree (largest power of two
    /// ≤ m, further limited by `max_rounds`); leftovers are discarded.
    pub m_used: usize,
    pub rounds: usize,
    pub endpoint_fidelity: f64,
    pub survives: bool,
    /// ln n/γ + (1/γ)ln(1/(2β)) at k = 2; NaN for n < 2 where the
    /// asymptotic bound says nothing.
    pub bound_value: f64,
    /// Product of per-round distillation success probabilities across the
    /// link's tree (expected-value mode reports, never samples, these).
    pub link_success_prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinParallelRow {
    pub n: usize,
    /// Smallest m in the grid that survives, if any.
    pub m_min: Option<usize>,
    /// m_min − ln n/γ.
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub per_n: Vec<MinParallelRow>,
    /// Floor of the offsets m_min(n) − ln n/γ over the grid (the empirical
    /// O(1) constant); None when nothing survives anywhere.
    pub offset_floor: Option<f64>,
    /// m_min(n) never decreases with n (missing entries count as +∞).
    pub m_min_nondecreasing: bool,
    /// The offsets themselves never decrease with n.
    pub offsets_nondecreasing: bool,
    pub gamma: f64,
}

fn link_after_distillation(
    p: f64,
    m: usize,
    strategy: Strategy,
    max_rounds: Option<usize>,
) -> Result<(WernerLink, usize, usize, f64)> {
    let raw = link_fidelity(p)?;
    match strategy {
        Strategy::None => Ok((raw, 1, 0, 1.0)),
        Strategy::DistillSwap => {
            let full_rounds = (m as f64).log2().floor() as usize;
            let rounds = max_rounds.map_or(full_rounds, |cap| cap.min(full_rounds));
            let m_used = 1usize << rounds;
            let mut link = raw;
            let mut success = 1.0;
            for r in 0..rounds {
                let (next, pr) = distill_round(link, link);
                // round r consumes m_used / 2^r pairs in m_used / 2^{r+1}
                // simultaneous distillations
                let count = m_used >> (r + 1);
                success *= pr.powi(count as i32);
                link = next;
            }
            Ok((link, m_used, rounds, success))
        }
    }
}

fn endpoint_fidelity(link: WernerLink, n: usize) -> WernerLink {
    let mut end = link;
    for _ in 1..n {
        end = swap(end, link);
    }
    end
}

/// Run the (n, m) grid on the scalar Werner engine and summarize the
/// minimal surviving m per n against the ln n/γ floor.
pub fn simulate_scaling(config: &ScalingSweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let gamma = -config.p.ln();
    let mut points = Vec::with_capacity(config.n_values.len() * config.m_values.len());
    let mut per_n = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let mut m_min: Option<usize> = None;
        for &m in &config.m_values {
            let (link, m_used, rounds, link_prob) =
                link_after_distillation(config.p, m, config.strategy, config.max_rounds)?;
            let end = endpoint_fidelity(link, n);
            let survives = end.is_entangled();
            if survives && m_min.is_none() {
                m_min = Some(m);
            }
            let bound_value = if n >= 2 {
                min_parallel_channels(n, config.p, 2, config.beta)?
            } else {
                f64::NAN
            };
            points.push(SweepPoint {
                n,
                m,
                m_used,
                rounds,
                endpoint_fidelity: end.fidelity(),
                survives,
                bound_value,
                link_success_prob: link_prob,
            });
        }
        let offset = m_min.map(|m| m as f64 - (n as f64).ln() / gamma);
        per_n.push(MinParallelRow { n, m_min, offset });
    }

    let offset_floor = per_n
        .iter()
        .filter_map(|r| r.offset)
        .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |a| a.min(v))));
    let m_min_nondecreasing = per_n.windows(2).all(|w| match (w[0].m_min, w[1].m_min) {
        (Some(a), Some(b)) => a <= b,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => true,
    });
    let offsets_nondecreasing = per_n
        .windows(2)
        .all(|w| match (w[0].offset, w[1].offset) {
            (Some(a), Some(b)) => a <= b + 1e-12,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => true,
        });
    Ok(SweepResult {
        points,
        per_n,
        offset_floor,
        m_min_nondecreasing,
        offsets_nondecreasing,
        gamma,
    })
}

/// The lower-bound curve min_parallel_channels(n, p, 2, β) over the config's
/// n grid (independent of strategy fields).
pub fn bound_curve(config: &ScalingSweepConfig) -> Result<Vec<(usize, f64)>> {
    config.validate()?;
    config
        .n_values
        .iter()
        .filter(|&&n| n >= 2)
        .map(|&n| Ok((n, min_parallel_channels(n, config.p, 2, config.beta)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// full-matrix engine (validation only)

fn phi_plus_vec() -> CVector {
    max_entangled(2).amplitudes().clone()
}

/// Werner twirl: F·φ⁺ + (1−F)(I−φ⁺)/3 with F the φ⁺ overlap of the input.
pub(crate) fn werner_twirl(m: &CMatrix) -> CMatrix {
    let phi = phi_plus_vec();
    let proj = &phi * phi.adjoint();
    let f = (phi.adjoint() * m * &phi)[(0, 0)].re;
    proj.scale(f) + (identity(4) - &proj).scale((1.0 - f) / 3.0)
}

pub(crate) fn phi_plus_fidelity(m: &CMatrix) -> f64 {
    let phi = phi_plus_vec();
    (phi.adjoint() * m * &phi)[(0, 0)].re
}

/// Embed a two-qubit gate on qubits (q1, q2) of an n-qubit register,
/// row-major bit order (qubit 0 is the most significant).
fn embed_two_qubit(gate: &CMatrix, q1: usize, q2: usize, n: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut out = CMatrix::zeros(dim, dim);
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    for r in 0..dim {
        for c in 0..dim {
            let mut rest_equal = true;
            for q in 0..n {
                if q != q1 && q != q2 && bit(r, q) != bit(c, q) {
                    rest_equal = false;
                    break;
                }
            }
            if !rest_equal {
                continue;
            }
            let gr = (bit(r, q1) << 1) | bit(r, q2);
            let gc = (bit(c, q1) << 1) | bit(c, q2);
            out[(r, c)] = gate[(gr, gc)];
        }
    }
    out
}

fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = cr(1.0);
    m[(1, 1)] = cr(1.0);
    m[(2, 3)] = cr(1.0);
    m[(3, 2)] = cr(1.0);
    m
}

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// One full-matrix recurrence-distillation round on two pairs ρ₁ (A1B1) and
/// ρ₂ (A2B2): bilateral CNOTs, measure A2 and B2, keep coinciding outcomes,
/// twirl. Returns the output pair and the success probability.
pub(crate) fn distill_full(rho1: &CMatrix, rho2: &CMatrix) -> (CMatrix, f64) {
    // register order [A1, B1, A2, B2]
    let joint = kron(rho1, rho2);
    let ua = embed_two_qubit(&cnot(), 0, 2, 4);
    let ub = embed_two_qubit(&cnot(), 1, 3, 4);
    let evolved = &ub * &ua * joint * ua.adjoint() * ub.adjoint();
    // keep outcomes (0,0) and (1,1) on qubits A2, B2
    let mut kept = CMatrix::zeros(4, 4);
    let mut prob = 0.0;
    for outcome in [0usize, 1] {
        let mut proj1 = CMatrix::zeros(2, 2);
        proj1[(outcome, outcome)] = cr(1.0);
        let pa = embed_two_qubit(&kron(&proj1, &proj1), 2, 3, 4);
        let branch = &pa * &evolved * pa.adjoint();
        let reduced = partial_trace(&branch, (4, 4), Subsystem::A).expect("trace out A2B2");
        prob += reduced.trace().re;
        kept += reduced;
    }
    let out = werner_twirl(&kept.unscale(prob));
    (out, prob)
}

/// Full-matrix entanglement swapping: ρ₁ on (A, B1), ρ₂ on (B2, C); Bell
/// measurement on (B1, B2), Pauli correction on C, average over outcomes,
/// twirl. Deterministic (all four outcomes are kept and corrected).
pub(crate) fn swap_full(rho1: &CMatrix, rho2: &CMatrix) -> CMatrix {
    // register order [A, B1, B2, C]
    let joint = kron(rho1, rho2);
    let phi = phi_plus_vec();
    let x = pauli_x();
    let z = pauli_z();
    let bells: Vec<(CVector, CMatrix)> = vec![
        (phi.clone(), identity(2)),
        (kron(&identity(2), &z) * &phi, z.clone()),
        (kron(&identity(2), &x) * &phi, x.clone()),
        (kron(&identity(2), &(&z * &x)) * &phi, &z * &x),
    ];
    let mut avg = CMatrix::zeros(4, 4);
    for (bell, correction) in &bells {
        let proj = bell * bell.adjoint();
        let pb = embed_two_qubit(&proj, 1, 2, 4);
        let branch = &pb * &joint * pb.adjoint();
        // reorder [A, B1, B2, C] -> [A, C, B1, B2], trace out the station
        let reordered = permute_subsystems(&branch, &[2, 2, 2, 2], &[0, 3, 1, 2])
            .expect("4-qubit permutation");
        let ac = partial_trace(&reordered, (4, 4), Subsystem::A).expect("trace out B1B2");
        let fix = kron(&identity(2), correction);
        avg += &fix * ac * fix.adjoint();
    }
    // outcome probabilities sum to one; the average is already normalized
    werner_twirl(&avg)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationPoint {
    pub m: usize,
    pub n: usize,
    pub scalar_fidelity: f64,
    pub full_matrix_fidelity: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub points: Vec<ValidationPoint>,
    pub max_discrepancy: f64,
}

/// Run the repeater protocol with explicit density matrices (parallel
/// channels, bilateral-CNOT distillation, Bell-measurement swaps, twirls)
/// on a tiny grid and report the worst deviation from the scalar engine.
pub fn full_matrix_validation(p: f64, m_max: usize, n_max: usize) -> Result<ValidationReport> {
    if m_max > 2 || n_max > 3 || m_max == 0 || n_max == 0 {
        return Err(Error::InvalidParam(
            "full-matrix validation is capped at m <= 2, n <= 3".into(),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!("p = {p} outside (0, 1)")));
    }
    let dep = QuantumChannel::depolarizing(2, p)?;
    let phi = max_entangled(2).to_density();

    let mut points = Vec::new();
    let mut max_disc: f64 = 0.0;
    for m in 1..=m_max {
        // one link, full matrices
        let link_full: CMatrix = if m == 1 {
            dep.apply_on_a(&phi)?.matrix().clone()
        } else {
            // two pairs via the 2-parallel channel on the joint A side:
            // φ⁺⊗φ⁺ grouped as (A1A2)(B1B2) is exactly φ₄⁺
            let par = dep.parallel(2)?;
            let joint = par.apply_on_a(&max_entangled(4).to_density())?;
            // regroup [A1, A2, B1, B2] -> [A1, B1, A2, B2]
            let grouped =
                permute_subsystems(joint.matrix(), &[2, 2, 2, 2], &[0, 2, 1, 3])?;
            let rho1 = partial_trace(&grouped, (4, 4), Subsystem::A)?;
            let rho2 = partial_trace(&grouped, (4, 4), Subsystem::B)?;
            let (out, _prob) = distill_full(&rho1, &rho2);
            out
        };
        // scalar engine for the same link
        let strategy = if m == 1 { Strategy::None } else { Strategy::DistillSwap };
        let (link_scalar, _, _, _) = link_after_distillation(p, m, strategy, None)?;

        for n in 1..=n_max {
            let mut full = link_full.clone();
            for _ in 1..n {
                full = swap_full(&full, &link_full);
            }
            let f_full = phi_plus_fidelity(&full);
            let f_scalar = endpoint_fidelity(link_scalar, n).fidelity();
            let disc = (f_full - f_scalar).abs();
            max_disc = max_disc.max(disc);
            points.push(ValidationPoint {
                m,
                n,
                scalar_fidelity: f_scalar,
                full_matrix_fidelity: f_full,
                discrepancy: disc,
            });
        }
    }
    Ok(ValidationReport {
        points,
        max_discrepancy: max_disc,
    })
}
