//! Sequential transmission chains: n uses of a channel on subsystem A,
//! with an LOCC or post-selected SLOCC filter applied before each use
//! (filter first, then channel, at every step; step 0 records the raw
//! input).
//!
//! Three engines share the step logic:
//! * [`run_deterministic`] evolves the density matrix exactly and records a
//!   measure trajectory per step;
//! * [`run_slocc_monte_carlo`] samples filter outcomes with Born
//!   probabilities (channels stay exact) and estimates post-selection
//!   statistics;
//! * [`ensemble_gk_evolution`] tracks an explicit weighted pure-state
//!   ensemble to follow the κⁿ contraction of the G_k sum.

use crate::channels::QuantumChannel;
use crate::measures::{
    concurrence, eof_two_qubit, gk_unnormalized, kappa_for_decomposition, negativity,
    sep_distance_lower, separability_bound,
};
use crate::qmath::{self, identity, kron, CMatrix, CVector};
use crate::rng::{derive_seed, rng_from_seed};
use crate::states::{schmidt_rank, DensityMatrix, PureState};
use crate::tol::{Tolerances, DEFAULT};
use crate::{Error, Result};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// No operation between channel uses.
    None,
    /// Trace-preserving LOCC: Σ (M⊗N)†(M⊗N) = I.
    Deterministic,
    /// Post-selected instrument: Σ over all outcomes ≤ I, with an accept set.
    Slocc,
}

/// An intermediate repeater operation given as product Kraus pairs
/// (M on A, N on B), one outcome per pair.
#[derive(Debug, Clone)]
pub struct FilterSpec {
    kind: FilterKind,
    pairs: Vec<(CMatrix, CMatrix)>,
    accept: Vec<usize>,
    // cached per-outcome operators M⊗N and effects (M⊗N)†(M⊗N)
    ops: Vec<CMatrix>,
    effects: Vec<CMatrix>,
}

impl FilterSpec {
    pub fn none() -> Self {
        FilterSpec {
            kind: FilterKind::None,
            pairs: Vec::new(),
            accept: Vec::new(),
            ops: Vec::new(),
            effects: Vec::new(),
        }
    }

    pub fn deterministic(pairs: Vec<(CMatrix, CMatrix)>) -> Result<Self> {
        Self::build(FilterKind::Deterministic, pairs, Vec::new(), &DEFAULT)
    }

    pub fn slocc(pairs: Vec<(CMatrix, CMatrix)>, accept: Vec<usize>) -> Result<Self> {
        Self::build(FilterKind::Slocc, pairs, accept, &DEFAULT)
    }

    fn build(
        kind: FilterKind,
        pairs: Vec<(CMatrix, CMatrix)>,
        accept: Vec<usize>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParam(
                "filter needs at least one Kraus pair".into(),
            ));
        }
        let da = pairs[0].0.ncols();
        let db = pairs[0].1.ncols();
        for (m, n) in &pairs {
            if m.nrows() != da || m.ncols() != da || n.nrows() != db || n.ncols() != db {
                return Err(Error::DimMismatch(
                    "filter Kraus pairs must be square and share dimensions".into(),
                ));
            }
        }
        let ops: Vec<CMatrix> = pairs.iter().map(|(m, n)| kron(m, n)).collect();
        let effects: Vec<CMatrix> = ops.iter().map(|o| o.adjoint() * o).collect();
        let mut sum = CMatrix::zeros(da * db, da * db);
        for e in &effects {
            sum += e;
        }
        match kind {
            FilterKind::None => unreachable!("none filters carry no pairs"),
            FilterKind::Deterministic => {
                let res = qmath::max_abs_diff(&sum, &identity(da * db));
                if res > tol.herm {
                    return Err(Error::KrausContract(res));
                }
                if !accept.is_empty() {
                    return Err(Error::InvalidParam(
                        "accept sets only apply to slocc filters".into(),
                    ));
                }
            }
            FilterKind::Slocc => {
                let (vals, _) = qmath::hermitian_eigensystem_with(&sum, tol)?;
                let max = vals.first().copied().unwrap_or(0.0);
                if max > 1.0 + tol.herm {
                    return Err(Error::KrausContract(max - 1.0));
                }
                if accept.is_empty() {
                    return Err(Error::InvalidParam(
                        "slocc filter needs a nonempty accept set".into(),
                    ));
                }
                if accept.iter().any(|&i| i >= pairs.len()) {
                    return Err(Error::InvalidParam("accept index out of range".into()));
                }
            }
        }
        Ok(FilterSpec {
            kind,
            pairs,
            accept,
            ops,
            effects,
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn pairs(&self) -> &[(CMatrix, CMatrix)] {
        &self.pairs
    }

    pub fn accept(&self) -> &[usize] {
        &self.accept
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.pairs.first().map(|(m, n)| (m.ncols(), n.ncols()))
    }

    fn is_none(&self) -> bool {
        self.kind == FilterKind::None
    }

    /// Deterministic action: Σ (M⊗N) ρ (M⊗N)†.
    fn apply_all(&self, m: &CMatrix) -> CMatrix {
        if self.is_none() {
            return m.clone();
        }
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for op in &self.ops {
            out += op * m * op.adjoint();
        }
        out
    }

    /// Born probabilities of each outcome on ρ.
    fn outcome_probs(&self, m: &CMatrix) -> Vec<f64> {
        self.effects
            .iter()
            .map(|e| {
                let mut tr = 0.0;
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        tr += (e[(i, j)] * m[(j, i)]).re;
                    }
                }
                tr.max(0.0)
            })
            .collect()
    }
}

/// Per-step filter assignment.
#[derive(Debug, Clone)]
pub enum FilterSchedule {
    /// The same filter before every channel use.
    Repeat(FilterSpec),
    /// One filter per step, length n.
    PerStep(Vec<FilterSpec>),
}

impl FilterSchedule {
    pub fn none() -> Self {
        FilterSchedule::Repeat(FilterSpec::none())
    }

    fn at(&self, step: usize) -> &FilterSpec {
        match self {
            FilterSchedule::Repeat(f) => f,
            FilterSchedule::PerStep(fs) => &fs[step],
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if let FilterSchedule::PerStep(fs) = self {
            if fs.len() != n {
                return Err(Error::InvalidParam(format!(
                    "{} per-step filters for {} steps",
                    fs.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    fn all_deterministic(&self) -> bool {
        match self {
            FilterSchedule::Repeat(f) => f.kind != FilterKind::Slocc,
            FilterSchedule::PerStep(fs) => fs.iter().all(|f| f.kind != FilterKind::Slocc),
        }
    }

    fn any_slocc(&self) -> bool {
        !self.all_deterministic()
    }
}

/// Description of one chain experiment.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub channel: QuantumChannel,
    pub n: usize,
    pub filters: FilterSchedule,
    pub initial: DensityMatrix,
    /// Concurrence threshold c for the post-selection probability estimate.
    pub threshold_c: f64,
    pub trajectories: u64,
    pub seed: u64,
    /// Keep the evolved state in every step record.
    pub record_states: bool,
}

impl ChainConfig {
    pub fn new(channel: QuantumChannel, n: usize, initial: DensityMatrix) -> Self {
        ChainConfig {
            channel,
            n,
            filters: FilterSchedule::none(),
            initial,
            threshold_c: 0.5,
            trajectories: 1,
            seed: 0,
            record_states: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam("chain needs n >= 1".into()));
        }
        if !(self.threshold_c > 0.0 && self.threshold_c <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "threshold_c = {} outside (0, 1]",
                self.threshold_c
            )));
        }
        let (da, db) = self.initial.dims();
        if da != self.channel.d_in() {
            return Err(Error::DimMismatch(format!(
                "channel acts on dimension {}, state A-dimension is {da}",
                self.channel.d_in()
            )));
        }
        if !self.channel.is_square() {
            return Err(Error::DimMismatch(
                "chains need a square channel (applied repeatedly)".into(),
            ));
        }
        self.filters.check_len(self.n)?;
        for step in 0..self.n {
            if let Some((fa, fb)) = self.filters.at(step).dims() {
                if (fa, fb) != (da, db) {
                    return Err(Error::DimMismatch(format!(
                        "filter at step {step} acts on ({fa}, {fb}), state dims are ({da}, {db})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One row of the measure trajectory. Fields that only exist for two-qubit
/// states (concurrence, E_f) or when a bound applies are optional.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<crate::io::StateRecord>,
    pub concurrence: Option<f64>,
    pub eof: Option<f64>,
    pub negativity: f64,
    pub sep_lower: f64,
    /// C(Γ)^step for single-qubit channels.
    pub choi_decay_bound: Option<f64>,
    /// Separability-distance bound at this step when κ ∈ (0, 1).
    pub separability_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainResult {
    pub per_step: Vec<StepRecord>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

fn json_num(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

/// Largest κ over k ∈ 2..=dA for the channel's stored decomposition, or
/// `None` when any κ_k falls outside (0, 1).
fn kappa_max_if_contracting(ch: &QuantumChannel) -> Option<f64> {
    let mut kmax: f64 = 0.0;
    for k in 2..=ch.d_in() {
        match kappa_for_decomposition(ch, k) {
            // κ computed in log space lands at 1−ε for non-contracting
            // decompositions; demand genuine contraction
            Ok(v) if v > 1e-12 && v < 1.0 - 1e-9 => kmax = kmax.max(v),
            _ => return None,
        }
    }
    Some(kmax)
}

fn measure_step(
    step: usize,
    m: &CMatrix,
    dims: (usize, usize),
    choi_c: Option<f64>,
    kappa_max: Option<f64>,
    record_states: bool,
) -> Result<StepRecord> {
    let rho = DensityMatrix::from_parts_unchecked(m.clone(), dims);
    let (c, ef) = if dims == (2, 2) {
        (Some(concurrence(&rho)?), Some(eof_two_qubit(&rho)?))
    } else {
        (None, None)
    };
    let neg = negativity(&rho)?;
    let lower = sep_distance_lower(&rho)?;
    let decay = choi_c.map(|cg| cg.powi(step as i32));
    let sep = match kappa_max {
        Some(kappa) => Some(separability_bound(kappa, step, dims.0)?),
        None => None,
    };
    Ok(StepRecord {
        step,
        state: if record_states {
            Some(crate::io::StateRecord::from_density(&rho))
        } else {
            None
        },
        concurrence: c,
        eof: ef,
        negativity: neg,
        sep_lower: lower,
        choi_decay_bound: decay,
        separability_bound: sep,
    })
}

/// Exact density-matrix evolution of the chain, recording measures per step
/// (n+1 records, step 0 is the raw input). All filters must be
/// deterministic or none.
pub fn run_deterministic(config: &ChainConfig) -> Result<ChainResult> {
    config.validate()?;
    if config.filters.any_slocc() {
        return Err(Error::InvalidParam(
            "deterministic evolution cannot branch on slocc filters".into(),
        ));
    }
    let dims = config.initial.dims();
    let choi_c = if config.channel.d_in() == 2 && dims == (2, 2) {
        Some(concurrence(config.channel.choi()?.density())?)
    } else {
        None
    };
    let kappa_max = kappa_max_if_contracting(&config.channel);

    let mut state = config.initial.matrix().clone();
    let mut per_step = Vec::with_capacity(config.n + 1);
    per_step.push(measure_step(
        0,
        &state,
        dims,
        choi_c,
        kappa_max,
        config.record_states,
    )?);
    for step in 1..=config.n {
        state = config.filters.at(step - 1).apply_all(&state);
        state = config.channel.apply_on_a_raw(&state, dims.1);
        let tr = state.trace().re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::NotAState(format!(
                "trace drifted to {tr} at step {step}"
            )));
        }
        per_step.push(measure_step(
            step,
            &state,
            dims,
            choi_c,
            kappa_max,
            config.record_states,
        )?);
    }

    let mut summary = BTreeMap::new();
    summary.insert("n".to_string(), serde_json::Value::from(config.n));
    summary.insert(
        "d_a".to_string(),
        serde_json::Value::from(config.channel.d_in()),
    );
    if let Some(cg) = choi_c {
        summary.insert("choi_concurrence".to_string(), json_num(cg));
    }
    if let Some(k) = kappa_max {
        summary.insert("kappa_max".to_string(), json_num(k));
    }
    if let Some(c) = per_step.last().and_then(|r| r.concurrence) {
        summary.insert("final_concurrence".to_string(), json_num(c));
    }
    summary.insert(
        "final_sep_lower".to_string(),
        json_num(per_step.last().map(|r| r.sep_lower).unwrap_or(0.0)),
    );
    Ok(ChainResult { per_step, summary })
}

/// Outcome statistics of the post-selected chain.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloResult {
    pub trajectories: u64,
    /// Trajectories whose every filter outcome landed in the accept set.
    pub successes: u64,
    /// Successful trajectories with final concurrence ≥ threshold_c.
    pub hits: u64,
    /// hits / trajectories: the estimate of P(C ≥ c, n).
    pub empirical_prob: f64,
    /// C(Γ)ⁿ / c.
    pub bound: f64,
    pub binomial_sigma: f64,
    pub choi_concurrence: f64,
    pub threshold_c: f64,
    pub mean_final_concurrence: Option<f64>,
    pub seed: u64,
}

/// Monte-Carlo estimate of P(C ≥ c, n): filter outcomes are sampled with
/// Born probabilities (an implicit discard branch absorbs any deficit from
/// Σ effects < I), channel steps are applied exactly. Deterministic given
/// the seed; per-trajectory seeds are derived from (seed, index).
pub fn run_slocc_monte_carlo(config: &ChainConfig) -> Result<MonteCarloResult> {
    run_slocc_monte_carlo_with_policy(config, None)
}

/// Outcome-adaptive variant: `policy(step, history)` supplies the filter for
/// `step` given the accepted-outcome history of this trajectory. Only the
/// Monte-Carlo engine supports adaptivity; deterministic evolution requires
/// fixed per-step filters.
pub fn run_slocc_monte_carlo_with_policy(
    config: &ChainConfig,
    policy: Option<&dyn Fn(usize, &[usize]) -> FilterSpec>,
) -> Result<MonteCarloResult> {
    config.validate()?;
    if policy.is_none() && !config.filters.any_slocc() {
        return Err(Error::InvalidParam(
            "Monte-Carlo post-selection needs at least one slocc filter".into(),
        ));
    }
    let dims = config.initial.dims();
    if dims != (2, 2) || config.channel.d_in() != 2 {
        return Err(Error::DimMismatch(
            "post-selection statistics are defined for single-qubit channels on 2⊗2 states"
                .into(),
        ));
    }
    if config.trajectories == 0 {
        return Err(Error::InvalidParam("trajectories must be >= 1".into()));
    }
    let choi_c = concurrence(config.channel.choi()?.density())?;
    let bound = choi_c.powi(config.n as i32) / config.threshold_c;

    let mut successes = 0u64;
    let mut hits = 0u64;
    let mut concurrence_sum = 0.0;
    for t in 0..config.trajectories {
        let mut rng = rng_from_seed(derive_seed(config.seed, t));
        let mut state = config.initial.matrix().clone();
        let mut history: Vec<usize> = Vec::with_capacity(config.n);
        let mut alive = true;
        for step in 0..config.n {
            let adaptive;
            let filter = match policy {
                Some(p) => {
                    adaptive = p(step, &history);
                    &adaptive
                }
                None => config.filters.at(step),
            };
            if !filter.is_none() {
                let probs = filter.outcome_probs(&state);
                let u: f64 = rng.random::<f64>();
                // walk the cumulative distribution; u beyond Σ probs is the
                // implicit discard branch of a subnormalized instrument
                let mut acc = 0.0;
                let mut outcome = None;
                for (l, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        outcome = Some(l);
                        break;
                    }
                }
                let Some(l) = outcome else {
                    alive = false;
                    break;
                };
                let accepted = match filter.kind {
                    FilterKind::Slocc => filter.accept.contains(&l),
                    _ => true,
                };
                if !accepted {
                    alive = false;
                    break;
                }
                let op = &filter.ops[l];
                let next = op * &state * op.adjoint();
                let p = next.trace().re;
                if p <= 0.0 {
                    alive = false;
                    break;
                }
                state = next.unscale(p);
                history.push(l);
            }
            state = config.channel.apply_on_a_raw(&state, dims.1);
        }
        if alive {
            successes += 1;
            let rho = DensityMatrix::from_parts_unchecked(state, dims);
            let c = concurrence(&rho)?;
            concurrence_sum += c;
            if c >= config.threshold_c {
                hits += 1;
            }
        }
    }
    let empirical = hits as f64 / config.trajectories as f64;
    let sigma = (empirical * (1.0 - empirical) / config.trajectories as f64).sqrt();
    Ok(MonteCarloResult {
        trajectories: config.trajectories,
        successes,
        hits,
        empirical_prob: empirical,
        bound,
        binomial_sigma: sigma,
        choi_concurrence: choi_c,
        threshold_c: config.threshold_c,
        mean_final_concurrence: if successes > 0 {
            Some(concurrence_sum / successes as f64)
        } else {
            None
        },
        seed: config.seed,
    })
}

/// Per-step comparison of the recorded concurrence against C(Γ)^step.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCheck {
    pub per_step_concurrence: Vec<f64>,
    pub per_step_bound: Vec<f64>,
    /// Steps where concurrence exceeded the bound beyond the slack.
    pub violations: Vec<usize>,
}

/// Verify C(Λ_n[ρ]) ≤ C(Γ)^n at every step of a deterministic chain with a
/// single-qubit channel.
pub fn verify_decay_bound(config: &ChainConfig) -> Result<DecayCheck> {
    if config.channel.d_in() != 2 || config.initial.dims() != (2, 2) {
        return Err(Error::DimMismatch(
            "the decay bound applies to single-qubit channels on 2⊗2 states".into(),
        ));
    }
    let result = run_deterministic(config)?;
    let mut cs = Vec::with_capacity(result.per_step.len());
    let mut bounds = Vec::with_capacity(result.per_step.len());
    let mut violations = Vec::new();
    for rec in &result.per_step {
        let c = rec.concurrence.expect("two-qubit chain records concurrence");
        let b = rec
            .choi_decay_bound
            .expect("single-qubit chain records the decay bound");
        if c > b + DEFAULT.slack {
            violations.push(rec.step);
        }
        cs.push(c);
        bounds.push(b);
    }
    Ok(DecayCheck {
        per_step_concurrence: cs,
        per_step_bound: bounds,
        violations,
    })
}

/// One step record of the ensemble evolution.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStep {
    pub step: usize,
    /// Σ s_i G_k(φ_i) over the live ensemble.
    pub gk_sum: f64,
    /// κ^step for the channel's stored decomposition.
    pub kappa_pow: f64,
    pub branches: usize,
    /// Total weight pruned up to this step; add to `gk_sum` before comparing
    /// against the bound (G_k ≤ 1 on every dropped branch keeps this sound).
    pub dropped_mass: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleEvolution {
    pub per_step: Vec<EnsembleStep>,
    pub kappa: f64,
    /// Final weighted ensemble {(s_i, φ_i)}.
    pub branches: Vec<(f64, PureState)>,
    pub dropped_mass: f64,
}

impl EnsembleEvolution {
    /// Σ s_i |φ_i⟩⟨φ_i| over the surviving branches.
    pub fn reconstruct_final(&self) -> CMatrix {
        let d = self
            .branches
            .first()
            .map(|(_, psi)| psi.amplitudes().len())
            .unwrap_or(0);
        let mut m = CMatrix::zeros(d, d);
        for (w, psi) in &self.branches {
            m += psi.projector().scale(*w);
        }
        m
    }
}

/// Track the weighted pure-state ensemble {(s_i, φ_i)} through the chain,
/// branching over every filter pair and channel Kraus operator per step
/// (filter first, then channel). Branches lighter than `prune` are dropped
/// with their mass recorded. Reports Σ s_i G_k per step against κ^step.
pub fn ensemble_gk_evolution(
    channel: &QuantumChannel,
    filters: &FilterSchedule,
    psi0: &PureState,
    k: usize,
    n: usize,
    prune: f64,
) -> Result<EnsembleEvolution> {
    if n == 0 {
        return Err(Error::InvalidParam("ensemble evolution needs n >= 1".into()));
    }
    if !channel.is_square() || channel.d_in() != psi0.dims().0 {
        return Err(Error::DimMismatch(
            "channel and state dimensions are inconsistent".into(),
        ));
    }
    filters.check_len(n)?;
    let dims = psi0.dims();
    if schmidt_rank(psi0, DEFAULT.schmidt_cutoff) > k {
        return Err(Error::InvalidParam(format!(
            "initial state has Schmidt rank above k = {k}"
        )));
    }
    let kappa = kappa_for_decomposition(channel, k)?;
    let db = dims.1;
    let eye_b = identity(db);
    let channel_ops: Vec<CMatrix> = channel.kraus().iter().map(|kr| kron(kr, &eye_b)).collect();

    // branches as unnormalized vectors: weight = ‖v‖², G_k contribution =
    // gk_unnormalized(v) by homogeneity
    let mut branches: Vec<CVector> = vec![psi0.amplitudes().clone()];
    let mut dropped = 0.0;
    let gk_sum_of =
        |vs: &[CVector]| -> f64 { vs.iter().map(|v| gk_unnormalized(v, dims, k)).sum() };
    let mut per_step = vec![EnsembleStep {
        step: 0,
        gk_sum: gk_sum_of(&branches),
        kappa_pow: 1.0,
        branches: branches.len(),
        dropped_mass: 0.0,
    }];

    for step in 1..=n {
        let filter = filters.at(step - 1);
        let mut after_filter: Vec<CVector> = Vec::new();
        if filter.is_none() {
            after_filter = branches;
        } else {
            for v in &branches {
                for op in &filter.ops {
                    let w = op * v;
                    let mass = w.norm().powi(2);
                    if mass <= prune {
                        dropped += mass;
                    } else {
                        after_filter.push(w);
                    }
                }
            }
        }
        let mut next: Vec<CVector> = Vec::with_capacity(after_filter.len() * channel_ops.len());
        for v in &after_filter {
            for op in &channel_ops {
                let w = op * v;
                let mass = w.norm().powi(2);
                if mass <= prune {
                    dropped += mass;
                } else {
                    next.push(w);
                }
            }
        }
        if next.len() > 1_000_000 {
            return Err(Error::BranchExplosion(format!(
                "{} branches at step {step}; raise the prune threshold",
                next.len()
            )));
        }
        branches = next;
        per_step.push(EnsembleStep {
            step,
            gk_sum: gk_sum_of(&branches),
            kappa_pow: kappa.powi(step as i32),
            branches: branches.len(),
            dropped_mass: dropped,
        });
    }

    let final_branches = branches
        .into_iter()
        .map(|v| {
            let w = v.norm().powi(2);
            PureState::from_unnormalized(v, dims).map(|psi| (w, psi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleEvolution {
        per_step,
        kappa,
        branches: final_branches,
        dropped_mass: dropped,
    })
}

/// Per-step comparison of the certified separability-distance lower bound
/// against the exponential bound with κ_max = max_{k≤dA} κ_k.
#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityCheck {
    /// False when some κ_k lies outside (0, 1); the bound then says nothing.
    pub applicable: bool,
    pub kappa_max: Option<f64>,
    pub per_step_lower: Vec<f64>,
    pub per_step_bound: Vec<f64>,
    pub consistent: bool,
}

/// Check sep_distance_lower(Λ_step[ρ]) ≤ bound(κ_max, step, dA) along a
/// deterministic chain. Inapplicability (κ ≥ 1 for some k) is a reported
/// status, not an error.
pub fn check_separability_bound(
    channel: &QuantumChannel,
    filters: &FilterSchedule,
    rho0: &DensityMatrix,
    n: usize,
) -> Result<SeparabilityCheck> {
    let kappa_max = kappa_max_if_contracting(channel);
    let Some(kappa) = kappa_max else {
        return Ok(SeparabilityCheck {
            applicable: false,
            kappa_max: None,
            per_step_lower: Vec::new(),
            per_step_bound: Vec::new(),
            consistent: true,
        });
    };
    let mut config = ChainConfig::new(channel.clone(), n, rho0.clone());
    config.filters = filters.clone();
    let result = run_deterministic(&config)?;
    let d_a = channel.d_in();
    let mut lowers = Vec::with_capacity(n + 1);
    let mut bounds = Vec::with_capacity(n + 1);
    let mut consistent = true;
    for rec in &result.per_step {
        let b = separability_bound(kappa, rec.step, d_a)?;
        if rec.sep_lower > b + DEFAULT.slack {
            consistent = false;
        }
        lowers.push(rec.sep_lower);
        bounds.push(b);
    }
    Ok(SeparabilityCheck {
        applicable: true,
        kappa_max: Some(kappa),
        per_step_lower: lowers,
        per_step_bound: bounds,
        consistent,
    })
}
