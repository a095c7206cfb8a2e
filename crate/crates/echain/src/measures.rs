//! Entanglement quantifiers and the bounds they obey: Wootters concurrence,
//! entanglement of formation (exact two-qubit closed form plus a convex-roof
//! upper bound in any dimension), G_k-concurrence, k-Schmidt fidelity,
//! negativity, two-sided separability-distance bounds, the per-decomposition
//! contraction factor κ, and the separability / parallel-channel scaling
//! bounds built from it.
//!
//! κ is evaluated for the channel's *stored* Kraus decomposition;
//! minimization over all decompositions is a hard nonconvex problem that the
//! analytic depolarizing bound 1−pᵐ sidesteps.

use crate::channels::QuantumChannel;
use crate::opt::{coordinate_descent, RefineCfg};
use crate::qmath::{
    self, cr, hermitian_eigensystem_with, kron, svd_values, trace_norm, CMatrix, CVector,
    Subsystem, C64,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::states::{max_entangled_embedded, purify, schmidt_rank, DensityMatrix, PureState};
use crate::tol::DEFAULT;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A named measure value with free-form metadata, the JSON-facing result
/// shape of the measure subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureResult {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl MeasureResult {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        MeasureResult {
            name: name.into(),
            value,
            metadata: BTreeMap::new(),
        }
    }
}

fn require_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dims() != (2, 2) {
        return Err(Error::DimMismatch(format!(
            "operation needs a 2⊗2 state, got dims {:?}",
            rho.dims()
        )));
    }
    Ok(())
}

fn require_bipartite(rho: &DensityMatrix) -> Result<()> {
    if rho.is_single() {
        return Err(Error::DimMismatch(
            "operation needs a bipartite state".into(),
        ));
    }
    Ok(())
}

/// ρ̃ = (σ_y ⊗ σ_y) ρ* (σ_y ⊗ σ_y).
pub fn spin_flip(rho: &DensityMatrix) -> Result<CMatrix> {
    require_two_qubit(rho)?;
    let y = CMatrix::from_row_slice(
        2,
        2,
        &[C64::ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::ZERO],
    );
    let yy = kron(&y, &y);
    Ok(&yy * rho.matrix().conjugate() * &yy)
}

/// Wootters concurrence: C = max(ξ₁−ξ₂−ξ₃−ξ₄, 0) with ξ_i the decreasing
/// square roots of the eigenvalues of ρρ̃. Computed as the singular values
/// of the symmetric matrix τ = Xᵀ(σ_y⊗σ_y)X, where X carries the
/// subnormalized eigenvectors of ρ; this avoids the precision loss of
/// forming √ρ ρ̃ √ρ on rank-deficient states.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    let (vals, vecs) = hermitian_eigensystem_with(rho.matrix(), &DEFAULT)?;
    let vmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut x = CMatrix::zeros(4, 4);
    for j in 0..4 {
        let lambda = qmath::clip_eigenvalue(vals[j], &DEFAULT)?;
        // eigenvalues at rounding-noise scale would pollute τ at √noise
        if lambda > vmax * 1e-14 {
            let w = cr(lambda.sqrt());
            for i in 0..4 {
                x[(i, j)] = w * vecs[(i, j)];
            }
        }
    }
    // σ_y⊗σ_y is real symmetric
    let mut yy = CMatrix::zeros(4, 4);
    yy[(0, 3)] = cr(-1.0);
    yy[(1, 2)] = cr(1.0);
    yy[(2, 1)] = cr(1.0);
    yy[(3, 0)] = cr(-1.0);
    let tau = x.transpose() * yy * &x;
    let xi = svd_values(&tau);
    Ok((xi[0] - xi[1] - xi[2] - xi[3]).max(0.0))
}

/// Concurrence of a two-qubit pure state from its amplitudes: 2|ad − bc|.
pub(crate) fn pure_concurrence_two_qubit(amps: &CVector) -> f64 {
    2.0 * (amps[0] * amps[3] - amps[1] * amps[2]).norm()
}

/// Binary entropy h(x) = −x log₂ x − (1−x) log₂(1−x).
pub fn binary_entropy(x: f64) -> f64 {
    let mut s = 0.0;
    if x > 0.0 {
        s -= x * x.log2();
    }
    if x < 1.0 {
        s -= (1.0 - x) * (1.0 - x).log2();
    }
    s.max(0.0)
}

/// Entanglement entropy of a pure state: S of the reduced state, equal to
/// −Σ λ_i log₂ λ_i over the Schmidt weights.
pub fn eof_pure(psi: &PureState) -> f64 {
    ef_pure_amps(psi.amplitudes(), psi.dims())
}

pub(crate) fn ef_pure_amps(amps: &CVector, dims: (usize, usize)) -> f64 {
    if dims == (2, 2) {
        let c = pure_concurrence_two_qubit(amps).min(1.0);
        return binary_entropy(0.5 + 0.5 * (1.0 - c * c).max(0.0).sqrt());
    }
    let (da, db) = dims;
    let x = CMatrix::from_fn(da, db, |i, j| amps[i * db + j]);
    let lambdas: Vec<f64> = svd_values(&x).iter().map(|s| s * s).collect();
    qmath::entropy_bits(&lambdas)
}

/// Exact two-qubit entanglement of formation,
/// E_f = h(½ + ½√(1−C²)) in bits.
pub fn eof_two_qubit(rho: &DensityMatrix) -> Result<f64> {
    let c = concurrence(rho)?;
    Ok(binary_entropy(0.5 + 0.5 * (1.0 - c * c).max(0.0).sqrt()))
}

/// Knobs for the convex-roof upper bound.
#[derive(Debug, Clone, Copy)]
pub struct ConvexRoofParams {
    pub ensemble_size: usize,
    pub restarts: usize,
    /// Coordinate sweeps per restart.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ConvexRoofParams {
    fn default() -> Self {
        ConvexRoofParams {
            ensemble_size: 4,
            restarts: 20,
            iterations: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvexRoofResult {
    /// Best Σ p_i E_f(ψ_i) found: an upper bound on E_f(ρ).
    pub value: f64,
    /// The ensemble achieving it.
    pub ensemble: Vec<(f64, PureState)>,
}

/// Upper bound on the entanglement of formation: minimize the average pure
/// state entanglement over decompositions of ρ, parameterized by isometric
/// mixing of a purification's reference. Any returned value is achieved by
/// an explicit ensemble, so it is always a valid upper bound.
pub fn eof_convex_roof_upper(
    rho: &DensityMatrix,
    params: ConvexRoofParams,
) -> Result<ConvexRoofResult> {
    require_bipartite(rho)?;
    let dims = rho.dims();
    let d = rho.total_dim();
    let purification = purify(rho)?;
    let rank = purification.dims().1;
    if rank == 1 {
        // pure input: the one-element ensemble is optimal
        let amps = CVector::from_fn(d, |i, _| purification.amplitudes()[i]);
        let psi = PureState::from_unnormalized(amps, dims)?;
        return Ok(ConvexRoofResult {
            value: eof_pure(&psi),
            ensemble: vec![(1.0, psi)],
        });
    }
    let m = params.ensemble_size.max(rank);
    // purification coefficient matrix Ψ (d × rank): ρ = Ψ Ψ†
    let big_psi = CMatrix::from_fn(d, rank, |s, r| purification.amplitudes()[s * rank + r]);

    let ensemble_of = |v: &CMatrix| -> Vec<(f64, CVector)> {
        // rows of the isometry select sub-normalized branches Ψ·conj(vᵢ)
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let row = v.row(i);
            let coeff = CVector::from_fn(rank, |r, _| row[r].conj());
            let branch = &big_psi * coeff;
            let p = branch.norm().powi(2);
            out.push((p, branch));
        }
        out
    };
    let average_ef = |v: &CMatrix| -> f64 {
        let mut total = 0.0;
        for (p, branch) in ensemble_of(v) {
            if p > 1e-14 {
                let normd = branch.unscale(p.sqrt());
                total += p * ef_pure_amps(&normd, dims);
            }
        }
        total
    };

    let unpack = |params_slice: &[f64]| -> CMatrix {
        let raw = CMatrix::from_fn(m, rank, |i, j| {
            C64::new(
                params_slice[2 * (i * rank + j)],
                params_slice[2 * (i * rank + j) + 1],
            )
        });
        qmath::orthonormalize_columns(&raw)
    };

    let mut best_value = f64::INFINITY;
    let mut best_iso: Option<CMatrix> = None;
    for r in 0..params.restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(params.seed, r as u64));
        let mut p: Vec<f64> = if r == 0 {
            // identity start reproduces the eigen-ensemble
            let mut v = vec![0.0; 2 * m * rank];
            for j in 0..rank {
                v[2 * (j * rank + j)] = 1.0;
            }
            v
        } else {
            (0..2 * m * rank)
                .map(|_| qmath::gaussian_c64(&mut rng).re)
                .collect()
        };
        let cfg = RefineCfg {
            iterations: params.iterations,
            ..Default::default()
        };
        let val = coordinate_descent(&mut p, |x| average_ef(&unpack(x)), &cfg, &mut rng);
        if val < best_value {
            best_value = val;
            best_iso = Some(unpack(&p));
        }
    }
    let v = best_iso.expect("at least one restart ran");
    let mut ensemble = Vec::new();
    for (p, branch) in ensemble_of(&v) {
        if p > 1e-14 {
            ensemble.push((p, PureState::from_unnormalized(branch, dims)?));
        }
    }
    Ok(ConvexRoofResult {
        value: best_value,
        ensemble,
    })
}

/// Cheapest available upper bound on E_f(ρ): exact closed form for 2⊗2,
/// exact entropy for pure inputs, convex-roof optimizer otherwise.
pub(crate) fn eof_mixed_upper_auto(rho: &DensityMatrix, seed: u64) -> Result<f64> {
    if rho.dims() == (2, 2) {
        return eof_two_qubit(rho);
    }
    if rho.is_pure(1e-10) {
        let pur = purify(rho)?;
        let amps = CVector::from_fn(rho.total_dim(), |i, _| pur.amplitudes()[i]);
        return Ok(ef_pure_amps(&amps, rho.dims()));
    }
    Ok(eof_convex_roof_upper(
        rho,
        ConvexRoofParams {
            ensemble_size: rho.rank(1e-12) + 2,
            restarts: 4,
            iterations: 120,
            seed,
        },
    )?
    .value)
}

/// G_k of a coefficient matrix: k·(∏ of the k largest squared singular
/// values)^{1/k}.
fn gk_of_matrix(x: &CMatrix, k: usize) -> f64 {
    let s = svd_values(x);
    if s.len() < k {
        return 0.0;
    }
    let mut log_prod = 0.0;
    for &sv in s.iter().take(k) {
        if sv <= 0.0 {
            return 0.0;
        }
        log_prod += 2.0 * sv.ln();
    }
    k as f64 * (log_prod / k as f64).exp()
}

/// G_k-concurrence of a pure state: k·(∏_{i<k} λ_i)^{1/k} over the k largest
/// Schmidt weights; zero when the Schmidt rank is below k. States of rank
/// above k evaluate the same top-k product (the natural total extension).
pub fn gk_concurrence(psi: &PureState, k: usize) -> Result<f64> {
    let (da, db) = psi.dims();
    if k < 2 {
        return Err(Error::InvalidParam("G_k needs k >= 2".into()));
    }
    if k > da.min(db) {
        return Err(Error::InvalidParam(format!(
            "k = {k} exceeds min subsystem dimension {}",
            da.min(db)
        )));
    }
    if schmidt_rank(psi, DEFAULT.schmidt_cutoff) < k {
        return Ok(0.0);
    }
    Ok(gk_of_matrix(&psi.coefficient_matrix(), k))
}

/// G_k extended to non-normalized bipartite vectors; homogeneous of degree 2
/// in the vector norm.
pub fn gk_unnormalized(amps: &CVector, dims: (usize, usize), k: usize) -> f64 {
    let (da, db) = dims;
    assert_eq!(amps.len(), da * db, "vector length must match dims");
    if k == 0 {
        return 0.0;
    }
    let x = CMatrix::from_fn(da, db, |i, j| amps[i * db + j]);
    gk_of_matrix(&x, k)
}

/// k-Schmidt fidelity of a pure state: the maximal fidelity to states of
/// Schmidt rank at most k, equal to the sum of the k largest Schmidt weights.
pub fn k_schmidt_fidelity_pure(psi: &PureState, k: usize) -> Result<f64> {
    let (da, db) = psi.dims();
    if k < 1 || k > da.min(db) {
        return Err(Error::InvalidParam(format!(
            "k = {k} outside 1..={}",
            da.min(db)
        )));
    }
    let s = svd_values(&psi.coefficient_matrix());
    Ok(s.iter().take(k).map(|sv| sv * sv).sum::<f64>().min(1.0))
}

/// Certified lower bound on the mixed-state k-Schmidt fidelity:
/// Σ p_i F_k(ψ_i) for any pure-state decomposition of ρ.
pub fn k_schmidt_fidelity_mixed_lower(
    rho: &DensityMatrix,
    ensemble: &[(f64, PureState)],
    k: usize,
) -> Result<f64> {
    require_bipartite(rho)?;
    let d = rho.total_dim();
    let mut rebuilt = CMatrix::zeros(d, d);
    for (p, psi) in ensemble {
        if psi.dims() != rho.dims() {
            return Err(Error::DimMismatch(
                "ensemble member dims do not match the state".into(),
            ));
        }
        rebuilt += psi.projector().scale(*p);
    }
    let err = qmath::trace_distance(&rebuilt, rho.matrix());
    if err > 1e-8 {
        return Err(Error::EnsembleMismatch(err));
    }
    let mut total = 0.0;
    for (p, psi) in ensemble {
        total += p * k_schmidt_fidelity_pure(psi, k)?;
    }
    Ok(total.min(1.0))
}

/// Negativity (‖ρ^{T_B}‖₁ − 1)/2; zero on separable states.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    require_bipartite(rho)?;
    let pt = qmath::partial_transpose(rho.matrix(), rho.dims(), Subsystem::B)?;
    Ok(((trace_norm(&pt) - 1.0) / 2.0).max(0.0))
}

/// Certified lower bound on min over separable σ of ‖ρ−σ‖₁: for separable σ,
/// ‖ρ−σ‖₁ ≥ ‖ρ^{T_B}−σ^{T_B}‖₁/d_B ≥ (‖ρ^{T_B}‖₁−1)/d_B = 2·negativity/d_B,
/// using ‖X^{T_B}‖₁ ≤ d_B‖X‖₁ and ‖σ^{T_B}‖₁ = 1.
pub fn sep_distance_lower(rho: &DensityMatrix) -> Result<f64> {
    let n = negativity(rho)?;
    Ok(2.0 * n / rho.dims().1 as f64)
}

/// Knobs for the separable-approximation search.
#[derive(Debug, Clone, Copy)]
pub struct SepUpperParams {
    /// Number of product terms in the ansatz; defaults to (dA·dB)².
    pub terms: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl SepUpperParams {
    pub fn for_dims(dims: (usize, usize)) -> Self {
        SepUpperParams {
            terms: (dims.0 * dims.1).pow(2),
            restarts: 20,
            iterations: 120,
            seed: 0,
        }
    }
}

/// Upper bound on the separability distance: ‖ρ − Σ_j w_j α_j⊗β_j‖₁
/// minimized over explicit separable ansatz states. Any output is achieved
/// by a feasible separable state, hence a valid upper bound.
pub fn sep_distance_upper(rho: &DensityMatrix, params: SepUpperParams) -> Result<f64> {
    require_bipartite(rho)?;
    let (da, db) = rho.dims();
    let terms = params.terms.max(1);
    // packed layout per term: [logit, re/im of α (2·dA), re/im of β (2·dB)]
    let width = 1 + 2 * da + 2 * db;

    let eval = |p: &[f64]| -> f64 {
        let mut logits = Vec::with_capacity(terms);
        for t in 0..terms {
            logits.push(p[t * width]);
        }
        let lmax = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = logits.iter().map(|l| (l - lmax).exp()).collect();
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        let mut sigma = CMatrix::zeros(da * db, da * db);
        for t in 0..terms {
            let base = t * width + 1;
            let mut a = CVector::from_fn(da, |i, _| C64::new(p[base + 2 * i], p[base + 2 * i + 1]));
            let bb = base + 2 * da;
            let mut b = CVector::from_fn(db, |i, _| C64::new(p[bb + 2 * i], p[bb + 2 * i + 1]));
            let na = a.norm();
            let nb = b.norm();
            if na < 1e-12 || nb < 1e-12 {
                continue;
            }
            a = a.unscale(na);
            b = b.unscale(nb);
            let pa = &a * a.adjoint();
            let pb = &b * b.adjoint();
            sigma += kron(&pa, &pb).scale(weights[t]);
        }
        trace_norm(&(rho.matrix() - sigma))
    };

    // structured starts: product of marginals, then product approximations of
    // the eigenvectors, then random
    let mut starts: Vec<Vec<f64>> = Vec::new();
    {
        let ra = rho.reduced(Subsystem::A)?;
        let rb = rho.reduced(Subsystem::B)?;
        let (va, ua) = hermitian_eigensystem_with(&ra, &DEFAULT)?;
        let (vb, ub) = hermitian_eigensystem_with(&rb, &DEFAULT)?;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..da {
            for j in 0..db {
                pairs.push((va[i].max(0.0) * vb[j].max(0.0), i, j));
            }
        }
        pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let mut p = vec![0.0; terms * width];
        let used = pairs.len().min(terms);
        for (t, &(w, i, j)) in pairs.iter().take(terms).enumerate() {
            write_term(
                &mut p,
                t,
                width,
                w.max(1e-26).ln(),
                &ua.column(i).into_owned(),
                &ub.column(j).into_owned(),
                da,
            );
        }
        fill_remaining_terms(&mut p, used, terms, width, da, db, params.seed);
        starts.push(p);
    }
    {
        let (vals, vecs) = hermitian_eigensystem_with(rho.matrix(), &DEFAULT)?;
        let mut p = vec![0.0; terms * width];
        let used = vals.len().min(terms);
        for t in 0..used {
            let col = vecs.column(t).into_owned();
            let x = CMatrix::from_fn(da, db, |i, j| col[i * db + j]);
            let svd = x.try_svd(true, true, f64::EPSILON, 0).expect("svd");
            let u = svd.u.unwrap();
            let vt = svd.v_t.unwrap();
            let mut imax = 0;
            for i in 0..svd.singular_values.len() {
                if svd.singular_values[i] > svd.singular_values[imax] {
                    imax = i;
                }
            }
            let a = u.column(imax).into_owned();
            let b = vt.row(imax).transpose();
            write_term(&mut p, t, width, vals[t].max(1e-26).ln(), &a, &b, da);
        }
        fill_remaining_terms(&mut p, used, terms, width, da, db, params.seed ^ 0x5eed);
        starts.push(p);
    }

    let mut best = f64::INFINITY;
    for r in 0..params.restarts.max(starts.len()) {
        let mut rng = rng_from_seed(derive_seed(params.seed, 1000 + r as u64));
        let mut p = if r < starts.len() {
            starts[r].clone()
        } else {
            let mut p = vec![0.0; terms * width];
            for v in p.iter_mut() {
                *v = qmath::gaussian_c64(&mut rng).re;
            }
            p
        };
        let cfg = RefineCfg {
            iterations: params.iterations,
            init_step: 0.2,
            ..Default::default()
        };
        let val = coordinate_descent(&mut p, eval, &cfg, &mut rng);
        if val < best {
            best = val;
        }
    }
    Ok(best)
}

fn write_term(
    p: &mut [f64],
    t: usize,
    width: usize,
    logit: f64,
    a: &CVector,
    b: &CVector,
    da: usize,
) {
    let base = t * width;
    p[base] = logit.max(-60.0);
    for i in 0..a.len() {
        p[base + 1 + 2 * i] = a[i].re;
        p[base + 1 + 2 * i + 1] = a[i].im;
    }
    let bb = base + 1 + 2 * da;
    for i in 0..b.len() {
        p[bb + 2 * i] = b[i].re;
        p[bb + 2 * i + 1] = b[i].im;
    }
}

fn fill_remaining_terms(
    p: &mut [f64],
    from: usize,
    terms: usize,
    width: usize,
    da: usize,
    db: usize,
    seed: u64,
) {
    let mut rng = rng_from_seed(derive_seed(seed, 0xf1f1));
    for t in from..terms {
        let a = qmath::gaussian_vector(da, &mut rng);
        let b = qmath::gaussian_vector(db, &mut rng);
        write_term(p, t, width, -60.0, &a.unscale(a.norm()), &b.unscale(b.norm()), da);
    }
}

/// Contraction factor of the channel's stored Kraus decomposition:
/// κ = Σ_i G_k[(K_i⊗1)φ_k⁺(K_i†⊗1)], with φ_k⁺ embedded on the first k
/// basis vectors of the input space.
pub fn kappa_for_decomposition(ch: &QuantumChannel, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParam("κ needs k >= 2".into()));
    }
    if k > ch.d_in() {
        return Err(Error::InvalidParam(format!(
            "k = {k} exceeds the channel input dimension {}",
            ch.d_in()
        )));
    }
    let phi = max_entangled_embedded(k, ch.d_in());
    let mut kappa = 0.0;
    for kr in ch.kraus() {
        // (K⊗1_k)·φ has coefficient matrix K·X with X = φ's matrix
        let x = kr * phi.coefficient_matrix();
        let amps = CVector::from_fn(ch.d_out() * k, |idx, _| x[(idx / k, idx % k)]);
        kappa += gk_unnormalized(&amps, (ch.d_out(), k), k);
    }
    Ok(kappa)
}

/// Exponential separability bound 4·κ^{n/(2(d_A−1))}·(√d_A − 1).
pub fn separability_bound(kappa: f64, n: usize, d_a: usize) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidParam(format!("κ = {kappa} outside (0, 1)")));
    }
    if d_a < 2 {
        return Err(Error::InvalidParam("d_A must be at least 2".into()));
    }
    let exponent = n as f64 / (2.0 * (d_a as f64 - 1.0));
    Ok(4.0 * kappa.powf(exponent) * ((d_a as f64).sqrt() - 1.0))
}

/// Minimal number of parallel depolarizing channels per link to keep
/// entanglement alive over n links:
/// ln n/γ + (1/γ)·ln(1/(2β(k−1))) with γ = −ln p.
pub fn min_parallel_channels(n: usize, p: f64, k: usize, beta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParam("chain length n must be at least 2".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!("p = {p} outside (0, 1)")));
    }
    if k < 2 {
        return Err(Error::InvalidParam("k must be at least 2".into()));
    }
    if beta <= 0.0 {
        return Err(Error::InvalidParam("β must be positive".into()));
    }
    let gamma = -p.ln();
    Ok((n as f64).ln() / gamma + (1.0 / (2.0 * beta * (k as f64 - 1.0))).ln() / gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{c, identity, kron_vec, max_abs_diff};
    use crate::rng::rng_from_seed;
    use crate::states::{max_entangled, random_density, random_pure, random_pure_of_rank};
    use approx::assert_relative_eq;

    fn basis_qubit(i: usize) -> CVector {
        let mut v = CVector::zeros(2);
        v[i] = cr(1.0);
        v
    }

    fn product_state() -> PureState {
        let plus = CVector::from_vec(vec![cr(1.0), cr(1.0)]).unscale(2f64.sqrt());
        PureState::new(kron_vec(&basis_qubit(0), &plus), (2, 2)).unwrap()
    }

    fn isotropic(w: f64) -> DensityMatrix {
        let phi = max_entangled(2).to_density();
        let m = phi.matrix().scale(w) + identity(4).scale((1.0 - w) / 4.0);
        DensityMatrix::new(m, (2, 2)).unwrap()
    }

    #[test]
    fn spin_flip_cases() {
        let phi = max_entangled(2).to_density();
        let flipped = spin_flip(&phi).unwrap();
        assert!(max_abs_diff(&flipped, phi.matrix()) < 1e-12);

        let mixed = DensityMatrix::new(identity(4).scale(0.25), (2, 2)).unwrap();
        assert!(max_abs_diff(&spin_flip(&mixed).unwrap(), mixed.matrix()) < 1e-14);

        let zz = PureState::new(kron_vec(&basis_qubit(0), &basis_qubit(0)), (2, 2)).unwrap();
        let oo = PureState::new(kron_vec(&basis_qubit(1), &basis_qubit(1)), (2, 2)).unwrap();
        assert!(max_abs_diff(&spin_flip(&zz.to_density()).unwrap(), &oo.projector()) < 1e-14);
    }

    #[test]
    fn concurrence_bell_and_product() {
        assert_relative_eq!(
            concurrence(&max_entangled(2).to_density()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert!(concurrence(&product_state().to_density()).unwrap() < 1e-8);
    }

    #[test]
    fn concurrence_depolarizing_choi_grid() {
        // Bell-diagonal oracle: C = max(0, 2λ_max − 1)
        for i in 0..=5 {
            let p = 0.2 * i as f64;
            let gamma = QuantumChannel::depolarizing(2, p).unwrap().choi().unwrap();
            let got = concurrence(gamma.density()).unwrap();
            let lmax = gamma.density().spectrum().first().copied().unwrap();
            let oracle = (2.0 * lmax - 1.0).max(0.0);
            assert_relative_eq!(got, oracle, epsilon = 1e-10);
            assert_relative_eq!(got, (1.0f64 - 1.5 * p).max(0.0), epsilon = 1e-10);
        }
    }

    #[test]
    fn concurrence_amplitude_damping_choi() {
        for i in 1..=9 {
            let g = 0.1 * i as f64;
            let gamma = QuantumChannel::amplitude_damping(g).unwrap().choi().unwrap();
            assert_relative_eq!(
                concurrence(gamma.density()).unwrap(),
                (1.0 - g).sqrt(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn concurrence_pure_shortcut_matches_wootters() {
        for seed in 0..20u64 {
            let psi = random_pure((2, 2), seed);
            let full = concurrence(&psi.to_density()).unwrap();
            let fast = pure_concurrence_two_qubit(psi.amplitudes());
            assert_relative_eq!(full, fast, epsilon = 1e-8);
        }
    }

    #[test]
    fn concurrence_local_unitary_invariance() {
        let mut rng = rng_from_seed(77);
        for seed in 0..50u64 {
            let rho = random_density((2, 2), 3, seed).unwrap();
            let u = qmath::haar_unitary(2, &mut rng);
            let v = qmath::haar_unitary(2, &mut rng);
            let uv = kron(&u, &v);
            let rotated = DensityMatrix::new(&uv * rho.matrix() * uv.adjoint(), (2, 2)).unwrap();
            assert_relative_eq!(
                concurrence(&rho).unwrap(),
                concurrence(&rotated).unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn concurrence_factorization_sample() {
        // C((Λ⊗1)ρ) ≤ C(Γ)·C(ρ); the full 1000-pair run lives in acceptance
        for seed in 0..100u64 {
            let ch = QuantumChannel::random_cptp(2, 2, seed).unwrap();
            let rho = random_density((2, 2), 4, seed + 5000).unwrap();
            let out = ch.apply_on_a(&rho).unwrap();
            let c_gamma = concurrence(ch.choi().unwrap().density()).unwrap();
            let lhs = concurrence(&out).unwrap();
            let rhs = c_gamma * concurrence(&rho).unwrap();
            assert!(lhs <= rhs + 1e-9, "seed {seed}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn slocc_average_concurrence_monotone() {
        let mut rng = rng_from_seed(123);
        for seed in 0..50u64 {
            let rho = random_density((2, 2), 2, seed).unwrap();
            let c_in = concurrence(&rho).unwrap();
            // random product instrument {M_l ⊗ N_g}
            let ma = QuantumChannel::random_cptp_with(2, 2, &mut rng).unwrap();
            let nb = QuantumChannel::random_cptp_with(2, 2, &mut rng).unwrap();
            let mut avg = 0.0;
            for m in ma.kraus() {
                for n in nb.kraus() {
                    let op = kron(m, n);
                    let out = &op * rho.matrix() * op.adjoint();
                    let p = out.trace().re;
                    if p > 1e-12 {
                        let normd = DensityMatrix::new(out.unscale(p), (2, 2)).unwrap();
                        avg += p * concurrence(&normd).unwrap();
                    }
                }
            }
            assert!(avg <= c_in + 1e-9, "seed {seed}: {avg} > {c_in}");
        }
    }

    #[test]
    fn eof_pure_cases() {
        assert_relative_eq!(eof_pure(&max_entangled(2)), 1.0, epsilon = 1e-10);
        assert!(eof_pure(&product_state()) < 1e-10);
        for k in 2..=4 {
            assert_relative_eq!(
                eof_pure(&max_entangled(k)),
                (k as f64).log2(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn eof_two_qubit_limits() {
        assert_relative_eq!(
            eof_two_qubit(&max_entangled(2).to_density()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert!(eof_two_qubit(&product_state().to_density()).unwrap() < 1e-8);
    }

    #[test]
    fn convex_roof_pure_input_is_exact() {
        let psi = random_pure((2, 3), 9);
        let res = eof_convex_roof_upper(&psi.to_density(), ConvexRoofParams::default()).unwrap();
        assert_relative_eq!(res.value, eof_pure(&psi), epsilon = 1e-9);
        assert_eq!(res.ensemble.len(), 1);
    }

    #[test]
    fn convex_roof_classical_classical_is_zero() {
        // Σ p_i |ii⟩⟨ii| is separable
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = cr(0.3);
        m[(3, 3)] = cr(0.7);
        let rho = DensityMatrix::new(m, (2, 2)).unwrap();
        let res = eof_convex_roof_upper(
            &rho,
            ConvexRoofParams {
                restarts: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.value < 1e-6, "value {}", res.value);
    }

    #[test]
    fn convex_roof_matches_wootters_on_rank2() {
        let mut worst: f64 = 0.0;
        for seed in 0..10u64 {
            let rho = random_density((2, 2), 2, seed).unwrap();
            let exact = eof_two_qubit(&rho).unwrap();
            let upper = eof_convex_roof_upper(
                &rho,
                ConvexRoofParams {
                    ensemble_size: 4,
                    restarts: 20,
                    iterations: 200,
                    seed: seed + 1,
                },
            )
            .unwrap()
            .value;
            assert!(upper >= exact - 1e-6, "upper {upper} below exact {exact}");
            worst = worst.max(upper - exact);
        }
        assert!(worst < 1e-3, "worst convex-roof excess {worst}");
    }

    #[test]
    fn convex_roof_werner_mixture() {
        let rho = isotropic(0.8);
        let exact = eof_two_qubit(&rho).unwrap();
        let upper = eof_convex_roof_upper(
            &rho,
            ConvexRoofParams {
                ensemble_size: 6,
                restarts: 24,
                iterations: 250,
                seed: 2,
            },
        )
        .unwrap()
        .value;
        assert!(upper >= exact - 1e-6);
        assert!(upper - exact < 1e-3, "upper {upper} vs exact {exact}");
    }

    #[test]
    fn gk_maximally_entangled_is_one() {
        for k in 2..=5 {
            assert_relative_eq!(
                gk_concurrence(&max_entangled(k), k).unwrap(),
                1.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn gk_product_state_is_zero() {
        assert_eq!(gk_concurrence(&product_state(), 2).unwrap(), 0.0);
    }

    #[test]
    fn gk_fixed_spectrum_value() {
        // λ = (0.5, 0.3, 0.2), k = 3 → 3·(0.03)^{1/3}
        let lambdas = [0.5f64, 0.3, 0.2];
        let mut amps = CVector::zeros(9);
        for (i, &l) in lambdas.iter().enumerate() {
            amps[i * 3 + i] = cr(l.sqrt());
        }
        let psi = PureState::new(amps, (3, 3)).unwrap();
        let expect = 3.0 * 0.03f64.powf(1.0 / 3.0);
        assert_relative_eq!(gk_concurrence(&psi, 3).unwrap(), expect, epsilon = 1e-10);
        assert_relative_eq!(expect, 0.932170, epsilon = 1e-6);
    }

    #[test]
    fn gk_rejects_out_of_range_k() {
        assert!(gk_concurrence(&max_entangled(2), 3).is_err());
        assert!(gk_concurrence(&max_entangled(2), 1).is_err());
    }

    #[test]
    fn gk_unnormalized_consistency_and_homogeneity() {
        let mut rng = rng_from_seed(55);
        for _ in 0..20 {
            let psi = random_pure_of_rank((3, 3), 3, 0.05, &mut rng);
            let a = gk_unnormalized(psi.amplitudes(), (3, 3), 3);
            let b = gk_concurrence(&psi, 3).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
            let factor = c(1.2, -0.7);
            let scaled = psi.amplitudes().scale(factor.norm());
            assert_relative_eq!(
                gk_unnormalized(&scaled, (3, 3), 3),
                factor.norm_sqr() * a,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn gk_multiplicativity_on_aligned_supports() {
        // G_k[(M⊗1)ψ] = G_k[(M⊗1)φ_k⁺]·G_k(ψ) with dA = k so the Schmidt
        // support of ψ matches the support of φ_k⁺
        let mut rng = rng_from_seed(202);
        for k in 2..=4usize {
            for _ in 0..40 {
                let db = k + 1;
                let psi = random_pure_of_rank((k, db), k, 0.02, &mut rng);
                let m = CMatrix::from_fn(k, k, |_, _| qmath::gaussian_c64(&mut rng));
                let big = kron(&m, &identity(db));
                let lhs = gk_unnormalized(&(&big * psi.amplitudes()), (k, db), k);
                let phi = max_entangled(k);
                let bigk = kron(&m, &identity(k));
                let rhs = gk_unnormalized(&(&bigk * phi.amplitudes()), (k, k), k)
                    * gk_concurrence(&psi, k).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn k_fidelity_basic_cases() {
        let psi = random_pure((3, 3), 4);
        let r = schmidt_rank(&psi, 1e-12);
        assert_relative_eq!(
            k_schmidt_fidelity_pure(&psi, r).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            k_schmidt_fidelity_pure(&max_entangled(3), 2).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn k_fidelity_fixed_spectrum() {
        let lambdas = [0.5f64, 0.3, 0.2];
        let mut amps = CVector::zeros(9);
        for (i, &l) in lambdas.iter().enumerate() {
            amps[i * 3 + i] = cr(l.sqrt());
        }
        let psi = PureState::new(amps, (3, 3)).unwrap();
        assert_relative_eq!(
            k_schmidt_fidelity_pure(&psi, 2).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn k_fidelity_rejects_bad_k() {
        assert!(k_schmidt_fidelity_pure(&max_entangled(2), 0).is_err());
        assert!(k_schmidt_fidelity_pure(&max_entangled(2), 3).is_err());
    }

    #[test]
    fn mixed_k_fidelity_trivial_and_product_cases() {
        let psi = random_pure((2, 2), 6);
        let rho = psi.to_density();
        let lower = k_schmidt_fidelity_mixed_lower(&rho, &[(1.0, psi.clone())], 1).unwrap();
        assert_relative_eq!(
            lower,
            k_schmidt_fidelity_pure(&psi, 1).unwrap(),
            epsilon = 1e-12
        );
        // ensemble of product states has F₁ = 1
        let p00 = PureState::new(kron_vec(&basis_qubit(0), &basis_qubit(0)), (2, 2)).unwrap();
        let p11 = PureState::new(kron_vec(&basis_qubit(1), &basis_qubit(1)), (2, 2)).unwrap();
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = cr(0.4);
        m[(3, 3)] = cr(0.6);
        let cc = DensityMatrix::new(m, (2, 2)).unwrap();
        let lower = k_schmidt_fidelity_mixed_lower(&cc, &[(0.4, p00), (0.6, p11)], 1).unwrap();
        assert_relative_eq!(lower, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mixed_k_fidelity_rejects_wrong_ensemble() {
        let rho = random_density((2, 2), 2, 1).unwrap();
        let psi = random_pure((2, 2), 2);
        assert!(matches!(
            k_schmidt_fidelity_mixed_lower(&rho, &[(1.0, psi)], 1),
            Err(Error::EnsembleMismatch(_))
        ));
    }

    #[test]
    fn mixed_k_fidelity_bounded_by_constructed_sigma() {
        // the optimal rank-k truncations assembled into σ must achieve at
        // least the ensemble average (Uhlmann with the trivial unitary)
        let mut rng = rng_from_seed(808);
        for _ in 0..10 {
            let k = 2usize;
            let psi1 = random_pure_of_rank((3, 3), 3, 0.05, &mut rng);
            let psi2 = random_pure_of_rank((3, 3), 3, 0.05, &mut rng);
            let (p1, p2) = (0.35, 0.65);
            let m = psi1.projector().scale(p1) + psi2.projector().scale(p2);
            let rho = DensityMatrix::new(m, (3, 3)).unwrap();
            let ensemble = vec![(p1, psi1.clone()), (p2, psi2.clone())];
            let bound = k_schmidt_fidelity_mixed_lower(&rho, &ensemble, k).unwrap();

            // σ built from the truncated, renormalized Schmidt expansions
            let mut t = 0.0;
            let mut parts = Vec::new();
            for (p, psi) in &ensemble {
                let dec = crate::states::schmidt(psi);
                let mut amps = CVector::zeros(9);
                let norm: f64 = dec.coefficients.iter().take(k).sum();
                for i in 0..k {
                    amps += kron_vec(&dec.basis_a[i], &dec.basis_b[i])
                        .scale((dec.coefficients[i] / norm).sqrt());
                }
                let fk = k_schmidt_fidelity_pure(psi, k).unwrap();
                t += p * fk;
                parts.push((p * fk, amps));
            }
            let mut sigma = CMatrix::zeros(9, 9);
            for (q, amps) in &parts {
                sigma += (amps * amps.adjoint()).scale(q / t);
            }
            let f = qmath::fidelity(rho.matrix(), &sigma).unwrap();
            assert!(
                bound <= f + 1e-9,
                "ensemble bound {bound} exceeds achieved fidelity {f}"
            );
        }
    }

    #[test]
    fn negativity_cases() {
        assert_relative_eq!(
            negativity(&max_entangled(2).to_density()).unwrap(),
            0.5,
            epsilon = 1e-10
        );
        assert!(negativity(&product_state().to_density()).unwrap() < 1e-10);
        // isotropic family (1−p)φ⁺ + p·I/4 is entangled iff p < 2/3
        for i in 0..=10 {
            let p = 0.1 * i as f64;
            let n = negativity(&isotropic(1.0 - p)).unwrap();
            if p < 2.0 / 3.0 - 1e-9 {
                assert!(n > 1e-9, "p = {p}");
            } else {
                assert!(n < 1e-9, "p = {p}");
            }
        }
    }

    #[test]
    fn sep_lower_cases() {
        assert!(sep_distance_lower(&product_state().to_density()).unwrap() < 1e-10);
        assert_relative_eq!(
            sep_distance_lower(&max_entangled(2).to_density()).unwrap(),
            0.5,
            epsilon = 1e-10
        );
    }

    #[test]
    fn sep_upper_product_state_is_tiny() {
        let rho = product_state().to_density();
        let up = sep_distance_upper(
            &rho,
            SepUpperParams {
                terms: 4,
                restarts: 2,
                iterations: 40,
                seed: 0,
            },
        )
        .unwrap();
        assert!(up < 1e-6, "upper bound {up}");
    }

    #[test]
    fn sep_upper_respects_lower_on_bell() {
        let rho = max_entangled(2).to_density();
        let up = sep_distance_upper(
            &rho,
            SepUpperParams {
                terms: 8,
                restarts: 4,
                iterations: 60,
                seed: 1,
            },
        )
        .unwrap();
        assert!(
            up >= 0.5 - 1e-9,
            "upper bound {up} below the certified lower bound"
        );
    }

    #[test]
    fn sep_upper_nearly_separable_budget() {
        let prod = product_state().to_density();
        let m = prod.matrix().scale(0.99) + max_entangled(2).projector().scale(0.01);
        let rho = DensityMatrix::new(m, (2, 2)).unwrap();
        let up = sep_distance_upper(
            &rho,
            SepUpperParams {
                terms: 8,
                restarts: 4,
                iterations: 80,
                seed: 3,
            },
        )
        .unwrap();
        assert!(up <= 0.02, "upper bound {up}");
    }

    #[test]
    fn sep_bounds_ordered_on_random_states() {
        for seed in 0..200u64 {
            let rho = random_density((2, 2), 4, seed).unwrap();
            let lo = sep_distance_lower(&rho).unwrap();
            let up = sep_distance_upper(
                &rho,
                SepUpperParams {
                    terms: 4,
                    restarts: 2,
                    iterations: 25,
                    seed,
                },
            )
            .unwrap();
            assert!(lo <= up + 1e-9, "seed {seed}: lower {lo} > upper {up}");
        }
    }

    #[test]
    fn kappa_identity_channel_is_one() {
        for k in 2..=3 {
            let ch = QuantumChannel::identity(3);
            assert_relative_eq!(
                kappa_for_decomposition(&ch, k).unwrap(),
                1.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn kappa_depolarizing_canonical() {
        for p in [0.1, 0.3, 0.7] {
            let ch = QuantumChannel::depolarizing(2, p).unwrap();
            assert_relative_eq!(
                kappa_for_decomposition(&ch, 2).unwrap(),
                1.0 - p,
                epsilon = 1e-10
            );
        }
        let ch = QuantumChannel::depolarizing(3, 0.4).unwrap();
        for k in 2..=3 {
            assert_relative_eq!(
                kappa_for_decomposition(&ch, k).unwrap(),
                0.6,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn kappa_parallel_depolarizing_bounded() {
        let p = 0.3;
        for m in 1..=2usize {
            let par = QuantumChannel::depolarizing(2, p)
                .unwrap()
                .parallel(m)
                .unwrap();
            let kappa = kappa_for_decomposition(&par, 2).unwrap();
            assert!(
                kappa <= 1.0 - p.powi(m as i32) + 1e-9,
                "m = {m}: κ = {kappa}"
            );
        }
    }

    #[test]
    fn separability_bound_values() {
        assert_relative_eq!(
            separability_bound(0.5, 0, 2).unwrap(),
            4.0 * (2f64.sqrt() - 1.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            separability_bound(0.8, 10, 2).unwrap(),
            4.0 * 0.8f64.powi(5) * (2f64.sqrt() - 1.0),
            epsilon = 1e-12
        );
        // 4·0.5^{n/2}(√2−1) drops below 1e-6 before n reaches 43
        assert!(separability_bound(0.5, 43, 2).unwrap() < 1e-6);
        assert!(separability_bound(0.5, 41, 2).unwrap() >= 1e-6);
        // monotone decreasing in n
        let mut prev = f64::INFINITY;
        for n in 0..20 {
            let b = separability_bound(0.37, n, 3).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!(separability_bound(1.0, 1, 2).is_err());
        assert!(separability_bound(0.0, 1, 2).is_err());
    }

    #[test]
    fn min_parallel_channels_laws() {
        // doubling n adds exactly ln2/γ
        let gamma = -(0.3f64.ln());
        let a = min_parallel_channels(10, 0.3, 2, 0.4).unwrap();
        let b = min_parallel_channels(20, 0.3, 2, 0.4).unwrap();
        assert_relative_eq!(b - a, 2f64.ln() / gamma, epsilon = 1e-12);
        // γ = 1, k = 2, β = 1/2 collapses to ln n
        let v = min_parallel_channels(7, (-1.0f64).exp(), 2, 0.5).unwrap();
        assert_relative_eq!(v, 7f64.ln(), epsilon = 1e-12);
        // leading term ln 100 / ln 10 = 2
        let v = min_parallel_channels(100, 0.1, 2, 0.5).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        assert!(min_parallel_channels(1, 0.5, 2, 0.5).is_err());
        assert!(min_parallel_channels(10, 1.0, 2, 0.5).is_err());
    }
}
