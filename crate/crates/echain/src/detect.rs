//! Heuristic detection of correctable subspaces: a subspace H_c is
//! correctable when some recovery channel R satisfies R∘Λ[ψ] = ψ for every
//! |ψ⟩ ∈ H_c, equivalently when the Knill-Laflamme data
//! P K_i†K_j P = c_ij P holds on its projector P.
//!
//! A successful search is a certificate (small residual plus a verified
//! recovery channel); a failed search is *not* a proof of absence, only the
//! best residual found. The E_f fixed-point search supplies an independent
//! signal: a near-zero entanglement-preservation gap on some entangled pure
//! state is evidence for a correctable subspace, a large floor across
//! restarts is heuristic evidence against. The two signals are reported
//! side by side without forcing agreement.

use crate::channels::QuantumChannel;
use crate::measures::{eof_mixed_upper_auto, eof_pure};
use crate::opt::{coordinate_descent, RefineCfg};
use crate::qmath::{
    self, cr, hermitian_eigensystem_with, identity, matrix_sqrt_psd, trace_norm, CMatrix,
    CVector, C64,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::states::{random_pure_with, DensityMatrix, PureState};
use crate::tol::DEFAULT;
use crate::{Error, Result};
use serde::Serialize;

/// A candidate correctable subspace: orthonormal basis, its Knill-Laflamme
/// residual, and the constructed recovery channel when certified.
#[derive(Debug, Clone)]
pub struct SubspaceCandidate {
    pub basis: Vec<CVector>,
    pub kl_residual: f64,
    pub recovery: Option<QuantumChannel>,
}

fn check_orthonormal(basis: &[CVector], d: usize) -> Result<()> {
    if basis.len() < 2 {
        return Err(Error::InvalidParam("subspace needs dimension >= 2".into()));
    }
    for (i, u) in basis.iter().enumerate() {
        if u.len() != d {
            return Err(Error::DimMismatch(format!(
                "basis vector has length {}, channel input dimension is {d}",
                u.len()
            )));
        }
        for (j, v) in basis.iter().enumerate() {
            let overlap = u.dotc(v);
            let expect = if i == j { 1.0 } else { 0.0 };
            if (overlap - cr(expect)).norm() > 1e-10 {
                return Err(Error::InvalidParam(format!(
                    "basis is not orthonormal: |<{i}|{j}>| deviates by {:.3e}",
                    (overlap - cr(expect)).norm()
                )));
            }
        }
    }
    Ok(())
}

fn frame_matrix(basis: &[CVector], d: usize) -> CMatrix {
    let mut v = CMatrix::zeros(d, basis.len());
    for (j, b) in basis.iter().enumerate() {
        v.set_column(j, b);
    }
    v
}

/// Knill-Laflamme residual of a subspace: with P its projector,
/// max over (i, j) of ‖P K_i†K_j P − c_ij P‖₁ where
/// c_ij = Tr(P K_i†K_j P)/Tr(P). Zero iff the subspace is correctable.
pub fn kl_residual(ch: &QuantumChannel, basis: &[CVector]) -> Result<f64> {
    check_orthonormal(basis, ch.d_in())?;
    let v = frame_matrix(basis, ch.d_in());
    Ok(kl_residual_of_frame(ch, &v))
}

/// Trace-norm residual in the frame basis: ‖V†K_i†K_jV − c_ij I_s‖₁ equals
/// the subspace-restricted residual because V is an isometry onto span(P).
fn kl_residual_of_frame(ch: &QuantumChannel, v: &CMatrix) -> f64 {
    let s = v.ncols();
    let blocks: Vec<CMatrix> = ch.kraus().iter().map(|k| k * v).collect();
    let mut worst: f64 = 0.0;
    for bi in &blocks {
        for bj in &blocks {
            let g = bi.adjoint() * bj;
            let c = g.trace() / cr(s as f64);
            let dev = &g - identity(s) * c;
            worst = worst.max(trace_norm(&dev));
        }
    }
    worst
}

/// Frobenius-squared variant of the residual: same zero set, smooth, cheap;
/// used as the search objective.
fn kl_surrogate_of_frame(ch: &QuantumChannel, v: &CMatrix) -> f64 {
    let s = v.ncols();
    let blocks: Vec<CMatrix> = ch.kraus().iter().map(|k| k * v).collect();
    let mut total = 0.0;
    for bi in &blocks {
        for bj in &blocks {
            let g = bi.adjoint() * bj;
            let c = g.trace() / cr(s as f64);
            let dev = &g - identity(s) * c;
            total += dev.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    total
}

/// Search knobs.
#[derive(Debug, Clone, Copy)]
pub struct SearchParams {
    /// Subspace dimension; 2 is the minimal entanglement-preserving case.
    pub dim: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            dim: 2,
            restarts: 50,
            iterations: 300,
            seed: 0,
        }
    }
}

/// Search outcome: a certificate when the best residual beats the
/// certification tolerance, otherwise just the best residual found.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub candidate: Option<SubspaceCandidate>,
    pub best_residual: f64,
}

/// Minimize the Knill-Laflamme residual over dim-frames (the first `dim`
/// columns of a unitary), by coordinate-wise random perturbation from
/// structured and random restarts. Success returns a certificate with a
/// verified recovery channel; failure reports the best residual and does
/// not certify absence.
pub fn search_correctable(ch: &QuantumChannel, params: SearchParams) -> Result<SearchOutcome> {
    let d = ch.d_in();
    if params.dim < 2 || params.dim > d {
        return Err(Error::InvalidParam(format!(
            "subspace dimension {} outside 2..={d}",
            params.dim
        )));
    }
    let s = params.dim;

    let unpack = |p: &[f64]| -> CMatrix {
        let raw = CMatrix::from_fn(d, s, |i, j| C64::new(p[2 * (i * s + j)], p[2 * (i * s + j) + 1]));
        qmath::orthonormalize_columns(&raw)
    };
    let pack = |v: &CMatrix| -> Vec<f64> {
        let mut p = vec![0.0; 2 * d * s];
        for i in 0..d {
            for j in 0..s {
                p[2 * (i * s + j)] = v[(i, j)].re;
                p[2 * (i * s + j) + 1] = v[(i, j)].im;
            }
        }
        p
    };

    // structured starts: eigenframes of random Hermitian combinations of
    // the Kraus Gram operators K_i†K_j line up with any block structure
    let mut starts: Vec<Vec<f64>> = Vec::new();
    {
        let mut rng = rng_from_seed(derive_seed(params.seed, 0xabcd));
        let grams: Vec<CMatrix> = ch
            .kraus()
            .iter()
            .flat_map(|ki| ch.kraus().iter().map(move |kj| ki.adjoint() * kj))
            .collect();
        for _ in 0..3 {
            let mut h = CMatrix::zeros(d, d);
            for g in &grams {
                let w = qmath::gaussian_c64(&mut rng);
                h += g * w + (g * w).adjoint();
            }
            if let Ok((_, vecs)) = hermitian_eigensystem_with(&h, &DEFAULT) {
                // every contiguous eigenvector window is a candidate frame
                for lo in 0..=(d - s) {
                    starts.push(pack(&vecs.columns(lo, s).into_owned()));
                }
            }
        }
    }

    let mut best_residual = f64::INFINITY;
    let mut best_frame: Option<CMatrix> = None;
    let total_restarts = params.restarts.max(1);
    for r in 0..total_restarts {
        let mut rng = rng_from_seed(derive_seed(params.seed, r as u64));
        let mut p = if r < starts.len() {
            starts[r].clone()
        } else {
            (0..2 * d * s).map(|_| qmath::gaussian_c64(&mut rng).re).collect()
        };
        let cfg = RefineCfg {
            iterations: params.iterations,
            init_step: 0.3,
            min_step: 1e-13,
        };
        coordinate_descent(&mut p, |x| kl_surrogate_of_frame(ch, &unpack(x)), &cfg, &mut rng);
        let frame = unpack(&p);
        let residual = kl_residual_of_frame(ch, &frame);
        if residual < best_residual {
            best_residual = residual;
            best_frame = Some(frame);
        }
        if best_residual < DEFAULT.cert_residual * 1e-2 {
            break;
        }
    }

    let frame = best_frame.expect("at least one restart ran");
    if best_residual < DEFAULT.cert_residual {
        let basis: Vec<CVector> = (0..s).map(|j| frame.column(j).into_owned()).collect();
        let recovery = build_recovery(ch, &basis)?;
        verify_recovery(ch, &recovery, &basis, 20, params.seed)?;
        Ok(SearchOutcome {
            candidate: Some(SubspaceCandidate {
                basis,
                kl_residual: best_residual,
                recovery: Some(recovery),
            }),
            best_residual,
        })
    } else {
        Ok(SearchOutcome {
            candidate: None,
            best_residual,
        })
    }
}

/// Build the recovery channel from the Knill-Laflamme data of a (near-)
/// correctable subspace: diagonalize the Gram matrix c_ij, polar-decompose
/// each rotated error block into an isometry W_k from the code, and invert
/// with Kraus set {P W_k†} completed to trace preserving.
pub fn build_recovery(ch: &QuantumChannel, basis: &[CVector]) -> Result<QuantumChannel> {
    let d_in = ch.d_in();
    let d_out = ch.d_out();
    check_orthonormal(basis, d_in)?;
    let residual = kl_residual(ch, basis)?;
    if residual >= DEFAULT.cert_residual {
        return Err(Error::InvalidParam(format!(
            "subspace residual {residual:.3e} too large to build a recovery"
        )));
    }
    let s = basis.len();
    let v = frame_matrix(basis, d_in);
    let kraus_count = ch.kraus().len();
    // Gram matrix α_ij = Tr(V†K_i†K_jV)/s
    let mut alpha = CMatrix::zeros(kraus_count, kraus_count);
    for (i, ki) in ch.kraus().iter().enumerate() {
        for (j, kj) in ch.kraus().iter().enumerate() {
            alpha[(i, j)] = ((ki * &v).adjoint() * (kj * &v)).trace() / cr(s as f64);
        }
    }
    let (dvals, u) = hermitian_eigensystem_with(&alpha, &DEFAULT)?;
    // rotated Kraus J_k = Σ_i U_ik K_i satisfy V†J_k†J_lV = δ_kl d_k I_s
    let mut recovery_kraus: Vec<CMatrix> = Vec::new();
    let mut image_sum = CMatrix::zeros(d_out, d_out);
    for (k, &dk) in dvals.iter().enumerate() {
        if dk < 1e-12 {
            continue;
        }
        let mut jk = CMatrix::zeros(d_out, d_in);
        for (i, ki) in ch.kraus().iter().enumerate() {
            jk += ki * u[(i, k)];
        }
        // isometry from the code space into the k-th error sector
        let wk = (jk * &v).unscale(dk.sqrt());
        // map the sector back onto the code basis
        let rk = &v * wk.adjoint();
        image_sum += &wk * wk.adjoint();
        recovery_kraus.push(rk);
    }
    // complete to a channel on the orthogonal complement of the images
    let leftover = identity(d_out) - image_sum;
    let (vals, _) = hermitian_eigensystem_with(&leftover, &DEFAULT)?;
    if vals.iter().any(|&x| x > 1e-10) {
        let root = matrix_sqrt_psd(&leftover, &DEFAULT)?;
        if d_out == d_in {
            recovery_kraus.push(root);
        } else {
            return Err(Error::DimMismatch(
                "recovery completion needs a square channel".into(),
            ));
        }
    }
    QuantumChannel::new(recovery_kraus, true)
}

fn verify_recovery(
    ch: &QuantumChannel,
    recovery: &QuantumChannel,
    basis: &[CVector],
    samples: usize,
    seed: u64,
) -> Result<()> {
    let mut rng = rng_from_seed(derive_seed(seed, 0x7ec0));
    let s = basis.len();
    for _ in 0..samples {
        // random state inside the subspace
        let coeff = qmath::gaussian_vector(s, &mut rng);
        let coeff = coeff.unscale(coeff.norm());
        let mut psi = CVector::zeros(ch.d_in());
        for (j, b) in basis.iter().enumerate() {
            psi += b * coeff[j];
        }
        let rho = DensityMatrix::single(&psi * psi.adjoint())?;
        let out = recovery.apply(&ch.apply(&rho)?)?;
        let err = qmath::trace_norm(&(out.matrix() - rho.matrix()));
        if err > DEFAULT.recovery {
            return Err(Error::Numerical(format!(
                "recovery round-trip error {err:.3e} exceeds tolerance"
            )));
        }
    }
    Ok(())
}

/// Result of the entanglement-preservation fixed-point search.
#[derive(Debug, Clone)]
pub struct FixedPointSearch {
    pub best_psi: PureState,
    /// E_f(ψ) − (upper bound on E_f((Λ⊗1)ψ)): a lower bound on the true
    /// preservation gap up to optimizer slack.
    pub gap: f64,
    /// Evidence that entanglement can survive asymptotically.
    pub entangled: bool,
}

/// Minimize gap(ψ) = E_f(ψ) − E_f_upper((Λ⊗1)[ψ]) over pure states with
/// E_f(ψ) ≥ 0.1 bits. During the search the output E_f is bounded by the
/// Kraus-branch ensemble average Σ q_i E_f(φ_i) (a valid convex-roof upper
/// bound that is exact on fixed points); the reported gap re-evaluates the
/// best candidate with the convex-roof optimizer (exact closed form on
/// 2⊗2). The upper-bound direction keeps small gaps conservative evidence.
pub fn eof_fixed_point_search(
    ch: &QuantumChannel,
    restarts: usize,
    seed: u64,
) -> Result<FixedPointSearch> {
    if !ch.is_trace_preserving() || !ch.is_square() {
        return Err(Error::KrausContract(0.0));
    }
    let d = ch.d_in();
    let dims = (d, d);
    let eye = identity(d);
    let big_ops: Vec<CMatrix> = ch.kraus().iter().map(|k| qmath::kron(k, &eye)).collect();

    // surrogate: E_f(ψ) − Σ q_i E_f(φ_i) over the Kraus branches; ≥ 0 by
    // LOCC monotonicity, = 0 exactly on preserved states
    let branch_gap = |amps: &CVector| -> f64 {
        let ef_in = crate::measures::ef_pure_amps(amps, dims);
        let mut avg = 0.0;
        for op in &big_ops {
            let branch = op * amps;
            let q = branch.norm().powi(2);
            if q > 1e-14 {
                avg += q * crate::measures::ef_pure_amps(&branch.unscale(q.sqrt()), dims);
            }
        }
        ef_in - avg
    };

    let dim = d * d;
    let unpack = |p: &[f64]| -> CVector {
        let v = CVector::from_fn(dim, |i, _| C64::new(p[2 * i], p[2 * i + 1]));
        let n = v.norm();
        if n < 1e-12 {
            CVector::from_fn(dim, |i, _| if i == 0 { cr(1.0) } else { C64::ZERO })
        } else {
            v.unscale(n)
        }
    };
    // penalized objective keeps the search away from nearly-product states
    let objective = |p: &[f64]| -> f64 {
        let amps = unpack(p);
        let ef_in = crate::measures::ef_pure_amps(&amps, dims);
        let penalty = (0.1 - ef_in).max(0.0) * 10.0;
        branch_gap(&amps) + penalty
    };

    let mut best: Option<(f64, CVector)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(seed, r as u64));
        let mut p: Vec<f64> = if r == 0 {
            // maximally entangled start
            let phi = crate::states::max_entangled(d);
            let mut v = vec![0.0; 2 * dim];
            for i in 0..dim {
                v[2 * i] = phi.amplitudes()[i].re;
                v[2 * i + 1] = phi.amplitudes()[i].im;
            }
            v
        } else {
            let psi = random_pure_with(dims, &mut rng);
            let mut v = vec![0.0; 2 * dim];
            for i in 0..dim {
                v[2 * i] = psi.amplitudes()[i].re;
                v[2 * i + 1] = psi.amplitudes()[i].im;
            }
            v
        };
        let cfg = RefineCfg {
            iterations: 150,
            init_step: 0.2,
            min_step: 1e-12,
        };
        coordinate_descent(&mut p, objective, &cfg, &mut rng);
        let amps = unpack(&p);
        let ef_in = crate::measures::ef_pure_amps(&amps, dims);
        if ef_in < 0.1 {
            continue;
        }
        let g = branch_gap(&amps);
        if best.as_ref().is_none_or(|(bg, _)| g < *bg) {
            best = Some((g, amps));
        }
    }
    let (_, amps) = best.ok_or_else(|| {
        Error::Numerical("no restart produced a state with E_f >= 0.1 bits".into())
    })?;
    let psi = PureState::new(amps, dims)?;
    // final report: convex-roof upper bound on the actual output state
    let out = ch.apply_on_a(&psi.to_density())?;
    let ef_out_upper = eof_mixed_upper_auto(&out, derive_seed(seed, 0xfee1))?;
    let gap = eof_pure(&psi) - ef_out_upper;
    Ok(FixedPointSearch {
        best_psi: psi,
        gap,
        entangled: gap < 1e-4,
    })
}

/// JSON-facing detection report combining both signals.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    /// "certified_present" or "not_found".
    pub status: String,
    pub best_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<crate::io::MatrixRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_verified: Option<bool>,
    pub fixed_point_gap: f64,
}

/// Run both detectors and assemble the report.
pub fn detection_report(ch: &QuantumChannel, params: SearchParams) -> Result<DetectionReport> {
    let outcome = search_correctable(ch, params)?;
    let fp = eof_fixed_point_search(ch, params.restarts, derive_seed(params.seed, 0xf1ed))?;
    match outcome.candidate {
        Some(cand) => Ok(DetectionReport {
            status: "certified_present".into(),
            best_residual: outcome.best_residual,
            basis: Some(
                cand.basis
                    .iter()
                    .map(|b| {
                        crate::io::MatrixRecord::from_matrix(&CMatrix::from_fn(
                            b.len(),
                            1,
                            |i, _| b[i],
                        ))
                    })
                    .collect(),
            ),
            recovery_verified: Some(cand.recovery.is_some()),
            fixed_point_gap: fp.gap,
        }),
        None => Ok(DetectionReport {
            status: "not_found".into(),
            best_residual: outcome.best_residual,
            basis: None,
            recovery_verified: None,
            fixed_point_gap: fp.gap,
        }),
    }
}

/// Identity on span{|0⟩, |1⟩} ⊕ depolarizing(p) on span{|2⟩, |3⟩}: the
/// canonical channel with a correctable subspace, used by tests and docs.
pub fn block_identity_depolarizing(p: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam(format!("p = {p} outside [0, 1]")));
    }
    let mut k0 = identity(4);
    k0[(2, 2)] = cr((1.0 - p).sqrt());
    k0[(3, 3)] = cr((1.0 - p).sqrt());
    let mut kraus = vec![k0];
    let w = cr((p / 2.0).sqrt());
    for a in 2..4usize {
        for b in 2..4usize {
            let mut k = CMatrix::zeros(4, 4);
            k[(a, b)] = w;
            kraus.push(k);
        }
    }
    QuantumChannel::new(kraus, true)
}
