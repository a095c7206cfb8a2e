//! Dense complex linear algebra for small operators (dimension ≤ [`MAX_DIM`]):
//! tensor products, partial trace/transpose, spectral decompositions, norms,
//! fidelity. Everything is a pure function of value-semantic inputs.
//!
//! Logarithms are base 2 throughout. Spectral routines symmetrize their input
//! when the anti-Hermitian residual is below `tol.herm` and reject it
//! otherwise; eigenvalues in `[tol.eig_floor, 0)` are treated as rounding
//! noise and clipped to zero, anything below the floor is an error.

use crate::tol::{Tolerances, DEFAULT};
use crate::{Error, Result};
use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

pub type C64 = num_complex::Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Hard cap on any system dimension handled by the dense kernel.
pub const MAX_DIM: usize = 64;

/// Which tensor factor of a bipartite operator an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn ensure_dim_cap(d: usize) -> Result<()> {
    if d > MAX_DIM {
        Err(Error::DimCap(d))
    } else {
        Ok(())
    }
}

/// Kronecker product, blocks ordered so that basis index (i, k) maps to
/// i·rows(b) + k.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(ms: &[&CMatrix]) -> CMatrix {
    assert!(!ms.is_empty(), "kron_all needs at least one factor");
    let mut out = ms[0].clone();
    for m in &ms[1..] {
        out = out.kronecker(m);
    }
    out
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    max_abs(&(a - b))
}

fn check_bipartite(m: &CMatrix, dims: (usize, usize)) -> Result<()> {
    let d = dims.0 * dims.1;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimMismatch(format!(
            "matrix is {}x{} but subsystem dims ({}, {}) require {}x{}",
            m.nrows(),
            m.ncols(),
            dims.0,
            dims.1,
            d,
            d
        )));
    }
    Ok(())
}

/// Trace over the subsystem that is *not* kept.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    check_bipartite(m, dims)?;
    let (da, db) = dims;
    match keep {
        Subsystem::A => {
            let mut out = CMatrix::zeros(da, da);
            for a in 0..da {
                for a2 in 0..da {
                    let mut s = C64::ZERO;
                    for b in 0..db {
                        s += m[(a * db + b, a2 * db + b)];
                    }
                    out[(a, a2)] = s;
                }
            }
            Ok(out)
        }
        Subsystem::B => {
            let mut out = CMatrix::zeros(db, db);
            for b in 0..db {
                for b2 in 0..db {
                    let mut s = C64::ZERO;
                    for a in 0..da {
                        s += m[(a * db + b, a * db + b2)];
                    }
                    out[(b, b2)] = s;
                }
            }
            Ok(out)
        }
    }
}

/// Transpose on one tensor factor; involutive.
pub fn partial_transpose(m: &CMatrix, dims: (usize, usize), which: Subsystem) -> Result<CMatrix> {
    check_bipartite(m, dims)?;
    let (da, db) = dims;
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for a in 0..da {
        for a2 in 0..da {
            for b in 0..db {
                for b2 in 0..db {
                    let (r, s) = match which {
                        // transpose the A indices
                        Subsystem::A => (a2 * db + b, a * db + b2),
                        // transpose the B indices
                        Subsystem::B => (a * db + b2, a2 * db + b),
                    };
                    out[(a * db + b, a2 * db + b2)] = m[(r, s)];
                }
            }
        }
    }
    Ok(out)
}

/// Reorder tensor factors of an operator on ⊗_i H_{dims\[i\]}. `perm[k]` is
/// the old position of the factor that ends up at position k.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    let d: usize = dims.iter().product();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimMismatch(format!(
            "matrix is {}x{}, dims product is {}",
            m.nrows(),
            m.ncols(),
            d
        )));
    }
    if perm.len() != dims.len() {
        return Err(Error::InvalidParam("permutation length mismatch".into()));
    }
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::InvalidParam("not a permutation".into()));
        }
        seen[p] = true;
    }
    let n = dims.len();
    // strides of the old index layout
    let mut strides = vec![1usize; n];
    for i in (0..n - 1).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut new_strides = vec![1usize; n];
    for i in (0..n - 1).rev() {
        new_strides[i] = new_strides[i + 1] * new_dims[i + 1];
    }
    // map: new flat index -> old flat index
    let mut index_map = vec![0usize; d];
    for (new_flat, slot) in index_map.iter_mut().enumerate() {
        let mut rest = new_flat;
        let mut old_flat = 0usize;
        for k in 0..n {
            let digit = rest / new_strides[k];
            rest %= new_strides[k];
            old_flat += digit * strides[perm[k]];
        }
        *slot = old_flat;
    }
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = m[(index_map[i], index_map[j])];
        }
    }
    Ok(out)
}

/// Singular values, descending.
pub fn svd_values(m: &CMatrix) -> Vec<f64> {
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .expect("SVD of a finite matrix should converge");
    let mut vals: Vec<f64> = svd.singular_values.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals
}

/// ‖X‖₁ = Tr √(X†X): the sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    svd_values(m).iter().sum()
}

/// Trace distance ½‖ρ−σ‖₁ between two operators of equal shape.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * trace_norm(&(a - b))
}

fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues descending, matching
/// eigenvectors as columns, `m = V diag(λ) V†`. The input is symmetrized when
/// its anti-Hermitian residual is below `tol.herm`, rejected otherwise.
pub fn hermitian_eigensystem_with(
    m: &CMatrix,
    tol: &Tolerances,
) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimMismatch(format!(
            "eigensystem needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let res = hermitian_residual(m);
    if res > tol.herm {
        return Err(Error::NotHermitian(res));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

pub fn hermitian_eigensystem(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    hermitian_eigensystem_with(m, &DEFAULT)
}

/// Clip rounding-noise negatives to zero; reject genuine negativity.
pub fn clip_eigenvalue(lambda: f64, tol: &Tolerances) -> Result<f64> {
    if lambda < tol.eig_floor {
        Err(Error::NotPositive(lambda))
    } else {
        Ok(lambda.max(0.0))
    }
}

/// Principal square root of a PSD Hermitian matrix.
pub fn matrix_sqrt_psd(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigensystem_with(m, tol)?;
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = clip_eigenvalue(vals[k], tol)?;
        let col = vecs.column(k);
        let s = cr(lambda.sqrt());
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += s * col[i] * col[j].conj();
            }
        }
    }
    Ok(out)
}

fn check_state_input(m: &CMatrix, tol: &Tolerances) -> Result<Vec<f64>> {
    let (vals, _) = hermitian_eigensystem_with(m, tol)?;
    let tr: f64 = vals.iter().sum();
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::NotAState(format!("trace is {tr}, expected 1")));
    }
    for &v in &vals {
        clip_eigenvalue(v, tol)?;
    }
    Ok(vals)
}

/// Von Neumann entropy −Σ λ log₂ λ in bits, with 0·log 0 = 0.
pub fn von_neumann_entropy_with(rho: &CMatrix, tol: &Tolerances) -> Result<f64> {
    let vals = check_state_input(rho, tol)?;
    Ok(entropy_bits(&vals))
}

pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64> {
    von_neumann_entropy_with(rho, &DEFAULT)
}

/// Shannon entropy in bits of a clipped spectrum.
pub fn entropy_bits(lambdas: &[f64]) -> f64 {
    let mut s = 0.0;
    for &l in lambdas {
        if l > 0.0 {
            s -= l * l.log2();
        }
    }
    // -0.0 shows up when every weight is 0 or 1
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

/// Uhlmann fidelity F(ρ,σ) = (Tr √(√ρ σ √ρ))².
pub fn fidelity_with(rho: &CMatrix, sigma: &CMatrix, tol: &Tolerances) -> Result<f64> {
    check_state_input(rho, tol)?;
    check_state_input(sigma, tol)?;
    let sr = matrix_sqrt_psd(rho, tol)?;
    let inner = &sr * sigma * &sr;
    let (vals, _) = hermitian_eigensystem_with(&inner, tol)?;
    let vmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut t = 0.0;
    for v in vals {
        let v = clip_eigenvalue(v, tol)?;
        // eigenvalues at rounding-noise scale would otherwise contribute
        // √noise ≈ 1e-8 each to the trace
        if v > vmax * 1e-14 {
            t += v.sqrt();
        }
    }
    Ok((t * t).min(1.0))
}

pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    fidelity_with(rho, sigma, &DEFAULT)
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of R's
/// diagonal absorbed into Q.
pub fn haar_unitary(d: usize, rng: &mut impl rand::Rng) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_c64(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { cr(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn gaussian_c64(rng: &mut impl rand::Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Random vector with i.i.d. complex Gaussian entries.
pub fn gaussian_vector(d: usize, rng: &mut impl rand::Rng) -> CVector {
    CVector::from_fn(d, |_, _| gaussian_c64(rng))
}

/// Gram-Schmidt completion: extend `cols` (assumed orthonormal) to an
/// orthonormal basis of C^d and return it as the columns of a d×d unitary.
pub fn complete_to_unitary(cols: &[CVector], d: usize) -> CMatrix {
    let mut basis: Vec<CVector> = cols.to_vec();
    let mut cand = 0usize;
    while basis.len() < d {
        // try canonical basis vectors first, fall back never needed at these sizes
        let mut v = CVector::zeros(d);
        v[cand % d] = cr(1.0);
        cand += 1;
        for b in &basis {
            let overlap = b.dotc(&v);
            v -= b * overlap;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v.unscale(n));
        }
        assert!(cand < 4 * d, "orthonormal completion failed");
    }
    let mut u = CMatrix::zeros(d, d);
    for (j, b) in basis.iter().enumerate() {
        u.set_column(j, b);
    }
    u
}

/// Thin-QR re-orthonormalization of the columns of `m` (d×k, k ≤ d).
pub fn orthonormalize_columns(m: &CMatrix) -> CMatrix {
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let k = m.ncols();
    let mut out = q.columns(0, k).into_owned();
    // fix phases so the map is continuous in m
    for j in 0..k {
        let rjj = r[(j, j)];
        if rjj.norm() > 0.0 {
            let phase = rjj / rjj.norm();
            for i in 0..out.nrows() {
                out[(i, j)] *= phase;
            }
        }
    }
    out
}
