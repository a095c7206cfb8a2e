//! Bipartite pure and mixed states, Schmidt machinery, purification, and
//! reproducible Haar sampling.
//!
//! Convention: "Schmidt coefficients" λ_i are probability weights (squared
//! singular values of the coefficient matrix), so Σλ_i = 1 and the state
//! reconstructs as Σ √λ_i |a_i⟩⊗|b_i⟩. Only the λ multiset is
//! contract-bearing; basis choice is gauge.

use crate::qmath::{
    self, cr, gaussian_vector, hermitian_eigensystem_with, kron_vec, CMatrix, CVector, Subsystem,
};
use crate::rng::rng_from_seed;
use crate::tol::{Tolerances, DEFAULT};
use crate::{Error, Result};

/// Normalized bipartite pure state with explicit subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
    dims: (usize, usize),
}

impl PureState {
    pub fn new(amps: CVector, dims: (usize, usize)) -> Result<Self> {
        Self::new_with(amps, dims, &DEFAULT)
    }

    pub fn new_with(amps: CVector, dims: (usize, usize), tol: &Tolerances) -> Result<Self> {
        let (da, db) = dims;
        if da == 0 || db == 0 {
            return Err(Error::InvalidParam("subsystem dimensions must be positive".into()));
        }
        qmath::ensure_dim_cap(da)?;
        qmath::ensure_dim_cap(db)?;
        if amps.len() != da * db {
            return Err(Error::DimMismatch(format!(
                "amplitude vector has length {}, dims ({}, {}) require {}",
                amps.len(),
                da,
                db,
                da * db
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotAState("non-finite amplitude".into()));
        }
        let n = amps.norm();
        if (n - 1.0).abs() > tol.norm {
            return Err(Error::NotAState(format!("norm is {n}, expected 1")));
        }
        Ok(PureState { amps, dims })
    }

    /// Normalize an arbitrary nonzero vector into a state.
    pub fn from_unnormalized(amps: CVector, dims: (usize, usize)) -> Result<Self> {
        let n = amps.norm();
        if n < 1e-300 {
            return Err(Error::NotAState("cannot normalize the zero vector".into()));
        }
        Self::new(amps.unscale(n), dims)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Reshape amplitudes into the dA×dB coefficient matrix X with
    /// ψ = Σ_ij X_ij |i⟩|j⟩.
    pub fn coefficient_matrix(&self) -> CMatrix {
        let (da, db) = self.dims;
        CMatrix::from_fn(da, db, |i, j| self.amps[i * db + j])
    }

    pub fn projector(&self) -> CMatrix {
        &self.amps * self.amps.adjoint()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            m: self.projector(),
            dims: self.dims,
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> crate::qmath::C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn reduced(&self, keep: Subsystem) -> CMatrix {
        let x = self.coefficient_matrix();
        match keep {
            Subsystem::A => &x * x.adjoint(),
            Subsystem::B => (x.adjoint() * &x).transpose(),
        }
    }
}

/// Density matrix with explicit subsystem dimensions. Single systems use
/// dims (d, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
    dims: (usize, usize),
}

impl DensityMatrix {
    pub fn new(m: CMatrix, dims: (usize, usize)) -> Result<Self> {
        Self::new_with(m, dims, &DEFAULT)
    }

    pub fn new_with(m: CMatrix, dims: (usize, usize), tol: &Tolerances) -> Result<Self> {
        let (da, db) = dims;
        if da == 0 || db == 0 {
            return Err(Error::InvalidParam("subsystem dimensions must be positive".into()));
        }
        qmath::ensure_dim_cap(da * db)?;
        let d = da * db;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimMismatch(format!(
                "matrix is {}x{}, dims ({}, {}) require {}x{}",
                m.nrows(),
                m.ncols(),
                da,
                db,
                d,
                d
            )));
        }
        let (vals, _) = hermitian_eigensystem_with(&m, tol)?;
        for &v in &vals {
            qmath::clip_eigenvalue(v, tol)?;
        }
        let tr: f64 = vals.iter().sum();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotAState(format!("trace is {tr}, expected 1")));
        }
        // store the symmetrized matrix so downstream spectral calls are clean
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(DensityMatrix { m: sym, dims })
    }

    /// Single-system state, dims (d, 1).
    pub fn single(m: CMatrix) -> Result<Self> {
        let d = m.nrows();
        Self::new(m, (d, 1))
    }

    pub(crate) fn from_parts_unchecked(m: CMatrix, dims: (usize, usize)) -> Self {
        DensityMatrix { m, dims }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn is_single(&self) -> bool {
        self.dims.1 == 1
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// Eigenvalues descending, rounding noise clipped.
    pub fn spectrum(&self) -> Vec<f64> {
        let (vals, _) = hermitian_eigensystem_with(&self.m, &DEFAULT)
            .expect("stored density matrix is Hermitian");
        vals.iter().map(|&v| v.max(0.0)).collect()
    }

    pub fn rank(&self, cutoff: f64) -> usize {
        self.spectrum().iter().filter(|&&v| v > cutoff).count()
    }

    pub fn reduced(&self, keep: Subsystem) -> Result<CMatrix> {
        qmath::partial_trace(&self.m, self.dims, keep)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        let purity = (&self.m * &self.m).trace().re;
        (purity - 1.0).abs() < tol
    }
}

/// Schmidt data of a bipartite pure state: probability weights λ_i
/// (descending, Σλ_i = 1) and the matching orthonormal local bases.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub basis_a: Vec<CVector>,
    pub basis_b: Vec<CVector>,
}

impl SchmidtDecomposition {
    /// Σ √λ_i |a_i⟩⊗|b_i⟩; reproduces the state up to global phase.
    pub fn reconstruct(&self, dims: (usize, usize)) -> Result<PureState> {
        let mut amps = CVector::zeros(dims.0 * dims.1);
        for (i, &l) in self.coefficients.iter().enumerate() {
            if l <= 0.0 {
                continue;
            }
            amps += kron_vec(&self.basis_a[i], &self.basis_b[i]).scale(l.sqrt());
        }
        PureState::from_unnormalized(amps, dims)
    }
}

/// Schmidt decomposition via SVD of the coefficient matrix; λ_i are the
/// squared singular values, descending.
pub fn schmidt(psi: &PureState) -> SchmidtDecomposition {
    let x = psi.coefficient_matrix();
    let svd = x
        .try_svd(true, true, f64::EPSILON, 0)
        .expect("SVD of a finite coefficient matrix should converge");
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let mut coefficients = Vec::with_capacity(r);
    let mut basis_a = Vec::with_capacity(r);
    let mut basis_b = Vec::with_capacity(r);
    for &i in &order {
        let s = svd.singular_values[i];
        coefficients.push(s * s);
        basis_a.push(u.column(i).into_owned());
        // with X = U Σ V†, the B-side Schmidt vector is the i-th row of V†
        basis_b.push(vt.row(i).transpose());
    }
    SchmidtDecomposition {
        coefficients,
        basis_a,
        basis_b,
    }
}

/// Number of Schmidt coefficients above `cutoff`.
pub fn schmidt_rank(psi: &PureState, cutoff: f64) -> usize {
    schmidt(psi)
        .coefficients
        .iter()
        .filter(|&&l| l > cutoff)
        .count()
}

pub fn schmidt_rank_default(psi: &PureState) -> usize {
    schmidt_rank(psi, DEFAULT.schmidt_cutoff)
}

/// φ_k⁺ = (1/√k) Σ_{i<k} |ii⟩ on dims (k, k).
pub fn max_entangled(k: usize) -> PureState {
    assert!(k >= 1, "max_entangled needs k >= 1");
    let mut amps = CVector::zeros(k * k);
    let w = cr(1.0 / (k as f64).sqrt());
    for i in 0..k {
        amps[i * k + i] = w;
    }
    PureState { amps, dims: (k, k) }
}

/// φ_k⁺ with the A side embedded in dimension `da ≥ k` (support on the first
/// k basis vectors).
pub fn max_entangled_embedded(k: usize, da: usize) -> PureState {
    assert!(k >= 1 && da >= k);
    let mut amps = CVector::zeros(da * k);
    let w = cr(1.0 / (k as f64).sqrt());
    for i in 0..k {
        amps[i * k + i] = w;
    }
    PureState { amps, dims: (da, k) }
}

/// Purification of ρ on dims (total_dim, rank): the reference dimension is
/// the rank of ρ and tracing it out reproduces ρ.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let d = rho.total_dim();
    let (vals, vecs) = hermitian_eigensystem_with(rho.matrix(), &DEFAULT)?;
    let kept: Vec<(f64, usize)> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > DEFAULT.schmidt_cutoff)
        .map(|(i, &v)| (v, i))
        .collect();
    let rank = kept.len().max(1);
    let mut amps = CVector::zeros(d * rank);
    for (r, &(lambda, col)) in kept.iter().enumerate() {
        let w = cr(lambda.max(0.0).sqrt());
        for s in 0..d {
            amps[s * rank + r] = w * vecs[(s, col)];
        }
    }
    PureState::from_unnormalized(amps, (d, rank))
}

/// Haar-random pure state (normalized Gaussian amplitudes), deterministic in
/// the seed.
pub fn random_pure(dims: (usize, usize), seed: u64) -> PureState {
    let mut rng = rng_from_seed(seed);
    random_pure_with(dims, &mut rng)
}

pub fn random_pure_with(dims: (usize, usize), rng: &mut impl rand::Rng) -> PureState {
    let v = gaussian_vector(dims.0 * dims.1, rng);
    PureState::from_unnormalized(v, dims).expect("Gaussian vector is almost surely nonzero")
}

/// Random density matrix of the given rank: partial trace of a larger
/// Haar-random pure state.
pub fn random_density(dims: (usize, usize), rank: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = rng_from_seed(seed);
    random_density_with(dims, rank, &mut rng)
}

pub fn random_density_with(
    dims: (usize, usize),
    rank: usize,
    rng: &mut impl rand::Rng,
) -> Result<DensityMatrix> {
    let d = dims.0 * dims.1;
    if rank == 0 || rank > d {
        return Err(Error::InvalidParam(format!(
            "rank {rank} out of range for total dimension {d}"
        )));
    }
    let psi = random_pure_with((d, rank), rng);
    let m = psi.reduced(Subsystem::A);
    // clean numerical symmetry before validating
    DensityMatrix::new(m, dims)
}

/// Random rank-k pure state with Schmidt weights bounded away from zero,
/// for tests that need well-conditioned Schmidt spectra.
pub fn random_pure_of_rank(
    dims: (usize, usize),
    k: usize,
    min_weight: f64,
    rng: &mut impl rand::Rng,
) -> PureState {
    let (da, db) = dims;
    assert!(k >= 1 && k <= da.min(db));
    let ua = qmath::haar_unitary(da, rng);
    let ub = qmath::haar_unitary(db, rng);
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w = *w / sum * (1.0 - min_weight * k as f64) + min_weight;
    }
    let mut amps = CVector::zeros(da * db);
    for (i, &w) in weights.iter().enumerate() {
        amps += kron_vec(&ua.column(i).into_owned(), &ub.column(i).into_owned()).scale(w.sqrt());
    }
    PureState::from_unnormalized(amps, dims).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{max_abs_diff, trace_distance, von_neumann_entropy};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bell_state_schmidt_is_uniform() {
        let phi = max_entangled(2);
        let dec = schmidt(&phi);
        assert_relative_eq!(dec.coefficients[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(dec.coefficients[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(phi.inner(&phi).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_state_schmidt_is_rank_one() {
        // |0⟩ ⊗ |+⟩
        let plus = CVector::from_vec(vec![cr(1.0), cr(1.0)]).unscale(2f64.sqrt());
        let zero = CVector::from_vec(vec![cr(1.0), cr(0.0)]);
        let psi = PureState::new(kron_vec(&zero, &plus), (2, 2)).unwrap();
        let dec = schmidt(&psi);
        assert_relative_eq!(dec.coefficients[0], 1.0, epsilon = 1e-12);
        assert!(dec.coefficients[1].abs() < 1e-12);
        assert_eq!(schmidt_rank_default(&psi), 1);
    }

    #[test]
    fn schmidt_matches_reduced_spectrum_oracle() {
        // λ must equal the eigenvalues of the reduced density matrix
        for seed in 0..10u64 {
            let psi = random_pure((3, 3), seed);
            let dec = schmidt(&psi);
            let ra = psi.reduced(Subsystem::A);
            let (vals, _) = crate::qmath::hermitian_eigensystem(&ra).unwrap();
            for (l, v) in dec.coefficients.iter().zip(vals.iter()) {
                assert_relative_eq!(l, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn schmidt_rank_cutoff_semantics() {
        let eps = 1e-13;
        let mut amps = CVector::zeros(9);
        amps[0] = cr(1.0);
        amps[4] = cr(1.0);
        amps[8] = cr(eps);
        let psi = PureState::from_unnormalized(amps, (3, 3)).unwrap();
        assert_eq!(schmidt_rank_default(&psi), 2);
        assert_eq!(schmidt_rank(&psi, 1e-30), 3);
    }

    #[test]
    fn max_entangled_uniform_weights() {
        for k in 2..=5 {
            let phi = max_entangled(k);
            let dec = schmidt(&phi);
            for l in &dec.coefficients {
                assert_relative_eq!(*l, 1.0 / k as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_roundtrip_fidelity() {
        for seed in 0..10u64 {
            let psi = random_pure((3, 4), seed);
            let dec = schmidt(&psi);
            let back = dec.reconstruct((3, 4)).unwrap();
            let overlap = psi.inner(&back).norm_sqr();
            assert!(overlap > 1.0 - 1e-10, "fidelity {overlap}");
            // re-decomposing yields identical λ
            let dec2 = schmidt(&back);
            for (a, b) in dec.coefficients.iter().zip(dec2.coefficients.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn entanglement_entropy_matches_schmidt_weights() {
        for seed in 20..30u64 {
            let psi = random_pure((2, 3), seed);
            let dec = schmidt(&psi);
            let s_red = von_neumann_entropy(&psi.reduced(Subsystem::A)).unwrap();
            let s_weights = crate::qmath::entropy_bits(&dec.coefficients);
            assert_relative_eq!(s_red, s_weights, epsilon = 1e-10);
            let total: f64 = dec.coefficients.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn purify_pure_state_has_trivial_reference() {
        let phi = max_entangled(2);
        let rho = phi.to_density();
        let pur = purify(&rho).unwrap();
        assert_eq!(pur.dims(), (4, 1));
        let back = pur.reduced(Subsystem::A);
        assert!(max_abs_diff(&back, rho.matrix()) < 1e-10);
    }

    #[test]
    fn purify_maximally_mixed_qubit() {
        let rho = DensityMatrix::single(crate::qmath::identity(2).scale(0.5)).unwrap();
        let pur = purify(&rho).unwrap();
        assert_eq!(pur.dims(), (2, 2));
        let marg = pur.reduced(Subsystem::A);
        assert!(max_abs_diff(&marg, &crate::qmath::identity(2).scale(0.5)) < 1e-10);
    }

    #[test]
    fn purify_roundtrip_on_random_rank3() {
        let rho = random_density((2, 2), 3, 99).unwrap();
        let pur = purify(&rho).unwrap();
        assert_eq!(pur.dims().1, 3);
        let back = pur.reduced(Subsystem::A);
        assert!(trace_distance(&back, rho.matrix()) < 1e-10);
    }

    #[test]
    fn random_states_are_seed_deterministic() {
        let a = random_pure((2, 2), 123);
        let b = random_pure((2, 2), 123);
        assert_eq!(a.amplitudes(), b.amplitudes());
        let ra = random_density((2, 2), 2, 7).unwrap();
        let rb = random_density((2, 2), 2, 7).unwrap();
        assert_eq!(ra.matrix(), rb.matrix());
    }

    #[test]
    fn random_density_is_a_state() {
        for seed in 0..20u64 {
            let rho = random_density((2, 3), 4, seed).unwrap();
            assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-10);
            assert!(rho.spectrum().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn random_density_rejects_bad_rank() {
        assert!(random_density((2, 2), 0, 1).is_err());
        assert!(random_density((2, 2), 5, 1).is_err());
    }

    #[test]
    fn haar_qubit_bloch_statistics() {
        // Monte-Carlo check against the Haar prediction: for uniform states
        // the Bloch vector length |r| has mean 2/3... instead of deriving
        // moments, test E[z] ≈ 0 and E[|r|²] = Var-based bound with 3σ.
        let n = 10_000;
        let mut rng = rng_from_seed(2024);
        let mut sum_z = 0.0;
        let mut sum_r2 = 0.0;
        for _ in 0..n {
            let psi = random_pure_with((1, 2), &mut rng);
            let a = psi.amplitudes();
            let z = a[0].norm_sqr() - a[1].norm_sqr();
            let x = 2.0 * (a[0].conj() * a[1]).re;
            let y = 2.0 * (a[0].conj() * a[1]).im;
            sum_z += z;
            sum_r2 += x * x + y * y + z * z;
        }
        // pure qubit states always have |r| = 1; z is uniform in [-1, 1]
        assert_relative_eq!(sum_r2 / n as f64, 1.0, epsilon = 1e-9);
        let mean_z = sum_z / n as f64;
        let sigma = (1.0 / 3.0f64 / n as f64).sqrt();
        assert!(
            mean_z.abs() < 3.0 * sigma,
            "mean z {mean_z} vs 3σ {}",
            3.0 * sigma
        );
    }

    #[test]
    fn density_matrix_rejects_unnormalized_and_non_psd() {
        let m = crate::qmath::identity(2);
        assert!(matches!(
            DensityMatrix::single(m),
            Err(Error::NotAState(_))
        ));
        let bad = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.5), cr(-0.5)]));
        assert!(matches!(
            DensityMatrix::single(bad),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn pure_state_rejects_wrong_norm() {
        let v = CVector::from_vec(vec![cr(1.0), cr(1.0), cr(0.0), cr(0.0)]);
        assert!(PureState::new(v, (2, 2)).is_err());
    }

    #[test]
    fn dim_cap_rejected_in_constructors() {
        let v = CVector::zeros(65 * 2);
        assert!(matches!(
            PureState::new(v, (65, 2)),
            Err(Error::DimCap(65))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn schmidt_weights_sum_to_one(seed in 0u64..1000) {
            let psi = random_pure((3, 2), seed);
            let dec = schmidt(&psi);
            let total: f64 = dec.coefficients.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(dec.coefficients.windows(2).all(|w| w[0] >= w[1] - 1e-15));
        }
    }
}
