//! Quantum channels as Kraus collections: application, Choi states,
//! composition, parallelization, Stinespring dilation, and the named
//! channel families used by the experiments.
//!
//! Choi states use the trace-1 convention Γ = (Λ⊗1)(φ⁺); the unnormalized
//! d·Γ appears only inside [`kraus_from_choi`]. Kraus operators with norm
//! below `tol.kraus_drop` are dropped after construction so that zero-weight
//! branches never pollute ensemble evolution.

use crate::qmath::{
    self, cr, hermitian_eigensystem_with, identity, kron, CMatrix, CVector, Subsystem,
};
use crate::rng::rng_from_seed;
use crate::states::{max_entangled, DensityMatrix};
use crate::tol::{Tolerances, DEFAULT};
use crate::{Error, Result};

/// A completely positive map given by Kraus operators, trace preserving when
/// flagged (Σ K†K = I), trace nonincreasing otherwise (Σ K†K ≤ I).
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    kraus: Vec<CMatrix>,
    d_in: usize,
    d_out: usize,
    trace_preserving: bool,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<CMatrix>, trace_preserving: bool) -> Result<Self> {
        Self::new_with(kraus, trace_preserving, &DEFAULT)
    }

    pub fn new_with(
        kraus: Vec<CMatrix>,
        trace_preserving: bool,
        tol: &Tolerances,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParam("empty Kraus set".into()));
        }
        let d_out = kraus[0].nrows();
        let d_in = kraus[0].ncols();
        qmath::ensure_dim_cap(d_in)?;
        qmath::ensure_dim_cap(d_out)?;
        for k in &kraus {
            if k.nrows() != d_out || k.ncols() != d_in {
                return Err(Error::DimMismatch(
                    "Kraus operators must share one shape".into(),
                ));
            }
        }
        let kraus: Vec<CMatrix> = kraus
            .into_iter()
            .filter(|k| k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() > tol.kraus_drop)
            .collect();
        if kraus.is_empty() {
            return Err(Error::InvalidParam("all Kraus operators were zero".into()));
        }
        let mut sum = CMatrix::zeros(d_in, d_in);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        if trace_preserving {
            let res = qmath::max_abs_diff(&sum, &identity(d_in));
            if res > tol.herm {
                return Err(Error::KrausContract(res));
            }
        } else {
            let (vals, _) = hermitian_eigensystem_with(&sum, tol)?;
            let max = vals.first().copied().unwrap_or(0.0);
            if max > 1.0 + tol.herm {
                return Err(Error::KrausContract(max - 1.0));
            }
        }
        Ok(QuantumChannel {
            kraus,
            d_in,
            d_out,
            trace_preserving,
        })
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn is_square(&self) -> bool {
        self.d_in == self.d_out
    }

    pub fn identity(d: usize) -> Self {
        QuantumChannel {
            kraus: vec![identity(d)],
            d_in: d,
            d_out: d,
            trace_preserving: true,
        }
    }

    /// D(ρ) = (1−p)ρ + p·I/d with the canonical Kraus set
    /// {√(1−p)·I} ∪ {√(p/d)|a⟩⟨b|}.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParam(format!(
                "depolarizing parameter {p} outside [0, 1]"
            )));
        }
        qmath::ensure_dim_cap(d)?;
        let mut kraus = Vec::with_capacity(1 + d * d);
        kraus.push(identity(d).scale((1.0 - p).sqrt()));
        let w = cr((p / d as f64).sqrt());
        for a in 0..d {
            for b in 0..d {
                let mut k = CMatrix::zeros(d, d);
                k[(a, b)] = w;
                kraus.push(k);
            }
        }
        Self::new(kraus, true)
    }

    /// Standard two-Kraus amplitude damping on a qubit.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParam(format!(
                "damping parameter {gamma} outside [0, 1]"
            )));
        }
        let k0 = CMatrix::from_row_slice(
            2,
            2,
            &[cr(1.0), cr(0.0), cr(0.0), cr((1.0 - gamma).sqrt())],
        );
        let k1 = CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(gamma.sqrt()), cr(0.0), cr(0.0)]);
        Self::new(vec![k0, k1], true)
    }

    /// Phase flip with probability p: {√(1−p)·I, √p·Z}.
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParam(format!(
                "dephasing parameter {p} outside [0, 1]"
            )));
        }
        let z = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]);
        Self::new(
            vec![identity(2).scale((1.0 - p).sqrt()), z.scale(p.sqrt())],
            true,
        )
    }

    /// Random CPTP channel from a Haar unitary on system ⊗ environment:
    /// K_i = (⟨i|_R ⊗ I) U (|0⟩_R ⊗ I).
    pub fn random_cptp(d: usize, env_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        Self::random_cptp_with(d, env_dim, &mut rng)
    }

    pub fn random_cptp_with(
        d: usize,
        env_dim: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        if env_dim == 0 {
            return Err(Error::InvalidParam("environment dimension must be positive".into()));
        }
        qmath::ensure_dim_cap(d * env_dim)?;
        let u = qmath::haar_unitary(d * env_dim, rng);
        // ordering R ⊗ A: row (r, a) = r*d + a; input column (0, a) = a
        let mut kraus = Vec::with_capacity(env_dim);
        for r in 0..env_dim {
            let k = CMatrix::from_fn(d, d, |a_out, a_in| u[(r * d + a_out, a_in)]);
            kraus.push(k);
        }
        Self::new(kraus, true)
    }

    fn apply_raw(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        out
    }

    /// Σ K ρ K† on a single-system state of dimension d_in.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if !rho.is_single() || rho.dims().0 != self.d_in {
            return Err(Error::DimMismatch(format!(
                "channel expects a single system of dimension {}, got dims {:?}",
                self.d_in,
                rho.dims()
            )));
        }
        let out = self.apply_raw(rho.matrix());
        if self.trace_preserving {
            Ok(DensityMatrix::from_parts_unchecked(
                symmetrize(&out),
                (self.d_out, 1),
            ))
        } else {
            DensityMatrix::new(out, (self.d_out, 1))
        }
    }

    pub(crate) fn apply_on_a_raw(&self, m: &CMatrix, db: usize) -> CMatrix {
        let mut out = CMatrix::zeros(self.d_out * db, self.d_out * db);
        for k in &self.kraus {
            let big = kron(k, &identity(db));
            out += &big * m * big.adjoint();
        }
        out
    }

    /// (Λ⊗1)\[ρ\] on a bipartite state with A-dimension d_in.
    pub fn apply_on_a(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let (da, db) = rho.dims();
        if da != self.d_in {
            return Err(Error::DimMismatch(format!(
                "channel acts on dimension {}, state has A-dimension {da}",
                self.d_in
            )));
        }
        qmath::ensure_dim_cap(self.d_out * db)?;
        let out = self.apply_on_a_raw(rho.matrix(), db);
        if self.trace_preserving {
            Ok(DensityMatrix::from_parts_unchecked(
                symmetrize(&out),
                (self.d_out, db),
            ))
        } else {
            DensityMatrix::new(out, (self.d_out, db))
        }
    }

    /// Kraus set {K_j L_i} of `second ∘ first`.
    pub fn compose(second: &QuantumChannel, first: &QuantumChannel) -> Result<QuantumChannel> {
        if first.d_out != second.d_in {
            return Err(Error::DimMismatch(format!(
                "cannot compose: first outputs {}, second expects {}",
                first.d_out, second.d_in
            )));
        }
        let mut kraus = Vec::with_capacity(first.kraus.len() * second.kraus.len());
        for k in &second.kraus {
            for l in &first.kraus {
                kraus.push(k * l);
            }
        }
        QuantumChannel::new(kraus, first.trace_preserving && second.trace_preserving)
    }

    /// m-fold parallel use: all tensor products of Kraus operators. The
    /// explicit product set grows as |kraus|^m; guarded at 10^5 operators.
    pub fn parallel(&self, m: usize) -> Result<QuantumChannel> {
        if m == 0 {
            return Err(Error::InvalidParam("parallel needs m >= 1".into()));
        }
        let count = (self.kraus.len() as f64).powi(m as i32);
        if count > 1e5 {
            return Err(Error::BranchExplosion(format!(
                "{}^{m} Kraus products exceed the 1e5 guard",
                self.kraus.len()
            )));
        }
        qmath::ensure_dim_cap(self.d_in.pow(m as u32))?;
        qmath::ensure_dim_cap(self.d_out.pow(m as u32))?;
        let mut kraus = vec![CMatrix::identity(1, 1)];
        for _ in 0..m {
            let mut next = Vec::with_capacity(kraus.len() * self.kraus.len());
            for acc in &kraus {
                for k in &self.kraus {
                    next.push(kron(acc, k));
                }
            }
            kraus = next;
        }
        QuantumChannel::new(kraus, self.trace_preserving)
    }

    /// Choi state Γ = (Λ⊗1)(φ⁺) of a square trace-preserving channel.
    pub fn choi(&self) -> Result<ChoiState> {
        if !self.is_square() {
            return Err(Error::DimMismatch(
                "Choi state requires d_in = d_out".into(),
            ));
        }
        if !self.trace_preserving {
            return Err(Error::KrausContract(0.0));
        }
        let phi = max_entangled(self.d_in);
        let gamma = self.apply_on_a(&phi.to_density())?;
        ChoiState::new(gamma)
    }

    /// Stinespring dilation: a unitary U on R⊗A with environment dimension
    /// equal to the Kraus count, such that
    /// Tr_R\[U(|0⟩⟨0|_R ⊗ ρ)U†\] reproduces the channel. Requires a square
    /// trace-preserving channel (unitary completion needs matching in/out
    /// dimensions).
    pub fn stinespring(&self) -> Result<(CMatrix, usize)> {
        if !self.trace_preserving {
            return Err(Error::KrausContract(0.0));
        }
        if !self.is_square() {
            return Err(Error::DimMismatch(
                "Stinespring completion requires d_in = d_out".into(),
            ));
        }
        let d = self.d_in;
        let env = self.kraus.len();
        qmath::ensure_dim_cap(env * d)?;
        // isometry columns: V|a⟩ = Σ_i |i⟩_R ⊗ K_i|a⟩
        let mut cols = Vec::with_capacity(d);
        for a in 0..d {
            let mut v = CVector::zeros(env * d);
            for (i, k) in self.kraus.iter().enumerate() {
                for b in 0..d {
                    v[i * d + b] = k[(b, a)];
                }
            }
            cols.push(v);
        }
        let u = qmath::complete_to_unitary(&cols, env * d);
        Ok((u, env))
    }
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Choi state of a channel: a density matrix on dims (d_out, d_in) whose
/// marginal on the untouched factor is I/d_in.
#[derive(Debug, Clone)]
pub struct ChoiState {
    rho: DensityMatrix,
}

impl ChoiState {
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        Self::new_with(rho, &DEFAULT)
    }

    pub fn new_with(rho: DensityMatrix, tol: &Tolerances) -> Result<Self> {
        let (_, d_in) = rho.dims();
        let marginal = rho.reduced(Subsystem::B)?;
        let res = qmath::max_abs_diff(&marginal, &identity(d_in).scale(1.0 / d_in as f64));
        if res > tol.herm.max(1e-10) {
            return Err(Error::NotAState(format!(
                "Choi marginal deviates from I/d by {res:.3e}"
            )));
        }
        Ok(ChoiState { rho })
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn d_in(&self) -> usize {
        self.rho.dims().1
    }

    pub fn d_out(&self) -> usize {
        self.rho.dims().0
    }
}

/// Canonical Kraus decomposition from the eigendecomposition of d·Γ, one
/// operator per nonzero eigenvalue.
pub fn kraus_from_choi(gamma: &ChoiState) -> Result<QuantumChannel> {
    let d_in = gamma.d_in();
    let d_out = gamma.d_out();
    let scaled = gamma.density().matrix().scale(d_in as f64);
    let (vals, vecs) = hermitian_eigensystem_with(&scaled, &DEFAULT)?;
    let mut kraus = Vec::new();
    for (idx, &v) in vals.iter().enumerate() {
        // eigenvalues of d·Γ live on the scale of d, so the CP floor scales too
        if v < DEFAULT.eig_floor * d_in as f64 {
            return Err(Error::NotPositive(v));
        }
        if v <= DEFAULT.kraus_drop {
            continue;
        }
        let col = vecs.column(idx);
        let w = cr(v.sqrt());
        // vec(K) in row-major convention: index (a_out, b_in) = a_out*d_in + b_in
        let k = CMatrix::from_fn(d_out, d_in, |a, b| w * col[a * d_in + b]);
        kraus.push(k);
    }
    QuantumChannel::new(kraus, true)
}
