//! Complex operator algebra on the principal, auxiliary, and composite
//! Hilbert spaces, plus the validated model specification.
//!
//! Composite-space index convention: basis state `|s⟩⊗|a⟩` has flat index
//! `s * n_a + a`, i.e. Kronecker products are `principal ⊗ auxiliary`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const BASIS_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

/// Relative Frobenius deviation from Hermiticity; absolute for near-zero matrices.
pub fn hermiticity_error(a: &CMat) -> f64 {
    let d = a - a.adjoint();
    let n = a.norm();
    if n > 1.0 {
        d.norm() / n
    } else {
        d.norm()
    }
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Lowering operator |0⟩⟨1| in the {|0⟩, |1⟩} basis.
pub fn sigma_minus() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
}

/// Projector |i⟩⟨i| in dimension n.
pub fn basis_projector(n: usize, i: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, i)] = c(1., 0.);
    m
}

/// Time modulation of one operator part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    Sinusoidal { amplitude: f64, frequency: f64, phase: f64 },
}

impl Schedule {
    pub fn factor(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant => 1.0,
            Schedule::Sinusoidal { amplitude, frequency, phase } => {
                amplitude * (frequency * t + phase).sin()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant)
    }
}

/// A matrix together with its time modulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledOp {
    pub base: CMat,
    pub schedule: Schedule,
}

impl ScheduledOp {
    pub fn constant(base: CMat) -> Self {
        Self { base, schedule: Schedule::Constant }
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(CMat::zeros(n, n))
    }

    pub fn at(&self, t: f64) -> CMat {
        &self.base * c(self.schedule.factor(t), 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.schedule.is_constant()
    }
}

/// The three parts of one bath coupling operator,
/// `L_k(t) = L_{k,s}(t) + L_{k,sa}(t) + L_{k,a}(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    /// Principal part, n_s × n_s.
    pub l_s: ScheduledOp,
    /// Joint part on the composite space, n_s·n_a × n_s·n_a.
    pub l_sa: ScheduledOp,
    /// Auxiliary part, n_a × n_a.
    pub l_a: ScheduledOp,
}

impl Coupling {
    pub fn zero(n_s: usize, n_a: usize) -> Self {
        Self {
            l_s: ScheduledOp::zero(n_s),
            l_sa: ScheduledOp::zero(n_s * n_a),
            l_a: ScheduledOp::zero(n_a),
        }
    }
}

/// Which assembled operator to build on the composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorTag {
    H,
    /// Bath coupling k = 0..K-1.
    L(usize),
    /// Probe coupling, ampliated to the composite space.
    L0,
}

/// Principal ⊗ auxiliary model with decomposed Hamiltonian and couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub n_s: usize,
    pub n_a: usize,
    /// Orthonormal auxiliary basis {|φ_j⟩}; defaults to the computational basis.
    pub aux_basis: Vec<CVec>,
    pub h_s: ScheduledOp,
    pub h_a: ScheduledOp,
    pub h_sa: ScheduledOp,
    pub couplings: Vec<Coupling>,
    /// Probe coupling on the principal space, n_s × n_s.
    pub l0: ScheduledOp,
}

impl ModelSpec {
    /// All-zero model with computational auxiliary basis and no bath channels.
    pub fn empty(n_s: usize, n_a: usize) -> Self {
        Self {
            n_s,
            n_a,
            aux_basis: computational_basis(n_a),
            h_s: ScheduledOp::zero(n_s),
            h_a: ScheduledOp::zero(n_a),
            h_sa: ScheduledOp::zero(n_s * n_a),
            couplings: Vec::new(),
            l0: ScheduledOp::zero(n_s),
        }
    }

    /// Composite dimension n_s · n_a.
    pub fn dim(&self) -> usize {
        self.n_s * self.n_a
    }

    pub fn n_channels(&self) -> usize {
        self.couplings.len()
    }

    /// True when every operator part has a constant schedule.
    pub fn is_time_constant(&self) -> bool {
        self.h_s.is_constant()
            && self.h_a.is_constant()
            && self.h_sa.is_constant()
            && self.l0.is_constant()
            && self
                .couplings
                .iter()
                .all(|cp| cp.l_s.is_constant() && cp.l_sa.is_constant() && cp.l_a.is_constant())
    }

    /// Probe operator on the principal space at time t.
    pub fn l0_principal(&self, t: f64) -> CMat {
        self.l0.at(t)
    }

    /// Probe operator ampliated to the composite space.
    pub fn l0_composite(&self, t: f64) -> CMat {
        kron(&self.l0.at(t), &CMat::identity(self.n_a, self.n_a))
    }

    /// L_0(t) + L_0(t)† on the principal space.
    pub fn l0_quadrature(&self, t: f64) -> CMat {
        let l = self.l0.at(t);
        &l + l.adjoint()
    }
}

pub fn computational_basis(n: usize) -> Vec<CVec> {
    (0..n)
        .map(|i| {
            let mut v = CVec::zeros(n);
            v[i] = c(1., 0.);
            v
        })
        .collect()
}

/// Ampliated sum H(t) = H_s(t)⊗I + H_sa(t) + I⊗H_a(t) or the L_k analogue;
/// `L0` returns L_0(t)⊗I.
pub fn assemble_operator(spec: &ModelSpec, which: OperatorTag, t: f64) -> Result<CMat> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let i_s = CMat::identity(spec.n_s, spec.n_s);
    let i_a = CMat::identity(spec.n_a, spec.n_a);
    match which {
        OperatorTag::H => Ok(kron(&spec.h_s.at(t), &i_a) + spec.h_sa.at(t) + kron(&i_s, &spec.h_a.at(t))),
        OperatorTag::L(k) => {
            let cp = spec
                .couplings
                .get(k)
                .ok_or_else(|| Error::Index(format!("coupling channel {k} of {}", spec.n_channels())))?;
            Ok(kron(&cp.l_s.at(t), &i_a) + cp.l_sa.at(t) + kron(&i_s, &cp.l_a.at(t)))
        }
        OperatorTag::L0 => Ok(spec.l0_composite(t)),
    }
}

/// Block X^{jk} = (I ⊗ ⟨φ_j|) X (I ⊗ |φ_k⟩), an n_s × n_s principal matrix.
/// Indices are zero-based.
pub fn block(spec: &ModelSpec, x: &CMat, j: usize, k: usize) -> Result<CMat> {
    if j >= spec.n_a || k >= spec.n_a {
        return Err(Error::Index(format!("block ({j},{k}) with n_a = {}", spec.n_a)));
    }
    let d = spec.dim();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension(format!("expected {d}×{d} composite matrix")));
    }
    let phi_j = &spec.aux_basis[j];
    let phi_k = &spec.aux_basis[k];
    let (n_s, n_a) = (spec.n_s, spec.n_a);
    let mut out = CMat::zeros(n_s, n_s);
    for s in 0..n_s {
        for sp in 0..n_s {
            let mut acc = c(0., 0.);
            for a in 0..n_a {
                for ap in 0..n_a {
                    acc += phi_j[a].conj() * x[(s * n_a + a, sp * n_a + ap)] * phi_k[ap];
                }
            }
            out[(s, sp)] = acc;
        }
    }
    Ok(out)
}

/// X ⊗ |φ_j⟩⟨φ_k| on the composite space.
pub fn embed_block(spec: &ModelSpec, x: &CMat, j: usize, k: usize) -> CMat {
    let phi_j = &spec.aux_basis[j];
    let phi_k = &spec.aux_basis[k];
    let outer = CMat::from_fn(spec.n_a, spec.n_a, |a, b| phi_j[a] * phi_k[b].conj());
    kron(x, &outer)
}

/// Partial trace over the auxiliary factor. Summation runs over the
/// computational auxiliary index in increasing order, matching
/// `Σ_j block(X, j, j)` for the computational basis.
pub fn partial_trace_aux(x: &CMat, n_s: usize, n_a: usize) -> Result<CMat> {
    let d = n_s * n_a;
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension(format!("expected {d}×{d} composite matrix")));
    }
    let mut out = CMat::zeros(n_s, n_s);
    for s in 0..n_s {
        for sp in 0..n_s {
            let mut acc = c(0., 0.);
            for a in 0..n_a {
                acc += x[(s * n_a + a, sp * n_a + a)];
            }
            out[(s, sp)] = acc;
        }
    }
    Ok(out)
}

/// Checks every model invariant and reports violations; never mutates the spec.
pub fn validate_model(spec: &ModelSpec) -> Vec<String> {
    let mut report = Vec::new();
    if spec.n_s < 2 {
        report.push(format!("n_s = {} but principal dimension must be >= 2", spec.n_s));
    }
    if spec.n_a < 1 {
        report.push("n_a must be >= 1".into());
    }
    let d = spec.dim();
    let check_dim = |report: &mut Vec<String>, name: &str, m: &CMat, n: usize| {
        if m.nrows() != n || m.ncols() != n {
            report.push(format!("{name} is {}×{} but must be {n}×{n}", m.nrows(), m.ncols()));
        }
    };
    check_dim(&mut report, "H_s", &spec.h_s.base, spec.n_s);
    check_dim(&mut report, "H_a", &spec.h_a.base, spec.n_a);
    check_dim(&mut report, "H_sa", &spec.h_sa.base, d);
    check_dim(&mut report, "L_0", &spec.l0.base, spec.n_s);
    for (k, cp) in spec.couplings.iter().enumerate() {
        check_dim(&mut report, &format!("L_{{{},s}}", k + 1), &cp.l_s.base, spec.n_s);
        check_dim(&mut report, &format!("L_{{{},sa}}", k + 1), &cp.l_sa.base, d);
        check_dim(&mut report, &format!("L_{{{},a}}", k + 1), &cp.l_a.base, spec.n_a);
    }
    for (name, m) in [("H_s", &spec.h_s.base), ("H_a", &spec.h_a.base), ("H_sa", &spec.h_sa.base)] {
        if hermiticity_error(m) > HERMITICITY_TOL {
            report.push(format!("{name} not Hermitian (deviation {:.2e})", hermiticity_error(m)));
        }
    }
    if spec.aux_basis.len() != spec.n_a {
        report.push(format!(
            "aux_basis has {} vectors but n_a = {}",
            spec.aux_basis.len(),
            spec.n_a
        ));
    } else {
        for (j, v) in spec.aux_basis.iter().enumerate() {
            if v.len() != spec.n_a {
                report.push(format!("aux_basis vector {j} has dimension {}", v.len()));
            }
        }
        if spec.aux_basis.iter().all(|v| v.len() == spec.n_a) {
            let mut max_dev = 0.0f64;
            for (j, vj) in spec.aux_basis.iter().enumerate() {
                for (k, vk) in spec.aux_basis.iter().enumerate() {
                    let g: C64 = vj.dotc(vk);
                    let target = if j == k { 1.0 } else { 0.0 };
                    max_dev = max_dev.max((g - c(target, 0.0)).norm());
                }
            }
            if max_dev > BASIS_TOL {
                report.push(format!("aux_basis not orthonormal (Gram deviation {max_dev:.2e})"));
            }
        }
    }
    report
}

/// Which Hilbert space a density matrix lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    Principal,
    Auxiliary,
    Composite,
}

/// A density matrix with its space tag.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub space: SpaceTag,
    pub matrix: CMat,
}

impl DensityMatrix {
    pub fn new(space: SpaceTag, matrix: CMat) -> Self {
        Self { space, matrix }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Violations of the density-matrix invariants at the given trace tolerance.
    pub fn validate(&self, trace_tol: f64) -> Vec<String> {
        let mut report = Vec::new();
        let h = hermiticity_error(&self.matrix);
        if h > 1e-10 {
            report.push(format!("not Hermitian (deviation {h:.2e})"));
        }
        let tr = self.matrix.trace();
        if (tr - c(1., 0.)).norm() > trace_tol {
            report.push(format!("trace {tr} deviates from 1 beyond {trace_tol:.1e}"));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            report.push(format!("minimum eigenvalue {min:.2e} below -1e-8"));
        }
        report
    }
}

/// Smallest eigenvalue of a (nearly) Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// ½‖a − b‖₁ for Hermitian a, b, via the eigenvalues of the difference.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let d = a - b;
    let herm = (&d + d.adjoint()) * c(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Zero-based off-diagonal slot order: pairs (j,k) with j < k in lexicographic
/// order, then the adjoint slots (k,j) in the same order.
pub fn offdiag_pairs(n_a: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_a * n_a.saturating_sub(1));
    for j in 0..n_a {
        for k in (j + 1)..n_a {
            pairs.push((j, k));
        }
    }
    let upper: Vec<_> = pairs.clone();
    for (j, k) in upper {
        pairs.push((k, j));
    }
    pairs
}

/// Slot index of block (j,k), j ≠ k, in the off-diagonal stack.
pub fn offdiag_slot(n_a: usize, j: usize, k: usize) -> usize {
    debug_assert!(j != k && j < n_a && k < n_a);
    let pair_index = |j: usize, k: usize| j * n_a - j * (j + 1) / 2 + (k - j - 1);
    let half = n_a * (n_a - 1) / 2;
    if j < k {
        pair_index(j, k)
    } else {
        half + pair_index(k, j)
    }
}

/// The collection {ϱ^{jk}} of principal-system matrices in the stacking
/// convention: `diag` holds ϱ^{jj} for j = 0..n_a, `offdiag` holds the
/// j < k blocks followed by their adjoint blocks (see [`offdiag_pairs`]).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    pub n_s: usize,
    pub n_a: usize,
    pub diag: Vec<CMat>,
    pub offdiag: Vec<CMat>,
}

impl BlockState {
    pub fn zero(n_s: usize, n_a: usize) -> Self {
        Self {
            n_s,
            n_a,
            diag: vec![CMat::zeros(n_s, n_s); n_a],
            offdiag: vec![CMat::zeros(n_s, n_s); n_a * (n_a - 1)],
        }
    }

    /// Decompose a composite matrix into its blocks in the spec's auxiliary basis.
    pub fn from_composite(spec: &ModelSpec, x: &CMat) -> Result<Self> {
        let diag = (0..spec.n_a)
            .map(|j| block(spec, x, j, j))
            .collect::<Result<Vec<_>>>()?;
        let offdiag = offdiag_pairs(spec.n_a)
            .into_iter()
            .map(|(j, k)| block(spec, x, j, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_s: spec.n_s, n_a: spec.n_a, diag, offdiag })
    }

    /// Reassemble Σ_{j,k} ϱ^{jk} ⊗ |φ_j⟩⟨φ_k|.
    pub fn to_composite(&self, spec: &ModelSpec) -> CMat {
        let d = self.n_s * self.n_a;
        let mut out = CMat::zeros(d, d);
        for j in 0..self.n_a {
            out += embed_block(spec, &self.diag[j], j, j);
        }
        for (slot, (j, k)) in offdiag_pairs(self.n_a).into_iter().enumerate() {
            out += embed_block(spec, &self.offdiag[slot], j, k);
        }
        out
    }

    pub fn get(&self, j: usize, k: usize) -> &CMat {
        if j == k {
            &self.diag[j]
        } else {
            &self.offdiag[offdiag_slot(self.n_a, j, k)]
        }
    }

    /// Σ_k Tr(ϱ^{kk}).
    pub fn total_trace(&self) -> f64 {
        self.diag.iter().map(|m| m.trace().re).sum()
    }

    /// Conditional principal state ϱ_s = Σ_k ϱ^{kk}.
    pub fn principal(&self) -> CMat {
        let mut out = CMat::zeros(self.n_s, self.n_s);
        for m in &self.diag {
            out += m;
        }
        out
    }

    /// Column-vectorized diagonal stack, slot-major.
    pub fn diag_stack(&self) -> CVec {
        stack_mats(&self.diag)
    }

    /// Column-vectorized off-diagonal stack, slot-major.
    pub fn offdiag_stack(&self) -> CVec {
        stack_mats(&self.offdiag)
    }

    pub fn from_stacks(n_s: usize, n_a: usize, diag: &CVec, offdiag: &CVec) -> Self {
        Self {
            n_s,
            n_a,
            diag: unstack_mats(diag, n_s, n_a),
            offdiag: unstack_mats(offdiag, n_s, n_a * (n_a - 1)),
        }
    }

    /// Violations of the block-state invariants at the given trace tolerance.
    pub fn validate(&self, spec: &ModelSpec, trace_tol: f64) -> Vec<String> {
        let mut report = Vec::new();
        let tr = self.total_trace();
        if (tr - 1.0).abs() > trace_tol {
            report.push(format!("total trace {tr} deviates from 1 beyond {trace_tol:.1e}"));
        }
        for j in 0..self.n_a {
            for k in 0..self.n_a {
                if j == k {
                    continue;
                }
                let dev = (self.get(j, k).adjoint() - self.get(k, j)).norm();
                if dev > 1e-10 {
                    report.push(format!("block ({j},{k})† deviates from block ({k},{j}) by {dev:.2e}"));
                }
            }
        }
        let reassembled = self.to_composite(spec);
        let h = hermiticity_error(&reassembled);
        if h > 1e-10 {
            report.push(format!("reassembled composite not Hermitian (deviation {h:.2e})"));
        }
        report
    }
}

fn stack_mats(mats: &[CMat]) -> CVec {
    let per = mats.first().map(|m| m.len()).unwrap_or(0);
    let mut v = CVec::zeros(mats.len() * per);
    for (i, m) in mats.iter().enumerate() {
        for (idx, val) in m.as_slice().iter().enumerate() {
            v[i * per + idx] = *val;
        }
    }
    v
}

fn unstack_mats(v: &CVec, n_s: usize, count: usize) -> Vec<CMat> {
    let per = n_s * n_s;
    (0..count)
        .map(|i| CMat::from_column_slice(n_s, n_s, &v.as_slice()[i * per..(i + 1) * per]))
        .collect()
}
