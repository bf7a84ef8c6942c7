//! Vectorized superoperator construction: the Lindbladian, the measurement
//! superoperator G, the projection P/Q, and their restrictions.
//!
//! Convention: column-stacking vectorization, so vec(A X B) = (Bᵀ ⊗ A) vec(X).
//! All superoperator matrices are built from Kronecker identities under this
//! single convention.

pub mod blockgen;

use std::io::Write;
use std::path::Path;



use crate::algebra::{
    assemble_operator, c, hermiticity_error, kron, min_eigenvalue, CMat, CVec, ModelSpec,
    OperatorTag, SpaceTag,
};
use crate::error::{Error, Result};

pub use blockgen::{block_generators, BlockGenerators, Fault};

pub const IDEMPOTENCY_TOL: f64 = 1e-10;

/// Matrix of a linear map on d×d operators, acting on column-vectorized input.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    pub matrix: CMat,
    pub space: SpaceTag,
}

impl SuperOp {
    pub fn new(matrix: CMat, space: SpaceTag) -> Self {
        Self { matrix, space }
    }

    /// Operator dimension d with matrix of size d²×d².
    pub fn op_dim(&self) -> usize {
        (self.matrix.nrows() as f64).sqrt().round() as usize
    }

    pub fn identity(d: usize, space: SpaceTag) -> Self {
        Self::new(CMat::identity(d * d, d * d), space)
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        devectorize(&(&self.matrix * vectorize(x)), x.nrows())
    }
}

/// Column-stacking vectorization.
pub fn vectorize(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

pub fn devectorize(v: &CVec, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Matrix of X ↦ A X B.
pub fn sandwich(a: &CMat, b: &CMat) -> CMat {
    kron(&b.transpose(), a)
}

/// Matrix of X ↦ A X.
pub fn left_mul(a: &CMat) -> CMat {
    let d = a.nrows();
    kron(&CMat::identity(d, d), a)
}

/// Matrix of X ↦ X B.
pub fn right_mul(b: &CMat) -> CMat {
    let d = b.nrows();
    kron(&b.transpose(), &CMat::identity(d, d))
}

/// Materialize a linear map on d×d operators by applying it to matrix units.
pub fn superop_from_map(d: usize, f: impl Fn(&CMat) -> CMat) -> CMat {
    let mut m = CMat::zeros(d * d, d * d);
    let mut unit = CMat::zeros(d, d);
    for col in 0..d * d
    {
        let (i, j) = (col % d, col / d);
        unit[(i, j)] = c(1., 0.);
        let out = vectorize(&f(&unit));
        m.set_column(col, &out);
        unit[(i, j)] = c(0., 0.);
    }
    m
}

/// Matrix of the dissipator X ↦ L X L† − ½{L†L, X}.
pub fn dissipator_matrix(l: &CMat) -> CMat {
    let ldl = l.adjoint() * l;
    sandwich(l, &l.adjoint()) - (left_mul(&ldl) + right_mul(&ldl)) * c(0.5, 0.0)
}

/// Lindblad generator ρ ↦ −i[H(t),ρ] + Σ_{k=0}^{K} D_k(t)ρ on the composite
/// space, including the probe channel k = 0.
pub fn lindbladian(spec: &ModelSpec, t: f64) -> Result<SuperOp> {
    let h = assemble_operator(spec, OperatorTag::H, t)?;
    let mut m = (left_mul(&h) - right_mul(&h)) * c(0., -1.);
    m += dissipator_matrix(&spec.l0_composite(t));
    for k in 0..spec.n_channels() {
        m += dissipator_matrix(&assemble_operator(spec, OperatorTag::L(k), t)?);
    }
    Ok(SuperOp::new(m, SpaceTag::Composite))
}

/// Measurement superoperator ρ ↦ L₀(t)ρ + ρL₀(t)†, L₀ ampliated.
pub fn g_superop(spec: &ModelSpec, t: f64) -> SuperOp {
    let l0 = spec.l0_composite(t);
    SuperOp::new(left_mul(&l0) + right_mul(&l0.adjoint()), SpaceTag::Composite)
}

/// The choice of projection superoperator.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectorKind {
    /// P X = Σ_j X^{jj} ⊗ |φ_j⟩⟨φ_j|.
    BlockDiagonal,
    /// P ρ = Tr_a(ρ) ⊗ ρ_a for a fixed auxiliary density matrix.
    Product(CMat),
}

/// Build the pair (P, Q = I − P).
pub fn projector_p(spec: &ModelSpec, kind: &ProjectorKind) -> Result<(SuperOp, SuperOp)> {
    let d = spec.dim();
    let p = match kind {
        ProjectorKind::BlockDiagonal => {
            let i_s = CMat::identity(spec.n_s, spec.n_s);
            let mut m = CMat::zeros(d * d, d * d);
            for phi in &spec.aux_basis {
                let outer = CMat::from_fn(spec.n_a, spec.n_a, |a, b| phi[a] * phi[b].conj());
                let e_j = kron(&i_s, &outer);
                m += sandwich(&e_j, &e_j);
            }
            m
        }
        ProjectorKind::Product(rho_a) => {
            if rho_a.nrows() != spec.n_a || rho_a.ncols() != spec.n_a {
                return Err(Error::Dimension(format!(
                    "ρ_a is {}×{} but n_a = {}",
                    rho_a.nrows(),
                    rho_a.ncols(),
                    spec.n_a
                )));
            }
            if hermiticity_error(rho_a) > 1e-10
                || (rho_a.trace() - c(1., 0.)).norm() > 1e-10
                || min_eigenvalue(rho_a) < -1e-8
            {
                return Err(Error::InvalidArgument("ρ_a is not a density matrix".into()));
            }
            let rho_a = rho_a.clone();
            superop_from_map(d, |x| {
                let pt = crate::algebra::partial_trace_aux(x, spec.n_s, spec.n_a)
                    .expect("dimension checked");
                kron(&pt, &rho_a)
            })
        }
    };
    let q = CMat::identity(d * d, d * d) - &p;
    Ok((
        SuperOp::new(p, SpaceTag::Composite),
        SuperOp::new(q, SpaceTag::Composite),
    ))
}

/// Which restriction of a superoperator to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restriction {
    Pp,
    Pq,
    Qp,
    Qq,
}

/// X^{pp} = P X P and the pq/qp/qq analogues.
pub fn restrict(s: &SuperOp, p: &SuperOp, q: &SuperOp, which: Restriction) -> Result<SuperOp> {
    let idem = (&p.matrix * &p.matrix - &p.matrix).norm();
    if idem > IDEMPOTENCY_TOL {
        return Err(Error::InvalidArgument(format!(
            "P not idempotent (‖P² − P‖ = {idem:.2e})"
        )));
    }
    let m = match which {
        Restriction::Pp => &p.matrix * &s.matrix * &p.matrix,
        Restriction::Pq => &p.matrix * &s.matrix * &q.matrix,
        Restriction::Qp => &q.matrix * &s.matrix * &p.matrix,
        Restriction::Qq => &q.matrix * &s.matrix * &q.matrix,
    };
    Ok(SuperOp::new(m, s.space))
}

/// Diagnostic dump of a superoperator matrix to CSV, row-major with
/// re,im column pairs.
pub fn write_superop_csv(s: &SuperOp, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..s.matrix.nrows() {
        let mut row = Vec::with_capacity(2 * s.matrix.ncols());
        for j in 0..s.matrix.ncols() {
            let z = s.matrix[(i, j)];
            row.push(format!("{:.17e}", z.re));
            row.push(format!("{:.17e}", z.im));
        }
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{
        basis_projector, partial_trace_aux, sigma_minus, sigma_z, ScheduledOp,
    };
    use approx::assert_abs_diff_eq;

    fn random_mat(d: usize, seed: u64) -> CMat {
        let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D).wrapping_add(99);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) - 0.5
        };
        CMat::from_fn(d, d, |_, _| c(next(), next()))
    }

    fn random_density(d: usize, seed: u64) -> CMat {
        let a = random_mat(d, seed);
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    }

    fn coupled_spec() -> ModelSpec {
        let mut spec = ModelSpec::empty(2, 2);
        spec.h_s = ScheduledOp::constant(sigma_z() * c(0.5, 0.0));
        spec.h_a = ScheduledOp::constant(sigma_z());
        spec.h_sa = ScheduledOp::constant(
            kron(&crate::algebra::sigma_x(), &crate::algebra::sigma_x()) * c(0.3, 0.0),
        );
        let mut cp = crate::algebra::Coupling::zero(2, 2);
        cp.l_a = ScheduledOp::constant(sigma_minus());
        spec.couplings.push(cp);
        spec.l0 = ScheduledOp::constant(sigma_minus() * c(0.5, 0.0));
        spec
    }

    #[test]
    fn vectorize_round_trip() {
        let m = random_mat(3, 1);
        assert_eq!(devectorize(&vectorize(&m), 3), m);
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = random_mat(3, 2);
        let b = random_mat(3, 3);
        let x = random_mat(3, 4);
        let lhs = devectorize(&(sandwich(&a, &b) * vectorize(&x)), 3);
        let rhs = &a * &x * &b;
        assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lindbladian_zero_generator() {
        let spec = ModelSpec::empty(2, 2);
        let l = lindbladian(&spec, 0.0).unwrap();
        assert_abs_diff_eq!(l.matrix.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lindbladian_trace_preserving() {
        let spec = coupled_spec();
        let l = lindbladian(&spec, 0.0).unwrap();
        let rho = random_density(4, 5);
        let out = l.apply(&rho);
        assert_abs_diff_eq!(out.trace().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lindbladian_amplitude_damping_by_hand() {
        // Qubit, H = σ_z, L0 = σ₋, ρ = |1⟩⟨1| → dρ/dt = diag(1, −1).
        let mut spec = ModelSpec::empty(2, 1);
        spec.h_s = ScheduledOp::constant(sigma_z());
        spec.l0 = ScheduledOp::constant(sigma_minus());
        let l = lindbladian(&spec, 0.0).unwrap();
        let rho = basis_projector(2, 1);
        let out = l.apply(&rho);
        let expected = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
        assert_abs_diff_eq!((out - expected).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn g_superop_zero_probe() {
        let spec = ModelSpec::empty(2, 2);
        assert_abs_diff_eq!(g_superop(&spec, 0.0).matrix.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn g_superop_hermitian_probe_anticommutator() {
        let mut spec = ModelSpec::empty(2, 2);
        spec.l0 = ScheduledOp::constant(crate::algebra::sigma_x());
        let g = g_superop(&spec, 0.0);
        let rho = random_mat(4, 6);
        let l0 = spec.l0_composite(0.0);
        let expected = &l0 * &rho + &rho * &l0;
        assert_abs_diff_eq!((g.apply(&rho) - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn g_superop_trace_identity() {
        let spec = coupled_spec();
        let g = g_superop(&spec, 0.0);
        let rho = random_density(4, 7);
        let l0 = spec.l0_composite(0.0);
        let quad = &l0 + l0.adjoint();
        let lhs = g.apply(&rho).trace();
        let rhs = (&quad * &rho).trace();
        assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn projector_kills_offdiagonal_product() {
        let spec = ModelSpec::empty(2, 2);
        let (p, _) = projector_p(&spec, &ProjectorKind::BlockDiagonal).unwrap();
        let x = kron(&random_mat(2, 8), &CMat::from_fn(2, 2, |i, j| {
            if i == 0 && j == 1 {
                c(1., 0.)
            } else {
                c(0., 0.)
            }
        }));
        assert_abs_diff_eq!(p.apply(&x).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn projector_properties_both_kinds() {
        let spec = coupled_spec();
        let rho_a = random_density(2, 9);
        for kind in [ProjectorKind::BlockDiagonal, ProjectorKind::Product(rho_a)] {
            let (p, q) = projector_p(&spec, &kind).unwrap();
            // P² = P, PQ = QP = 0.
            assert_abs_diff_eq!((&p.matrix * &p.matrix - &p.matrix).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((&p.matrix * &q.matrix).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((&q.matrix * &p.matrix).norm(), 0.0, epsilon = 1e-12);
            let rho = random_density(4, 10);
            // Property 1: auxiliary partial trace preserved.
            let lhs = partial_trace_aux(&p.apply(&rho), 2, 2).unwrap();
            let rhs = partial_trace_aux(&rho, 2, 2).unwrap();
            assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
            // Property 2: commutes with ampliated principal operators.
            let o = random_mat(2, 11);
            let o_amp = kron(&o, &CMat::identity(2, 2));
            let lhs = p.apply(&(&o_amp * &rho));
            let rhs = &o_amp * p.apply(&rho);
            assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
            // G commutes with P.
            let g = g_superop(&spec, 0.0);
            assert_abs_diff_eq!(
                (&p.matrix * &g.matrix - &g.matrix * &p.matrix).norm(),
                0.0,
                epsilon = 1e-12
            );
            // Tr((L0+L0†)ρ) = Tr((L0+L0†) Pρ).
            let quad = {
                let l0 = spec.l0_composite(0.0);
                &l0 + l0.adjoint()
            };
            let lhs = (&quad * &rho).trace();
            let rhs = (&quad * p.apply(&rho)).trace();
            assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn projector_rejects_bad_rho_a() {
        let spec = ModelSpec::empty(2, 2);
        let bad = CMat::identity(2, 2); // trace 2
        assert!(projector_p(&spec, &ProjectorKind::Product(bad)).is_err());
    }

    #[test]
    fn restrict_identity_decomposition() {
        let spec = coupled_spec();
        let (p, q) = projector_p(&spec, &ProjectorKind::BlockDiagonal).unwrap();
        let ident = SuperOp::identity(4, SpaceTag::Composite);
        let ipp = restrict(&ident, &p, &q, Restriction::Pp).unwrap();
        let ipq = restrict(&ident, &p, &q, Restriction::Pq).unwrap();
        assert_abs_diff_eq!((ipp.matrix.clone() - &p.matrix).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ipq.matrix.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn restrict_resolution_of_identity() {
        let spec = coupled_spec();
        let (p, q) = projector_p(&spec, &ProjectorKind::BlockDiagonal).unwrap();
        let l = lindbladian(&spec, 0.0).unwrap();
        let total: CMat = [Restriction::Pp, Restriction::Pq, Restriction::Qp, Restriction::Qq]
            .into_iter()
            .map(|w| restrict(&l, &p, &q, w).unwrap().matrix)
            .fold(CMat::zeros(16, 16), |acc, m| acc + m);
        assert_abs_diff_eq!((total - &l.matrix).norm(), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn restrict_decoupled_cross_terms_vanish() {
        // H_sa = 0, L_sa = 0, L_a diagonal in the auxiliary basis.
        let mut spec = ModelSpec::empty(2, 2);
        spec.h_s = ScheduledOp::constant(sigma_z());
        spec.h_a = ScheduledOp::constant(sigma_z());
        let mut cp = crate::algebra::Coupling::zero(2, 2);
        cp.l_a = ScheduledOp::constant(sigma_z() * c(0.7, 0.0));
        spec.couplings.push(cp);
        spec.l0 = ScheduledOp::constant(sigma_minus());
        let (p, q) = projector_p(&spec, &ProjectorKind::BlockDiagonal).unwrap();
        let l = lindbladian(&spec, 0.0).unwrap();
        let lpq = restrict(&l, &p, &q, Restriction::Pq).unwrap();
        let lqp = restrict(&l, &p, &q, Restriction::Qp).unwrap();
        assert_abs_diff_eq!(lpq.matrix.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lqp.matrix.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn restrict_rejects_non_idempotent() {
        let spec = ModelSpec::empty(2, 2);
        let l = lindbladian(&spec, 0.0).unwrap();
        let not_p = SuperOp::new(CMat::identity(16, 16) * c(2., 0.), SpaceTag::Composite);
        let q = SuperOp::identity(4, SpaceTag::Composite);
        assert!(restrict(&l, &not_p, &q, Restriction::Pp).is_err());
    }

    #[test]
    fn block_diagonal_projector_matches_block_state_form() {
        // P restricted to BlockState form keeps diag and zeroes offdiag.
        let spec = coupled_spec();
        let (p, _) = projector_p(&spec, &ProjectorKind::BlockDiagonal).unwrap();
        let rho = random_density(4, 13);
        let projected = p.apply(&rho);
        let bs_in = crate::algebra::BlockState::from_composite(&spec, &rho).unwrap();
        let bs_out = crate::algebra::BlockState::from_composite(&spec, &projected).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!((&bs_out.diag[j] - &bs_in.diag[j]).norm(), 0.0, epsilon = 1e-12);
        }
        for m in &bs_out.offdiag {
            assert_abs_diff_eq!(m.norm(), 0.0, epsilon = 1e-12);
        }
    }
}
