//! Built-in models used by the examples and the validation suite.

use crate::algebra::{
    basis_projector, c, kron, sigma_minus, sigma_x, sigma_z, CMat, Coupling, ModelSpec,
    ScheduledOp,
};

/// Two-level principal system coupled to a two-level auxiliary mode:
/// H_s = σ_z/2, H_a = σ_z, H_sa = 0.3 σ_x⊗σ_x, one damping channel
/// L_1 = I⊗σ₋, probe L_0 = 0.5 σ₋ on the principal space.
pub fn reference_model() -> ModelSpec {
    let mut spec = ModelSpec::empty(2, 2);
    spec.h_s = ScheduledOp::constant(sigma_z() * c(0.5, 0.));
    spec.h_a = ScheduledOp::constant(sigma_z());
    spec.h_sa = ScheduledOp::constant(kron(&sigma_x(), &sigma_x()) * c(0.3, 0.));
    spec.couplings = vec![Coupling {
        l_s: ScheduledOp::zero(2),
        l_sa: ScheduledOp::zero(4),
        l_a: ScheduledOp::constant(sigma_minus()),
    }];
    spec.l0 = ScheduledOp::constant(sigma_minus() * c(0.5, 0.));
    spec
}

/// Excited principal ⊗ auxiliary ground: |1⟩⟨1| ⊗ |0⟩⟨0|.
pub fn reference_init() -> CMat {
    kron(&basis_projector(2, 1), &basis_projector(2, 0))
}

/// The reference model with the bipartite Hamiltonian and any principal parts
/// of the coupling channels removed; the memory kernel vanishes identically.
pub fn decoupled_variant(spec: &ModelSpec) -> ModelSpec {
    let mut out = spec.clone();
    out.h_sa = ScheduledOp::zero(spec.n_s * spec.n_a);
    for coupling in out.couplings.iter_mut() {
        coupling.l_s = ScheduledOp::zero(spec.n_s);
        coupling.l_sa = ScheduledOp::zero(spec.n_s * spec.n_a);
    }
    out
}

/// The principal system alone (n_a = 1): H_s and the probe survive, the
/// auxiliary Hamiltonian and coupling channels are dropped.
pub fn principal_only(spec: &ModelSpec) -> ModelSpec {
    let mut out = ModelSpec::empty(spec.n_s, 1);
    out.h_s = spec.h_s.clone();
    out.l0 = spec.l0.clone();
    out
}

/// Entangled initial state (|0,0⟩ + |1,1⟩)/√2 on the reference dimensions.
pub fn entangled_init() -> CMat {
    let mut psi = crate::algebra::CVec::zeros(4);
    let amp = c(1.0 / 2f64.sqrt(), 0.);
    psi[0] = amp;
    psi[3] = amp;
    CMat::from_fn(4, 4, |i, j| psi[i] * psi[j].conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{partial_trace_aux, validate_model};

    #[test]
    fn reference_model_validates_clean() {
        let spec = reference_model();
        assert!(validate_model(&spec).is_empty());
        assert!(validate_model(&decoupled_variant(&spec)).is_empty());
        assert!(validate_model(&principal_only(&spec)).is_empty());
    }

    #[test]
    fn reference_init_is_pure_product() {
        let init = reference_init();
        assert!((init.trace() - c(1., 0.)).norm() < 1e-15);
        assert!(((&init * &init) - &init).norm() < 1e-15);
        let rs = partial_trace_aux(&init, 2, 2).unwrap();
        assert!((rs - basis_projector(2, 1)).norm() < 1e-15);
    }

    #[test]
    fn entangled_init_not_product() {
        let init = entangled_init();
        assert!((init.trace() - c(1., 0.)).norm() < 1e-15);
        let rs = partial_trace_aux(&init, 2, 2).unwrap();
        // Reduced state is maximally mixed, so the global state is entangled.
        assert!((rs - CMat::identity(2, 2) * c(0.5, 0.)).norm() < 1e-12);
    }
}
