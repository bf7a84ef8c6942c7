//! The stacked block generators A₀₀, A₀₁, B₀₁, A₁₁, A₁₀, B₁₀ driving the
//! coupled SDEs for the diagonal and off-diagonal blocks.
//!
//! Stacked spaces follow [`crate::algebra::offdiag_pairs`]: the diagonal stack
//! concatenates vec(ϱ^{jj}) for j = 0..n_a, the off-diagonal stack concatenates
//! vec(ϱ^{jk}) over the slot order. Block matrix elements use
//! H^{jk}(t) = H_s(t)δ_{jk} + H_sa^{jk}(t) + I⟨φ_j|H_a(t)|φ_k⟩ and the L_m
//! analogue, with the probe L₀ entering as channel m = 0.

use crate::algebra::{block, c, offdiag_pairs, CMat, CVec, ModelSpec};
use crate::error::Result;

/// Deliberate corruption used by negative-control checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the assembled A₀₀ map.
    A00SignFlip,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "A00-sign" => Ok(Fault::A00SignFlip),
            other => Err(format!("unknown fault '{other}' (expected 'A00-sign')")),
        }
    }
}

/// Assembled generator matrices over the stacked block spaces at one time.
///
/// `b01_linear`/`b10_linear` are the state-independent parts of the noise
/// maps; the shared scalar Σ_l Tr((L₀+L₀†)ϱ^{ll}) is kept as a functional
/// via [`BlockGenerators::scalar`] because it changes every step.
#[derive(Clone, Debug)]
pub struct BlockGenerators {
    pub n_s: usize,
    pub n_a: usize,
    /// diag stack → offdiag stack.
    pub a00: CMat,
    /// offdiag stack → offdiag stack.
    pub a01: CMat,
    /// offdiag stack → diag stack.
    pub a11: CMat,
    /// diag stack → diag stack.
    pub a10: CMat,
    /// Linear part of the offdiag noise map (slotwise L₀·+·L₀†).
    pub b01_linear: CMat,
    /// Linear part of the diag noise map.
    pub b10_linear: CMat,
    /// L₀(t) + L₀(t)† on the principal space.
    pub l0_quadrature: CMat,
}

impl BlockGenerators {
    pub fn diag_dim(&self) -> usize {
        self.n_a * self.n_s * self.n_s
    }

    pub fn offdiag_dim(&self) -> usize {
        self.n_a * (self.n_a - 1) * self.n_s * self.n_s
    }

    /// The shared nonlinear scalar Σ_l Tr((L₀+L₀†)ϱ^{ll}).
    pub fn scalar(&self, diag_stack: &CVec) -> f64 {
        let n_s = self.n_s;
        let per = n_s * n_s;
        let mut acc = c(0., 0.);
        for slot in 0..self.n_a {
            let base = slot * per;
            // Tr(Q ϱ) = Σ_{i,j} Q_{ij} ϱ_{ji}, ϱ column-major in the stack.
            for i in 0..n_s {
                for j in 0..n_s {
                    acc += self.l0_quadrature[(i, j)] * diag_stack[base + i * n_s + j];
                }
            }
        }
        acc.re
    }

    /// Drift matrix of the combined stack [diag; offdiag]:
    /// [[A₁₀, A₁₁], [A₀₀, A₀₁]].
    pub fn drift_matrix(&self) -> CMat {
        let dd = self.diag_dim();
        let od = self.offdiag_dim();
        let mut m = CMat::zeros(dd + od, dd + od);
        m.view_mut((0, 0), (dd, dd)).copy_from(&self.a10);
        m.view_mut((0, dd), (dd, od)).copy_from(&self.a11);
        m.view_mut((dd, 0), (od, dd)).copy_from(&self.a00);
        m.view_mut((dd, dd), (od, od)).copy_from(&self.a01);
        m
    }

    pub fn inject_fault(&mut self, fault: Fault) {
        match fault {
            Fault::A00SignFlip => self.a00 = -&self.a00,
        }
    }
}

/// Blockwise operator families H^{jk}, L_m^{jk}, (L_m†L_m)^{jk} at one time.
struct BlockOps {
    n_s: usize,
    n_a: usize,
    h: Vec<Vec<CMat>>,
    l: Vec<Vec<Vec<CMat>>>,
    ldl: Vec<Vec<Vec<CMat>>>,
}

impl BlockOps {
    fn build(spec: &ModelSpec, t: f64) -> Result<Self> {
        let (n_s, n_a) = (spec.n_s, spec.n_a);
        let i_s = CMat::identity(n_s, n_s);
        let mel = |m: &CMat, j: usize, k: usize| -> num_complex::Complex<f64> {
            let mut acc = c(0., 0.);
            for a in 0..n_a {
                for b in 0..n_a {
                    acc += spec.aux_basis[j][a].conj() * m[(a, b)] * spec.aux_basis[k][b];
                }
            }
            acc
        };
        let h_s = spec.h_s.at(t);
        let h_a = spec.h_a.at(t);
        let h_sa = spec.h_sa.at(t);
        let mut h = vec![vec![CMat::zeros(n_s, n_s); n_a]; n_a];
        for j in 0..n_a {
            for k in 0..n_a {
                let mut m = block(spec, &h_sa, j, k)? + &i_s * mel(&h_a, j, k);
                if j == k {
                    m += &h_s;
                }
                h[j][k] = m;
            }
        }
        let n_ch = 1 + spec.n_channels();
        let mut l = vec![vec![vec![CMat::zeros(n_s, n_s); n_a]; n_a]; n_ch];
        let l0 = spec.l0.at(t);
        for j in 0..n_a {
            l[0][j][j] = l0.clone();
        }
        for (m_idx, cp) in spec.couplings.iter().enumerate() {
            let l_s = cp.l_s.at(t);
            let l_sa = cp.l_sa.at(t);
            let l_a = cp.l_a.at(t);
            for j in 0..n_a {
                for k in 0..n_a {
                    let mut m = block(spec, &l_sa, j, k)? + &i_s * mel(&l_a, j, k);
                    if j == k {
                        m += &l_s;
                    }
                    l[m_idx + 1][j][k] = m;
                }
            }
        }
        // (L†L)^{jk} = Σ_r (L^{rj})† L^{rk}.
        let mut ldl = vec![vec![vec![CMat::zeros(n_s, n_s); n_a]; n_a]; n_ch];
        for m_idx in 0..n_ch {
            for j in 0..n_a {
                for k in 0..n_a {
                    let mut acc = CMat::zeros(n_s, n_s);
                    for r in 0..n_a {
                        acc += l[m_idx][r][j].adjoint() * &l[m_idx][r][k];
                    }
                    ldl[m_idx][j][k] = acc;
                }
            }
        }
        Ok(Self { n_s, n_a, h, l, ldl })
    }

    /// Full blockwise drift of the coupled SDE system for slot (j,k),
    /// with `get(r,s)` returning ϱ^{rs}.
    fn full_drift_jk(&self, j: usize, k: usize, get: &dyn Fn(usize, usize) -> CMat) -> CMat {
        let n_a = self.n_a;
        let i = c(0., 1.);
        let mut out = CMat::zeros(self.n_s, self.n_s);
        for l in 0..n_a {
            out += (get(j, l) * &self.h[l][k] - &self.h[j][l] * get(l, k)) * i;
        }
        for m in 0..self.l.len() {
            for r in 0..n_a {
                for s in 0..n_a {
                    out += &self.l[m][j][r] * get(r, s) * self.l[m][k][s].adjoint();
                }
                out -= (&self.ldl[m][j][r] * get(r, k) + get(j, r) * &self.ldl[m][r][k])
                    * c(0.5, 0.0);
            }
        }
        out
    }

    /// A₀₀^{jk} (j ≠ k) applied to the diagonal blocks.
    fn a00_jk(&self, j: usize, k: usize, diag: &[CMat]) -> CMat {
        let i = c(0., 1.);
        let mut out = (&diag[j] * &self.h[j][k] - &self.h[j][k] * &diag[k]) * i;
        for m in 0..self.l.len() {
            for r in 0..self.n_a {
                out += &self.l[m][j][r] * &diag[r] * self.l[m][k][r].adjoint();
            }
            out -= (&self.ldl[m][j][k] * &diag[k] + &diag[j] * &self.ldl[m][j][k]) * c(0.5, 0.0);
        }
        out
    }

    /// A₀₁^{jk} (j ≠ k) applied to the off-diagonal blocks.
    fn a01_jk(&self, j: usize, k: usize, get: &dyn Fn(usize, usize) -> CMat) -> CMat {
        let n_a = self.n_a;
        let i = c(0., 1.);
        let mut out = CMat::zeros(self.n_s, self.n_s);
        for l in 0..n_a {
            if l != j {
                out += get(j, l) * &self.h[l][k] * i;
            }
            if l != k {
                out -= &self.h[j][l] * get(l, k) * i;
            }
        }
        for m in 0..self.l.len() {
            for r in 0..n_a {
                for s in 0..n_a {
                    if r != s {
                        out += &self.l[m][j][r] * get(r, s) * self.l[m][k][s].adjoint();
                    }
                }
                if r != k {
                    out -= &self.ldl[m][j][r] * get(r, k) * c(0.5, 0.0);
                }
                if r != j {
                    out -= get(j, r) * &self.ldl[m][r][k] * c(0.5, 0.0);
                }
            }
        }
        out
    }

    /// A₁₁^{jj} applied to the off-diagonal blocks.
    fn a11_jj(&self, j: usize, get: &dyn Fn(usize, usize) -> CMat) -> CMat {
        let n_a = self.n_a;
        let i = c(0., 1.);
        let mut out = CMat::zeros(self.n_s, self.n_s);
        for l in 0..n_a {
            if l != j {
                out += (get(j, l) * &self.h[l][j] - &self.h[j][l] * get(l, j)) * i;
            }
        }
        for m in 0..self.l.len() {
            for r in 0..n_a {
                for s in 0..n_a {
                    if r != s {
                        out += &self.l[m][j][r] * get(r, s) * self.l[m][j][s].adjoint();
                    }
                }
                if r != j {
                    out -= (&self.ldl[m][j][r] * get(r, j) + get(j, r) * &self.ldl[m][r][j])
                        * c(0.5, 0.0);
                }
            }
        }
        out
    }

    /// A₁₀^{jj} applied to the diagonal blocks.
    fn a10_jj(&self, j: usize, diag: &[CMat]) -> CMat {
        let i = c(0., 1.);
        let mut out = (&diag[j] * &self.h[j][j] - &self.h[j][j] * &diag[j]) * i;
        for m in 0..self.l.len() {
            for r in 0..self.n_a {
                out += &self.l[m][j][r] * &diag[r] * self.l[m][j][r].adjoint();
            }
            out -= (&self.ldl[m][j][j] * &diag[j] + &diag[j] * &self.ldl[m][j][j]) * c(0.5, 0.0);
        }
        out
    }
}

fn mat_from_slot_map(
    n_s: usize,
    n_src: usize,
    n_dst: usize,
    mut apply: impl FnMut(&[CMat]) -> Vec<CMat>,
) -> CMat {
    let per = n_s * n_s;
    let mut m = CMat::zeros(n_dst * per, n_src * per);
    let mut src = vec![CMat::zeros(n_s, n_s); n_src];
    for slot in 0..n_src {
        for col_in in 0..per {
            let (a, b) = (col_in % n_s, col_in / n_s);
            src[slot][(a, b)] = c(1., 0.);
            let out = apply(&src);
            debug_assert_eq!(out.len(), n_dst);
            for (ds, blk) in out.iter().enumerate() {
                for (idx, val) in blk.as_slice().iter().enumerate() {
                    m[(ds * per + idx, slot * per + col_in)] = *val;
                }
            }
            src[slot][(a, b)] = c(0., 0.);
        }
    }
    m
}

/// Materialize all six maps over the stacked spaces at time t.
pub fn block_generators(spec: &ModelSpec, t: f64) -> Result<BlockGenerators> {
    let ops = BlockOps::build(spec, t)?;
    let (n_s, n_a) = (spec.n_s, spec.n_a);
    let pairs = offdiag_pairs(n_a);
    let n_off = pairs.len();
    let slot_of = |j: usize, k: usize| crate::algebra::offdiag_slot(n_a, j, k);

    let a00 = mat_from_slot_map(n_s, n_a, n_off, |diag| {
        pairs.iter().map(|&(j, k)| ops.a00_jk(j, k, diag)).collect()
    });
    let a01 = mat_from_slot_map(n_s, n_off, n_off, |off| {
        let get = |r: usize, s: usize| {
            if r == s {
                CMat::zeros(n_s, n_s)
            } else {
                off[slot_of(r, s)].clone()
            }
        };
        pairs.iter().map(|&(j, k)| ops.a01_jk(j, k, &get)).collect()
    });
    let a11 = mat_from_slot_map(n_s, n_off, n_a, |off| {
        let get = |r: usize, s: usize| {
            if r == s {
                CMat::zeros(n_s, n_s)
            } else {
                off[slot_of(r, s)].clone()
            }
        };
        (0..n_a).map(|j| ops.a11_jj(j, &get)).collect()
    });
    let a10 = mat_from_slot_map(n_s, n_a, n_a, |diag| {
        (0..n_a).map(|j| ops.a10_jj(j, diag)).collect()
    });

    let l0 = spec.l0.at(t);
    let per_slot_g = crate::superop::left_mul(&l0) + crate::superop::right_mul(&l0.adjoint());
    let slot_identity = |count: usize| {
        let per = n_s * n_s;
        let mut m = CMat::zeros(count * per, count * per);
        for s in 0..count {
            m.view_mut((s * per, s * per), (per, per)).copy_from(&per_slot_g);
        }
        m
    };
    let b10_linear = slot_identity(n_a);
    let b01_linear = slot_identity(n_off);

    Ok(BlockGenerators {
        n_s,
        n_a,
        a00,
        a01,
        a11,
        a10,
        b01_linear,
        b10_linear,
        l0_quadrature: spec.l0_quadrature(t),
    })
}

/// Full blockwise drift of the coupled system evaluated directly from the
/// displayed sums (test oracle; the engines use the assembled matrices).
pub fn blockwise_drift(spec: &ModelSpec, t: f64, state: &crate::algebra::BlockState) -> Result<crate::algebra::BlockState> {
    let ops = BlockOps::build(spec, t)?;
    let get = |r: usize, s: usize| state.get(r, s).clone();
    let diag = (0..spec.n_a).map(|j| ops.full_drift_jk(j, j, &get)).collect();
    let offdiag = offdiag_pairs(spec.n_a)
        .into_iter()
        .map(|(j, k)| ops.full_drift_jk(j, k, &get))
        .collect();
    Ok(crate::algebra::BlockState { n_s: spec.n_s, n_a: spec.n_a, diag, offdiag })
}
