//! Seeded Wiener paths, Itô Euler–Maruyama stepping, and propagation of
//! stochastic exponentials and their inverses.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{c, CMat, CVec};
use crate::error::{Error, Result};

/// Name of the pseudo-random generator, recorded in run manifests.
pub const GENERATOR_NAME: &str = "ChaCha20";

/// Residual ‖Φ Φ⁻¹ − I‖_F above which a reinversion checkpoint aborts.
pub const INVERSE_RESIDUAL_ABORT: f64 = 1e-4;

pub const DEFAULT_REINVERSION_PERIOD: usize = 100;

/// Per-trajectory seed derived from a master seed (SplitMix64 mix).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seeded Wiener increments dI_n ~ N(0, dt) on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    pub t0: f64,
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl NoisePath {
    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    /// Grid times t0, t0+dt, …, t0+N·dt (N+1 points).
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|n| self.t0 + n as f64 * self.dt).collect()
    }

    /// The same Brownian path on a grid coarsened by an integer factor.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(Error::Grid(format!(
                "cannot coarsen {} steps by factor {factor}",
                self.n_steps()
            )));
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|chunk| chunk.iter().sum())
            .collect();
        Ok(NoisePath { seed: self.seed, t0: self.t0, dt: self.dt * factor as f64, increments })
    }
}

/// Draw a seeded noise path; deterministic in (seed, dt, n_steps).
pub fn wiener_path(seed: u64, t0: f64, dt: f64, n_steps: usize) -> Result<NoisePath> {
    if dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sqrt_dt = dt.sqrt();
    let increments = (0..n_steps)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sqrt_dt
        })
        .collect();
    Ok(NoisePath { seed, t0, dt, increments })
}

/// One Itô Euler–Maruyama step: x + drift·dt + diffusion·dI, with drift and
/// diffusion evaluated at the left endpoint.
pub fn em_step(x: &CVec, drift: &CVec, diffusion: &CVec, di: f64, dt: f64) -> Result<CVec> {
    if drift.len() != x.len() || diffusion.len() != x.len() {
        return Err(Error::Dimension(format!(
            "state {}, drift {}, diffusion {}",
            x.len(),
            drift.len(),
            diffusion.len()
        )));
    }
    let out = x + drift * c(dt, 0.0) + diffusion * c(di, 0.0);
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("non-finite state after EM step".into()));
    }
    Ok(out)
}

/// Forward recursion for a stochastic exponential Φ and its inverse.
///
/// Φ_{n+1} = (I + A_n dt + B_n dI_n) Φ_n with Φ_0 = I. The inverse
/// accumulates the exact inverses of the discrete step factors,
/// Φ⁻¹_{n+1} = Φ⁻¹_n (I + A_n dt + B_n dI_n)⁻¹; inverting the continuous
/// flow instead leaves a per-step defect B²(dI² − dt) that random-walks past
/// any useful residual bound. A direct inversion of the accumulated Φ every
/// `reinversion_period` steps bounds roundoff drift, with a hard abort if
/// the checkpoint residual is out of range.
pub struct StochExpStepper {
    pub phi: CMat,
    pub phi_inv: CMat,
    step: usize,
    reinversion_period: usize,
    /// Largest residual ‖Φ Φ⁻¹ − I‖_F seen at a checkpoint.
    pub max_residual: f64,
}

impl StochExpStepper {
    pub fn new(dim: usize, reinversion_period: usize) -> Self {
        Self {
            phi: CMat::identity(dim, dim),
            phi_inv: CMat::identity(dim, dim),
            step: 0,
            reinversion_period: reinversion_period.max(1),
            max_residual: 0.0,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Advance one step with drift generator `a` and diffusion generator `b`.
    pub fn advance(&mut self, a: &CMat, b: &CMat, di: f64, dt: f64) -> Result<()> {
        let dim = self.phi.nrows();
        if dim == 0 {
            self.step += 1;
            return Ok(());
        }
        let ident = CMat::identity(dim, dim);
        let fwd = &ident + a * c(dt, 0.0) + b * c(di, 0.0);
        let bwd = fwd.clone().try_inverse().ok_or(Error::Numerical {
            step: self.step,
            reason: "singular step factor (dt too large?)".into(),
        })?;
        self.phi = &fwd * &self.phi;
        self.phi_inv = &self.phi_inv * &bwd;
        self.step += 1;
        if self.step % self.reinversion_period == 0 {
            let residual = (&self.phi * &self.phi_inv - &ident).norm();
            self.max_residual = self.max_residual.max(residual);
            if residual > INVERSE_RESIDUAL_ABORT {
                return Err(Error::Numerical {
                    step: self.step,
                    reason: format!(
                        "propagator inverse residual {residual:.2e} exceeds {INVERSE_RESIDUAL_ABORT:.0e} (dt too large?)"
                    ),
                });
            }
            self.phi_inv = self.phi.clone().try_inverse().ok_or(Error::Numerical {
                step: self.step,
                reason: "singular propagator at reinversion checkpoint".into(),
            })?;
        }
        if self.phi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical {
                step: self.step,
                reason: "non-finite propagator".into(),
            });
        }
        Ok(())
    }
}

/// Time-indexed stochastic exponential with matching inverses on one path.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorPath {
    pub t0: f64,
    pub dt: f64,
    pub mats: Vec<CMat>,
    pub invs: Vec<CMat>,
    pub reinversion_period: usize,
}

impl PropagatorPath {
    pub fn dim(&self) -> usize {
        self.mats.first().map(|m| m.nrows()).unwrap_or(0)
    }

    pub fn n_steps(&self) -> usize {
        self.mats.len().saturating_sub(1)
    }

    /// Binary cache: header {dim, count, dt, t0, reinversion_period}, then the
    /// Φ matrices followed by the inverses, row-major, each entry as two
    /// little-endian f64 (re, im).
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&(self.dim() as u64).to_le_bytes())?;
        f.write_all(&(self.mats.len() as u64).to_le_bytes())?;
        f.write_all(&self.dt.to_le_bytes())?;
        f.write_all(&self.t0.to_le_bytes())?;
        f.write_all(&(self.reinversion_period as u64).to_le_bytes())?;
        for m in self.mats.iter().chain(self.invs.iter()) {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    f.write_all(&m[(i, j)].re.to_le_bytes())?;
                    f.write_all(&m[(i, j)].im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut u64buf = [0u8; 8];
        let mut read_u64 = |f: &mut dyn Read| -> Result<u64> {
            f.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let dim = read_u64(&mut f)? as usize;
        let count = read_u64(&mut f)? as usize;
        let mut f64buf = [0u8; 8];
        let mut read_f64 = |f: &mut dyn Read| -> Result<f64> {
            f.read_exact(&mut f64buf)?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let dt = read_f64(&mut f)?;
        let t0 = read_f64(&mut f)?;
        let mut u64buf2 = [0u8; 8];
        f.read_exact(&mut u64buf2)?;
        let reinversion_period = u64::from_le_bytes(u64buf2) as usize;
        let read_mats = |f: &mut dyn Read| -> Result<Vec<CMat>> {
            (0..count)
                .map(|_| {
                    let mut m = CMat::zeros(dim, dim);
                    let mut buf = [0u8; 8];
                    for i in 0..dim {
                        for j in 0..dim {
                            f.read_exact(&mut buf)?;
                            let re = f64::from_le_bytes(buf);
                            f.read_exact(&mut buf)?;
                            let im = f64::from_le_bytes(buf);
                            m[(i, j)] = c(re, im);
                        }
                    }
                    Ok(m)
                })
                .collect()
        };
        let mats = read_mats(&mut f)?;
        let invs = read_mats(&mut f)?;
        Ok(Self { t0, dt, mats, invs, reinversion_period })
    }
}

/// Propagate a stochastic exponential along a noise path, storing Φ_n and
/// Φ_n⁻¹ at every grid point.
///
/// `scalar_feed(n, t_n)` supplies the trajectory-dependent scalar that is
/// subtracted from the diagonal of the diffusion generator at step n.
pub fn propagate_stoch_exp(
    drift_gen: &dyn Fn(f64) -> CMat,
    diff_gen: &dyn Fn(f64) -> CMat,
    scalar_feed: &dyn Fn(usize, f64) -> f64,
    path: &NoisePath,
    reinversion_period: usize,
) -> Result<PropagatorPath> {
    let dim = drift_gen(path.t0).nrows();
    let mut stepper = StochExpStepper::new(dim, reinversion_period);
    let mut mats = Vec::with_capacity(path.n_steps() + 1);
    let mut invs = Vec::with_capacity(path.n_steps() + 1);
    mats.push(stepper.phi.clone());
    invs.push(stepper.phi_inv.clone());
    let ident = CMat::identity(dim, dim);
    for (n, &di) in path.increments.iter().enumerate() {
        let t = path.t0 + n as f64 * path.dt;
        let a = drift_gen(t);
        let b = diff_gen(t) - &ident * c(scalar_feed(n, t), 0.0);
        stepper.advance(&a, &b, di, path.dt)?;
        mats.push(stepper.phi.clone());
        invs.push(stepper.phi_inv.clone());
    }
    Ok(PropagatorPath { t0: path.t0, dt: path.dt, mats, invs, reinversion_period })
}

/// Variation-of-constants solution on the propagator grid:
/// x_n = Φ_n x0 + Φ_n Σ_{m<n} Φ_m⁻¹ source_m dt (left-rectangle quadrature).
pub fn variation_of_constants(
    prop: &PropagatorPath,
    source: &[CVec],
    x0_q: &CVec,
) -> Result<Vec<CVec>> {
    let n = prop.n_steps();
    if source.len() < n {
        return Err(Error::Grid(format!(
            "source has {} samples but the propagator grid has {} steps",
            source.len(),
            n
        )));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut running = CVec::zeros(prop.dim());
    for m in 0..=n {
        out.push(&prop.mats[m] * (x0_q + &running * c(prop.dt, 0.0)));
        if m < n {
            running += &prop.invs[m] * &source[m];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wiener_rejects_bad_arguments() {
        assert!(wiener_path(1, 0.0, 0.0, 10).is_err());
        assert!(wiener_path(1, 0.0, -1e-3, 10).is_err());
        assert!(wiener_path(1, 0.0, 1e-3, 0).is_err());
    }

    #[test]
    fn wiener_deterministic_in_seed() {
        let a = wiener_path(123, 0.0, 1e-3, 1000).unwrap();
        let b = wiener_path(123, 0.0, 1e-3, 1000).unwrap();
        assert_eq!(a.increments, b.increments);
        let c = wiener_path(124, 0.0, 1e-3, 1000).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn wiener_sample_variance_band() {
        let dt = 1e-3;
        let path = wiener_path(42, 0.0, dt, 100_000).unwrap();
        let n = path.increments.len() as f64;
        let mean: f64 = path.increments.iter().sum::<f64>() / n;
        let var: f64 = path.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(var >= 0.97 * dt && var <= 1.03 * dt, "sample variance {var} outside band");
        // Mean within 5 standard errors of 0.
        let se = (dt / n).sqrt();
        assert!(mean.abs() < 5.0 * se, "sample mean {mean} beyond 5 SE {se}");
    }

    #[test]
    fn wiener_increments_pass_ks_normality() {
        // Kolmogorov–Smirnov against N(0, dt) at significance 1e-3.
        let dt = 1e-3;
        let path = wiener_path(7, 0.0, dt, 100_000).unwrap();
        let mut xs: Vec<f64> = path.increments.iter().map(|x| x / dt.sqrt()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        // Abramowitz–Stegun 7.1.26 erf approximation, |err| < 1.5e-7.
        let erf = |x: f64| {
            let sign = x.signum();
            let x = x.abs();
            let t = 1.0 / (1.0 + 0.3275911 * x);
            let poly = t
                * (0.254829592
                    + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
            sign * (1.0 - poly * (-x * x).exp())
        };
        let cdf = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
        let mut d = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - f).abs());
        }
        // Critical value sqrt(-ln(α/2)/2)/sqrt(n) at α = 1e-3.
        let crit = (-(0.5e-3f64).ln() / 2.0).sqrt() / n.sqrt();
        assert!(d < crit, "KS statistic {d} exceeds critical value {crit}");
    }

    #[test]
    fn coarsen_preserves_brownian_path() {
        let path = wiener_path(5, 0.0, 1e-3, 1000).unwrap();
        let coarse = path.coarsen(4).unwrap();
        assert_eq!(coarse.n_steps(), 250);
        assert_abs_diff_eq!(coarse.dt, 4e-3, epsilon = 1e-15);
        let total_fine: f64 = path.increments.iter().sum();
        let total_coarse: f64 = coarse.increments.iter().sum();
        assert_abs_diff_eq!(total_fine, total_coarse, epsilon = 1e-12);
        assert!(path.coarsen(3).is_err());
    }

    #[test]
    fn em_step_trivial_cases() {
        let x = CVec::from_vec(vec![c(1., 2.), c(-0.5, 0.)]);
        let zero = CVec::zeros(2);
        let out = em_step(&x, &zero, &zero, 0.3, 1e-3).unwrap();
        assert_eq!(out, x);
        let drift = CVec::from_vec(vec![c(1., 0.), c(0., 1.)]);
        let out = em_step(&x, &drift, &zero, 0.0, 1e-3).unwrap();
        assert_abs_diff_eq!((out - (&x + &drift * c(1e-3, 0.))).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn em_step_shape_mismatch() {
        let x = CVec::zeros(2);
        let bad = CVec::zeros(3);
        assert!(em_step(&x, &bad, &x, 0.0, 1e-3).is_err());
    }

    #[test]
    fn em_martingale_property_monte_carlo() {
        // dx = x dI → E[x_t] = x_0.
        let dt = 1e-3;
        let n_steps = 1000;
        let n_paths = 10_000;
        let x0 = 1.0;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n_paths {
            let path = wiener_path(derive_seed(2024, i), 0.0, dt, n_steps).unwrap();
            let mut x = CVec::from_vec(vec![c(x0, 0.)]);
            for &di in &path.increments {
                let diffusion = x.clone();
                x = em_step(&x, &CVec::zeros(1), &diffusion, di, dt).unwrap();
            }
            sum += x[0].re;
            sumsq += x[0].re * x[0].re;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0);
        let se = (var / n).sqrt();
        assert!((mean - x0).abs() < 3.0 * se, "mean {mean} vs {x0} beyond 3 SE {se}");
    }

    #[test]
    fn stoch_exp_deterministic_limit() {
        // B = 0, constant diagonal A → Φ_N ≈ exp(A T) with O(dt) relative error.
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(-0.5, 0.3), c(0.2, -0.1)]));
        let dt = 1e-4;
        let n = 10_000;
        let path = NoisePath { seed: 0, t0: 0.0, dt, increments: vec![0.0; n] };
        let prop = propagate_stoch_exp(&|_| a.clone(), &|_| CMat::zeros(2, 2), &|_, _| 0.0, &path, 100)
            .unwrap();
        let t = dt * n as f64;
        for i in 0..2 {
            let exact = (a[(i, i)] * c(t, 0.)).exp();
            let got = prop.mats[n][(i, i)];
            assert!((got - exact).norm() < 1e-3, "entry {i}: {got} vs {exact}");
        }
        assert_eq!(prop.mats[0], CMat::identity(2, 2));
    }

    #[test]
    fn stoch_exp_inverse_residual_stays_small() {
        // B = 0: cumulative inverse drift bounded with M = 100.
        let a = CMat::from_row_slice(2, 2, &[c(0., 1.), c(0.3, 0.), c(0.3, 0.), c(0., -1.)]);
        let dt = 1e-4;
        let path = NoisePath { seed: 0, t0: 0.0, dt, increments: vec![0.0; 5000] };
        let prop =
            propagate_stoch_exp(&|_| a.clone(), &|_| CMat::zeros(2, 2), &|_, _| 0.0, &path, 100)
                .unwrap();
        for n in (0..=5000).step_by(500) {
            let res = (&prop.mats[n] * &prop.invs[n] - CMat::identity(2, 2)).norm();
            assert!(res <= 1e-6, "step {n}: residual {res:.2e}");
        }
    }

    #[test]
    fn stoch_exp_geometric_brownian_strong_order() {
        // dΦ = b Φ dI with closed form exp(b I_t − ½ b² t).
        let b = 0.8;
        let t_final = 1.0;
        let dts = [1e-2, 1e-3, 1e-4];
        let fine_steps = 10_000;
        let n_paths = 60;
        let mut errors = vec![0.0f64; dts.len()];
        for p in 0..n_paths {
            let fine = wiener_path(derive_seed(99, p), 0.0, t_final / fine_steps as f64, fine_steps)
                .unwrap();
            let total_i: f64 = fine.increments.iter().sum();
            let exact = (b * total_i - 0.5 * b * b * t_final).exp();
            for (k, &dt) in dts.iter().enumerate() {
                let factor = (dt / (t_final / fine_steps as f64)).round() as usize;
                let path = fine.coarsen(factor).unwrap();
                let bmat = CMat::from_element(1, 1, c(b, 0.));
                let prop = propagate_stoch_exp(
                    &|_| CMat::zeros(1, 1),
                    &|_| bmat.clone(),
                    &|_, _| 0.0,
                    &path,
                    100,
                )
                .unwrap();
                errors[k] += (prop.mats[path.n_steps()][(0, 0)].re - exact).abs();
            }
        }
        for e in errors.iter_mut() {
            *e /= n_paths as f64;
        }
        // Least-squares slope of log error vs log dt.
        let logs: Vec<(f64, f64)> =
            dts.iter().zip(&errors).map(|(&d, &e)| (d.ln(), e.ln())).collect();
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|p| p.0).sum();
        let sy: f64 = logs.iter().map(|p| p.1).sum();
        let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 0.4, "observed strong order {slope:.3} below 0.4 ({errors:?})");
    }

    #[test]
    fn variation_of_constants_homogeneous() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(-0.2, 0.1), c(0.1, 0.)]));
        let path = NoisePath { seed: 0, t0: 0.0, dt: 1e-3, increments: vec![0.0; 100] };
        let prop =
            propagate_stoch_exp(&|_| a.clone(), &|_| CMat::zeros(2, 2), &|_, _| 0.0, &path, 100)
                .unwrap();
        let x0 = CVec::from_vec(vec![c(1., 0.), c(0., 1.)]);
        let source = vec![CVec::zeros(2); 101];
        let sol = variation_of_constants(&prop, &source, &x0).unwrap();
        for n in [0, 50, 100] {
            let expected = &prop.mats[n] * &x0;
            assert_abs_diff_eq!((&sol[n] - expected).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn variation_of_constants_plain_quadrature() {
        // Zero generators → running left-rectangle integral of the source.
        let path = NoisePath { seed: 0, t0: 0.0, dt: 0.1, increments: vec![0.0; 10] };
        let prop = propagate_stoch_exp(
            &|_| CMat::zeros(1, 1),
            &|_| CMat::zeros(1, 1),
            &|_, _| 0.0,
            &path,
            100,
        )
        .unwrap();
        let source: Vec<CVec> =
            (0..=10).map(|m| CVec::from_vec(vec![c(m as f64, 0.)])).collect();
        let sol = variation_of_constants(&prop, &source, &CVec::zeros(1)).unwrap();
        // Σ_{m<n} m · 0.1
        for n in 0usize..=10 {
            let expected = 0.1 * (n * n.saturating_sub(1) / 2) as f64;
            assert_abs_diff_eq!(sol[n][0].re, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn variation_of_constants_grid_mismatch() {
        let path = NoisePath { seed: 0, t0: 0.0, dt: 0.1, increments: vec![0.0; 10] };
        let prop = propagate_stoch_exp(
            &|_| CMat::zeros(1, 1),
            &|_| CMat::zeros(1, 1),
            &|_, _| 0.0,
            &path,
            100,
        )
        .unwrap();
        let short = vec![CVec::zeros(1); 5];
        assert!(variation_of_constants(&prop, &short, &CVec::zeros(1)).is_err());
    }

    #[test]
    fn propagator_cache_round_trip() {
        let a = CMat::from_row_slice(2, 2, &[c(0., 1.), c(0.2, 0.1), c(0.1, 0.), c(0., -1.)]);
        let path = wiener_path(3, 0.0, 1e-2, 20).unwrap();
        let prop = propagate_stoch_exp(
            &|_| a.clone(),
            &|_| CMat::identity(2, 2) * c(0.1, 0.),
            &|_, _| 0.0,
            &path,
            10,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("prop.bin");
        prop.write_cache(&file).unwrap();
        let back = PropagatorPath::read_cache(&file).unwrap();
        assert_eq!(prop, back);
    }

    #[test]
    fn derived_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
