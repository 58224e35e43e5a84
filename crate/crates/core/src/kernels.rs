//! Closed-form write/read kernels and the full-cycle kernel.
//!
//! With dimensionless time `t = Omega t_phys`, length `z = (2 g^2 N / Omega) z_phys`
//! and a drive coupling of strength `chi`, the spin coherence written by an
//! input pulse is `b(z, T) = -(chi^*/lambda) int a(0, t') G(z, T - t') dt'`, where
//!
//! ```text
//! G(z, t) = int_0^t f0(z, t', r) conj(f0(z, t - t', -r)) dt'
//! f0(z, t, r) = exp(-i (omega + r) t) J0(sqrt(z t (1 + r / omega))),  omega = sqrt(r^2 + chi^2)
//! ```
//!
//! The same `G` maps the stored coherence to the retrieved field, so one
//! routine serves both stages.

use std::sync::Arc;

use num_traits::Float;
use rayon::prelude::*;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::ModeIndex;
use crate::overlap::{ChiNormalization, Drive};
use crate::scalar::{cis, trapezoid_weights, Cplx, Real};

/// Scalars usable by the FFT-based convolutions.
pub trait FftReal: Real + FftNum {}
impl<T: Real + FftNum> FftReal for T {}

/// Largest admissible `chi_eff` above one.
pub const CHI_EFF_SLACK: f64 = 0.1;

/// Dimensionless parameters of one memory configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams<T> {
    /// Detuning over twice the Rabi frequency. The sign selects the rotation sense.
    pub r: T,
    /// Magnitude of the normalized overlap of the active drive (1 for a plane wave).
    pub chi_eff: T,
    pub l_tilde: T,
    pub t_write: T,
    pub t_read: T,
    /// Flux-to-coherence scaling constant of the continuity law.
    pub epsilon2: T,
}

impl<T: Real> MemoryParams<T> {
    /// Plane-wave parameters with `t_read = t_write` and `epsilon2 = 1/2`.
    pub fn plane_wave(r: T, l_tilde: T, t_write: T) -> Self {
        MemoryParams { r, chi_eff: T::one(), l_tilde, t_write, t_read: t_write, epsilon2: T::lit(0.5) }
    }

    pub fn with_chi(self, chi_eff: T) -> Self {
        MemoryParams { chi_eff, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} = {v} must be positive and finite")))
            }
        };
        positive(self.l_tilde, "L_tilde")?;
        positive(self.t_write, "T_W")?;
        positive(self.t_read, "T_R")?;
        positive(self.epsilon2, "epsilon2")?;
        positive(self.chi_eff, "chi_eff")?;
        if self.chi_eff > T::one() + T::lit(CHI_EFF_SLACK) {
            return Err(Error::InvalidParams(format!("chi_eff = {} exceeds 1 + {CHI_EFF_SLACK}", self.chi_eff)));
        }
        if !self.r.is_finite() {
            return Err(Error::InvalidParams("detuning r must be finite".into()));
        }
        Ok(())
    }

    /// Amplitude unit factor `sqrt(2 epsilon2)` between the field and the coherences.
    pub fn field_scale(&self) -> T {
        (T::lit(2.0) * self.epsilon2).sqrt()
    }
}

/// `mu`, `nu` and the effective frequency `sqrt(r^2 + chi^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuxiliaryFactors<T> {
    pub mu: T,
    pub nu: T,
    pub omega_eff: T,
}

impl<T: Real> AuxiliaryFactors<T> {
    pub fn new(r: T, chi: T) -> Self {
        let omega_eff = (r * r + chi * chi).sqrt();
        let ratio = if omega_eff == T::zero() { T::zero() } else { r / omega_eff };
        AuxiliaryFactors { mu: T::one() + ratio, nu: T::one() - ratio, omega_eff }
    }
}

/// `exp(-i (omega + r) t) J0(sqrt(z t mu))` on `0 <= t <= support`, zero elsewhere.
pub fn f0_factor<T: Real>(z: T, t: T, r: T, chi: T, support: T) -> Cplx<T> {
    if t < T::zero() || t > support {
        return Cplx::new(T::zero(), T::zero());
    }
    let aux = AuxiliaryFactors::new(r, chi);
    let radicand = z * t * aux.mu;
    debug_assert!(radicand >= T::zero(), "negative Bessel radicand {radicand}");
    let radicand = radicand.max(T::zero());
    cis(-(aux.omega_eff + r) * t) * radicand.sqrt().bessel_j0()
}

/// Large-detuning form `exp(-2 i r t) J0(sqrt(2 z t))`.
pub fn f0_raman_limit<T: Real>(z: T, t: T, r: T) -> Cplx<T> {
    if t < T::zero() {
        return Cplx::new(T::zero(), T::zero());
    }
    cis(-T::lit(2.0) * r * t) * (T::lit(2.0) * z * t).sqrt().bessel_j0()
}

/// Default convolution step: `min(T/256, 0.05)`, refined so the Bessel
/// factors change little per step near `t = 0` where they are steepest.
///
/// The carrier rotation is integrated exactly and does not constrain the step.
pub fn default_convolution_step<T: Real>(r: T, chi: T, z_max: T, support: T) -> T {
    let aux = AuxiliaryFactors::new(r, chi);
    let bessel = T::lit(0.1) / (T::one() + aux.mu.max(aux.nu) * z_max / T::lit(4.0));
    (support / T::lit(256.0)).min(T::lit(0.05)).min(bessel)
}

/// Product-integration weights `(int_0^1 e^{-i theta u} (1 - u) du, int_0^1 e^{-i theta u} u du)`.
pub fn filon_weights<T: Real>(theta: T) -> (Cplx<T>, Cplx<T>) {
    let q = Cplx::new(T::zero(), -theta);
    let (whole, upper) = if Float::abs(theta) < T::lit(0.25) {
        // series in q; 14 terms reach round-off for |q| < 1/4
        let (mut whole, mut upper) = (Cplx::new(T::zero(), T::zero()), Cplx::new(T::zero(), T::zero()));
        let mut power = Cplx::new(T::one(), T::zero());
        let mut factorial = T::one();
        for n in 0..14 {
            let nf = T::from_count(n);
            whole = whole + power / (factorial * (nf + T::one()));
            upper = upper + power / (factorial * (nf + T::lit(2.0)));
            power = power * q;
            factorial = factorial * (nf + T::one());
        }
        (whole, upper)
    } else {
        let e = q.exp();
        let one = Cplx::new(T::one(), T::zero());
        let whole = (e - one) / q;
        (whole, e / q - (e - one) / (q * q))
    };
    (whole - upper, upper)
}

/// Trapezoidal convolution `c_k = h [sum_{j<=k} a_j b_{k-j} - (a_0 b_k + a_k b_0)/2]`
/// for `k < min(a.len(), b.len())`, evaluated with FFTs.
pub fn convolve_trapezoid<T: FftReal>(a: &[Cplx<T>], b: &[Cplx<T>], step: T) -> Vec<Cplx<T>> {
    let n = a.len().min(b.len());
    if n == 0 {
        return Vec::new();
    }
    let plan = ConvolutionPlan::new(n);
    plan.convolve(&a[..n], &b[..n], step)
}

/// Reusable FFT plan for convolutions of a fixed length.
pub struct ConvolutionPlan<T: FftReal> {
    n: usize,
    size: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: FftReal> ConvolutionPlan<T> {
    pub fn new(n: usize) -> Self {
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        ConvolutionPlan { n, size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
    }

    /// Discrete convolution `sum_{j<=k} a_j b_{k-j}` for `k < n`.
    pub fn discrete(&self, a: &[Cplx<T>], b: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let n = self.n;
        assert!(a.len() >= n && b.len() >= n, "convolution inputs shorter than the plan");
        let zero = Cplx::new(T::zero(), T::zero());
        let mut fa = vec![zero; self.size];
        let mut fb = vec![zero; self.size];
        fa[..n].copy_from_slice(&a[..n]);
        fb[..n].copy_from_slice(&b[..n]);
        self.forward.process(&mut fa);
        self.forward.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = *x * *y;
        }
        self.inverse.process(&mut fa);
        let norm = T::one() / T::from_count(self.size);
        fa.truncate(n);
        fa.iter_mut().for_each(|v| *v = *v * norm);
        fa
    }

    pub fn convolve(&self, a: &[Cplx<T>], b: &[Cplx<T>], step: T) -> Vec<Cplx<T>> {
        let half = T::lit(0.5) * step;
        self.discrete(a, b)
            .into_iter()
            .enumerate()
            .map(|(k, v)| v * step - (a[0] * b[k] + a[k] * b[0]) * half)
            .collect()
    }
}

/// `G(z, t_k)` for `t_k = k * step`, `k = 0..n`.
///
/// Writing `G(t) = e^{i (omega - r) t} int_0^t e^{-2 i omega t'} phi(t') psi(t - t') dt'`
/// with `phi = J0(sqrt(mu z t))`, `psi = J0(sqrt(nu z t))`, the rotation is
/// integrated exactly against piecewise-linear `phi psi`.
pub fn g_kernel_row<T: FftReal>(z: T, r: T, chi: T, step: T, n: usize, plan: &ConvolutionPlan<T>) -> Vec<Cplx<T>> {
    let aux = AuxiliaryFactors::new(r, chi);
    let carrier = T::lit(2.0) * aux.omega_eff;
    let (mut rotating, mut plain) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let t = step * T::from_count(k);
        rotating.push(cis(-carrier * t) * (z * t * aux.mu).max(T::zero()).sqrt().bessel_j0());
        plain.push(Cplx::new((z * t * aux.nu).max(T::zero()).sqrt().bessel_j0(), T::zero()));
    }
    let theta = carrier * step;
    let (lower, upper) = filon_weights(theta);
    let upper = upper * cis(theta);
    let inner = lower + upper;
    let slow = aux.omega_eff - r;
    plan.discrete(&rotating, &plain)
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let v = c * inner - rotating[0] * plain[k] * upper - rotating[k] * plain[0] * lower;
            v * cis(slow * step * T::from_count(k)) * step
        })
        .collect()
}

/// Large-detuning kernel `[1 * f](z, t_k) = int_0^{t_k} exp(-2 i r t') J0(sqrt(2 z t')) dt'`,
/// with the rotation integrated exactly against piecewise-linear `J0`.
pub fn g_raman_limit_row<T: Real>(z: T, r: T, step: T, n: usize) -> Vec<Cplx<T>> {
    let carrier = T::lit(2.0) * r;
    let (lower, upper) = filon_weights(carrier * step);
    let bessel = |k: usize| (T::lit(2.0) * z * step * T::from_count(k)).sqrt().bessel_j0();
    let mut out = Vec::with_capacity(n);
    let mut acc = Cplx::new(T::zero(), T::zero());
    out.push(acc);
    for k in 1..n {
        let start = cis(-carrier * step * T::from_count(k - 1));
        acc = acc + start * (lower * bessel(k - 1) + upper * bessel(k)) * step;
        out.push(acc);
    }
    out
}

/// `G(z, t)` at a single point by direct trapezoidal convolution with step at most `step`.
///
/// Refuses steps coarser than `support / 64`.
pub fn g_kernel<T: Real>(z: T, t: T, r: T, chi: T, support: T, step: T) -> Result<Cplx<T>> {
    let limit = support / T::lit(64.0);
    if step > limit {
        return Err(Error::GridTooCoarse { step: step.to_f64_lossy(), limit: limit.to_f64_lossy() });
    }
    if t <= T::zero() {
        return Ok(Cplx::new(T::zero(), T::zero()));
    }
    let n = (t / step).ceil().to_usize().unwrap_or(1).max(1);
    let h = t / T::from_count(n);
    let mut acc = Cplx::new(T::zero(), T::zero());
    for k in 0..=n {
        let tk = h * T::from_count(k);
        let w = if k == 0 || k == n { T::lit(0.5) } else { T::one() };
        let fast = f0_factor(z, tk, r, chi, support);
        let slow = f0_factor(z, t - tk, -r, chi, support).conj();
        acc = acc + fast * slow * w;
    }
    Ok(acc * h)
}

/// Uniform axis `start + k * step`, `k = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis<T> {
    pub start: T,
    pub step: T,
    pub n: usize,
}

impl<T: Real> Axis<T> {
    /// `n` nodes spanning `[0, end]`.
    pub fn span(end: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridMismatch(format!("axis needs at least two nodes, got {n}")));
        }
        if !(end > T::zero()) {
            return Err(Error::GridMismatch(format!("axis end {end} must be positive")));
        }
        Ok(Axis { start: T::zero(), step: end / T::from_count(n - 1), n })
    }

    pub fn node(&self, k: usize) -> T {
        self.start + self.step * T::from_count(k)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    pub fn end(&self) -> T {
        self.node(self.n - 1)
    }

    pub fn weights(&self) -> Vec<T> {
        trapezoid_weights(self.n, self.step)
    }
}

/// Grid sizes shared by the kernel and integrator engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Nodes along the cell, including both faces.
    pub nz: usize,
    /// Output samples per stage, including both ends.
    pub nt: usize,
    /// Convolution sub-steps per output interval; `None` picks the default step rule.
    pub kernel_substeps: Option<usize>,
    /// Integrator sub-steps per output interval; `None` picks the default rule.
    pub pde_substeps: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nz: 200, nt: 200, kernel_substeps: None, pde_substeps: None }
    }
}

impl GridSpec {
    pub fn new(nz: usize, nt: usize) -> Self {
        GridSpec { nz, nt, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nz < 2 || self.nt < 2 {
            return Err(Error::GridMismatch(format!("grid {}x{} needs at least two nodes per axis", self.nz, self.nt)));
        }
        if self.kernel_substeps == Some(0) || self.pde_substeps == Some(0) {
            return Err(Error::GridMismatch("sub-step counts must be positive".into()));
        }
        Ok(())
    }

    /// Convolution sub-steps per interval of `axis` for the given coupling.
    pub fn kernel_substeps_for<T: Real>(&self, axis: &Axis<T>, r: T, chi: T, z_max: T) -> usize {
        self.kernel_substeps.unwrap_or_else(|| {
            let h = default_convolution_step(r, chi, z_max, axis.end());
            (axis.step / h).ceil().to_usize().unwrap_or(1).max(1)
        })
    }
}

/// Evaluates `G(z_k, .)` for every `z_k` and keeps what `reduce` extracts from each fine row.
///
/// The fine grid divides `axis` into `substeps` intervals per output step, so
/// output nodes are fine nodes `k * substeps`.
pub fn map_g_rows<T, R, F>(z_nodes: &[T], r: T, chi: T, axis: &Axis<T>, substeps: usize, reduce: F) -> Vec<R>
where
    T: FftReal,
    R: Send,
    F: Fn(usize, &[Cplx<T>], T) -> R + Sync,
{
    let h = axis.step / T::from_count(substeps);
    let n_fine = (axis.n - 1) * substeps + 1;
    let plan = ConvolutionPlan::new(n_fine);
    z_nodes
        .par_iter()
        .enumerate()
        .map(|(k, &z)| {
            let row = g_kernel_row(z, r, chi, h, n_fine, &plan);
            reduce(k, &row, h)
        })
        .collect()
}

/// Descriptive data attached to a kernel matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta<T> {
    pub r: T,
    pub l_tilde: T,
    pub t_write: T,
    pub t_read: T,
    pub chi_write: T,
    pub chi_read: T,
    pub l: ModeIndex,
    pub write: Drive,
    pub read: Drive,
    pub chi_norm: ChiNormalization,
    pub nz: usize,
    pub write_substeps: usize,
    pub read_substeps: usize,
    /// Rows have been multiplied by `exp(2 i r t)`.
    pub rapid_phase_factored: bool,
}

/// Kernel matrix `K(t_i, t'_j)` with the read time along rows and the write time along columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid<T> {
    pub axis_out: Axis<T>,
    pub axis_in: Axis<T>,
    /// Row-major, `axis_out.n` rows of `axis_in.n` entries.
    pub values: Vec<Cplx<T>>,
    pub weights_out: Vec<T>,
    pub weights_in: Vec<T>,
    pub meta: KernelMeta<T>,
}

impl<T: Real> KernelGrid<T> {
    pub fn new(axis_out: Axis<T>, axis_in: Axis<T>, values: Vec<Cplx<T>>, meta: KernelMeta<T>) -> Result<Self> {
        if values.len() != axis_out.n * axis_in.n {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} kernel",
                values.len(),
                axis_out.n,
                axis_in.n
            )));
        }
        Ok(KernelGrid { weights_out: axis_out.weights(), weights_in: axis_in.weights(), axis_out, axis_in, values, meta })
    }

    pub fn rows(&self) -> usize {
        self.axis_out.n
    }

    pub fn cols(&self) -> usize {
        self.axis_in.n
    }

    pub fn at(&self, i: usize, j: usize) -> Cplx<T> {
        self.values[i * self.axis_in.n + j]
    }

    /// Copy with every row multiplied by `exp(2 i r t_i)`.
    pub fn with_rapid_phase_factored(&self) -> Self {
        if self.meta.rapid_phase_factored {
            return self.clone();
        }
        let cols = self.cols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| *v * cis(T::lit(2.0) * self.meta.r * self.axis_out.node(idx / cols)))
            .collect();
        let mut meta = self.meta.clone();
        meta.rapid_phase_factored = true;
        KernelGrid { values, meta, ..self.clone() }
    }

    /// `max |Im K| / max |Re K|` after factoring the rapid phase.
    pub fn reality_residual(&self) -> T {
        let k = self.with_rapid_phase_factored();
        let max_im = k.values.iter().fold(T::zero(), |m, v| m.max(Float::abs(v.im)));
        let max_re = k.values.iter().fold(T::zero(), |m, v| m.max(Float::abs(v.re)));
        max_im / max_re
    }

    /// Applies the kernel to samples on `axis_in` with trapezoid weights.
    pub fn apply(&self, input: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
        if input.len() != self.cols() {
            return Err(Error::GridMismatch(format!("input of length {} for {} kernel columns", input.len(), self.cols())));
        }
        Ok((0..self.rows())
            .map(|i| {
                (0..self.cols()).fold(Cplx::new(T::zero(), T::zero()), |acc, j| {
                    acc + self.at(i, j) * input[j] * self.weights_in[j]
                })
            })
            .collect())
    }
}

/// Couplings and labels of a write/read configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePair<T> {
    pub l: ModeIndex,
    pub write: Drive,
    pub read: Drive,
    pub chi_write: T,
    pub chi_read: T,
    pub chi_norm: ChiNormalization,
}

impl<T: Real> StagePair<T> {
    pub fn plane_wave(l: ModeIndex) -> Self {
        StagePair {
            l,
            write: Drive::PlaneWave,
            read: Drive::PlaneWave,
            chi_write: T::one(),
            chi_read: T::one(),
            chi_norm: ChiNormalization::Appendix,
        }
    }
}

/// Full-cycle kernel `K(t, t') = 1/2 int_0^L G_read(L - z, t) G_write(z, T_W - t') dz`.
///
/// Sampled on `grids.nt` read times and `grids.nt` write times; the `z` integral
/// uses the trapezoid rule on `grids.nz` nodes.
pub fn full_cycle_kernel<T: FftReal>(stages: &StagePair<T>, params: &MemoryParams<T>, grids: &GridSpec) -> Result<KernelGrid<T>> {
    params.validate()?;
    grids.validate()?;
    let z_axis = Axis::span(params.l_tilde, grids.nz)?;
    let z_nodes = z_axis.nodes();
    let z_weights = z_axis.weights();
    let axis_in = Axis::span(params.t_write, grids.nt)?;
    let axis_out = Axis::span(params.t_read, grids.nt)?;
    let write_sub = grids.kernel_substeps_for(&axis_in, params.r, stages.chi_write, params.l_tilde);
    let read_sub = grids.kernel_substeps_for(&axis_out, params.r, stages.chi_read, params.l_tilde);

    // G_write(z_k, T_W - t'_j) lives at coarse write node nt-1-j
    let write_rows: Vec<Vec<Cplx<T>>> = map_g_rows(&z_nodes, params.r, stages.chi_write, &axis_in, write_sub, |_, row, _| {
        (0..axis_in.n).map(|j| row[(axis_in.n - 1 - j) * write_sub]).collect()
    });
    let read_rows: Vec<Vec<Cplx<T>>> = map_g_rows(&z_nodes, params.r, stages.chi_read, &axis_out, read_sub, |_, row, _| {
        (0..axis_out.n).map(|i| row[i * read_sub]).collect()
    });

    let meta = KernelMeta {
        r: params.r,
        l_tilde: params.l_tilde,
        t_write: params.t_write,
        t_read: params.t_read,
        chi_write: stages.chi_write,
        chi_read: stages.chi_read,
        l: stages.l,
        write: stages.write,
        read: stages.read,
        chi_norm: stages.chi_norm,
        nz: grids.nz,
        write_substeps: write_sub,
        read_substeps: read_sub,
        rapid_phase_factored: false,
    };
    assemble_kernel(axis_out, axis_in, &read_rows, &write_rows, &z_weights, meta)
}

/// `K_ij = 1/2 sum_k w_k read[nz-1-k][i] write[k][j]`.
///
/// `read[k][i]` is `G_read(z_k, t_i)` and `write[k][j]` is `G_write(z_k, T_W - t'_j)`
/// on a cell grid symmetric under `z -> L - z`.
pub fn assemble_kernel<T: Real>(
    axis_out: Axis<T>,
    axis_in: Axis<T>,
    read: &[Vec<Cplx<T>>],
    write: &[Vec<Cplx<T>>],
    z_weights: &[T],
    meta: KernelMeta<T>,
) -> Result<KernelGrid<T>> {
    let nz = z_weights.len();
    if read.len() != nz || write.len() != nz {
        return Err(Error::GridMismatch(format!("{} read and {} write rows for {nz} cell nodes", read.len(), write.len())));
    }
    let half = T::lit(0.5);
    let values: Vec<Cplx<T>> = (0..axis_out.n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..axis_in.n).map(move |j| {
                let mut acc = Cplx::new(T::zero(), T::zero());
                for k in 0..nz {
                    acc = acc + read[nz - 1 - k][i] * write[k][j] * z_weights[k];
                }
                acc * half
            })
        })
        .collect();
    KernelGrid::new(axis_out, axis_in, values, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    #[test]
    fn auxiliary_identities() {
        for (r, chi) in [(0.0, 1.0), (3.0, 0.7), (-2.0, 0.2), (50.0, 1.0)] {
            let a = AuxiliaryFactors::new(r, chi);
            assert_relative_eq!(a.mu + a.nu, 2.0, epsilon = 1e-15);
            assert_relative_eq!(a.mu * a.nu, chi * chi / (r * r + chi * chi), epsilon = 1e-14);
            assert!((0.0..=2.0).contains(&a.mu) && (0.0..=2.0).contains(&a.nu));
        }
    }

    #[test]
    fn f0_examples() {
        assert_eq!(f0_factor(3.0, 0.0, 2.0, 1.0, 10.0), c(1.0, 0.0));
        for t in [0.1, 1.0, 4.0] {
            let v = f0_factor(0.0, t, 0.0, 1.0, 10.0);
            assert!((v - c((-t).cos(), (-t).sin())).norm() < 1e-15);
        }
        assert_eq!(f0_factor(1.0, 11.0, 0.0, 1.0, 10.0), c(0.0, 0.0));
        assert_eq!(f0_factor(1.0, -0.1, 0.0, 1.0, 10.0), c(0.0, 0.0));
    }

    #[test]
    fn f0_approaches_raman_form_at_large_detuning() {
        // the residual phase (omega - r) t limits the window to short times
        for z in [0.0, 10.0, 100.0, 200.0] {
            for t in [0.05, 0.2, 0.5] {
                let full = f0_factor(z, t, 50.0, 1.0, 10.0);
                let lim = f0_raman_limit(z, t, 50.0);
                assert!((full - lim).norm() <= 0.01 * lim.norm().max(1e-3), "z={z} t={t}");
            }
        }
    }

    #[test]
    fn f0_is_bounded_by_one() {
        for i in 0..50 {
            for j in 0..50 {
                let v = f0_factor(i as f64 * 0.7, j as f64 * 0.3, 1.5, 0.8, 20.0);
                assert!(v.norm() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn g_kernel_vanishes_at_zero_time_and_refuses_coarse_steps() {
        assert_eq!(g_kernel(2.0, 0.0, 1.0, 1.0, 10.0, 0.01).unwrap(), c(0.0, 0.0));
        assert!(matches!(g_kernel(2.0, 1.0, 1.0, 1.0, 10.0, 0.5), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn g_kernel_at_cell_entrance_has_closed_form() {
        // z = 0: G = (e^{s1 t} - e^{s2 t}) / (s1 - s2), s1 = i(omega - r), s2 = -i(omega + r)
        let (r, chi) = (1.5, 0.8);
        let w = (r * r + chi * chi).sqrt();
        let s1 = c(0.0, w - r);
        let s2 = c(0.0, -(w + r));
        for t in [0.3, 1.0, 2.7] {
            let exact = ((s1 * t).exp() - (s2 * t).exp()) / (s1 - s2);
            let num = g_kernel(0.0, t, r, chi, 10.0, 1e-4).unwrap();
            assert!((num - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn fft_row_matches_direct_convolution() {
        let (z, r, chi, h) = (3.0, 2.0, 0.9, 5e-4);
        let n = 6001;
        let plan = ConvolutionPlan::new(n);
        let row = g_kernel_row(z, r, chi, h, n, &plan);
        for k in [0usize, 1, 1000, 6000] {
            let t = h * k as f64;
            let direct = g_kernel(z, t, r, chi, 10.0, h / 4.0).unwrap();
            assert!((row[k] - direct).norm() < 1e-7, "k={k}: {}", (row[k] - direct).norm());
        }
    }

    #[test]
    fn convolution_is_bilinear() {
        let a: Vec<_> = (0..40).map(|k| c((k as f64 * 0.3).sin(), 0.1 * k as f64)).collect();
        let b: Vec<_> = (0..40).map(|k| c(1.0 / (1.0 + k as f64), (k as f64).cos())).collect();
        let scale = c(0.6, -1.3);
        let base = convolve_trapezoid(&a, &b, 0.1);
        let sa: Vec<_> = a.iter().map(|v| v * scale).collect();
        let sb: Vec<_> = b.iter().map(|v| v * scale.conj()).collect();
        let scaled = convolve_trapezoid(&sa, &sb, 0.1);
        for (x, y) in base.iter().zip(&scaled) {
            assert!((x * scale.norm_sqr() - y).norm() < 1e-12);
        }
    }

    #[test]
    fn filon_weights_are_continuous_and_reduce_to_trapezoid() {
        let (a, b) = filon_weights(0.0);
        assert!((a - c(0.5, 0.0)).norm() < 1e-16 && (b - c(0.5, 0.0)).norm() < 1e-16);
        let (a1, b1) = filon_weights(0.25 - 1e-12);
        let (a2, b2) = filon_weights(0.25 + 1e-12);
        assert!((a1 - a2).norm() < 1e-10 && (b1 - b2).norm() < 1e-10);
        // int_0^1 e^{-i theta u} du
        let theta = 3.0;
        let (a, b) = filon_weights(theta);
        let exact = (c(0.0, -theta).exp() - c(1.0, 0.0)) / c(0.0, -theta);
        assert!((a + b - exact).norm() < 1e-14);
    }

    #[test]
    fn raman_limit_row_integrates_f() {
        let row = g_raman_limit_row(0.0, 1.0, 1e-4, 10_001);
        // int_0^1 e^{-2it} dt = (1 - e^{-2i}) / (2i)
        let exact = (c(1.0, 0.0) - c(0.0, -2.0).exp()) / c(0.0, 2.0);
        assert!((row[10_000] - exact).norm() < 1e-8);
    }

    #[test]
    fn axis_and_params_validation() {
        assert!(Axis::<f64>::span(1.0, 1).is_err());
        let a = Axis::span(2.0, 5).unwrap();
        assert_eq!(a.end(), 2.0);
        assert_relative_eq!(a.weights().iter().sum::<f64>(), 2.0);
        let p = MemoryParams::plane_wave(1.0, 10.0, 5.0);
        assert!(p.validate().is_ok());
        assert!(p.with_chi(1.5).validate().is_err());
        assert!(MemoryParams { l_tilde: 0.0, ..p }.validate().is_err());
        assert!(GridSpec::new(1, 10).validate().is_err());
    }

    #[test]
    fn kernel_grid_shape_and_factoring() {
        let p = MemoryParams::plane_wave(2.0, 4.0, 3.0);
        let k = full_cycle_kernel(&StagePair::plane_wave(ModeIndex::ZERO), &p, &GridSpec::new(21, 17)).unwrap();
        assert_eq!((k.rows(), k.cols()), (17, 17));
        assert_relative_eq!(k.weights_in.iter().sum::<f64>(), 3.0, max_relative = 1e-14);
        let f = k.with_rapid_phase_factored();
        assert!(f.meta.rapid_phase_factored);
        assert_eq!(f.with_rapid_phase_factored(), f);
        for (a, b) in k.values.iter().zip(&f.values) {
            assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-12);
        }
        assert!(k.apply(&[c(1.0, 0.0); 3]).is_err());
    }
}
