//! Direct integration of the field and coherence equations.
//!
//! In the dimensionless variables of [`crate::kernels`], with `lambda = sqrt(2 epsilon2)`:
//!
//! ```text
//! d_z a = -i (lambda / 2) c
//! d_t c = -2 i r c - (i / lambda) a - i chi b
//! d_t b = -i conj(chi) c
//! ```
//!
//! The time derivative of the field is neglected, so `a` follows from `c` by a
//! cumulative integral along the cell at every instant. The optical coherence
//! keeps its full detuning term; no adiabatic elimination is made here. These
//! equations conserve `|a|^2` flux plus `epsilon2 (|b|^2 + |c|^2)`, and their
//! Laplace solution is exactly the kernel `G`.
//!
//! Time stepping is the explicit midpoint rule on a sub-grid that refines each
//! output interval.

use std::io::Write;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Axis, GridSpec, MemoryParams};
use crate::modes::ModeIndex;
use crate::scalar::{Cplx, Real};

/// Bound on `step * max(|r|, |chi|, 1)`.
pub const CFL_BOUND: f64 = 0.1;

/// Target accumulated phase error of one stage.
pub const PHASE_TOLERANCE: f64 = 4e-4;

/// Position in the write/store/read sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Stage {
    Write,
    Store,
    Read,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Write => "WRITE",
            Stage::Store => "STORE",
            Stage::Read => "READ",
        }
    }
}

/// Field samples `a(t_k)` on a uniform time axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile<T> {
    pub axis: Axis<T>,
    pub samples: Vec<Cplx<T>>,
}

impl<T: Real> PulseProfile<T> {
    pub fn new(axis: Axis<T>, samples: Vec<Cplx<T>>) -> Result<Self> {
        if samples.len() != axis.n {
            return Err(Error::GridMismatch(format!("{} pulse samples on a {}-node axis", samples.len(), axis.n)));
        }
        if samples.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("pulse samples"));
        }
        Ok(PulseProfile { axis, samples })
    }

    pub fn from_fn<F: Fn(T) -> Cplx<T>>(axis: Axis<T>, f: F) -> Self {
        let samples = axis.nodes().into_iter().map(f).collect();
        PulseProfile { axis, samples }
    }

    pub fn zeros(axis: Axis<T>) -> Self {
        PulseProfile { samples: vec![Cplx::new(T::zero(), T::zero()); axis.n], axis }
    }

    /// `int |a|^2 dt` by the trapezoid rule.
    pub fn norm(&self) -> T {
        self.axis.weights().iter().zip(&self.samples).fold(T::zero(), |acc, (w, v)| acc + *w * v.norm_sqr())
    }

    pub fn scaled(&self, factor: Cplx<T>) -> Self {
        PulseProfile { axis: self.axis, samples: self.samples.iter().map(|v| v * factor).collect() }
    }

    /// Piecewise-linear value; zero outside the axis.
    pub fn value_at(&self, t: T) -> Cplx<T> {
        let zero = Cplx::new(T::zero(), T::zero());
        let u = (t - self.axis.start) / self.axis.step;
        if u < T::zero() || u > T::from_count(self.axis.n - 1) {
            return zero;
        }
        let k = u.floor().to_usize().unwrap_or(0).min(self.axis.n - 2);
        let frac = u - T::from_count(k);
        self.samples[k] * (T::one() - frac) + self.samples[k + 1] * frac
    }

    /// `||self - other|| / ||other||` in the weighted L2 norm.
    pub fn relative_l2_distance(&self, other: &PulseProfile<T>) -> Result<T> {
        if self.samples.len() != other.samples.len() {
            return Err(Error::GridMismatch("pulses on different axes".into()));
        }
        let w = self.axis.weights();
        let (mut diff, mut base) = (T::zero(), T::zero());
        for ((a, b), wk) in self.samples.iter().zip(&other.samples).zip(&w) {
            diff = diff + *wk * (a - b).norm_sqr();
            base = base + *wk * b.norm_sqr();
        }
        Ok(if base == T::zero() { diff.sqrt() } else { (diff / base).sqrt() })
    }

    /// CSV with columns `t,re_a,im_a`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,re_a,im_a")?;
        for (t, v) in self.axis.nodes().into_iter().zip(&self.samples) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", t.to_f64_lossy(), v.re.to_f64_lossy(), v.im.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Snapshot of the medium and the field along the cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState<T> {
    pub z_axis: Axis<T>,
    /// Field `a(z)` at the current instant.
    pub a: Vec<Cplx<T>>,
    pub b: Vec<Cplx<T>>,
    pub c: Vec<Cplx<T>>,
    /// Field leaving the cell, `a(L, t_k)`, on the last stage's output axis.
    pub exit: PulseProfile<T>,
    /// OAM index of the signal field.
    pub l: ModeIndex,
    /// OAM index of the spin coherence.
    pub m: ModeIndex,
    pub stage: Stage,
}

impl<T: Real> FieldState<T> {
    /// CSV with columns `z,re_b,im_b,re_c,im_c`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "z,re_b,im_b,re_c,im_c")?;
        for (k, z) in self.z_axis.nodes().into_iter().enumerate() {
            let (b, c) = (self.b[k], self.c[k]);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                z.to_f64_lossy(),
                b.re.to_f64_lossy(),
                b.im.to_f64_lossy(),
                c.re.to_f64_lossy(),
                c.im.to_f64_lossy()
            )?;
        }
        Ok(())
    }

    /// `int |b|^2 dz`.
    pub fn coherence_norm(&self) -> T {
        weighted_norm(&self.b, &self.z_axis.weights())
    }

    /// `int |c|^2 dz`.
    pub fn optical_norm(&self) -> T {
        weighted_norm(&self.c, &self.z_axis.weights())
    }
}

fn weighted_norm<T: Real>(v: &[Cplx<T>], w: &[T]) -> T {
    v.iter().zip(w).fold(T::zero(), |acc, (x, wk)| acc + *wk * x.norm_sqr())
}

/// Largest discrete continuity defect seen during a stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuityProbe<T> {
    /// `max |eps2 (E(t+h) - E(t)) / h + (F(t) + F(t+h)) / 2|` over nodes and steps,
    /// with `E = |b|^2 + |c|^2` and `F = d_z |a|^2 = 2 Re(conj(a) d_z a)`.
    pub max_residual: T,
    /// `max |F|` over the same samples.
    pub flux_scale: T,
    pub step: T,
}

impl<T: Real> ContinuityProbe<T> {
    pub fn relative(&self) -> T {
        self.max_residual / self.flux_scale
    }
}

/// Integrator sub-steps per output interval.
///
/// Picks the step that keeps the midpoint rule's accumulated phase error near
/// [`PHASE_TOLERANCE`], capped by the stability bound. Explicit requests are
/// checked against the bound.
pub fn pde_substeps<T: Real>(axis: &Axis<T>, r: T, chi: T, requested: Option<usize>) -> Result<usize> {
    let rate = Float::abs(r).max(chi).max(T::one());
    let bound = T::lit(CFL_BOUND);
    let sub = match requested {
        Some(s) => s,
        None => {
            let spectral = T::lit(2.0) * Float::abs(r) + chi + T::one();
            let accurate = (T::lit(6.0 * PHASE_TOLERANCE) / (axis.end() * spectral.powi(3))).sqrt();
            let h = (bound / rate).min(accurate);
            (axis.step / h).ceil().to_usize().unwrap_or(1).max(1)
        }
    };
    let h = axis.step / T::from_count(sub);
    if h * rate > bound {
        return Err(Error::StepTooLarge { step: h.to_f64_lossy(), bound: CFL_BOUND });
    }
    Ok(sub)
}

struct Equations<T> {
    r: T,
    chi: Cplx<T>,
    lambda: T,
    dz: T,
}

impl<T: Real> Equations<T> {
    /// Fills `a` from its value at the entrance and the optical coherence.
    fn field(&self, a0: Cplx<T>, c: &[Cplx<T>], a: &mut [Cplx<T>]) {
        let factor = Cplx::new(T::zero(), -self.lambda * T::lit(0.25) * self.dz);
        a[0] = a0;
        for k in 1..c.len() {
            a[k] = a[k - 1] + (c[k - 1] + c[k]) * factor;
        }
    }

    fn rates(&self, a: &[Cplx<T>], b: &[Cplx<T>], c: &[Cplx<T>], db: &mut [Cplx<T>], dc: &mut [Cplx<T>]) {
        let i = Cplx::new(T::zero(), T::one());
        let detune = Cplx::new(T::zero(), -T::lit(2.0) * self.r);
        let from_field = Cplx::new(T::zero(), -T::one() / self.lambda);
        let from_spin = -i * self.chi;
        let to_spin = -i * self.chi.conj();
        for k in 0..c.len() {
            dc[k] = detune * c[k] + from_field * a[k] + from_spin * b[k];
            db[k] = to_spin * c[k];
        }
    }

    /// `d_z |a|^2` at each node.
    fn flux_gradient(&self, a: &[Cplx<T>], c: &[Cplx<T>], out: &mut [T]) {
        let dza = Cplx::new(T::zero(), -self.lambda * T::lit(0.5));
        for k in 0..c.len() {
            out[k] = T::lit(2.0) * (a[k].conj() * dza * c[k]).re;
        }
    }
}

/// Drives the medium over one stage and records the exit field on `axis`.
#[allow(clippy::too_many_arguments)]
fn integrate_stage<T: Real>(
    eq: &Equations<T>,
    axis: &Axis<T>,
    substeps: usize,
    entrance: &dyn Fn(T) -> Cplx<T>,
    b: &mut [Cplx<T>],
    c: &mut [Cplx<T>],
    a: &mut [Cplx<T>],
    epsilon2: Option<T>,
) -> (Vec<Cplx<T>>, Option<ContinuityProbe<T>>) {
    let nz = b.len();
    let zero = Cplx::new(T::zero(), T::zero());
    let h = axis.step / T::from_count(substeps);
    let half = h * T::lit(0.5);
    let (mut db, mut dc) = (vec![zero; nz], vec![zero; nz]);
    let (mut bm, mut cm) = (vec![zero; nz], vec![zero; nz]);
    let mut exit = Vec::with_capacity(axis.n);

    let mut probe = epsilon2.map(|_| ContinuityProbe { max_residual: T::zero(), flux_scale: T::zero(), step: h });
    let mut flux_now = vec![T::zero(); nz];
    let mut flux_next = vec![T::zero(); nz];
    let energy = |b: &[Cplx<T>], c: &[Cplx<T>], k: usize| b[k].norm_sqr() + c[k].norm_sqr();

    eq.field(entrance(axis.start), c, a);
    exit.push(a[nz - 1]);
    if probe.is_some() {
        eq.flux_gradient(a, c, &mut flux_now);
    }
    for step in 0..(axis.n - 1) * substeps {
        let t = axis.start + h * T::from_count(step);
        let energy_now: Vec<T> = if probe.is_some() { (0..nz).map(|k| energy(b, c, k)).collect() } else { Vec::new() };

        eq.rates(a, b, c, &mut db, &mut dc);
        for k in 0..nz {
            bm[k] = b[k] + db[k] * half;
            cm[k] = c[k] + dc[k] * half;
        }
        eq.field(entrance(t + half), &cm, a);
        eq.rates(a, &bm, &cm, &mut db, &mut dc);
        for k in 0..nz {
            b[k] = b[k] + db[k] * h;
            c[k] = c[k] + dc[k] * h;
        }
        eq.field(entrance(t + h), c, a);

        if let (Some(p), Some(eps2)) = (probe.as_mut(), epsilon2) {
            eq.flux_gradient(a, c, &mut flux_next);
            for k in 0..nz {
                let storage = eps2 * (energy(b, c, k) - energy_now[k]) / h;
                let residual = Float::abs(storage + (flux_now[k] + flux_next[k]) * T::lit(0.5));
                p.max_residual = p.max_residual.max(residual);
                p.flux_scale = p.flux_scale.max(Float::abs(flux_next[k]));
            }
            std::mem::swap(&mut flux_now, &mut flux_next);
        }
        if (step + 1) % substeps == 0 {
            exit.push(a[nz - 1]);
        }
    }
    (exit, probe)
}

fn check_stage_inputs<T: Real>(params: &MemoryParams<T>, grids: &GridSpec, chi: Cplx<T>) -> Result<()> {
    params.validate()?;
    grids.validate()?;
    if !(chi.re.is_finite() && chi.im.is_finite()) {
        return Err(Error::NonFinite("stage coupling"));
    }
    Ok(())
}

fn write_stage<T: Real>(
    input: &PulseProfile<T>,
    l: ModeIndex,
    j: ModeIndex,
    chi: Cplx<T>,
    params: &MemoryParams<T>,
    grids: &GridSpec,
    probe: bool,
) -> Result<(FieldState<T>, Option<ContinuityProbe<T>>)> {
    check_stage_inputs(params, grids, chi)?;
    let axis = Axis::span(params.t_write, grids.nt)?;
    if input.axis != axis {
        return Err(Error::GridMismatch(format!(
            "input pulse axis ({} nodes to {}) differs from the write axis ({} nodes to {})",
            input.axis.n,
            input.axis.end(),
            axis.n,
            axis.end()
        )));
    }
    let m = l.checked_sub(j)?;
    let z_axis = Axis::span(params.l_tilde, grids.nz)?;
    let substeps = pde_substeps(&axis, params.r, chi.norm(), grids.pde_substeps)?;
    let eq = Equations { r: params.r, chi, lambda: params.field_scale(), dz: z_axis.step };
    let zero = Cplx::new(T::zero(), T::zero());
    let (mut b, mut c, mut a) = (vec![zero; grids.nz], vec![zero; grids.nz], vec![zero; grids.nz]);
    let entrance = |t: T| input.value_at(t);
    let eps2 = probe.then_some(params.epsilon2);
    let (exit, probe) = integrate_stage(&eq, &axis, substeps, &entrance, &mut b, &mut c, &mut a, eps2);
    let state = FieldState { z_axis, a, b, c, exit: PulseProfile { axis, samples: exit }, l, m, stage: Stage::Write };
    Ok((state, probe))
}

/// Write stage: drives the medium with `input` at the cell entrance.
///
/// `chi` is the write coupling; the stored coherence carries index `l - j`.
pub fn evolve_write<T: Real>(
    input: &PulseProfile<T>,
    l: ModeIndex,
    j: ModeIndex,
    chi: Cplx<T>,
    params: &MemoryParams<T>,
    grids: &GridSpec,
) -> Result<FieldState<T>> {
    write_stage(input, l, j, chi, params, grids, false).map(|(s, _)| s)
}

/// [`evolve_write`] that also tracks the discrete continuity defect.
pub fn evolve_write_probed<T: Real>(
    input: &PulseProfile<T>,
    l: ModeIndex,
    j: ModeIndex,
    chi: Cplx<T>,
    params: &MemoryParams<T>,
    grids: &GridSpec,
) -> Result<(FieldState<T>, ContinuityProbe<T>)> {
    let (state, probe) = write_stage(input, l, j, chi, params, grids, true)?;
    Ok((state, probe.expect("probe requested")))
}

/// Storage: keeps `b`, clears the optical coherence and the field.
pub fn apply_storage<T: Real>(state: &FieldState<T>) -> Result<FieldState<T>> {
    match state.stage {
        Stage::Write | Stage::Store => {
            let zero = Cplx::new(T::zero(), T::zero());
            let mut next = state.clone();
            next.c.iter_mut().for_each(|v| *v = zero);
            next.a.iter_mut().for_each(|v| *v = zero);
            next.stage = Stage::Store;
            Ok(next)
        }
        Stage::Read => Err(Error::WrongStage { expected: "WRITE or STORE", found: state.stage.name() }),
    }
}

/// Result of the read stage.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadOutcome<T> {
    /// `a(L, t)` on `[0, T_R]`.
    pub pulse: PulseProfile<T>,
    /// OAM index of the retrieved field.
    pub l_out: ModeIndex,
    pub state: FieldState<T>,
}

/// Read stage: releases the stored coherence with a drive of OAM `i` and coupling `chi_read`.
pub fn evolve_read<T: Real>(
    state: &FieldState<T>,
    i: ModeIndex,
    chi_read: Cplx<T>,
    params: &MemoryParams<T>,
    grids: &GridSpec,
) -> Result<ReadOutcome<T>> {
    if state.stage != Stage::Store {
        return Err(Error::WrongStage { expected: "STORE", found: state.stage.name() });
    }
    check_stage_inputs(params, grids, chi_read)?;
    if state.z_axis != Axis::span(params.l_tilde, grids.nz)? {
        return Err(Error::GridMismatch("stored state does not match the cell grid".into()));
    }
    let l_out = state.m.checked_add(i)?;
    let axis = Axis::span(params.t_read, grids.nt)?;
    let substeps = pde_substeps(&axis, params.r, chi_read.norm(), grids.pde_substeps)?;
    let eq = Equations { r: params.r, chi: chi_read, lambda: params.field_scale(), dz: state.z_axis.step };
    let (mut b, mut c, mut a) = (state.b.clone(), state.c.clone(), state.a.clone());
    let entrance = |_: T| Cplx::new(T::zero(), T::zero());
    let (exit, _) = integrate_stage(&eq, &axis, substeps, &entrance, &mut b, &mut c, &mut a, None);
    let pulse = PulseProfile { axis, samples: exit };
    let next = FieldState { z_axis: state.z_axis, a, b, c, exit: pulse.clone(), l: l_out, m: state.m, stage: Stage::Read };
    Ok(ReadOutcome { pulse, l_out, state: next })
}
