//! Whole write/store/read cycles: kernel spectra, parameter search and cycle reports.
//!
//! Efficiency is `||a_out||^2 / ||a_in||^2` with both pulses in the same flux
//! units. The geometric factor of a conversion cycle is reported separately
//! from the kernel's leading singular value.

use nalgebra::DMatrix;
use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_storage, evolve_read, evolve_write, PulseProfile};
use crate::error::{Error, Result};
use crate::kernels::{
    assemble_kernel, full_cycle_kernel, map_g_rows, Axis, FftReal, GridSpec, KernelGrid, KernelMeta, MemoryParams,
    StagePair,
};
use crate::modes::{
    check_paraxial_constraints, mode_area, AreaConvention, BeamGeometry, CellGeometry, ModeIndex, ParaxialThresholds,
};
use crate::overlap::{stage_overlap, ChiNormalization, Drive};
use crate::quadrature::QuadratureSpec;
use crate::scalar::{Cplx, Real};

/// Relative L2 distance between engines above which a report is flagged.
pub const DISAGREEMENT_LIMIT: f64 = 1e-2;

/// Singular values and temporal modes of a kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularSpectrum<T> {
    /// Descending, nonnegative.
    pub values: Vec<T>,
    /// Output-time modes, orthonormal under the output trapezoid weights.
    pub left: Vec<Vec<Cplx<T>>>,
    /// Input-time modes, orthonormal under the input trapezoid weights.
    pub right: Vec<Vec<Cplx<T>>>,
    /// `||U S V^H - M||_F / ||M||_F` for the weighted matrix `M`.
    pub reconstruction_error: T,
}

impl<T: Real> SingularSpectrum<T> {
    pub fn leading(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    /// CSV with columns `index,singular_value`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,singular_value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{k},{:.16e}", v.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Singular value decomposition of `sqrt(w_out) K sqrt(w_in)`.
///
/// The decomposition runs in double precision whatever `T` is.
pub fn discretize_and_decompose<T: Real>(kernel: &KernelGrid<T>) -> Result<SingularSpectrum<T>> {
    if kernel.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("kernel matrix"));
    }
    let (rows, cols) = (kernel.rows(), kernel.cols());
    let sw_out: Vec<f64> = kernel.weights_out.iter().map(|w| w.to_f64_lossy().sqrt()).collect();
    let sw_in: Vec<f64> = kernel.weights_in.iter().map(|w| w.to_f64_lossy().sqrt()).collect();
    let m = DMatrix::from_fn(rows, cols, |i, j| {
        let v = kernel.at(i, j);
        Cplx::new(v.re.to_f64_lossy(), v.im.to_f64_lossy()) * (sw_out[i] * sw_in[j])
    });
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    let rank = svd.singular_values.len();

    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut recon = DMatrix::<Cplx<f64>>::zeros(rows, cols);
    for k in 0..rank {
        let s = svd.singular_values[k];
        for j in 0..cols {
            let vkj = v_t[(k, j)];
            for i in 0..rows {
                recon[(i, j)] += u[(i, k)] * vkj * s;
            }
        }
    }
    let norm = m.norm();
    let reconstruction_error = if norm == 0.0 { 0.0 } else { (recon - &m).norm() / norm };

    let to_t = |z: Cplx<f64>| Cplx::new(T::lit(z.re), T::lit(z.im));
    let values = order.iter().map(|&k| T::lit(svd.singular_values[k])).collect();
    let left = order.iter().map(|&k| (0..rows).map(|i| to_t(u[(i, k)] / sw_out[i])).collect()).collect();
    // rows of V^H are conjugated right vectors
    let right = order.iter().map(|&k| (0..cols).map(|j| to_t(v_t[(k, j)].conj() / sw_in[j])).collect()).collect();
    Ok(SingularSpectrum { values, left, right, reconstruction_error: T::lit(reconstruction_error) })
}

/// Bounded grid of candidate values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRange<T> {
    pub values: Vec<T>,
}

impl<T: Real> SearchRange<T> {
    /// `n` evenly spaced values from `lo` to `hi` (just `lo` when `n = 1`).
    pub fn linspace(lo: T, hi: T, n: usize) -> Self {
        let values = match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n).map(|k| lo + (hi - lo) * T::from_count(k) / T::from_count(n - 1)).collect(),
        };
        SearchRange { values }
    }

    pub fn single(v: T) -> Self {
        SearchRange { values: vec![v] }
    }
}

/// One evaluated point of the parameter search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchPoint<T> {
    pub l_tilde: T,
    pub t_write: T,
    pub leading_singular_value: T,
}

/// Outcome of [`optimize_parameters`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Optimum<T> {
    pub params: MemoryParams<T>,
    pub leading_singular_value: T,
    pub evaluated: Vec<SearchPoint<T>>,
}

/// Grid search for the `(L, T_W)` that maximizes the leading singular value of
/// the plane-wave kernel. `T_R` follows `T_W`.
///
/// Ties go to the smallest `L`, then the smallest `T_W`.
pub fn optimize_parameters<T: FftReal>(
    l_range: &SearchRange<T>,
    t_range: &SearchRange<T>,
    base: &MemoryParams<T>,
    grids: &GridSpec,
) -> Result<Optimum<T>> {
    if l_range.values.is_empty() {
        return Err(Error::EmptyRange("L_tilde"));
    }
    if t_range.values.is_empty() {
        return Err(Error::EmptyRange("T_W"));
    }
    let mut points: Vec<(T, T)> =
        l_range.values.iter().flat_map(|&l| t_range.values.iter().map(move |&t| (l, t))).collect();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    points.dedup();
    let stages = StagePair::plane_wave(ModeIndex::ZERO);
    let evaluated: Vec<SearchPoint<T>> = points
        .par_iter()
        .map(|&(l_tilde, t_write)| {
            let p = MemoryParams { l_tilde, t_write, t_read: t_write, chi_eff: T::one(), ..*base };
            let k = full_cycle_kernel(&stages, &p, grids)?;
            let s = discretize_and_decompose(&k)?;
            Ok(SearchPoint { l_tilde, t_write, leading_singular_value: s.leading() })
        })
        .collect::<Result<_>>()?;
    let best = evaluated
        .iter()
        .fold(None::<&SearchPoint<T>>, |best, p| match best {
            Some(b) if b.leading_singular_value >= p.leading_singular_value => Some(b),
            _ => Some(p),
        })
        .expect("non-empty search");
    let params = MemoryParams { l_tilde: best.l_tilde, t_write: best.t_write, t_read: best.t_write, chi_eff: T::one(), ..*base };
    Ok(Optimum { params, leading_singular_value: best.leading_singular_value, evaluated })
}

/// Which solver produces the retrieved pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Kernel,
    Pde,
    Both,
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Engine::Kernel),
            "pde" => Ok(Engine::Pde),
            "both" => Ok(Engine::Both),
            other => Err(Error::InvalidParams(format!("unknown engine `{other}`"))),
        }
    }
}

/// Geometry and conventions shared by every stage of a cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleSetup<T> {
    pub beam: BeamGeometry<T>,
    /// Checked against the paraxial conditions when present.
    pub cell: Option<CellGeometry<T>>,
    pub convention: AreaConvention,
    pub chi_norm: ChiNormalization,
    pub quad: QuadratureSpec,
    pub thresholds: ParaxialThresholds,
}

impl<T: Real> CycleSetup<T> {
    pub fn new(beam: BeamGeometry<T>) -> Self {
        CycleSetup {
            beam,
            cell: None,
            convention: AreaConvention::default(),
            chi_norm: ChiNormalization::default(),
            quad: QuadratureSpec::for_precision::<T>(),
            thresholds: ParaxialThresholds::default(),
        }
    }

    /// Fails with the violated conditions named.
    pub fn check_geometry(&self) -> Result<()> {
        let Some(cell) = &self.cell else { return Ok(()) };
        let report = check_paraxial_constraints(&self.beam, cell, &self.thresholds);
        if report.passed {
            return Ok(());
        }
        let failed: Vec<String> = report.failures().map(|c| c.describe()).collect();
        Err(Error::InvalidGeometry(format!("cell violates {}", failed.join("; "))))
    }
}

/// Couplings of the two stages of a cycle and the OAM bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StageCouplings<T> {
    pub write: Cplx<T>,
    pub read: Cplx<T>,
    /// Coherence index `l - J`.
    pub stored: ModeIndex,
    /// Output index `l + I - J`.
    pub l_out: ModeIndex,
    /// Scalar applied to the retrieved field: `sqrt(S_l / S_out)` for the
    /// symmetric normalization, 1 otherwise.
    pub amplitude_map: T,
}

impl<T: Real> StageCouplings<T> {
    /// `amplitude_map * read * conj(write)`, the factor multiplying the kernel.
    pub fn conversion_factor(&self) -> Cplx<T> {
        self.read * self.write.conj() * self.amplitude_map
    }
}

pub fn stage_couplings<T: Real>(l: ModeIndex, write: Drive, read: Drive, setup: &CycleSetup<T>) -> Result<StageCouplings<T>> {
    let stored = l.checked_sub(write.oam())?;
    let l_out = stored.checked_add(read.oam())?;
    let w = stage_overlap(l, write, &setup.beam, setup.convention, &setup.quad)?;
    let r = stage_overlap(l_out, read, &setup.beam, setup.convention, &setup.quad)?;
    let amplitude_map = match setup.chi_norm {
        ChiNormalization::Appendix => {
            let s_in = mode_area(l, T::zero(), &setup.beam, setup.convention);
            let s_out = mode_area(l_out, T::zero(), &setup.beam, setup.convention);
            (s_in / s_out).sqrt()
        }
        ChiNormalization::Maintext => T::one(),
    };
    Ok(StageCouplings {
        write: w.coupling(setup.chi_norm),
        read: r.coupling(setup.chi_norm),
        stored,
        l_out,
        amplitude_map,
    })
}

/// Retrieved pulse and plane-wave-shaped kernel from the closed-form solution.
pub struct KernelEngineOutput<T> {
    pub pulse: PulseProfile<T>,
    pub kernel: KernelGrid<T>,
}

/// Kernel engine: `a_out = C * int K(t, t') a_in(t') dt'`, with the write
/// integral taken on the fine convolution grid.
#[allow(clippy::too_many_arguments)]
pub fn kernel_engine<T: FftReal>(
    input: &PulseProfile<T>,
    l: ModeIndex,
    write: Drive,
    read: Drive,
    couplings: &StageCouplings<T>,
    chi_norm: ChiNormalization,
    params: &MemoryParams<T>,
    grids: &GridSpec,
) -> Result<KernelEngineOutput<T>> {
    let (chi_w, chi_r) = (couplings.write.norm(), couplings.read.norm());
    params.with_chi(chi_w).validate()?;
    params.with_chi(chi_r).validate()?;
    grids.validate()?;
    let z_axis = Axis::span(params.l_tilde, grids.nz)?;
    let z_nodes = z_axis.nodes();
    let z_weights = z_axis.weights();
    let axis_in = Axis::span(params.t_write, grids.nt)?;
    let axis_out = Axis::span(params.t_read, grids.nt)?;
    if input.axis != axis_in {
        return Err(Error::GridMismatch("input pulse axis differs from the write axis".into()));
    }
    let write_sub = grids.kernel_substeps_for(&axis_in, params.r, chi_w, params.l_tilde);
    let read_sub = grids.kernel_substeps_for(&axis_out, params.r, chi_r, params.l_tilde);
    let nt = grids.nt;
    let n_fine = (nt - 1) * write_sub + 1;

    // per cell node: G_write(z_k, T_W - t'_j) on the coarse axis and the stored coherence
    let written: Vec<(Vec<Cplx<T>>, Cplx<T>)> = map_g_rows(&z_nodes, params.r, chi_w, &axis_in, write_sub, |_, row, h| {
        let coarse = (0..nt).map(|j| row[(nt - 1 - j) * write_sub]).collect();
        let mut acc = Cplx::new(T::zero(), T::zero());
        for j in 0..n_fine {
            let w = if j == 0 || j + 1 == n_fine { h * T::lit(0.5) } else { h };
            acc = acc + input.value_at(h * T::from_count(j)) * row[n_fine - 1 - j] * w;
        }
        (coarse, acc)
    });
    let read_rows: Vec<Vec<Cplx<T>>> = map_g_rows(&z_nodes, params.r, chi_r, &axis_out, read_sub, |_, row, _| {
        (0..nt).map(|i| row[i * read_sub]).collect()
    });

    let lambda = params.field_scale();
    let stored: Vec<Cplx<T>> = written.iter().map(|(_, acc)| -couplings.write.conj() / lambda * *acc).collect();
    let nz = grids.nz;
    let out_factor = -couplings.read * (lambda * T::lit(0.5) * couplings.amplitude_map);
    let samples = (0..nt)
        .map(|i| {
            let mut acc = Cplx::new(T::zero(), T::zero());
            for k in 0..nz {
                acc = acc + stored[k] * read_rows[nz - 1 - k][i] * z_weights[k];
            }
            acc * out_factor
        })
        .collect();

    let write_rows: Vec<Vec<Cplx<T>>> = written.into_iter().map(|(coarse, _)| coarse).collect();
    let meta = KernelMeta {
        r: params.r,
        l_tilde: params.l_tilde,
        t_write: params.t_write,
        t_read: params.t_read,
        chi_write: chi_w,
        chi_read: chi_r,
        l,
        write,
        read,
        chi_norm,
        nz,
        write_substeps: write_sub,
        read_substeps: read_sub,
        rapid_phase_factored: false,
    };
    let kernel = assemble_kernel(axis_out, axis_in, &read_rows, &write_rows, &z_weights, meta)?;
    Ok(KernelEngineOutput { pulse: PulseProfile::new(axis_out, samples)?, kernel })
}

/// Integrator engine: write, store and read through [`crate::dynamics`].
pub fn pde_engine<T: Real>(
    input: &PulseProfile<T>,
    l: ModeIndex,
    write: Drive,
    read: Drive,
    couplings: &StageCouplings<T>,
    params: &MemoryParams<T>,
    grids: &GridSpec,
) -> Result<PulseProfile<T>> {
    let state = evolve_write(input, l, write.oam(), couplings.write, params, grids)?;
    let stored = apply_storage(&state)?;
    let out = evolve_read(&stored, read.oam(), couplings.read, params, grids)?;
    debug_assert_eq!(out.l_out, couplings.l_out);
    Ok(out.pulse.scaled(Cplx::new(couplings.amplitude_map, T::zero())))
}

/// Summary of one write/store/read cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport<T> {
    pub l_in: i32,
    pub write_oam: i32,
    pub read_oam: i32,
    pub l_out: i32,
    pub efficiency: T,
    pub conversion_factor: Cplx<T>,
    pub conversion_magnitude: T,
    pub leading_singular_value: T,
    /// `leading_singular_value * conversion_magnitude`.
    pub combined_gain: T,
    pub engine: Engine,
    /// Relative L2 distance of the integrator output from the kernel output.
    pub agreement: Option<T>,
    pub engines_disagree: bool,
    pub convention: AreaConvention,
    pub chi_norm: ChiNormalization,
    pub write_drive: Drive,
    pub read_drive: Drive,
    pub zs_ratio: T,
    pub params: MemoryParams<T>,
    pub grids: GridSpec,
}

/// Report plus the pulses behind it.
pub struct CycleOutcome<T> {
    pub report: CycleReport<T>,
    /// Kernel output when available, integrator output otherwise.
    pub output: PulseProfile<T>,
    pub kernel_output: Option<PulseProfile<T>>,
    pub pde_output: Option<PulseProfile<T>>,
    pub spectrum: Option<SingularSpectrum<T>>,
}

/// Runs one cycle of signal mode `l` with write drive `write` and read drive `read`.
#[allow(clippy::too_many_arguments)]
pub fn run_cycle<T: FftReal>(
    input: &PulseProfile<T>,
    l: ModeIndex,
    write: Drive,
    read: Drive,
    setup: &CycleSetup<T>,
    params: &MemoryParams<T>,
    grids: &GridSpec,
    engine: Engine,
) -> Result<CycleOutcome<T>> {
    setup.check_geometry()?;
    let couplings = stage_couplings(l, write, read, setup)?;
    let params = params.with_chi(couplings.write.norm());

    let kernel_side = match engine {
        Engine::Kernel | Engine::Both => {
            Some(kernel_engine(input, l, write, read, &couplings, setup.chi_norm, &params, grids)?)
        }
        Engine::Pde => None,
    };
    let pde_output = match engine {
        Engine::Pde | Engine::Both => Some(pde_engine(input, l, write, read, &couplings, &params, grids)?),
        Engine::Kernel => None,
    };

    let kernel = match &kernel_side {
        Some(k) => k.kernel.clone(),
        None => {
            let stages = StagePair {
                l,
                write,
                read,
                chi_write: couplings.write.norm(),
                chi_read: couplings.read.norm(),
                chi_norm: setup.chi_norm,
            };
            full_cycle_kernel(&stages, &params, grids)?
        }
    };
    let spectrum = discretize_and_decompose(&kernel)?;
    let kernel_output = kernel_side.map(|k| k.pulse);
    let agreement = match (&kernel_output, &pde_output) {
        (Some(k), Some(p)) => Some(p.relative_l2_distance(k)?),
        _ => None,
    };
    let output = kernel_output.clone().or_else(|| pde_output.clone()).expect("an engine ran");
    let input_norm = input.norm();
    let efficiency = if input_norm == T::zero() { T::zero() } else { output.norm() / input_norm };
    if !Float::is_finite(efficiency) {
        return Err(Error::NonFinite("cycle output"));
    }
    let factor = couplings.conversion_factor();
    let leading = spectrum.leading();
    let report = CycleReport {
        l_in: l.value(),
        write_oam: write.oam().value(),
        read_oam: read.oam().value(),
        l_out: couplings.l_out.value(),
        efficiency,
        conversion_factor: factor,
        conversion_magnitude: factor.norm(),
        leading_singular_value: leading,
        combined_gain: leading * factor.norm(),
        engine,
        agreement,
        engines_disagree: agreement.is_some_and(|a| a > T::lit(DISAGREEMENT_LIMIT)),
        convention: setup.convention,
        chi_norm: setup.chi_norm,
        write_drive: write,
        read_drive: read,
        zs_ratio: setup.beam.offset_ratio(),
        params,
        grids: *grids,
    };
    Ok(CycleOutcome { report, output, kernel_output, pde_output, spectrum: Some(spectrum) })
}
