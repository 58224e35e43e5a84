use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use oam_memory::dynamics::{apply_storage, evolve_read, evolve_write, PulseProfile};
use oam_memory::io::{kernel_sidecar, to_json, write_kernel_binary, write_kernel_csv, write_scan_csv, OutputTags};
use oam_memory::kernels::{full_cycle_kernel, Axis, StagePair};
use oam_memory::memory_cycle::{
    discretize_and_decompose, optimize_parameters, run_cycle, stage_couplings, CycleSetup,
};
use oam_memory::modes::check_paraxial_constraints;
use oam_memory::overlap::scan_chi as scan_overlaps;
use oam_memory::quadrature::QuadratureSpec;
use oam_memory::ModeIndex;

use crate::config::{InputShape, RunConfig};
use crate::error::CliError;

/// Kernels with at most this many entries are also written as CSV.
pub const KERNEL_CSV_LIMIT: usize = 10_000;

pub struct Context {
    pub config: RunConfig,
    pub tags: OutputTags,
}

impl Context {
    pub fn new(config: RunConfig) -> Self {
        let tags = OutputTags {
            convention: config.conventions.area,
            chi_norm: config.conventions.chi_norm,
            config_hash: config.hash(),
        };
        Context { config, tags }
    }

    fn out_path(&self) -> Option<&Path> {
        self.config.output.path.as_deref()
    }

    fn require_out(&self, what: &str) -> Result<&Path, CliError> {
        self.out_path().ok_or_else(|| CliError::Config(format!("`output.path`: {what} needs an output path (--out)")))
    }

    fn sink(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match self.out_path() {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)),
            None => Box::new(BufWriter::new(std::io::stdout())),
        })
    }

    fn setup(&self) -> Result<CycleSetup<f64>, CliError> {
        let mut setup = CycleSetup::new(self.config.beam()?);
        setup.cell = self.config.cell()?;
        setup.convention = self.config.conventions.area;
        setup.chi_norm = self.config.conventions.chi_norm;
        Ok(setup)
    }

    fn input_pulse(&self) -> Result<PulseProfile<f64>, CliError> {
        let params = self.config.params()?;
        let grids = self.config.grids()?;
        let axis = Axis::span(params.t_write, grids.nt)?;
        let c = &self.config.cycle;
        match c.input {
            InputShape::Gaussian => {
                let (t0, width) = (c.center * params.t_write, c.width * params.t_write);
                Ok(PulseProfile::from_fn(axis, |t| Complex64::new((-((t - t0) / width).powi(2)).exp(), 0.0)))
            }
            InputShape::Leading => {
                let k = full_cycle_kernel(&StagePair::plane_wave(ModeIndex::ZERO), &params, &grids)?;
                let s = discretize_and_decompose(&k)?;
                Ok(PulseProfile::new(axis, s.right[0].clone())?)
            }
        }
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn scan_chi(ctx: &Context) -> Result<(), CliError> {
    let (ls, ms) = ctx.config.scan_indices()?;
    let grid = ctx.config.scan_grid()?;
    let beam = ctx.config.beam()?;
    let quad = QuadratureSpec::default();
    let mut records = Vec::new();
    for m in ms {
        records.extend(scan_overlaps(&ls, m, &grid, &beam, ctx.config.conventions.area, &quad)?);
    }
    let mut out = ctx.sink()?;
    write_scan_csv(&records, &ctx.tags, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn kernel(ctx: &Context) -> Result<(), CliError> {
    let stem = ctx.require_out("kernel")?;
    let params = ctx.config.params()?;
    let grids = ctx.config.grids()?;
    let (l, write, read) = ctx.config.cycle_drives()?;
    let setup = ctx.setup()?;
    let couplings = stage_couplings(l, write, read, &setup)?;
    let stages = StagePair {
        l,
        write,
        read,
        chi_write: couplings.write.norm(),
        chi_read: couplings.read.norm(),
        chi_norm: setup.chi_norm,
    };
    let k = full_cycle_kernel(&stages, &params.with_chi(stages.chi_write), &grids)?;

    let mut bin = create(&with_suffix(stem, ".bin"))?;
    write_kernel_binary(&k, &mut bin)?;
    bin.flush()?;
    let mut side = create(&with_suffix(stem, ".json"))?;
    side.write_all(to_json(&kernel_sidecar(&k, &ctx.tags))?.as_bytes())?;
    side.flush()?;
    if k.values.len() <= KERNEL_CSV_LIMIT {
        let mut csv = create(&with_suffix(stem, ".csv"))?;
        write_kernel_csv(&k, &ctx.tags, &mut csv)?;
        csv.flush()?;
    }
    let spectrum = discretize_and_decompose(&k)?;
    let mut spec = create(&with_suffix(stem, ".spectrum.csv"))?;
    ctx.tags.write_preamble(&mut spec)?;
    spectrum.write_csv(&mut spec)?;
    spec.flush()?;
    Ok(())
}

pub fn cycle(ctx: &Context) -> Result<(), CliError> {
    let params = ctx.config.params()?;
    let grids = ctx.config.grids()?;
    let (l, write, read) = ctx.config.cycle_drives()?;
    let setup = ctx.setup()?;
    let input = ctx.input_pulse()?;
    let outcome = run_cycle(&input, l, write, read, &setup, &params, &grids, ctx.config.cycle.engine)?;
    let mut out = ctx.sink()?;
    out.write_all(to_json(&ReportFile { tags: &ctx.tags, report: &outcome.report })?.as_bytes())?;
    out.flush()?;
    if outcome.report.engines_disagree {
        return Err(CliError::Disagreement(format!(
            "relative L2 distance {:e} between kernel and integrator outputs",
            outcome.report.agreement.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ReportFile<'a, R: serde::Serialize> {
    tags: &'a OutputTags,
    report: &'a R,
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let params = ctx.config.params()?;
    let grids = ctx.config.grids()?;
    let (l, write, read) = ctx.config.cycle_drives()?;
    let setup = ctx.setup()?;
    setup.check_geometry()?;
    let couplings = stage_couplings(l, write, read, &setup)?;
    let input = ctx.input_pulse()?;
    let params = params.with_chi(couplings.write.norm());
    let written = evolve_write(&input, l, write.oam(), couplings.write, &params, &grids)?;
    let stored = apply_storage(&written)?;
    let out = evolve_read(&stored, read.oam(), couplings.read, &params, &grids)?;
    let pulse = out.pulse.scaled(Complex64::new(couplings.amplitude_map, 0.0));

    let mut sink = ctx.sink()?;
    ctx.tags.write_preamble(&mut sink)?;
    writeln!(sink, "# l_out={}", out.l_out)?;
    pulse.write_csv(&mut sink)?;
    sink.flush()?;
    if let Some(stem) = ctx.out_path() {
        let mut state = create(&with_suffix(stem, ".state.csv"))?;
        ctx.tags.write_preamble(&mut state)?;
        written.write_csv(&mut state)?;
        state.flush()?;
    }
    Ok(())
}

pub fn check_geometry(ctx: &Context) -> Result<(), CliError> {
    let beam = ctx.config.beam_unchecked()?;
    let cell = ctx.config.cell()?.ok_or_else(|| {
        CliError::Config("`geometry.cell_length`: check-geometry needs geometry.cell_length and geometry.cell_area".into())
    })?;
    let report = check_paraxial_constraints(&beam, &cell, &Default::default());
    let mut out = ctx.sink()?;
    for c in &report.checks {
        writeln!(out, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.describe())?;
    }
    let failed = report.failures().count();
    if failed == 0 {
        writeln!(out, "PASS ×{}", report.checks.len())?;
    } else {
        writeln!(out, "FAIL ×{failed}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn optimize(ctx: &Context) -> Result<(), CliError> {
    let (l_range, t_range, grids) = ctx.config.search()?;
    let base = ctx.config.params()?;
    let best = optimize_parameters(&l_range, &t_range, &base, &grids)?;
    let mut out = ctx.sink()?;
    out.write_all(to_json(&ReportFile { tags: &ctx.tags, report: &best })?.as_bytes())?;
    out.flush()?;
    Ok(())
}
