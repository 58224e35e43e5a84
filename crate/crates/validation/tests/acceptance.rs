//! Acceptance criteria. Each check prints one line:
//! `PASS|FAIL <n> <name>: <measurement>`. The process exits non-zero when any
//! criterion fails; failing checks are reported, never skipped.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use oam_memory::dynamics::{evolve_write_probed, PulseProfile};
use oam_memory::kernels::{
    full_cycle_kernel, g_kernel_row, g_raman_limit_row, Axis, ConvolutionPlan, GridSpec, MemoryParams, StagePair,
};
use oam_memory::memory_cycle::{discretize_and_decompose, run_cycle, CycleSetup, Engine};
use oam_memory::modes::{mode_area, BeamGeometry};
use oam_memory::overlap::{chi, curve_peak, inner_product_2d, scan_chi, triple_overlap_2d, Drive};
use oam_memory::quadrature::QuadratureSpec;
use oam_memory::{AreaConvention, Cplx, ModeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn idx(m: i64) -> ModeIndex {
    ModeIndex::new(m).unwrap()
}

/// Unit-waist beam; `lambda` keeps the paraxial margin large.
fn beam(zs_ratio: f64) -> BeamGeometry<f64> {
    BeamGeometry::with_offset_ratio(1.0, 1e-3, zs_ratio).unwrap()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn within_budget(elapsed: Duration, budget: Duration) -> (bool, String) {
    (elapsed <= budget, format!("{:.1} s of {} s", elapsed.as_secs_f64(), budget.as_secs()))
}

fn selection_rule() -> Outcome {
    let start = Instant::now();
    let quad = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut drawn = 0;
    while drawn < 50 {
        let (n, m, l) = (rng.gen_range(-6..=6), rng.gen_range(-6..=6), rng.gen_range(-6..=6));
        if n == l - m {
            continue;
        }
        drawn += 1;
        let g = beam(rng.gen_range(0.0..3.0));
        let v = triple_overlap_2d(idx(n), idx(m), idx(l), &g, AreaConvention::Half, 32, &quad).unwrap();
        let scale = (mode_area(idx(l), 0.0, &g, AreaConvention::Half) * mode_area(idx(n), 0.0, &g, AreaConvention::Half)).sqrt();
        worst = worst.max(v.norm() / scale);
    }
    let (fast, time) = within_budget(start.elapsed(), Duration::from_secs(10));
    outcome(worst < 1e-12 && fast, format!("max |chi_tilde| over 50 forbidden triples = {worst:.3e} (< 1e-12), {time}"))
}

fn orthonormality() -> Outcome {
    let quad = QuadratureSpec::default();
    let g = beam(0.0);
    let mut worst = 0.0f64;
    for z in [0.0, 0.7] {
        for a in -10..=10 {
            for b in a..=10 {
                let v = inner_product_2d(idx(a), idx(b), z, &g, 64, &quad).unwrap();
                let target = if a == b { Cplx::new(1.0, 0.0) } else { Cplx::new(0.0, 0.0) };
                worst = worst.max((v - target).norm());
            }
        }
    }
    outcome(worst < 1e-8, format!("max |Gram - I| for |m| <= 10 at z = 0 and 0.7 z_R: {worst:.3e} (< 1e-8)"))
}

fn closed_form_anchor() -> Outcome {
    let rec = chi(idx(0), idx(0), &beam(0.0), AreaConvention::Half, &QuadratureSpec::default()).unwrap();
    let err = (rec.chi_tilde - Cplx::new(2.0 / 3.0, 0.0)).norm();
    outcome(err < 1e-9, format!("chi_tilde(0, 0, z_S = 0) = {:.15} (2/3 within 1e-9, error {err:.1e})", rec.chi_tilde.re))
}

fn unity_limit() -> Outcome {
    let ls: Vec<ModeIndex> = (0..=5).map(idx).collect();
    let zs = linspace(0.0, 50.0, 100);
    let recs = scan_chi(&ls, idx(0), &zs, &beam(0.0), AreaConvention::Half, &QuadratureSpec::default()).unwrap();
    let mut ok = true;
    let mut ends = Vec::new();
    for curve in recs.chunks(zs.len()) {
        let mags: Vec<f64> = curve.iter().map(|r| r.chi_tilde.norm()).collect();
        let end = *mags.last().unwrap();
        ok &= end >= 0.98 && mags.windows(2).all(|w| w[1] >= w[0]);
        ends.push(format!("{end:.4}"));
    }
    outcome(ok, format!("|chi_tilde| at 50 z_R for l = 0..5: [{}] (>= 0.98, nondecreasing)", ends.join(", ")))
}

fn conversion_peaks() -> Outcome {
    let ls: Vec<ModeIndex> = (1..=6).map(idx).collect();
    let zs = linspace(0.0, 5.0, 101);
    let quad = QuadratureSpec::default();
    let peaks = |m: i64| -> Vec<(bool, f64)> {
        scan_chi(&ls, idx(m), &zs, &beam(0.0), AreaConvention::Half, &quad)
            .unwrap()
            .chunks(zs.len())
            .map(|curve| {
                let mags: Vec<f64> = curve.iter().map(|r| r.chi_over_s.norm()).collect();
                let p = curve_peak(&mags).unwrap();
                (p.interior && p.unimodal, p.value)
            })
            .collect()
    };
    let down = peaks(1);
    let up = peaks(-1);
    let unique = down.iter().all(|p| p.0);
    let down_ok = (down[0].1 - 0.9).abs() <= 0.1;
    let up_ok = up[..3].iter().all(|p| (0.5..=0.9).contains(&p.1));
    let fmt = |v: &[(bool, f64)]| v.iter().map(|p| format!("{:.3}", p.1)).collect::<Vec<_>>().join(", ");
    outcome(
        unique && down_ok && up_ok,
        format!(
            "J = 1 unique interior maxima: {unique}; |chi/S| peaks J = 1 [{}] (l = 1 in 0.9 +- 0.1), J = -1 [{}] (l <= 3 in 0.5..0.9)",
            fmt(&down),
            fmt(&up)
        ),
    )
}

fn raman_limit_kernel() -> Outcome {
    let start = Instant::now();
    let (r, step) = (50.0, 1e-3);
    let n = 10_001;
    let plan = ConvolutionPlan::new(n);
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for zi in 0..=50 {
        let z = zi as f64;
        let full = g_kernel_row(z, r, 1.0, step, n, &plan);
        let limit = g_raman_limit_row(z, r, step, n);
        for (f, l) in full.iter().zip(&limit) {
            diff = diff.max((f - l).norm());
            scale = scale.max(l.norm());
        }
    }
    let rel = diff / scale;
    let (fast, time) = within_budget(start.elapsed(), Duration::from_secs(60));
    outcome(rel < 1e-2 && fast, format!("r = 50 sup |G - G_limit| / sup |G_limit| = {rel:.4e} (< 1e-2), {time}"))
}

/// Leading input mode of the plane-wave kernel, resampled onto `nt` points.
fn leading_input(params: &MemoryParams<f64>, nt: usize) -> PulseProfile<f64> {
    let k = full_cycle_kernel(&StagePair::plane_wave(ModeIndex::ZERO), params, &GridSpec::new(60, 60)).unwrap();
    let mode = PulseProfile::new(k.axis_in, discretize_and_decompose(&k).unwrap().right[0].clone()).unwrap();
    PulseProfile::from_fn(Axis::span(params.t_write, nt).unwrap(), |t| mode.value_at(t))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let params = MemoryParams::plane_wave(50.0, 100.0, 10.0);
    let grids = GridSpec::new(200, 200);
    let input = leading_input(&params, grids.nt);
    let agreement = |l: i64, write: Drive, zs: f64| {
        let setup = CycleSetup::new(beam(zs));
        let out = run_cycle(&input, idx(l), write, Drive::PlaneWave, &setup, &params, &grids, Engine::Both).unwrap();
        out.report.agreement.unwrap()
    };
    let plane = agreement(0, Drive::PlaneWave, 0.0);
    let conversion = agreement(2, Drive::LaguerreGauss(idx(1)), 1.2);
    let (fast, time) = within_budget(start.elapsed(), Duration::from_secs(300));
    outcome(
        plane < 1e-3 && conversion < 5e-3 && fast,
        format!("kernel vs integrator relative L2: plane wave {plane:.3e} (< 1e-3), l = 2 J = 1 {conversion:.3e} (< 5e-3), {time}"),
    )
}

fn conservation() -> Outcome {
    let params = MemoryParams::plane_wave(50.0, 100.0, 10.0);
    let input = leading_input(&params, 200);
    let defect = |sub| {
        let grids = GridSpec { pde_substeps: Some(sub), ..GridSpec::new(200, 200) };
        evolve_write_probed(&input, ModeIndex::ZERO, ModeIndex::ZERO, Cplx::new(1.0, 0.0), &params, &grids)
            .unwrap()
            .1
            .relative()
    };
    let (coarse, fine) = (defect(30), defect(60));
    let ratio = coarse / fine;
    outcome(ratio >= 3.5, format!("continuity defect {coarse:.3e} -> {fine:.3e} on halving the step, ratio {ratio:.2} (>= 3.5)"))
}

fn l_independence() -> Outcome {
    let params = MemoryParams::<f64>::plane_wave(50.0, 100.0, 10.0);
    let grids = GridSpec::new(40, 40);
    let k0 = full_cycle_kernel(&StagePair::plane_wave(idx(0)), &params, &grids).unwrap();
    let k7 = full_cycle_kernel(&StagePair::plane_wave(idx(7)), &params, &grids).unwrap();
    let same = k0.values.iter().zip(&k7.values).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    outcome(same, format!("plane-wave K for l = 0 and l = 7 bitwise identical: {same}"))
}

fn oam_ledger() -> Outcome {
    let params = MemoryParams::plane_wave(2.0, 5.0, 5.0);
    let grids = GridSpec::new(20, 20);
    let input = PulseProfile::from_fn(Axis::span(5.0, 20).unwrap(), |t| Cplx::new((-((t - 2.5) / 0.8f64).powi(2)).exp(), 0.0));
    let setup = CycleSetup::new(beam(1.0));
    let mut bad = Vec::new();
    for l in -1..=1 {
        for i in -1..=1 {
            for j in -1..=1 {
                let (write, read) = (Drive::LaguerreGauss(idx(j)), Drive::LaguerreGauss(idx(i)));
                let report = run_cycle(&input, idx(l), write, read, &setup, &params, &grids, Engine::Kernel).unwrap().report;
                if report.l_out != l as i32 + i as i32 - j as i32 {
                    bad.push(format!("(l={l}, I={i}, J={j}) -> {}", report.l_out));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("l_out = l + I - J over 27 cycles, violations: [{}]", bad.join("; ")))
}

fn reality_check() -> Outcome {
    let params = MemoryParams::plane_wave(50.0, 100.0, 10.0);
    let k = full_cycle_kernel(&StagePair::plane_wave(ModeIndex::ZERO), &params, &GridSpec::new(60, 60)).unwrap();
    let residual = k.reality_residual();
    outcome(residual < 1e-3, format!("r = 50 max|Im K| / max|Re K| after factoring exp(-2irt) = {residual:.4e} (< 1e-3)"))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "selection rule", selection_rule),
        (2, "orthonormality", orthonormality),
        (3, "closed-form anchor", closed_form_anchor),
        (4, "unity limit", unity_limit),
        (5, "conversion peaks", conversion_peaks),
        (6, "Raman-limit kernel", raman_limit_kernel),
        (7, "oracle equivalence", oracle_equivalence),
        (8, "conservation", conservation),
        (9, "kernel l-independence", l_independence),
        (10, "OAM ledger", oam_ledger),
        (11, "reality check", reality_check),
    ];
    let mut failed = Vec::new();
    for (n, name, check) in criteria {
        let o = check();
        println!("{} {n:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 11 criteria fail: {failed:?}", failed.len());
        ExitCode::FAILURE
    }
}
