//! File formats shared with downstream plotting.
//!
//! CSV files start with `#`-prefixed preamble lines carrying the convention
//! flags and a configuration hash, followed by a mandatory header row. Floats
//! are written with 17 significant digits so identical inputs give identical
//! bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Axis, KernelGrid, KernelMeta};
use crate::modes::AreaConvention;
use crate::overlap::{curve_peak, ChiNormalization, OverlapRecord};
use crate::scalar::{Cplx, Real};

/// Layout name stored in kernel sidecars.
pub const KERNEL_LAYOUT: &str = "complex-f64-le-row-major";

/// Provenance written into every output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputTags {
    pub convention: AreaConvention,
    pub chi_norm: ChiNormalization,
    pub config_hash: String,
}

impl OutputTags {
    pub fn write_preamble<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# convention={}", self.convention.tag())?;
        writeln!(out, "# chi_norm={}", self.chi_norm.tag())?;
        writeln!(out, "# config_hash={}", self.config_hash)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_float<T: Real>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// Column names of the overlap scan CSV.
pub const SCAN_COLUMNS: &str =
    "l,m,zs_ratio,re_chi,im_chi,abs_chi_tilde,abs_chi_over_s,convention,quad_order,is_curve_max";

/// Writes overlap records; `is_curve_max` marks the largest `|chi_tilde|` of each `(l, m)` curve.
pub fn write_scan_csv<T: Real, W: Write>(records: &[OverlapRecord<T>], tags: &OutputTags, out: &mut W) -> std::io::Result<()> {
    tags.write_preamble(out)?;
    writeln!(out, "{SCAN_COLUMNS}")?;
    let mut curves: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
    for (k, rec) in records.iter().enumerate() {
        curves.entry((rec.l.value(), rec.m.value())).or_default().push(k);
    }
    let mut is_max = vec![false; records.len()];
    for members in curves.values() {
        let mags: Vec<T> = members.iter().map(|&k| records[k].chi_tilde.norm()).collect();
        if let Some(peak) = curve_peak(&mags) {
            is_max[members[peak.index]] = true;
        }
    }
    for (rec, flag) in records.iter().zip(is_max) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            rec.l,
            rec.m,
            fmt_float(rec.zs_ratio),
            fmt_float(rec.chi.re),
            fmt_float(rec.chi.im),
            fmt_float(rec.chi_tilde.norm()),
            fmt_float(rec.chi_over_s.norm()),
            rec.convention.tag(),
            rec.quad_order,
            flag
        )?;
    }
    Ok(())
}

/// JSON sidecar describing a binary kernel file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub layout: String,
    pub rows: usize,
    pub cols: usize,
    pub axis_out: Axis<f64>,
    pub axis_in: Axis<f64>,
    pub meta: KernelMeta<f64>,
    pub tags: OutputTags,
}

fn meta_to_f64<T: Real>(m: &KernelMeta<T>) -> KernelMeta<f64> {
    KernelMeta {
        r: m.r.to_f64_lossy(),
        l_tilde: m.l_tilde.to_f64_lossy(),
        t_write: m.t_write.to_f64_lossy(),
        t_read: m.t_read.to_f64_lossy(),
        chi_write: m.chi_write.to_f64_lossy(),
        chi_read: m.chi_read.to_f64_lossy(),
        l: m.l,
        write: m.write,
        read: m.read,
        chi_norm: m.chi_norm,
        nz: m.nz,
        write_substeps: m.write_substeps,
        read_substeps: m.read_substeps,
        rapid_phase_factored: m.rapid_phase_factored,
    }
}

fn axis_to_f64<T: Real>(a: &Axis<T>) -> Axis<f64> {
    Axis { start: a.start.to_f64_lossy(), step: a.step.to_f64_lossy(), n: a.n }
}

/// Sidecar for `kernel`.
pub fn kernel_sidecar<T: Real>(kernel: &KernelGrid<T>, tags: &OutputTags) -> KernelSidecar {
    KernelSidecar {
        layout: KERNEL_LAYOUT.to_string(),
        rows: kernel.rows(),
        cols: kernel.cols(),
        axis_out: axis_to_f64(&kernel.axis_out),
        axis_in: axis_to_f64(&kernel.axis_in),
        meta: meta_to_f64(&kernel.meta),
        tags: tags.clone(),
    }
}

/// Writes `(re, im)` pairs as little-endian `f64`, row by row.
pub fn write_kernel_binary<T: Real, W: Write>(kernel: &KernelGrid<T>, out: &mut W) -> std::io::Result<()> {
    for v in &kernel.values {
        out.write_all(&v.re.to_f64_lossy().to_le_bytes())?;
        out.write_all(&v.im.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

/// Reads a kernel written by [`write_kernel_binary`].
pub fn read_kernel_binary<R: Read>(input: &mut R, sidecar: &KernelSidecar) -> Result<KernelGrid<f64>> {
    if sidecar.layout != KERNEL_LAYOUT {
        return Err(Error::GridMismatch(format!("unsupported kernel layout `{}`", sidecar.layout)));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::GridMismatch(format!("reading kernel: {e}")))?;
    let expected = sidecar.rows * sidecar.cols * 16;
    if bytes.len() != expected {
        return Err(Error::GridMismatch(format!("kernel file has {} bytes, sidecar implies {expected}", bytes.len())));
    }
    let word = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8-byte chunk"));
    let values = (0..sidecar.rows * sidecar.cols).map(|k| Cplx::new(word(2 * k), word(2 * k + 1))).collect();
    KernelGrid::new(sidecar.axis_out, sidecar.axis_in, values, sidecar.meta.clone())
}

/// Long-format CSV `i,j,t,t_prime,re_k,im_k` for small kernels.
pub fn write_kernel_csv<T: Real, W: Write>(kernel: &KernelGrid<T>, tags: &OutputTags, out: &mut W) -> std::io::Result<()> {
    tags.write_preamble(out)?;
    writeln!(out, "i,j,t,t_prime,re_k,im_k")?;
    for i in 0..kernel.rows() {
        for j in 0..kernel.cols() {
            let v = kernel.at(i, j);
            writeln!(
                out,
                "{i},{j},{},{},{},{}",
                fmt_float(kernel.axis_out.node(i)),
                fmt_float(kernel.axis_in.node(j)),
                fmt_float(v.re),
                fmt_float(v.im)
            )?;
        }
    }
    Ok(())
}

/// Pretty JSON with the fields in declaration order and a trailing newline.
pub fn to_json<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::InvalidParams(format!("serializing report: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{full_cycle_kernel, GridSpec, MemoryParams, StagePair};
    use crate::modes::{BeamGeometry, ModeIndex};
    use crate::overlap::scan_chi;
    use crate::quadrature::QuadratureSpec;

    fn tags() -> OutputTags {
        OutputTags { convention: AreaConvention::Half, chi_norm: ChiNormalization::Appendix, config_hash: "abc123".into() }
    }

    #[test]
    fn kernel_binary_round_trips() {
        let k = full_cycle_kernel(&StagePair::plane_wave(ModeIndex::ZERO), &MemoryParams::plane_wave(1.0, 2.0, 3.0), &GridSpec::new(11, 7)).unwrap();
        let mut bytes = Vec::new();
        write_kernel_binary(&k, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 7 * 7 * 16);
        let sidecar = kernel_sidecar(&k, &tags());
        let json = serde_json::to_string(&sidecar).unwrap();
        let back: KernelSidecar = serde_json::from_str(&json).unwrap();
        let k2 = read_kernel_binary(&mut bytes.as_slice(), &back).unwrap();
        assert_eq!(k2.values, k.values);
        assert_eq!(k2.axis_out, k.axis_out);
        assert!(read_kernel_binary(&mut &bytes[..16], &back).is_err());
    }

    #[test]
    fn scan_csv_has_preamble_header_and_one_max_per_curve() {
        let g = BeamGeometry::with_offset_ratio(1.0, 1e-3, 0.0).unwrap();
        let ls = [ModeIndex::new(1).unwrap(), ModeIndex::new(2).unwrap()];
        let zs = [0.0, 0.5, 1.0, 2.0, 4.0];
        let recs = scan_chi(&ls, ModeIndex::new(1).unwrap(), &zs, &g, AreaConvention::Half, &QuadratureSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_scan_csv(&recs, &tags(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# convention=half");
        assert_eq!(lines[2], "# config_hash=abc123");
        assert_eq!(lines[3], SCAN_COLUMNS);
        assert_eq!(lines.len(), 4 + 10);
        assert_eq!(lines[4..].iter().filter(|l| l.ends_with(",true")).count(), 2);
        let mut empty = Vec::new();
        write_scan_csv::<f64, _>(&[], &tags(), &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 4);
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(0.1f64), "1.0000000000000001e-1");
        assert_eq!(fmt_float(1.0f64 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
