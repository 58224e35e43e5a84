//! Triple-mode overlap integrals between signal, drive and spin-coherence modes.
//!
//! The azimuthal integral of `U_n U_m U_l^*` is `2 pi` times a Kronecker delta
//! on `n + m - l`, so only the radial integral is evaluated numerically. The
//! drive mode carries its full propagation phase at `z_s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{
    beam_radius, lg_amplitude, lg_radial, mode_area, AreaConvention, BeamGeometry, ModeIndex,
};
use crate::quadrature::{integrate_converged, QuadratureSpec};
use crate::scalar::{Cplx, Real};

/// Which normalization of the overlap feeds the kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiNormalization {
    /// `chi / sqrt(S_l S_{l-m})`.
    #[default]
    Appendix,
    /// `chi / S_{l-m}`.
    Maintext,
}

impl ChiNormalization {
    pub fn tag(self) -> &'static str {
        match self {
            ChiNormalization::Appendix => "appendix",
            ChiNormalization::Maintext => "maintext",
        }
    }
}

impl std::str::FromStr for ChiNormalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "appendix" => Ok(ChiNormalization::Appendix),
            "maintext" => Ok(ChiNormalization::Maintext),
            other => Err(Error::InvalidParams(format!("unknown chi normalization `{other}`"))),
        }
    }
}

/// One evaluation of the overlap `chi_{l,m}` at a drive waist offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapRecord<T> {
    pub l: ModeIndex,
    pub m: ModeIndex,
    /// Coherence index, always `l - m`.
    pub n: ModeIndex,
    pub zs_ratio: T,
    pub chi: Cplx<T>,
    pub chi_tilde: Cplx<T>,
    pub chi_over_s: Cplx<T>,
    pub convention: AreaConvention,
    pub quad_order: usize,
}

impl<T: Real> OverlapRecord<T> {
    /// Coupling magnitude the kernels use under `norm`.
    pub fn coupling(&self, norm: ChiNormalization) -> Cplx<T> {
        match norm {
            ChiNormalization::Appendix => self.chi_tilde,
            ChiNormalization::Maintext => self.chi_over_s,
        }
    }
}

/// Spatial profile of a driving field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    PlaneWave,
    LaguerreGauss(ModeIndex),
}

impl Drive {
    pub fn oam(self) -> ModeIndex {
        match self {
            Drive::PlaneWave => ModeIndex::ZERO,
            Drive::LaguerreGauss(m) => m,
        }
    }

    pub fn label(self) -> String {
        match self {
            Drive::PlaneWave => "plane".to_string(),
            Drive::LaguerreGauss(m) => m.to_string(),
        }
    }
}

/// Radius beyond which `rho^p exp(-a rho^2)` is below `exp(-128)` of its peak.
fn radial_cutoff<T: Real>(power: u32, decay: T) -> T {
    let p = T::from_u32(power).unwrap();
    let peak = (p / (T::lit(2.0) * decay)).sqrt();
    peak + T::lit(8.0) / decay.sqrt()
}

/// `chi_{l,m}` with all three normalizations.
pub fn chi<T: Real>(
    l: ModeIndex,
    m: ModeIndex,
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
    quad: &QuadratureSpec,
) -> Result<OverlapRecord<T>> {
    let n = l.checked_sub(m)?;
    let zero = T::zero();
    let z_s = geom.z_s();
    let s_l = mode_area(l, zero, geom, conv);
    let s_n = mode_area(n, zero, geom, conv);
    let s_m = mode_area(m, z_s, geom, conv);
    let scale_nlm = (s_l * s_n * s_m).sqrt();

    let w0 = geom.w0();
    let w_s = beam_radius(geom, z_s);
    let decay = T::lit(2.0) / (w0 * w0) + T::one() / (w_s * w_s);
    let rho_max = radial_cutoff(1 + n.magnitude() + m.magnitude() + l.magnitude(), decay);

    let two_pi = T::lit(2.0) * T::PI();
    let integrand = |rho: T| {
        let un = lg_radial(n, rho, zero, geom);
        let um = lg_radial(m, rho, z_s, geom);
        let ul = lg_radial(l, rho, zero, geom);
        un * um * ul.conj() * (two_pi * rho * scale_nlm)
    };
    let bound = (s_l * s_n).sqrt();
    let c = integrate_converged(zero, rho_max, quad, bound, integrand)?;

    Ok(OverlapRecord {
        l,
        m,
        n,
        zs_ratio: geom.offset_ratio(),
        chi: c.value,
        chi_tilde: c.value / (s_l * s_n).sqrt(),
        chi_over_s: c.value / s_n,
        convention: conv,
        quad_order: c.order,
    })
}

/// Overlap with an explicit coherence index; vanishes unless `n == l - m`.
pub fn chi_triple<T: Real>(
    n: ModeIndex,
    m: ModeIndex,
    l: ModeIndex,
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
    quad: &QuadratureSpec,
) -> Result<Cplx<T>> {
    if n.value() as i64 != l.value() as i64 - m.value() as i64 {
        return Ok(Cplx::new(T::zero(), T::zero()));
    }
    Ok(chi(l, m, geom, conv, quad)?.chi)
}

/// Full two-dimensional quadrature of `U_n(rho, phi, 0) U_m(rho, phi, z_s) U_l^*(rho, phi, 0)`
/// with area-normalized modes, using `n_phi` azimuthal points.
///
/// Independent of the analytic azimuthal reduction used by [`chi`].
pub fn triple_overlap_2d<T: Real>(
    n: ModeIndex,
    m: ModeIndex,
    l: ModeIndex,
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
    n_phi: usize,
    quad: &QuadratureSpec,
) -> Result<Cplx<T>> {
    let zero = T::zero();
    let z_s = geom.z_s();
    let scale = (mode_area(n, zero, geom, conv) * mode_area(m, z_s, geom, conv) * mode_area(l, zero, geom, conv)).sqrt();
    let w_s = beam_radius(geom, z_s);
    let w0 = geom.w0();
    let decay = T::lit(2.0) / (w0 * w0) + T::one() / (w_s * w_s);
    let rho_max = radial_cutoff(1 + n.magnitude() + m.magnitude() + l.magnitude(), decay);
    let dphi = T::lit(2.0) * T::PI() / T::from_count(n_phi);
    let integrand = |rho: T| {
        let mut acc = Cplx::new(zero, zero);
        for k in 0..n_phi {
            let phi = dphi * T::from_count(k);
            acc = acc
                + lg_amplitude(n, rho, phi, zero, geom)
                    * lg_amplitude(m, rho, phi, z_s, geom)
                    * lg_amplitude(l, rho, phi, zero, geom).conj();
        }
        acc * (dphi * rho * scale)
    };
    Ok(integrate_converged(zero, rho_max, quad, scale, integrand)?.value)
}

/// Plane inner product `<U_a(z), U_b(z)>` of unit-normalized modes by 2-D quadrature.
pub fn inner_product_2d<T: Real>(
    a: ModeIndex,
    b: ModeIndex,
    z: T,
    geom: &BeamGeometry<T>,
    n_phi: usize,
    quad: &QuadratureSpec,
) -> Result<Cplx<T>> {
    let w = beam_radius(geom, z);
    let decay = T::lit(2.0) / (w * w);
    let rho_max = radial_cutoff(1 + a.magnitude() + b.magnitude(), decay);
    let dphi = T::lit(2.0) * T::PI() / T::from_count(n_phi);
    let integrand = |rho: T| {
        let mut acc = Cplx::new(T::zero(), T::zero());
        for k in 0..n_phi {
            let phi = dphi * T::from_count(k);
            acc = acc + lg_amplitude(a, rho, phi, z, geom).conj() * lg_amplitude(b, rho, phi, z, geom);
        }
        acc * (dphi * rho)
    };
    Ok(integrate_converged(T::zero(), rho_max, quad, T::one(), integrand)?.value)
}

/// Overlap factor of one stage (write or read) for a signal mode `l` and a drive.
///
/// Plane-wave drives couple with unit strength and do not shift the index.
pub fn stage_overlap<T: Real>(
    l: ModeIndex,
    drive: Drive,
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
    quad: &QuadratureSpec,
) -> Result<OverlapRecord<T>> {
    match drive {
        Drive::LaguerreGauss(m) => chi(l, m, geom, conv, quad),
        Drive::PlaneWave => {
            let s_l = mode_area(l, T::zero(), geom, conv);
            let one = Cplx::new(T::one(), T::zero());
            Ok(OverlapRecord {
                l,
                m: ModeIndex::ZERO,
                n: l,
                zs_ratio: geom.offset_ratio(),
                chi: one * s_l,
                chi_tilde: one,
                chi_over_s: one,
                convention: conv,
                quad_order: 0,
            })
        }
    }
}

/// Which index pattern to use for the read-stage overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientVariant {
    /// Read overlap `chi_{l+I-J, I}`, consistent with the coupled equations.
    #[default]
    Consistent,
    /// Read overlap `chi_{l-J, I}`, kept for comparison.
    Printed,
}

/// Net amplitude factor of a write/read cycle that shifts the OAM by `I - J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConversionCoefficient<T> {
    pub l: ModeIndex,
    pub read: Drive,
    pub write: Drive,
    pub value: Cplx<T>,
    pub output_oam: ModeIndex,
}

/// `(chi_{l+I-J,I} / S_{l+I-J}) * conj(chi_{l,J} / S_{l-J})`.
///
/// The write-stage overlap enters conjugated because the spin coherence is
/// driven through `U_J^*`; only the phase differs from the unconjugated product.
pub fn conversion_coefficient<T: Real>(
    l: ModeIndex,
    read: Drive,
    write: Drive,
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
    quad: &QuadratureSpec,
    variant: CoefficientVariant,
) -> Result<ConversionCoefficient<T>> {
    let stored = l.checked_sub(write.oam())?;
    let output_oam = stored.checked_add(read.oam())?;
    let write_factor = stage_overlap(l, write, geom, conv, quad)?.chi_over_s;
    let read_factor = match (variant, read) {
        (CoefficientVariant::Consistent, _) | (_, Drive::PlaneWave) => {
            stage_overlap(output_oam, read, geom, conv, quad)?.chi / mode_area(output_oam, T::zero(), geom, conv)
        }
        (CoefficientVariant::Printed, Drive::LaguerreGauss(i)) => {
            chi(stored, i, geom, conv, quad)?.chi / mode_area(output_oam, T::zero(), geom, conv)
        }
    };
    Ok(ConversionCoefficient { l, read, write, value: read_factor * write_factor.conj(), output_oam })
}

/// Overlap records on a grid of `z_s / z_R` for each signal index (l-major order).
pub fn scan_chi<T: Real>(
    l_set: &[ModeIndex],
    m: ModeIndex,
    zs_grid: &[T],
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
    quad: &QuadratureSpec,
) -> Result<Vec<OverlapRecord<T>>> {
    if zs_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("zs grid must be strictly increasing".into()));
    }
    let z_r = geom.rayleigh_range();
    let points: Vec<(ModeIndex, T)> =
        l_set.iter().flat_map(|&l| zs_grid.iter().map(move |&zs| (l, zs))).collect();
    points
        .par_iter()
        .map(|&(l, zs)| chi(l, m, &geom.at_offset(zs * z_r), conv, quad))
        .collect()
}

/// Shape summary of one scanned curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePeak<T> {
    pub index: usize,
    pub value: T,
    /// Maximum is neither the first nor the last point.
    pub interior: bool,
    /// Strictly rising before the maximum and strictly falling after it.
    pub unimodal: bool,
}

/// Locates the maximum of a sampled curve.
pub fn curve_peak<T: Real>(values: &[T]) -> Option<CurvePeak<T>> {
    let (index, &value) = values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &T)>, (i, v)| match best {
            Some((_, b)) if *b >= *v => best,
            _ => Some((i, v)),
        })?;
    let interior = index > 0 && index + 1 < values.len();
    let rising = values[..=index].windows(2).all(|w| w[1] > w[0]);
    let falling = values[index..].windows(2).all(|w| w[1] < w[0]);
    Some(CurvePeak { index, value, interior, unimodal: rising && falling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::normalized_mode_peak;
    use approx::assert_relative_eq;

    fn idx(m: i64) -> ModeIndex {
        ModeIndex::new(m).unwrap()
    }

    fn geom(ratio: f64) -> BeamGeometry<f64> {
        BeamGeometry::with_offset_ratio(1.0, 1e-3, ratio).unwrap()
    }

    #[test]
    fn gaussian_anchor_is_two_thirds() {
        let q = QuadratureSpec::default();
        let r = chi(idx(0), idx(0), &geom(0.0), AreaConvention::Half, &q).unwrap();
        assert_relative_eq!(r.chi_tilde.re, 2.0 / 3.0, epsilon = 1e-12);
        assert!(r.chi_tilde.im.abs() < 1e-15);
        assert_relative_eq!(r.chi.re, std::f64::consts::PI / 3.0, epsilon = 1e-12);
        let quarter = chi(idx(0), idx(0), &geom(0.0), AreaConvention::Quarter, &q).unwrap();
        assert_relative_eq!(quarter.chi_tilde.re, 2.0 / 3.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mismatched_triple_vanishes() {
        let q = QuadratureSpec::default();
        let v = chi_triple(idx(2), idx(1), idx(5), &geom(1.0), AreaConvention::Half, &q).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn analytic_and_full_quadrature_agree() {
        let q = QuadratureSpec::default();
        let g = geom(0.8);
        for (l, m) in [(1, 1), (3, -2), (2, 0)] {
            let r = chi(idx(l), idx(m), &g, AreaConvention::Half, &q).unwrap();
            let full = triple_overlap_2d(idx(l - m), idx(m), idx(l), &g, AreaConvention::Half, 32, &q).unwrap();
            assert!((r.chi - full).norm() < 1e-12 * r.chi.norm().max(1.0));
        }
    }

    #[test]
    fn plane_wave_limit_for_gaussian_drive() {
        let q = QuadratureSpec::default();
        let r = chi(idx(1), idx(0), &geom(50.0), AreaConvention::Half, &q).unwrap();
        assert!((r.chi_tilde.norm() - 1.0).abs() < 0.02);
    }

    #[test]
    fn conversion_coefficient_plane_waves_is_unity() {
        let q = QuadratureSpec::default();
        for l in [-3, 0, 4] {
            let c = conversion_coefficient(idx(l), Drive::PlaneWave, Drive::PlaneWave, &geom(1.0), AreaConvention::Half, &q, CoefficientVariant::Consistent).unwrap();
            assert_eq!(c.value, Cplx::new(1.0, 0.0));
            assert_eq!(c.output_oam, idx(l));
        }
    }

    #[test]
    fn single_stage_coefficient_matches_write_overlap() {
        let q = QuadratureSpec::default();
        let g = geom(0.5);
        let c = conversion_coefficient(idx(2), Drive::PlaneWave, Drive::LaguerreGauss(idx(1)), &g, AreaConvention::Half, &q, CoefficientVariant::Consistent).unwrap();
        let w = chi(idx(2), idx(1), &g, AreaConvention::Half, &q).unwrap();
        assert_relative_eq!(c.value.norm(), w.chi_over_s.norm(), max_relative = 1e-14);
        assert_eq!(c.output_oam, idx(1));
    }

    #[test]
    fn printed_variant_differs_only_when_read_drive_carries_oam() {
        let q = QuadratureSpec::default();
        let g = geom(0.7);
        let args = |v| conversion_coefficient(idx(2), Drive::PlaneWave, Drive::LaguerreGauss(idx(1)), &g, AreaConvention::Half, &q, v).unwrap().value;
        assert_eq!(args(CoefficientVariant::Consistent), args(CoefficientVariant::Printed));
        let with_read = |v| conversion_coefficient(idx(2), Drive::LaguerreGauss(idx(1)), Drive::LaguerreGauss(idx(1)), &g, AreaConvention::Half, &q, v).unwrap().value;
        assert_ne!(with_read(CoefficientVariant::Consistent), with_read(CoefficientVariant::Printed));
    }

    #[test]
    fn scan_rejects_unsorted_grid_and_keeps_order() {
        let q = QuadratureSpec::default();
        let g = geom(0.0);
        assert!(scan_chi(&[idx(0)], idx(0), &[0.0, 1.0, 1.0], &g, AreaConvention::Half, &q).is_err());
        let recs = scan_chi(&[idx(2), idx(0)], idx(0), &[0.0, 1.0], &g, AreaConvention::Half, &q).unwrap();
        let order: Vec<(i32, f64)> = recs.iter().map(|r| (r.l.value(), r.zs_ratio)).collect();
        assert_eq!(order, vec![(2, 0.0), (2, 1.0), (0, 0.0), (0, 1.0)]);
        assert!(scan_chi::<f64>(&[], idx(0), &[0.0], &g, AreaConvention::Half, &q).unwrap().is_empty());
    }

    #[test]
    fn curve_peak_shapes() {
        let p = curve_peak(&[0.1, 0.5, 0.9, 0.4]).unwrap();
        assert_eq!((p.index, p.interior, p.unimodal), (2, true, true));
        let p = curve_peak(&[0.1, 0.5, 0.9]).unwrap();
        assert!(!p.interior);
        let p = curve_peak(&[0.1, 0.9, 0.5, 0.7, 0.2]).unwrap();
        assert!(p.interior && !p.unimodal);
        assert!(curve_peak::<f64>(&[]).is_none());
    }

    fn peaks(ls: &[i64], m: i64) -> Vec<f64> {
        let ls: Vec<ModeIndex> = ls.iter().map(|&l| idx(l)).collect();
        let zs: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
        let recs = scan_chi(&ls, idx(m), &zs, &geom(0.0), AreaConvention::Half, &QuadratureSpec::default()).unwrap();
        recs.chunks(zs.len()).map(|c| c.iter().map(|r| r.chi_over_s.norm()).fold(0.0, f64::max)).collect()
    }

    #[test]
    fn normalized_overlap_is_bounded_by_drive_peak() {
        let quad = QuadratureSpec::default();
        for m in -3..=3 {
            let bound = normalized_mode_peak::<f64>(idx(m), AreaConvention::Half);
            for l in -3..=3 {
                for ratio in [0.0, 0.7, 3.0, 20.0] {
                    let rec = chi(idx(l), idx(m), &geom(ratio), AreaConvention::Half, &quad).unwrap();
                    assert!(rec.chi_tilde.norm() <= bound + 1e-9, "l={l} m={m} ratio={ratio}");
                }
            }
        }
    }

    #[test]
    fn gaussian_signal_converts_poorly() {
        let from_gaussian: Vec<f64> = (1..=6).flat_map(|m| peaks(&[0], m)).collect();
        let single_step = peaks(&[1, 2, 3], 1).into_iter().chain(peaks(&[1, 2, 3], -1)).fold(f64::INFINITY, f64::min);
        assert!(from_gaussian.iter().all(|&p| p < single_step), "{from_gaussian:?} vs {single_step}");
    }

    #[test]
    fn doubling_the_order_is_stable() {
        let base = QuadratureSpec::default();
        let doubled = QuadratureSpec { order: 2 * base.order, ..base };
        for (l, m, ratio) in [(0, 0, 0.0), (3, 1, 1.5), (-2, 2, 4.0), (6, -1, 0.3)] {
            let a = chi(idx(l), idx(m), &geom(ratio), AreaConvention::Half, &base).unwrap().chi;
            let b = chi(idx(l), idx(m), &geom(ratio), AreaConvention::Half, &doubled).unwrap().chi;
            assert!((a - b).norm() < 1e-9 * b.norm());
        }
    }
}
