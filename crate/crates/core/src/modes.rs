//! Laguerre-Gaussian modes with radial index zero.
//!
//! Mode functions are evaluated in the standard propagated form (beam radius,
//! wavefront curvature and Gouy phase). The carrier phase `exp(ikz)` is
//! dropped everywhere: it is the same for every mode and every radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, Cplx, Real};

/// Largest supported `|m|`.
pub const MAX_MODE_INDEX: i32 = 64;

/// Azimuthal (OAM) index of a Laguerre-Gaussian mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct ModeIndex(i32);

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex(0);

    pub fn new(m: i64) -> Result<Self> {
        if m.abs() > MAX_MODE_INDEX as i64 {
            return Err(Error::IndexOverflow { index: m, cap: MAX_MODE_INDEX });
        }
        Ok(ModeIndex(m as i32))
    }

    #[inline]
    pub fn value(self) -> i32 {
        self.0
    }

    #[inline]
    pub fn magnitude(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn checked_add(self, other: ModeIndex) -> Result<ModeIndex> {
        ModeIndex::new(self.0 as i64 + other.0 as i64)
    }

    pub fn checked_sub(self, other: ModeIndex) -> Result<ModeIndex> {
        ModeIndex::new(self.0 as i64 - other.0 as i64)
    }
}

impl TryFrom<i32> for ModeIndex {
    type Error = Error;
    fn try_from(m: i32) -> Result<Self> {
        ModeIndex::new(m as i64)
    }
}

impl From<ModeIndex> for i32 {
    fn from(m: ModeIndex) -> i32 {
        m.0
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Divisor used when turning `pi w^2 (|m|+1)` into a mode area.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaConvention {
    /// Divisor 4.
    Quarter,
    /// Divisor 2: effective area of an `exp(-2 rho^2 / w^2)` intensity profile.
    #[default]
    Half,
}

impl AreaConvention {
    pub fn divisor<T: Real>(self) -> T {
        match self {
            AreaConvention::Quarter => T::lit(4.0),
            AreaConvention::Half => T::lit(2.0),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            AreaConvention::Quarter => "quarter",
            AreaConvention::Half => "half",
        }
    }
}

impl std::str::FromStr for AreaConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quarter" => Ok(AreaConvention::Quarter),
            "half" => Ok(AreaConvention::Half),
            other => Err(Error::InvalidParams(format!("unknown area convention `{other}`"))),
        }
    }
}

/// Transverse geometry of the signal beam and the offset of the driving beam waist.
///
/// Both beams share `w0` and `lambda`; the drive waist sits at `z = -z_s` so the
/// drive is evaluated at `z_s` in the cell plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry<T> {
    w0: T,
    lambda: T,
    z_s: T,
}

/// Smallest accepted `pi w0 / lambda`.
pub const MIN_WAIST_RATIO: f64 = 10.0;

impl<T: Real> BeamGeometry<T> {
    /// Validated constructor: positive sizes and `pi w0 / lambda >= 10`.
    pub fn new(w0: T, lambda: T, z_s: T) -> Result<Self> {
        let g = Self::raw(w0, lambda, z_s)?;
        let ratio = g.waist_ratio();
        if ratio < T::lit(MIN_WAIST_RATIO) {
            return Err(Error::InvalidGeometry(format!(
                "pi*w0/lambda = {ratio} is below {MIN_WAIST_RATIO}; the paraxial description does not hold"
            )));
        }
        Ok(g)
    }

    /// Constructor that only checks positivity, for reporting on geometries
    /// that fail the paraxial conditions.
    pub fn raw(w0: T, lambda: T, z_s: T) -> Result<Self> {
        if !(w0 > T::zero()) || !w0.is_finite() {
            return Err(Error::InvalidGeometry(format!("waist w0 = {w0} must be positive")));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidGeometry(format!("wavelength = {lambda} must be positive")));
        }
        if !z_s.is_finite() {
            return Err(Error::InvalidGeometry("waist offset must be finite".into()));
        }
        Ok(BeamGeometry { w0, lambda, z_s })
    }

    /// Geometry whose drive waist offset is `ratio * z_R`.
    pub fn with_offset_ratio(w0: T, lambda: T, ratio: T) -> Result<Self> {
        let g = Self::new(w0, lambda, T::zero())?;
        Ok(g.at_offset(ratio * g.rayleigh_range()))
    }

    pub fn at_offset(self, z_s: T) -> Self {
        BeamGeometry { z_s, ..self }
    }

    pub fn w0(&self) -> T {
        self.w0
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn z_s(&self) -> T {
        self.z_s
    }

    /// `pi w0^2 / lambda`.
    pub fn rayleigh_range(&self) -> T {
        T::PI() * self.w0 * self.w0 / self.lambda
    }

    pub fn offset_ratio(&self) -> T {
        self.z_s / self.rayleigh_range()
    }

    pub fn wavenumber(&self) -> T {
        T::lit(2.0) * T::PI() / self.lambda
    }

    /// `pi w0 / lambda`.
    pub fn waist_ratio(&self) -> T {
        T::PI() * self.w0 / self.lambda
    }
}

/// Cylindrical atomic cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry<T> {
    pub length: T,
    pub area: T,
}

impl<T: Real> CellGeometry<T> {
    pub fn new(length: T, area: T) -> Result<Self> {
        if !(length > T::zero()) || !(area > T::zero()) {
            return Err(Error::InvalidGeometry(format!(
                "cell length {length} and area {area} must be positive"
            )));
        }
        Ok(CellGeometry { length, area })
    }
}

/// `w(z) = w0 sqrt(1 + z^2 / z_R^2)`.
pub fn beam_radius<T: Real>(geom: &BeamGeometry<T>, z: T) -> T {
    let zeta = z / geom.rayleigh_range();
    geom.w0 * (T::one() + zeta * zeta).sqrt()
}

/// Area of mode `m` in the plane `z` under the chosen convention.
pub fn mode_area<T: Real>(m: ModeIndex, z: T, geom: &BeamGeometry<T>, conv: AreaConvention) -> T {
    let w = beam_radius(geom, z);
    T::PI() * w * w * T::from_u32(m.magnitude() + 1).unwrap() / conv.divisor::<T>()
}

/// `ln(n!)` by direct summation; exact enough for `n <= 64`.
pub(crate) fn ln_factorial<T: Real>(n: u32) -> T {
    (2..=n).fold(T::zero(), |acc, k| acc + T::from_u32(k).unwrap().ln())
}

/// Modulus of the propagated mode at radius `rho` (independent of the azimuth).
pub(crate) fn lg_modulus<T: Real>(m: ModeIndex, rho: T, z: T, geom: &BeamGeometry<T>) -> T {
    let order = m.magnitude();
    let w = beam_radius(geom, z);
    if rho == T::zero() {
        if order != 0 {
            return T::zero();
        }
        return (T::lit(2.0) / (T::PI() * w * w)).sqrt();
    }
    let x = rho * T::SQRT_2() / w;
    let ln_norm = (T::lit(2.0) / (T::PI() * w * w)).ln() - ln_factorial::<T>(order);
    let ln_amp = ln_norm / T::lit(2.0) + T::from_u32(order).unwrap() * x.ln() - rho * rho / (w * w);
    ln_amp.exp()
}

/// Curvature plus Gouy phase of the propagated mode (carrier dropped).
pub(crate) fn propagation_phase<T: Real>(m: ModeIndex, rho: T, z: T, geom: &BeamGeometry<T>) -> T {
    if z == T::zero() {
        return T::zero();
    }
    let z_r = geom.rayleigh_range();
    let curvature = geom.wavenumber() * rho * rho * z / (T::lit(2.0) * (z * z + z_r * z_r));
    let gouy = T::from_u32(m.magnitude() + 1).unwrap() * (z / z_r).atan();
    curvature - gouy
}

/// Mode `m` at `(rho, phi)` in the plane `z`, unit-normalized over the plane.
pub fn lg_amplitude<T: Real>(m: ModeIndex, rho: T, phi: T, z: T, geom: &BeamGeometry<T>) -> Cplx<T> {
    let modulus = lg_modulus(m, rho, z, geom);
    if modulus == T::zero() {
        return Cplx::new(T::zero(), T::zero());
    }
    let phase = T::from_i32(m.value()).unwrap() * phi + propagation_phase(m, rho, z, geom);
    cis(phase) * modulus
}

/// Radial part of [`lg_amplitude`] (azimuth set to zero).
pub fn lg_radial<T: Real>(m: ModeIndex, rho: T, z: T, geom: &BeamGeometry<T>) -> Cplx<T> {
    lg_amplitude(m, rho, T::zero(), z, geom)
}

/// Mode rescaled by the square root of its area, so that its squared norm is the area.
pub fn normalized_mode<T: Real>(
    m: ModeIndex,
    rho: T,
    phi: T,
    z: T,
    geom: &BeamGeometry<T>,
    conv: AreaConvention,
) -> Cplx<T> {
    lg_amplitude(m, rho, phi, z, geom) * mode_area(m, z, geom, conv).sqrt()
}

/// `max_rho |normalized_mode(m, rho, z)|`; it does not depend on `z`.
pub fn normalized_mode_peak<T: Real>(m: ModeIndex, conv: AreaConvention) -> T {
    let order = m.magnitude();
    let p = T::from_u32(order).unwrap();
    // |U_hat|^2 = 2(|m|+1)/(d |m|!) x^{2|m|} e^{-x^2}, maximal at x^2 = |m|
    let ln_peak = if order == 0 { T::zero() } else { p * p.ln() - p };
    let ln_pref = (T::lit(2.0) * (p + T::one()) / conv.divisor::<T>()).ln() - ln_factorial::<T>(order);
    ((ln_pref + ln_peak) / T::lit(2.0)).exp()
}

/// Fresnel eigenvalue factors of a propagated mode, relative to the waist plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FresnelFactors<T> {
    /// Modulus ratio between the propagated and the waist-plane mode.
    pub amplitude: T,
    /// Normalized phase factor; the total phase is `k z phi`.
    pub phi: T,
    /// `k z (phi - 1)`: the propagation phase without the carrier.
    pub extra_phase: T,
    /// Set when `z == 0` and the values are the `z -> 0` limits.
    pub is_limit: bool,
}

/// Amplitude and phase factors linking the mode at `z` to the mode at the waist.
pub fn fresnel_factors<T: Real>(rho: T, z: T, m: ModeIndex, geom: &BeamGeometry<T>) -> FresnelFactors<T> {
    let lambda = geom.lambda();
    let w0 = geom.w0();
    let two = T::lit(2.0);
    let pi = T::PI();
    let order = T::from_u32(m.magnitude()).unwrap();
    let p4 = pi * pi * w0.powi(4);
    let lz2 = lambda * lambda * z * z;

    let amplitude = (p4 / (p4 + lz2)).powf((order + T::one()) / two)
        * (rho * rho * lz2 / (w0 * w0 * (lz2 + p4))).exp();

    if z == T::zero() {
        // Phi stays finite: arctan(x)/x -> 1
        let phi = T::one() + rho * rho * lambda * lambda / (two * p4)
            - lambda * lambda * (order + T::one()) / (two * pi * pi * w0 * w0);
        return FresnelFactors { amplitude: T::one(), phi, extra_phase: T::zero(), is_limit: true };
    }

    let phi = T::one() + rho * rho * lambda * lambda / (two * (lz2 + p4))
        - lambda * (order + T::one()) / (two * pi * z) * (z * lambda / (pi * w0 * w0)).atan();
    let k = geom.wavenumber();
    FresnelFactors { amplitude, phi, extra_phase: k * z * (phi - T::one()), is_limit: false }
}

/// Which size condition a [`ConditionCheck`] refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `L << pi w0^2 / lambda`, measured as `L / z_R`.
    Length,
    /// `S ~ pi w0^2`, measured as `|S / (pi w0^2) - 1|`.
    Area,
    /// `pi w0 >> lambda`, measured as `lambda / (pi w0)`.
    Paraxial,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::Length => "length L/z_R",
            Condition::Area => "area |S/(pi w0^2) - 1|",
            Condition::Paraxial => "paraxial lambda/(pi w0)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    /// Distance from the ideal value (0 is ideal).
    pub margin: f64,
    pub threshold: f64,
}

impl ConditionCheck {
    /// One-line summary such as `length L/z_R = 10 > 0.1`.
    pub fn describe(&self) -> String {
        let relation = if self.passed { "<=" } else { ">" };
        format!("{} = {} {} {}", self.condition.label(), self.margin, relation, self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    pub checks: Vec<ConditionCheck>,
    pub passed: bool,
}

impl ValidityReport {
    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Limits used by [`check_paraxial_constraints`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParaxialThresholds {
    pub max_length_ratio: f64,
    pub area_rel_tol: f64,
    pub max_wavelength_ratio: f64,
}

impl Default for ParaxialThresholds {
    fn default() -> Self {
        ParaxialThresholds {
            max_length_ratio: 0.1,
            area_rel_tol: 0.05,
            max_wavelength_ratio: 1.0 / MIN_WAIST_RATIO,
        }
    }
}

/// Checks the cell against the conditions under which diffraction inside it can be neglected.
pub fn check_paraxial_constraints<T: Real>(
    geom: &BeamGeometry<T>,
    cell: &CellGeometry<T>,
    limits: &ParaxialThresholds,
) -> ValidityReport {
    let w0 = geom.w0();
    let length = (cell.length / geom.rayleigh_range()).to_f64_lossy();
    let area = (cell.area / (T::PI() * w0 * w0) - T::one()).abs().to_f64_lossy();
    let paraxial = (geom.lambda() / (T::PI() * w0)).to_f64_lossy();
    let check = |condition, margin: f64, threshold: f64| ConditionCheck {
        condition,
        passed: margin <= threshold,
        margin,
        threshold,
    };
    let checks = vec![
        check(Condition::Length, length, limits.max_length_ratio),
        check(Condition::Area, area, limits.area_rel_tol),
        check(Condition::Paraxial, paraxial, limits.max_wavelength_ratio),
    ];
    let passed = checks.iter().all(|c| c.passed);
    ValidityReport { checks, passed }
}
