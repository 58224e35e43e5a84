//! Gauss-Legendre quadrature with order doubling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = T::from_count(n);
        let eps = T::epsilon() * T::lit(4.0);
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n
            let mut x = (T::PI() * (T::from_count(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= eps {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates a complex-valued function over `[a, b]`.
    pub fn integrate<F>(&self, a: T, b: T, mut f: F) -> Cplx<T>
    where
        F: FnMut(T) -> Cplx<T>,
    {
        let half = (b - a) / T::lit(2.0);
        let mid = (b + a) / T::lit(2.0);
        let mut acc = Cplx::new(T::zero(), T::zero());
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * w;
        }
        acc * half
    }
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p_prev = T::one();
    let mut p = x;
    for k in 2..=n {
        let kf = T::from_count(k);
        let next = ((T::lit(2.0) * kf - T::one()) * x * p - (kf - T::one()) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nf = T::from_count(n);
    (p, nf * (x * p - p_prev) / (x * x - T::one()))
}

/// Settings for converged radial integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Starting order; doubled until successive estimates agree.
    pub order: usize,
    pub rel_tol: f64,
    pub max_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { order: 64, rel_tol: 1e-10, max_order: 8192 }
    }
}

impl QuadratureSpec {
    /// Default spec with the tolerance relaxed to what `T` can resolve.
    pub fn for_precision<T: Real>() -> Self {
        let floor = T::epsilon().to_f64_lossy() * 1e3;
        let d = Self::default();
        QuadratureSpec { rel_tol: d.rel_tol.max(floor), ..d }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 64 {
            return Err(Error::InvalidParams(format!("quadrature order {} is below 64", self.order)));
        }
        if !(self.rel_tol > 0.0) || self.max_order < self.order {
            return Err(Error::InvalidParams("quadrature tolerance/max order inconsistent".into()));
        }
        Ok(())
    }
}

/// Outcome of a converged integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Converged<T> {
    pub value: Cplx<T>,
    /// Order of the accepted (finer) estimate.
    pub order: usize,
}

/// Integrates `f` on `[a, b]`, doubling the order until two estimates agree to `spec.rel_tol`.
///
/// `scale` is a magnitude below which differences are treated as converged
/// (integrals that vanish identically would otherwise never meet a relative test).
pub fn integrate_converged<T, F>(a: T, b: T, spec: &QuadratureSpec, scale: T, f: F) -> Result<Converged<T>>
where
    T: Real,
    F: Fn(T) -> Cplx<T>,
{
    spec.validate()?;
    let tol = T::lit(spec.rel_tol);
    let mut order = spec.order;
    let mut previous = GaussLegendre::new(order).integrate(a, b, &f);
    loop {
        let next_order = order * 2;
        if next_order > spec.max_order {
            let last = GaussLegendre::new(order).integrate(a, b, &f);
            return Err(Error::Accuracy {
                previous: previous.norm().to_f64_lossy(),
                last: last.norm().to_f64_lossy(),
                order,
            });
        }
        let next = GaussLegendre::new(next_order).integrate(a, b, &f);
        let diff = (next - previous).norm();
        if diff <= tol * next.norm() || diff <= T::epsilon() * scale {
            return Ok(Converged { value: next, order: next_order });
        }
        previous = next;
        order = next_order;
    }
}
