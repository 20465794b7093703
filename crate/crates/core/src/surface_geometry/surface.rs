use alloc::vec;
use alloc::vec::Vec;

use crate::math::{cosh, dot, sinh, sqrt, symmetric_eigenvalues};
use crate::{Error, Result};

/// Axis-aligned box `[lo, hi]` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box", "corner dimensions differ or are empty"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("box", "each lower corner must be finite and below the upper one"));
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[lo, lo + side)^n`.
    pub fn cube(lo: f64, side: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo; n], vec![lo + side; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Membership in `[lo, hi)`: a point on an upper face is excluded.
    pub fn contains_half_open(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v < *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn is_subset_of(&self, other: &AxisBox) -> bool {
        self.dim() == other.dim()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| a >= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a <= b)
    }

    /// Integer ranges of `k` with `eps * k` in the half-open box, per axis.
    pub fn lattice_ranges(&self, eps: f64) -> Vec<(i64, i64)> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| {
                let mut a = crate::math::ceil(lo / eps) as i64 - 1;
                while eps * (a as f64) < lo {
                    a += 1;
                }
                let mut b = crate::math::ceil(hi / eps) as i64 + 1;
                while eps * (b as f64) >= hi {
                    b -= 1;
                }
                (a, b)
            })
            .collect()
    }
}

/// Closed-form graph functions with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFunction {
    /// `g(x') = ½ x'ᵀ A x' + b·x' + c`, `A` row-major and symmetric.
    Quadratic { a: Vec<f64>, b: Vec<f64>, c: f64 },
    /// `g(x) = amplitude · cosh(rate · x)` on the line (`d = 2`).
    Cosh { amplitude: f64, rate: f64 },
}

/// A convex surface `x_d = g(x')` over a box chart, with certified
/// bounds `c0 ≤ eig(D²g) ≤ C0` on the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSurface {
    dim: usize,
    function: GraphFunction,
    domain: AxisBox,
    c0: f64,
    c_max: f64,
}

impl ConvexSurface {
    /// Quadratic surface; `A` must be positive definite.
    pub fn quadratic(a: Vec<f64>, b: Vec<f64>, c: f64, domain: AxisBox) -> Result<Self> {
        let s = Self::quadratic_fixture(a, b, c, domain)?;
        if s.c0 <= 0.0 {
            return Err(Error::invalid("surface", "quadratic form is not positive definite"));
        }
        Ok(s)
    }

    /// Quadratic graph without the strict convexity requirement. Planes
    /// (`A = 0`) are the degenerate fixtures used to isolate curvature effects.
    pub fn quadratic_fixture(a: Vec<f64>, b: Vec<f64>, c: f64, domain: AxisBox) -> Result<Self> {
        let n = domain.dim();
        if a.len() != n * n || b.len() != n {
            return Err(Error::invalid("surface", "coefficient shapes do not match the chart dimension"));
        }
        for i in 0..n {
            for j in 0..n {
                if (a[i * n + j] - a[j * n + i]).abs() > 1e-12 * (1.0 + a[i * n + j].abs()) {
                    return Err(Error::invalid("surface", "quadratic form must be symmetric"));
                }
            }
        }
        let ev = symmetric_eigenvalues(&a, n);
        let (c0, c_max) = (ev[0], ev[n - 1]);
        if c0 < -1e-14 {
            return Err(Error::invalid("surface", "quadratic form is not convex"));
        }
        Ok(Self { dim: n + 1, function: GraphFunction::Quadratic { a, b, c }, domain, c0: c0.max(0.0), c_max })
    }

    /// Paraboloid `|x'|²/2` in `R^d`.
    pub fn paraboloid(d: usize, domain: AxisBox) -> Result<Self> {
        let n = d - 1;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        Self::quadratic(a, vec![0.0; n], 0.0, domain)
    }

    /// Plane `x_d = b·x' + c` (zero curvature, convexity check disabled).
    pub fn plane(slope: Vec<f64>, c: f64, domain: AxisBox) -> Result<Self> {
        let n = slope.len();
        Self::quadratic_fixture(vec![0.0; n * n], slope, c, domain)
    }

    /// `g(x) = amplitude · cosh(rate · x)` for `d = 2`.
    pub fn cosh(amplitude: f64, rate: f64, domain: AxisBox) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::invalid("surface", "cosh surfaces live in d = 2"));
        }
        if !(amplitude > 0.0) || !(rate > 0.0) {
            return Err(Error::invalid("surface", "cosh amplitude and rate must be positive"));
        }
        let (lo, hi) = (domain.lo[0], domain.hi[0]);
        let far = lo.abs().max(hi.abs());
        let near = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
        let k = amplitude * rate * rate;
        Ok(Self {
            dim: 2,
            function: GraphFunction::Cosh { amplitude, rate },
            domain,
            c0: k * cosh(rate * near),
            c_max: k * cosh(rate * far),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn function(&self) -> &GraphFunction {
        &self.function
    }

    /// Lower Hessian bound `c0` (zero for degenerate fixtures).
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Upper Hessian bound `C0`.
    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// `true` when `c0 > 0`, i.e. the surface is uniformly convex.
    pub fn is_strictly_convex(&self) -> bool {
        self.c0 > 0.0
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim - 1 {
            return Err(Error::invalid("x'", "wrong dimension"));
        }
        for (i, (&v, (&lo, &hi))) in x.iter().zip(self.domain.lo.iter().zip(&self.domain.hi)).enumerate() {
            if !(lo <= v && v <= hi) {
                return Err(Error::OutOfDomain { coordinate: i, value: v });
            }
        }
        Ok(())
    }

    /// `g(x')`; the closed forms are evaluated outside the chart too.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.function {
            GraphFunction::Quadratic { a, b, c } => {
                let n = b.len();
                let mut q = 0.0;
                for i in 0..n {
                    let row = &a[i * n..(i + 1) * n];
                    q += x[i] * dot(row, x);
                }
                0.5 * q + dot(b, x) + c
            }
            GraphFunction::Cosh { amplitude, rate } => amplitude * cosh(rate * x[0]),
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.function {
            GraphFunction::Quadratic { a, b, .. } => {
                let n = b.len();
                for i in 0..n {
                    out[i] = dot(&a[i * n..(i + 1) * n], x) + b[i];
                }
            }
            GraphFunction::Cosh { amplitude, rate } => out[0] = amplitude * rate * sinh(rate * x[0]),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim - 1];
        self.gradient_into(x, &mut g);
        g
    }

    /// Hessian, row-major `(d-1) x (d-1)`.
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.function {
            GraphFunction::Quadratic { a, .. } => out.copy_from_slice(a),
            GraphFunction::Cosh { amplitude, rate } => out[0] = amplitude * rate * rate * cosh(rate * x[0]),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim - 1;
        let mut h = vec![0.0; n * n];
        self.hessian_into(x, &mut h);
        h
    }

    /// Upward unit normal `(-∇g, 1)/|(-∇g, 1)|` without chart checks.
    pub fn normal_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut nu = self.gradient(x);
        nu.iter_mut().for_each(|v| *v = -*v);
        nu.push(1.0);
        let n = sqrt(dot(&nu, &nu));
        nu.iter_mut().for_each(|v| *v /= n);
        nu
    }

    /// Area element `sqrt(1 + |∇g|²)`.
    pub fn area_element(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        sqrt(1.0 + dot(&g, &g))
    }
}

/// A point of `Γ` with its upward unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

/// Affine hyperplane `{y : normal·(y - point) = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

impl Plane {
    /// Height `y_d` of the plane above `y'` (the normal must not be horizontal).
    pub fn height_at(&self, y: &[f64]) -> f64 {
        let d = self.point.len();
        let mut s = 0.0;
        for i in 0..d - 1 {
            s += self.normal[i] * (y[i] - self.point[i]);
        }
        self.point[d - 1] - s / self.normal[d - 1]
    }

    pub fn signed_distance(&self, y: &[f64]) -> f64 {
        self.normal.iter().zip(y.iter().zip(&self.point)).map(|(n, (a, b))| n * (a - b)).sum()
    }
}

/// `(x', g(x'))` and the upward unit normal there.
pub fn surface_point(surface: &ConvexSurface, x: &[f64]) -> Result<SurfacePoint> {
    surface.check_domain(x)?;
    let mut point = x.to_vec();
    point.push(surface.value(x));
    Ok(SurfacePoint { point, normal: surface.normal_unchecked(x) })
}

/// Tangent (= support) plane of `Γ` at `(x', g(x'))`.
pub fn tangent_plane(surface: &ConvexSurface, x: &[f64]) -> Result<Plane> {
    let sp = surface_point(surface, x)?;
    Ok(Plane { point: sp.point, normal: sp.normal })
}
