use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, fabs, norm, orthonormal_complement, sqrt};
use crate::{Error, Result};

/// `normal · y <= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    #[inline]
    pub fn excess(&self, y: &[f64]) -> f64 {
        dot(&self.normal, y) - self.offset
    }
}

/// The compact hole template `T ⊂ B_1(0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum HoleShape {
    Ball { dim: usize, radius: f64 },
    /// Axis box `∏ [-half_i, half_i]`.
    Box { half: Vec<f64> },
    /// Convex hull of `vertices`, kept with its facet halfspaces.
    Polytope { vertices: Vec<Vec<f64>>, facets: Vec<Halfspace> },
}

impl HoleShape {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("hole", "dimension must be at least 2"));
        }
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::invalid("hole.radius", "ball radius must lie in (0, 1]"));
        }
        Ok(HoleShape::Ball { dim, radius })
    }

    pub fn axis_box(half: Vec<f64>) -> Result<Self> {
        if half.len() < 2 || half.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("hole.half_widths", "need at least two positive half-widths"));
        }
        if norm(&half) > 1.0 + 1e-12 {
            return Err(Error::invalid("hole.half_widths", "box must fit in the unit ball"));
        }
        Ok(HoleShape::Box { half })
    }

    /// Centered cube with the given side length.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Self::axis_box(vec![side / 2.0; dim])
    }

    /// Convex polytope from its vertex list (`d = 2` or `d = 3`). Facets are
    /// recovered by brute force, so keep vertex counts small.
    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let d = vertices.first().map_or(0, Vec::len);
        if !(d == 2 || d == 3) || vertices.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("hole.vertices", "polytopes need consistent 2-D or 3-D vertices"));
        }
        if vertices.len() < d + 1 {
            return Err(Error::invalid("hole.vertices", "too few vertices for a full-dimensional polytope"));
        }
        if vertices.iter().any(|v| norm(v) > 1.0 + 1e-12) {
            return Err(Error::invalid("hole.vertices", "polytope must fit in the unit ball"));
        }
        let facets = hull_facets(&vertices);
        if facets.len() < d + 1 {
            return Err(Error::invalid("hole.vertices", "vertices are degenerate"));
        }
        Ok(HoleShape::Polytope { vertices, facets })
    }

    pub fn dim(&self) -> usize {
        match self {
            HoleShape::Ball { dim, .. } => *dim,
            HoleShape::Box { half } => half.len(),
            HoleShape::Polytope { vertices, .. } => vertices[0].len(),
        }
    }

    /// Radius of the smallest origin-centered ball containing `T`.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            HoleShape::Ball { radius, .. } => *radius,
            HoleShape::Box { half } => norm(half),
            HoleShape::Polytope { vertices, .. } => vertices.iter().map(|v| norm(v)).fold(0.0, f64::max),
        }
    }

    /// Facet halfspaces (`None` for balls).
    pub fn halfspaces(&self) -> Option<Vec<Halfspace>> {
        match self {
            HoleShape::Ball { .. } => None,
            HoleShape::Box { half } => {
                let d = half.len();
                let mut hs = Vec::with_capacity(2 * d);
                for (i, &h) in half.iter().enumerate() {
                    for s in [1.0, -1.0] {
                        let mut n = vec![0.0; d];
                        n[i] = s;
                        hs.push(Halfspace { normal: n, offset: h });
                    }
                }
                Some(hs)
            }
            HoleShape::Polytope { facets, .. } => Some(facets.clone()),
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.signed_distance(y) <= 0.0
    }

    /// Signed distance; exact for balls and boxes, the largest facet
    /// excess for polytopes (same sign as the true distance).
    pub fn signed_distance(&self, y: &[f64]) -> f64 {
        match self {
            HoleShape::Ball { radius, .. } => norm(y) - radius,
            HoleShape::Box { half } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for (v, h) in y.iter().zip(half) {
                    let q = fabs(*v) - h;
                    if q > 0.0 {
                        outside += q * q;
                    }
                    inside = inside.max(q);
                }
                if outside > 0.0 {
                    sqrt(outside)
                } else {
                    inside
                }
            }
            HoleShape::Polytope { facets, .. } => {
                facets.iter().map(|f| f.excess(y)).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Support interval `[min ν·y, max ν·y]` over `y ∈ T`.
    pub fn support_interval(&self, nu: &[f64]) -> (f64, f64) {
        match self {
            HoleShape::Ball { radius, .. } => (-radius * norm(nu), radius * norm(nu)),
            HoleShape::Box { half } => {
                let s: f64 = nu.iter().zip(half).map(|(n, h)| fabs(*n) * h).sum();
                (-s, s)
            }
            HoleShape::Polytope { vertices, .. } => vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| {
                let t = dot(nu, v);
                (acc.0.min(t), acc.1.max(t))
            }),
        }
    }

    /// Vertical extent `{y_d : (y', y_d) ∈ T}` over a chart point `y'`.
    pub fn vertical_extent(&self, y: &[f64]) -> Option<(f64, f64)> {
        match self {
            HoleShape::Ball { radius, .. } => {
                let r2 = radius * radius - dot(y, y);
                (r2 >= 0.0).then(|| (-sqrt(r2), sqrt(r2)))
            }
            HoleShape::Box { half } => {
                let d = half.len();
                y.iter().zip(&half[..d - 1]).all(|(v, h)| fabs(*v) <= *h).then(|| (-half[d - 1], half[d - 1]))
            }
            HoleShape::Polytope { facets, .. } => {
                let d = self.dim();
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for f in facets {
                    let rest = f.offset - dot(&f.normal[..d - 1], y);
                    let nd = f.normal[d - 1];
                    if fabs(nd) < 1e-14 {
                        if rest < 0.0 {
                            return None;
                        }
                    } else if nd > 0.0 {
                        hi = hi.min(rest / nd);
                    } else {
                        lo = lo.max(rest / nd);
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
        }
    }

    /// The slice `T ∩ {tν + span(basis)}` in plane coordinates. The basis is
    /// [`orthonormal_complement`] of `ν`.
    pub fn slice_set(&self, nu: &[f64], t: f64) -> SliceSet {
        let basis = orthonormal_complement(nu);
        let (tmin, tmax) = self.support_interval(nu);
        if !(t > tmin && t < tmax) {
            return SliceSet::Empty { dim: nu.len() - 1 };
        }
        match self {
            HoleShape::Ball { radius, .. } => SliceSet::Disk {
                dim: nu.len() - 1,
                radius: sqrt((radius * radius - t * t).max(0.0)),
            },
            _ => {
                let mut hs = Vec::new();
                for f in self.halfspaces().unwrap_or_default() {
                    let proj: Vec<f64> = basis.iter().map(|b| dot(b, &f.normal)).collect();
                    let pn = norm(&proj);
                    let rhs = f.offset - t * dot(&f.normal, nu);
                    if pn < 1e-12 {
                        if rhs < 0.0 {
                            return SliceSet::Empty { dim: nu.len() - 1 };
                        }
                        continue;
                    }
                    hs.push(Halfspace { normal: proj.iter().map(|v| v / pn).collect(), offset: rhs / pn });
                }
                let br = self.bounding_radius();
                let radius = sqrt((br * br - t * t).max(0.0));
                SliceSet::Polygon { dim: nu.len() - 1, facets: hs, radius }
            }
        }
    }
}

/// A convex set in a `(d-1)`-dimensional plane, in plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum SliceSet {
    Empty { dim: usize },
    /// Centered `(d-1)`-ball.
    Disk { dim: usize, radius: f64 },
    /// Halfspace intersection; `radius` bounds the set around the origin.
    Polygon { dim: usize, facets: Vec<Halfspace>, radius: f64 },
}

impl SliceSet {
    pub fn dim(&self) -> usize {
        match self {
            SliceSet::Empty { dim } | SliceSet::Disk { dim, .. } | SliceSet::Polygon { dim, .. } => *dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SliceSet::Empty { .. } => true,
            SliceSet::Disk { radius, .. } => *radius <= 0.0,
            SliceSet::Polygon { .. } => false,
        }
    }

    /// Signed in-plane distance. Polygons use the largest facet excess,
    /// which is exact except near corners, where it underestimates.
    pub fn signed_distance(&self, u: &[f64]) -> f64 {
        match self {
            SliceSet::Empty { .. } => f64::INFINITY,
            SliceSet::Disk { radius, .. } => norm(u) - radius,
            SliceSet::Polygon { facets, .. } => {
                facets.iter().map(|f| f.excess(u)).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.signed_distance(u) <= 0.0
    }

    /// Radius of an origin-centered ball containing the set.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            SliceSet::Empty { .. } => 0.0,
            SliceSet::Disk { radius, .. } => *radius,
            SliceSet::Polygon { radius, .. } => *radius,
        }
    }

    /// Half-width of the thinnest direction among the facet pairs, used as a
    /// feature size (for disks: the radius).
    pub fn inradius_bound(&self) -> f64 {
        match self {
            SliceSet::Empty { .. } => 0.0,
            SliceSet::Disk { radius, .. } => *radius,
            SliceSet::Polygon { facets, radius, .. } => {
                let mut best = *radius;
                for (i, f) in facets.iter().enumerate() {
                    for g in &facets[i + 1..] {
                        if dot(&f.normal, &g.normal) < -1.0 + 1e-9 {
                            best = best.min(0.5 * (f.offset + g.offset));
                        }
                    }
                }
                best
            }
        }
    }
}

/// Facet halfspaces of the convex hull of `vertices` (2-D or 3-D).
fn hull_facets(vertices: &[Vec<f64>]) -> Vec<Halfspace> {
    let d = vertices[0].len();
    let n = vertices.len();
    let tol = 1e-10;
    let mut facets: Vec<Halfspace> = Vec::new();
    let mut push = |normal: Vec<f64>, offset: f64| {
        if facets.iter().any(|f| dot(&f.normal, &normal) > 1.0 - 1e-9 && fabs(f.offset - offset) < 1e-9) {
            return;
        }
        facets.push(Halfspace { normal, offset });
    };
    let mut consider = |raw: Vec<f64>, anchor: &[f64]| {
        let len = norm(&raw);
        if len < 1e-12 {
            return;
        }
        let mut nrm: Vec<f64> = raw.iter().map(|v| v / len).collect();
        let mut off = dot(&nrm, anchor);
        let excess: Vec<f64> = vertices.iter().map(|v| dot(&nrm, v) - off).collect();
        if excess.iter().all(|e| *e <= tol) {
        } else if excess.iter().all(|e| *e >= -tol) {
            nrm.iter_mut().for_each(|v| *v = -*v);
            off = -off;
        } else {
            return;
        }
        push(nrm, off);
    };
    if d == 2 {
        for i in 0..n {
            for j in i + 1..n {
                let e = [vertices[j][0] - vertices[i][0], vertices[j][1] - vertices[i][1]];
                consider(vec![e[1], -e[0]], &vertices[i]);
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let a: Vec<f64> = (0..3).map(|c| vertices[j][c] - vertices[i][c]).collect();
                    let b: Vec<f64> = (0..3).map(|c| vertices[k][c] - vertices[i][c]).collect();
                    let cross = vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                    consider(cross, &vertices[i]);
                }
            }
        }
    }
    facets
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn octahedron() -> HoleShape {
        let s = 0.9;
        HoleShape::polytope(vec![
            vec![s, 0.0, 0.0],
            vec![-s, 0.0, 0.0],
            vec![0.0, s, 0.0],
            vec![0.0, -s, 0.0],
            vec![0.0, 0.0, s],
            vec![0.0, 0.0, -s],
        ])
        .unwrap()
    }

    #[test]
    fn octahedron_has_eight_facets() {
        match octahedron() {
            HoleShape::Polytope { facets, .. } => assert_eq!(facets.len(), 8),
            _ => unreachable!(),
        }
    }

    #[test]
    fn square_from_vertices_matches_box() {
        let sq = HoleShape::polytope(vec![vec![0.5, 0.5], vec![-0.5, 0.5], vec![-0.5, -0.5], vec![0.5, -0.5]]).unwrap();
        let bx = HoleShape::cube(2, 1.0).unwrap();
        for y in [[0.0, 0.0], [0.49, 0.2], [0.51, 0.0], [0.3, -0.6]] {
            assert_eq!(sq.contains(&y), bx.contains(&y));
        }
        assert_eq!(sq.vertical_extent(&[0.2]), Some((-0.5, 0.5)));
    }

    #[test]
    fn templates_must_fit_unit_ball() {
        assert!(HoleShape::ball(3, 1.2).is_err());
        assert!(HoleShape::cube(3, 1.2).is_err());
        assert!(HoleShape::cube(3, 1.0).is_ok());
    }

    #[test]
    fn ball_slices() {
        let b = HoleShape::ball(3, 1.0).unwrap();
        assert_eq!(b.slice_set(&[0.0, 0.0, 1.0], 0.0), SliceSet::Disk { dim: 2, radius: 1.0 });
        assert!(b.slice_set(&[0.0, 0.0, 1.0], 2.0).is_empty());
    }

    #[test]
    fn cube_axis_slice_is_unit_square() {
        let c = HoleShape::cube(3, 1.0).unwrap();
        let s = c.slice_set(&[0.0, 0.0, 1.0], 0.25);
        assert!(!s.is_empty());
        for (u, inside) in [([0.49, 0.49], true), ([0.51, 0.0], false), ([0.0, -0.499], true), ([-0.2, 0.6], false)] {
            assert_eq!(s.contains(&u), inside);
        }
        assert!((s.inradius_bound() - 0.5).abs() < 1e-12);
        assert!(c.slice_set(&[0.0, 0.0, 1.0], 0.5).is_empty());
    }

    #[test]
    fn box_signed_distance_is_exact_outside() {
        let c = HoleShape::cube(2, 1.0).unwrap();
        assert!((c.signed_distance(&[1.5, 1.5]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((c.signed_distance(&[0.0, 0.1]) + 0.4).abs() < 1e-15);
    }

    fn shapes() -> impl Strategy<Value = HoleShape> {
        prop_oneof![
            (0.1f64..1.0).prop_map(|r| HoleShape::ball(3, r).unwrap()),
            (0.1f64..0.5, 0.1f64..0.5, 0.1f64..0.5).prop_map(|(a, b, c)| HoleShape::axis_box(vec![a, b, c]).unwrap()),
            Just(octahedron()),
        ]
    }

    proptest! {
        #[test]
        fn membership_agrees_with_signed_distance(t in shapes(), y in proptest::collection::vec(-1.2f64..1.2, 3)) {
            prop_assert_eq!(t.contains(&y), t.signed_distance(&y) <= 0.0);
            if t.contains(&y) {
                prop_assert!(norm(&y) <= t.bounding_radius() + 1e-12);
                let (lo, hi) = t.vertical_extent(&y[..2]).unwrap();
                prop_assert!(lo - 1e-12 <= y[2] && y[2] <= hi + 1e-12);
            }
        }

        #[test]
        fn slice_membership_matches_ambient(t in shapes(), nu in proptest::collection::vec(-1.0f64..1.0, 3),
                                            s in -1.0f64..1.0, u in proptest::collection::vec(-1.0f64..1.0, 2)) {
            let Some(nu) = crate::math::normalized(&nu) else { return Ok(()); };
            let (tmin, tmax) = t.support_interval(&nu);
            let tt = tmin + (tmax - tmin) * (0.5 + 0.49 * s);
            let slice = t.slice_set(&nu, tt);
            let basis = orthonormal_complement(&nu);
            let y: Vec<f64> = (0..3).map(|c| tt * nu[c] + u[0] * basis[0][c] + u[1] * basis[1][c]).collect();
            let sd = t.signed_distance(&y);
            if sd.abs() > 1e-9 {
                prop_assert_eq!(slice.contains(&u), sd < 0.0);
            }
        }
    }
}
