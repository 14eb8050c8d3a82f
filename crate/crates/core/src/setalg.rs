//! Convex set representations and the exact arithmetic behind constraint
//! tightening and invariance checks.
//!
//! Three representations carry all the sets in the pipeline:
//!
//! * [`BoxSet`] — axis-aligned boxes (disturbance bounds, per-agent state and
//!   input constraints);
//! * [`Zonotope`] — `{c + Σⱼ ξⱼ gⱼ : ξ ∈ [−1,1]^p}`, closed under linear maps
//!   and Minkowski sums, housing the reachable error tube `R(t)`;
//! * [`HPolytope`] — intersections of halfspaces `aᵀx ≤ d`, housing the
//!   global and tightened constraint sets.
//!
//! Pontryagin differences of an H-polytope minus a zonotope are exact via
//! support functions (`d′ = d − h_Z(a)` per row); no vertex enumeration
//! happens anywhere. All operations are pure functions over immutable
//! inputs. Constraint sets are required to be bounded for support-function
//! tightening to be meaningful; the toolkit never checks constraint sets for
//! unboundedness globally, but the Chebyshev LP used for emptiness detection
//! will report unbounded polytopes as numerical errors.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::conic::{ConicProgram, LinExpr, SolveOptions, SolveStatus};

#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("row {row} straddles the coordinate split (non-product constraint set)")]
    PreconditionViolated { row: usize },
    #[error("feasibility subproblem failed: {0}")]
    SolverFailure(String),
}

/// Axis-aligned box `{x : lower ≤ x ≤ upper}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, SetError> {
        if lower.len() != upper.len() {
            return Err(SetError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite()) {
                return Err(SetError::InvalidSet("box bound not finite".into()));
            }
            if lower[i] > upper[i] {
                return Err(SetError::InvalidSet(format!(
                    "lower[{i}] = {} exceeds upper[{i}] = {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self, SetError> {
        Self::new(DVector::from_column_slice(lower), DVector::from_column_slice(upper))
    }

    /// Symmetric box `{x : |x| ≤ v}`.
    pub fn symmetric(v: &[f64]) -> Result<Self, SetError> {
        let up = DVector::from_column_slice(v);
        Self::new(-up.clone(), up)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn half_widths(&self) -> DVector<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    pub fn is_degenerate(&self) -> bool {
        self.half_widths().iter().all(|h| *h == 0.0)
    }

    /// Lossless conversion to a zonotope with axis-aligned generators
    /// (zero-width axes contribute no generator).
    pub fn to_zonotope(&self) -> Zonotope {
        let n = self.dim();
        let h = self.half_widths();
        let gens: Vec<usize> = (0..n).filter(|i| h[*i] != 0.0).collect();
        let mut g = DMatrix::zeros(n, gens.len());
        for (col, i) in gens.iter().enumerate() {
            g[(*i, col)] = h[*i];
        }
        Zonotope::new(self.center(), g).expect("box axes are consistent")
    }

    /// H-representation with unit normals `±eᵢ`.
    pub fn to_hpolytope(&self) -> HPolytope {
        let n = self.dim();
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut a = DVector::zeros(n);
            a[i] = 1.0;
            rows.push(HalfSpace { normal: a.clone(), offset: self.upper[i] });
            a[i] = -1.0;
            rows.push(HalfSpace { normal: a, offset: -self.lower[i] });
        }
        HPolytope { dim: n, rows }
    }

    /// Tight axis-aligned ellipsoid `{x : xᵀ W x ≤ 1}` containing the box,
    /// with `W = diag(1/(n vᵢ²))` and `vᵢ = max(|lᵢ|, |uᵢ|)`. Returns `None`
    /// when any axis has zero extent (the ellipsoid would be degenerate).
    pub fn bounding_ellipsoid_shape(&self) -> Option<DMatrix<f64>> {
        let n = self.dim();
        let mut diag = DVector::zeros(n);
        for i in 0..n {
            let v = self.lower[i].abs().max(self.upper[i].abs());
            if v == 0.0 {
                return None;
            }
            diag[i] = 1.0 / (n as f64 * v * v);
        }
        Some(DMatrix::from_diagonal(&diag))
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool, SetError> {
        check_dim(self.dim(), x.len())?;
        let tol = 1e-9;
        Ok((0..self.dim()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol))
    }

    /// Cartesian product of boxes.
    pub fn cartesian_product(boxes: &[BoxSet]) -> BoxSet {
        let n: usize = boxes.iter().map(|b| b.dim()).sum();
        let mut lo = DVector::zeros(n);
        let mut up = DVector::zeros(n);
        let mut off = 0;
        for b in boxes {
            lo.rows_mut(off, b.dim()).copy_from(&b.lower);
            up.rows_mut(off, b.dim()).copy_from(&b.upper);
            off += b.dim();
        }
        BoxSet { lower: lo, upper: up }
    }

    pub fn scaled(&self, s: f64) -> BoxSet {
        BoxSet { lower: &self.lower * s, upper: &self.upper * s }
    }
}

/// Zonotope `{c + G ξ : ξ ∈ [−1,1]^p}` with generators as matrix columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self, SetError> {
        if generators.ncols() > 0 && generators.nrows() != center.len() {
            return Err(SetError::DimensionMismatch {
                expected: center.len(),
                got: generators.nrows(),
            });
        }
        let generators = if generators.ncols() == 0 {
            DMatrix::zeros(center.len(), 0)
        } else {
            generators
        };
        Ok(Self { center, generators })
    }

    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Self { center, generators: DMatrix::zeros(n, 0) }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    /// Interval hull (support values along `±eᵢ`).
    pub fn interval_hull(&self) -> BoxSet {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut up = DVector::zeros(n);
        for i in 0..n {
            let radius: f64 = (0..self.generators.ncols()).map(|j| self.generators[(i, j)].abs()).sum();
            lo[i] = self.center[i] - radius;
            up[i] = self.center[i] + radius;
        }
        BoxSet { lower: lo, upper: up }
    }

    /// Membership via a small feasibility solve: `∃ ξ ∈ [−1,1]^p` with
    /// `G ξ = x − c`.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool, SetError> {
        check_dim(self.dim(), x.len())?;
        let p = self.num_generators();
        let rhs = x - &self.center;
        if p == 0 {
            return Ok(rhs.amax() <= 1e-9);
        }
        let mut prog = ConicProgram::new();
        let xi = prog.vector("xi", p);
        for i in 0..self.dim() {
            let mut e = LinExpr::constant(-rhs[i]);
            for j in 0..p {
                e.push(xi.at(j), self.generators[(i, j)]);
            }
            prog.eq(e);
        }
        for j in 0..p {
            let mut up = LinExpr::var(xi.at(j));
            up.add_const(-1.0 - 1e-9);
            prog.le(up);
            let mut lo = LinExpr::term(xi.at(j), -1.0);
            lo.add_const(-1.0 - 1e-9);
            prog.le(lo);
        }
        prog.set_objective(LinExpr::zero());
        let sol = prog.solve(&SolveOptions::default());
        match sol.status {
            SolveStatus::Optimal => Ok(true),
            SolveStatus::Infeasible => Ok(false),
            _ => Err(SetError::SolverFailure(sol.message)),
        }
    }

    /// Cartesian product of zonotopes (block-diagonal generator stacking).
    pub fn cartesian_product(zs: &[Zonotope]) -> Zonotope {
        let n: usize = zs.iter().map(|z| z.dim()).sum();
        let p: usize = zs.iter().map(|z| z.num_generators()).sum();
        let mut c = DVector::zeros(n);
        let mut g = DMatrix::zeros(n, p);
        let (mut ro, mut co) = (0, 0);
        for z in zs {
            c.rows_mut(ro, z.dim()).copy_from(&z.center);
            g.view_mut((ro, co), (z.dim(), z.num_generators())).copy_from(&z.generators);
            ro += z.dim();
            co += z.num_generators();
        }
        Zonotope { center: c, generators: g }
    }
}

/// One halfspace `{x : normalᵀ x ≤ offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// Intersection of halfspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct HPolytope {
    dim: usize,
    rows: Vec<HalfSpace>,
}

impl HPolytope {
    pub fn new(dim: usize, rows: Vec<HalfSpace>) -> Result<Self, SetError> {
        for (idx, r) in rows.iter().enumerate() {
            if r.normal.len() != dim {
                return Err(SetError::DimensionMismatch { expected: dim, got: r.normal.len() });
            }
            if r.normal.amax() == 0.0 {
                return Err(SetError::InvalidSet(format!("row {idx} has a zero normal")));
            }
            if !r.offset.is_finite() {
                return Err(SetError::InvalidSet(format!("row {idx} has non-finite offset")));
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[HalfSpace] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool, SetError> {
        check_dim(self.dim, x.len())?;
        let tol = 1e-9;
        Ok(self.rows.iter().all(|r| r.normal.dot(x) <= r.offset + tol))
    }

    /// Chebyshev center and radius: the deepest interior ball, found by the
    /// LP  max r  s.t.  aᵀc + r‖a‖ ≤ d per row. A non-positive radius means
    /// the polytope has empty interior.
    pub fn chebyshev(&self) -> Result<(DVector<f64>, f64), SetError> {
        let mut prog = ConicProgram::new();
        let c = prog.vector("c", self.dim);
        let r = prog.scalar("r");
        for row in &self.rows {
            let mut e = LinExpr::term(r, row.normal.norm());
            for i in 0..self.dim {
                e.push(c.at(i), row.normal[i]);
            }
            e.add_const(-row.offset);
            prog.le(e);
        }
        prog.set_objective(LinExpr::term(r, -1.0));
        let sol = prog.solve(&SolveOptions::default());
        if sol.status != SolveStatus::Optimal {
            return Err(SetError::SolverFailure(format!(
                "chebyshev LP returned {:?}: {}",
                sol.status, sol.message
            )));
        }
        Ok((sol.vector("c").unwrap().clone(), sol.scalar("r").unwrap()))
    }

    /// Empty-interior test. Boxes (opposing axis rows) short-circuit without
    /// a solve; the general case runs the Chebyshev LP.
    pub fn is_empty(&self) -> Result<bool, SetError> {
        if let Some(v) = self.box_pair_emptiness() {
            return Ok(v);
        }
        Ok(self.chebyshev()?.1 <= 0.0)
    }

    /// For rows that form opposing axis-aligned pairs, emptiness is
    /// `d⁺ + d⁻ < 0` on some axis. Returns `None` when rows are not
    /// axis-aligned.
    fn box_pair_emptiness(&self) -> Option<bool> {
        let mut upper = vec![f64::INFINITY; self.dim];
        let mut lower = vec![f64::NEG_INFINITY; self.dim];
        for r in &self.rows {
            let mut nz = None;
            for i in 0..self.dim {
                if r.normal[i] != 0.0 {
                    if nz.is_some() {
                        return None;
                    }
                    nz = Some(i);
                }
            }
            let i = nz?;
            let bound = r.offset / r.normal[i].abs();
            if r.normal[i] > 0.0 {
                upper[i] = upper[i].min(bound);
            } else {
                lower[i] = lower[i].max(-bound);
            }
        }
        Some((0..self.dim).any(|i| lower[i] > upper[i]))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), SetError> {
    if expected != got {
        Err(SetError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// Exact support function of a zonotope: `h_Z(a) = aᵀc + Σⱼ |aᵀgⱼ|`.
pub fn support_zonotope(z: &Zonotope, a: &DVector<f64>) -> Result<f64, SetError> {
    check_dim(z.dim(), a.len())?;
    let mut h = z.center.dot(a);
    for j in 0..z.generators.ncols() {
        h += z.generators.column(j).dot(a).abs();
    }
    Ok(h)
}

/// Exact linear image `M · Z`.
pub fn linmap_zonotope(m: &DMatrix<f64>, z: &Zonotope) -> Result<Zonotope, SetError> {
    check_dim(m.ncols(), z.dim())?;
    Ok(Zonotope { center: m * &z.center, generators: m * &z.generators })
}

/// Exact Minkowski sum `Z₁ ⊕ Z₂` (centers add, generators concatenate).
pub fn minkowski_zonotope(z1: &Zonotope, z2: &Zonotope) -> Result<Zonotope, SetError> {
    check_dim(z1.dim(), z2.dim())?;
    let n = z1.dim();
    let p = z1.num_generators() + z2.num_generators();
    let mut g = DMatrix::zeros(n, p);
    g.view_mut((0, 0), (n, z1.num_generators())).copy_from(&z1.generators);
    g.view_mut((0, z1.num_generators()), (n, z2.num_generators())).copy_from(&z2.generators);
    Ok(Zonotope { center: &z1.center + &z2.center, generators: g })
}

/// Reachable error tube `R(t) = ⊕_{j=0}^{t-1} A_K^j W` for `t = 1..=N`:
/// `R(1) = W`, `R(t+1) = R(t) ⊕ A_K^t W`.
pub fn reach_tube(a_k: &DMatrix<f64>, w: &Zonotope, n: usize) -> Result<Vec<Zonotope>, SetError> {
    if a_k.nrows() != a_k.ncols() {
        return Err(SetError::DimensionMismatch { expected: a_k.nrows(), got: a_k.ncols() });
    }
    check_dim(a_k.ncols(), w.dim())?;
    if n == 0 {
        return Err(SetError::InvalidSet("reach tube horizon must be at least 1".into()));
    }
    let mut tube = Vec::with_capacity(n);
    let mut power_w = w.clone(); // A_K^t W, starting at t = 0
    tube.push(w.clone());
    for _ in 1..n {
        power_w = linmap_zonotope(a_k, &power_w)?;
        let next = minkowski_zonotope(tube.last().unwrap(), &power_w)?;
        tube.push(next);
    }
    Ok(tube)
}

/// Pontryagin difference `P ⊖ Z`, exact for an H-polytope minus a zonotope:
/// the normals are kept and each offset shrinks by the support value
/// `d′ = d − h_Z(a)`. Emptiness of the result is the caller's check
/// ([`HPolytope::is_empty`]).
pub fn pontryagin_diff(p: &HPolytope, z: &Zonotope) -> Result<HPolytope, SetError> {
    check_dim(p.dim(), z.dim())?;
    let mut rows = Vec::with_capacity(p.rows.len());
    for r in &p.rows {
        let h = support_zonotope(z, &r.normal)?;
        rows.push(HalfSpace { normal: r.normal.clone(), offset: r.offset - h });
    }
    Ok(HPolytope { dim: p.dim, rows })
}

/// Projection of a product-structured polytope onto `coords`: keeps exactly
/// the rows supported inside `coords`, with normals restricted to those
/// coordinates. Rows straddling the split signal a non-product set.
pub fn project_product(p: &HPolytope, coords: &[usize]) -> Result<HPolytope, SetError> {
    let inside = |i: usize| coords.contains(&i);
    let mut rows = Vec::new();
    for (idx, r) in p.rows.iter().enumerate() {
        let mut any_in = false;
        let mut any_out = false;
        for i in 0..p.dim {
            if r.normal[i] != 0.0 {
                if inside(i) {
                    any_in = true;
                } else {
                    any_out = true;
                }
            }
        }
        if any_in && any_out {
            return Err(SetError::PreconditionViolated { row: idx });
        }
        if any_in {
            let normal = DVector::from_iterator(coords.len(), coords.iter().map(|i| r.normal[*i]));
            rows.push(HalfSpace { normal, offset: r.offset });
        }
    }
    Ok(HPolytope { dim: coords.len(), rows })
}

/// Origin-centered ellipsoid `{x : xᵀ P x ≤ α}` with `P ≻ 0`, `α > 0`.
#[derive(Clone, Debug)]
pub struct EllipsoidSet {
    shape: DMatrix<f64>,
    level: f64,
}

impl EllipsoidSet {
    pub fn new(shape: DMatrix<f64>, level: f64) -> Result<Self, SetError> {
        if shape.nrows() != shape.ncols() {
            return Err(SetError::DimensionMismatch { expected: shape.nrows(), got: shape.ncols() });
        }
        let asym = (&shape - shape.transpose()).amax();
        if asym > 1e-9 {
            return Err(SetError::InvalidSet(format!("shape asymmetry {asym} exceeds 1e-9")));
        }
        if !(level > 0.0) {
            return Err(SetError::InvalidSet(format!("level {level} must be positive")));
        }
        let shape = crate::linalg::symmetrize(&shape);
        let min_eig = crate::linalg::min_eig_sym(&shape);
        if min_eig <= 0.0 {
            return Err(SetError::InvalidSet(format!("shape min eigenvalue {min_eig} not positive")));
        }
        Ok(Self { shape, level })
    }

    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Closed-set membership within tolerance 1e-9.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool, SetError> {
        check_dim(self.dim(), x.len())?;
        Ok((x.transpose() * &self.shape * x)[(0, 0)] <= self.level + 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box(n: usize) -> BoxSet {
        BoxSet::symmetric(&vec![1.0; n]).unwrap()
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn support_of_point_is_projection() {
        let z = Zonotope::point(dv(&[0.0, 0.0]));
        assert_abs_diff_eq!(support_zonotope(&z, &dv(&[3.0, -4.0])).unwrap(), 0.0);
    }

    #[test]
    fn support_of_unit_box() {
        let z = unit_box(2).to_zonotope();
        assert_abs_diff_eq!(support_zonotope(&z, &dv(&[1.0, 1.0])).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn support_with_offset_center() {
        let z = Zonotope::new(dv(&[1.0, 0.0]), DMatrix::from_column_slice(2, 1, &[0.5, 0.0])).unwrap();
        assert_abs_diff_eq!(support_zonotope(&z, &dv(&[1.0, 0.0])).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn support_dimension_mismatch() {
        let z = unit_box(2).to_zonotope();
        assert!(support_zonotope(&z, &dv(&[1.0])).is_err());
    }

    #[test]
    fn linmap_identity_and_scale() {
        let z = unit_box(2).to_zonotope();
        let id = DMatrix::<f64>::identity(2, 2);
        let same = linmap_zonotope(&id, &z).unwrap();
        assert_eq!(same, z);
        let half = linmap_zonotope(&(id * 0.5), &z).unwrap();
        assert_abs_diff_eq!(support_zonotope(&half, &dv(&[1.0, 0.0])).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn linmap_rotation_maps_generators() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let z = Zonotope::new(dv(&[0.0, 0.0]), DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let r = linmap_zonotope(&rot, &z).unwrap();
        assert_abs_diff_eq!(r.generators()[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.generators()[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn minkowski_identity_element() {
        let z = unit_box(2).to_zonotope();
        let origin = Zonotope::point(dv(&[0.0, 0.0]));
        let s = minkowski_zonotope(&z, &origin).unwrap();
        assert_eq!(s.center(), z.center());
        assert_eq!(s.generators().ncols(), z.generators().ncols());
    }

    #[test]
    fn minkowski_box_sum_doubles_support() {
        let z = unit_box(2).to_zonotope();
        let s = minkowski_zonotope(&z, &z).unwrap();
        for dir in [dv(&[1.0, 0.0]), dv(&[0.0, 1.0]), dv(&[-1.0, 0.0]), dv(&[0.0, -1.0])] {
            assert_abs_diff_eq!(support_zonotope(&s, &dir).unwrap(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reach_tube_of_half_contraction() {
        // R(2) for A_K = 0.5 I, W = [−1,1]²: support in e1 is 1 + 0.5
        let a_k = DMatrix::<f64>::identity(2, 2) * 0.5;
        let w = unit_box(2).to_zonotope();
        let tube = reach_tube(&a_k, &w, 3).unwrap();
        assert_abs_diff_eq!(support_zonotope(&tube[1], &dv(&[1.0, 0.0])).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(support_zonotope(&tube[2], &dv(&[1.0, 0.0])).unwrap(), 1.75, epsilon = 1e-12);
    }

    #[test]
    fn reach_tube_nilpotent() {
        let a_k = DMatrix::<f64>::zeros(2, 2);
        let w = unit_box(2).to_zonotope();
        let tube = reach_tube(&a_k, &w, 4).unwrap();
        for t in 0..4 {
            for dir in [dv(&[1.0, 0.0]), dv(&[0.3, -0.7])] {
                assert_abs_diff_eq!(
                    support_zonotope(&tube[t], &dir).unwrap(),
                    support_zonotope(&w, &dir).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn reach_tube_support_recursion_identity() {
        // h_{R(t+1)}(a) = h_{A_K^t W}(a) + h_{R(t)}(a) for random directions.
        let a_k = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
        let w = BoxSet::symmetric(&[0.3, 0.15]).unwrap().to_zonotope();
        let tube = reach_tube(&a_k, &w, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for t in 0..5 {
            let akt_w = linmap_zonotope(&crate::linalg::mat_pow(&a_k, t + 1), &w).unwrap();
            for _ in 0..100 {
                let mut a = dv(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                if a.norm() < 1e-6 {
                    continue;
                }
                a /= a.norm();
                let lhs = support_zonotope(&tube[t + 1], &a).unwrap();
                let rhs = support_zonotope(&akt_w, &a).unwrap() + support_zonotope(&tube[t], &a).unwrap();
                assert!((lhs - rhs).abs() <= 1e-9, "recursion broke at t={t}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn pontryagin_identity_and_shrink() {
        let x = unit_box(2).to_hpolytope();
        let origin = Zonotope::point(dv(&[0.0, 0.0]));
        let same = pontryagin_diff(&x, &origin).unwrap();
        for (r0, r1) in x.rows().iter().zip(same.rows()) {
            assert_abs_diff_eq!(r0.offset, r1.offset);
        }
        let small = BoxSet::symmetric(&[0.1, 0.1]).unwrap().to_zonotope();
        let shrunk = pontryagin_diff(&x, &small).unwrap();
        for r in shrunk.rows() {
            assert_abs_diff_eq!(r.offset, 0.9, epsilon = 1e-12);
        }
        assert!(!shrunk.is_empty().unwrap());
    }

    #[test]
    fn pontryagin_overtightened_is_empty() {
        let x = unit_box(2).to_hpolytope();
        let big = BoxSet::symmetric(&[1.5, 1.5]).unwrap().to_zonotope();
        let diff = pontryagin_diff(&x, &big).unwrap();
        assert!(diff.is_empty().unwrap());
    }

    /// Brute-force oracle: x ∈ X ⊖ Z  ⟺  x + w ∈ X for every vertex w of the
    /// (box) zonotope. Valid because X is a convex polytope.
    fn pontryagin_oracle_member(x: &DVector<f64>, poly: &HPolytope, z: &Zonotope) -> bool {
        let p = z.num_generators();
        for mask in 0..(1usize << p) {
            let mut w = z.center().clone();
            for j in 0..p {
                let s = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
                w += z.generators().column(j) * s;
            }
            if !poly.contains(&(x + w)).unwrap() {
                return false;
            }
        }
        true
    }

    #[test]
    fn pontryagin_matches_grid_oracle_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let hw: Vec<f64> = (0..2).map(|_| rng.gen_range(0.5..1.5)).collect();
            let poly = BoxSet::symmetric(&hw).unwrap().to_hpolytope();
            let zr: Vec<f64> = (0..2).map(|_| rng.gen_range(0.05..0.6)).collect();
            let z = BoxSet::symmetric(&zr).unwrap().to_zonotope();
            let diff = pontryagin_diff(&poly, &z).unwrap();
            for gi in 0..21 {
                for gj in 0..21 {
                    let x = dv(&[
                        -hw[0] + 2.0 * hw[0] * gi as f64 / 20.0,
                        -hw[1] + 2.0 * hw[1] * gj as f64 / 20.0,
                    ]);
                    let ours = diff.contains(&x).unwrap();
                    let oracle = pontryagin_oracle_member(&x, &poly, &z);
                    assert_eq!(ours, oracle, "discrepancy at {x:?}");
                }
            }
        }
    }

    #[test]
    fn project_product_selects_rows() {
        let p4 = unit_box(4).to_hpolytope();
        let proj = project_product(&p4, &[0, 1]).unwrap();
        assert_eq!(proj.dim(), 2);
        assert_eq!(proj.num_rows(), 4);
        assert!(proj.contains(&dv(&[0.9, -0.9])).unwrap());
        assert!(!proj.contains(&dv(&[1.1, 0.0])).unwrap());
    }

    #[test]
    fn project_product_empty_coords() {
        let p = unit_box(3).to_hpolytope();
        let proj = project_product(&p, &[]).unwrap();
        assert_eq!(proj.dim(), 0);
        assert_eq!(proj.num_rows(), 0);
    }

    #[test]
    fn project_product_rejects_straddling_row() {
        let rows = vec![HalfSpace { normal: dv(&[1.0, 1.0]), offset: 1.0 }];
        let p = HPolytope::new(2, rows).unwrap();
        match project_product(&p, &[0]) {
            Err(SetError::PreconditionViolated { row: 0 }) => {}
            other => panic!("expected precondition violation, got {other:?}"),
        }
    }

    #[test]
    fn contains_box_boundary_tolerance() {
        let b = unit_box(2);
        assert!(b.contains(&dv(&[0.0, 0.0])).unwrap());
        assert!(!b.contains(&dv(&[1.0 + 1e-6, 0.0])).unwrap());
        assert!(b.contains(&dv(&[1.0 + 1e-10, 0.0])).unwrap());
    }

    #[test]
    fn contains_ellipsoid_boundary() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let e = EllipsoidSet::new(p, 3.0).unwrap();
        // xᵀPx = 3 exactly on the boundary counts as inside.
        let x = dv(&[(1.5f64).sqrt(), 0.0]);
        assert!(e.contains(&x).unwrap());
        assert!(!e.contains(&dv(&[1.3, 0.0])).unwrap());
    }

    #[test]
    fn zonotope_membership_feasibility() {
        let z = Zonotope::new(
            dv(&[0.5, 0.0]),
            DMatrix::from_column_slice(2, 2, &[1.0, 0.5, 0.0, 0.5]),
        )
        .unwrap();
        assert!(z.contains(&dv(&[0.5, 0.0])).unwrap());
        assert!(z.contains(&dv(&[1.5, 0.5])).unwrap()); // ξ = (1, 1) → c + (1, .5)+(0,.5)... inside
        assert!(!z.contains(&dv(&[3.0, 0.0])).unwrap());
    }

    #[test]
    fn ellipsoid_invariants_enforced() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4999, 1.0]);
        assert!(EllipsoidSet::new(asym, 1.0).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]);
        assert!(EllipsoidSet::new(indef, 1.0).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(EllipsoidSet::new(ok.clone(), 0.0).is_err());
        assert!(EllipsoidSet::new(ok, 1.0).is_ok());
    }

    #[test]
    fn chebyshev_of_box() {
        let p = BoxSet::from_slices(&[-1.0, -2.0], &[3.0, 2.0]).unwrap().to_hpolytope();
        let (c, r) = p.chebyshev().unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Support of M·z matches the analytic formula in random directions.
        #[test]
        fn prop_linmap_support_exact(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3usize;
            let z = Zonotope::new(
                DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
                DMatrix::from_fn(n, 4, |_, _| rng.gen_range(-1.0..1.0)),
            ).unwrap();
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let mz = linmap_zonotope(&m, &z).unwrap();
            for _ in 0..20 {
                let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                // h_{Mz}(a) = h_z(Mᵀa)
                let lhs = support_zonotope(&mz, &a).unwrap();
                let rhs = support_zonotope(&z, &(m.transpose() * &a)).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12_f64.max(1e-12 * lhs.abs()));
            }
        }

        /// Support of z1 ⊕ z2 is the sum of supports in every direction.
        #[test]
        fn prop_minkowski_support_additive(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3usize;
            let mk = |rng: &mut ChaCha8Rng| Zonotope::new(
                DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
                DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0)),
            ).unwrap();
            let z1 = mk(&mut rng);
            let z2 = mk(&mut rng);
            let s = minkowski_zonotope(&z1, &z2).unwrap();
            for _ in 0..20 {
                let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let lhs = support_zonotope(&s, &a).unwrap();
                let rhs = support_zonotope(&z1, &a).unwrap() + support_zonotope(&z2, &a).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12_f64.max(1e-12 * lhs.abs()));
            }
        }
    }
}
