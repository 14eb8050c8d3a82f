//! Declarative conic programs: linear objective over named scalar, vector and
//! symmetric-matrix variables, subject to affine equalities/inequalities,
//! second-order cones and PSD blocks affine in the variables.
//!
//! Quadratic objectives are lowered to second-order-cone epigraphs
//! (`t ≥ ‖z‖²` as `‖(2z, t−1)‖ ≤ t+1`), so one solver contract serves both
//! the offline LMI synthesis and the online MPC problem.
//!
//! The embedded algorithm is an interior-point conic solver (Clarabel).
//! Its status is never trusted alone: every returned PSD block is
//! eigendecomposed and every scalar constraint rechecked before a solution
//! is reported `Optimal`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

use crate::linalg::min_eig_sym;

/// Handle to one scalar entry of the variable vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub usize);

/// Affine scalar expression `Σ cᵢ·vᵢ + constant`.
#[derive(Clone, Debug, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Self { terms: vec![(v.0, 1.0)], constant: 0.0 }
    }

    pub fn term(v: Var, c: f64) -> Self {
        Self { terms: vec![(v.0, c)], constant: 0.0 }
    }

    pub fn push(&mut self, v: Var, c: f64) {
        if c != 0.0 {
            self.terms.push((v.0, c));
        }
    }

    pub fn add_const(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn minus(mut self, other: &LinExpr) -> Self {
        self.terms.extend(other.terms.iter().map(|(i, c)| (*i, -c)));
        self.constant -= other.constant;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for (_, c) in self.terms.iter_mut() {
            *c *= s;
        }
        self.constant *= s;
        self
    }

    /// Merge duplicate variable terms and drop zeros.
    fn compressed(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        LinExpr { terms: out, constant: self.constant }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(i, c)| c * x[*i]).sum::<f64>() + self.constant
    }
}

/// Square matrix of affine expressions; PSD constraints require it symmetric,
/// which the `set_sym`/`add_sym` helpers maintain by construction.
#[derive(Clone, Debug)]
pub struct MatExpr {
    dim: usize,
    entries: Vec<LinExpr>,
}

impl MatExpr {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![LinExpr::zero(); dim * dim] }
    }

    pub fn from_const(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out.entries[i * dim + j] = LinExpr::constant(m[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[i * self.dim + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: LinExpr) {
        self.entries[i * self.dim + j] = e;
    }

    /// Set entry `(i,j)` and mirror it to `(j,i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, e: LinExpr) {
        self.entries[j * self.dim + i] = e.clone();
        self.entries[i * self.dim + j] = e;
    }

    /// Add `e` to entry `(i,j)` and, if off-diagonal, to `(j,i)`.
    pub fn add_sym(&mut self, i: usize, j: usize, e: LinExpr) {
        let cur = self.entries[i * self.dim + j].clone().plus(&e);
        self.entries[i * self.dim + j] = cur.clone();
        if i != j {
            self.entries[j * self.dim + i] = cur;
        }
    }

    /// Place `coef · M` scaled by variable `v` (or constant if `v` is `None`)
    /// at block position `(r0, c0)`, mirroring into the opposite block.
    pub fn add_block_sym(&mut self, r0: usize, c0: usize, m: &DMatrix<f64>, v: Option<Var>, coef: f64) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let c = coef * m[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let e = match v {
                    Some(var) => LinExpr::term(var, c),
                    None => LinExpr::constant(c),
                };
                let (r, cc) = (r0 + i, c0 + j);
                self.entries[r * self.dim + cc] = self.entries[r * self.dim + cc].clone().plus(&e);
                if (r, cc) != (cc, r) {
                    self.entries[cc * self.dim + r] = self.entries[cc * self.dim + r].clone().plus(&e);
                }
            }
        }
    }

    fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entries[i * self.dim + j].eval(x))
    }
}

#[derive(Clone, Debug)]
enum VarShape {
    Scalar,
    Vector(usize),
    SymMat(usize),
}

#[derive(Clone, Debug)]
struct VarDef {
    name: String,
    start: usize,
    shape: VarShape,
}

/// Vector variable handle.
#[derive(Clone, Copy, Debug)]
pub struct VecVar {
    start: usize,
    pub len: usize,
}

impl VecVar {
    pub fn at(&self, i: usize) -> Var {
        assert!(i < self.len);
        Var(self.start + i)
    }
}

/// Symmetric matrix variable handle; stores the lower triangle.
#[derive(Clone, Copy, Debug)]
pub struct SymVar {
    start: usize,
    pub dim: usize,
}

impl SymVar {
    pub fn entry(&self, i: usize, j: usize) -> Var {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        Var(self.start + r * (r + 1) / 2 + c)
    }

    /// Affine expression for the matrix trace.
    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.dim {
            e.push(self.entry(i, i), 1.0);
        }
        e
    }

    /// The matrix as a `MatExpr` (for embedding into larger PSD blocks).
    pub fn as_mat_expr(&self) -> MatExpr {
        let mut m = MatExpr::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, LinExpr::var(self.entry(i, j)));
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalError,
}

/// Independent post-solve constraint audit (never trusts solver status).
#[derive(Clone, Copy, Debug, Default)]
pub struct CertificateReport {
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub min_soc_margin: f64,
    pub min_psd_eig: f64,
}

#[derive(Clone, Debug)]
pub enum VarValue {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub values: BTreeMap<String, VarValue>,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub certificate: CertificateReport,
    pub message: String,
}

impl ConicSolution {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        match self.values.get(name) {
            Some(VarValue::Scalar(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn vector(&self, name: &str) -> Option<&DVector<f64>> {
        match self.values.get(name) {
            Some(VarValue::Vector(v)) => Some(v),
            _ => None,
        }
    }

    pub fn matrix(&self, name: &str) -> Option<&DMatrix<f64>> {
        match self.values.get(name) {
            Some(VarValue::Matrix(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub eps_feas: f64,
    pub eps_gap: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps_feas: 1e-7, eps_gap: 1e-7, max_iter: 200, verbose: false }
    }
}

/// A conic program under construction.
#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    nvars: usize,
    vars: Vec<VarDef>,
    objective: LinExpr,
    eqs: Vec<LinExpr>,
    ineqs: Vec<LinExpr>,
    socs: Vec<Vec<LinExpr>>,
    psds: Vec<MatExpr>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_scalar_vars(&self) -> usize {
        self.nvars
    }

    pub fn scalar(&mut self, name: &str) -> Var {
        let start = self.nvars;
        self.nvars += 1;
        self.vars.push(VarDef { name: name.to_string(), start, shape: VarShape::Scalar });
        Var(start)
    }

    pub fn vector(&mut self, name: &str, len: usize) -> VecVar {
        let start = self.nvars;
        self.nvars += len;
        self.vars.push(VarDef { name: name.to_string(), start, shape: VarShape::Vector(len) });
        VecVar { start, len }
    }

    pub fn sym_matrix(&mut self, name: &str, dim: usize) -> SymVar {
        let start = self.nvars;
        self.nvars += dim * (dim + 1) / 2;
        self.vars.push(VarDef { name: name.to_string(), start, shape: VarShape::SymMat(dim) });
        SymVar { start, dim }
    }

    pub fn set_objective(&mut self, e: LinExpr) {
        self.objective = e;
    }

    pub fn add_objective(&mut self, e: LinExpr) {
        self.objective = self.objective.clone().plus(&e);
    }

    /// Constrain `e == 0`.
    pub fn eq(&mut self, e: LinExpr) {
        self.eqs.push(e);
    }

    /// Constrain `e <= 0`.
    pub fn le(&mut self, e: LinExpr) {
        self.ineqs.push(e);
    }

    /// Constrain `lhs >= rhs` for scalars.
    pub fn ge(&mut self, lhs: LinExpr, rhs: LinExpr) {
        self.ineqs.push(rhs.minus(&lhs));
    }

    /// Constrain `‖(e₁..e_k)‖ ≤ e₀` where `cone = [e₀, e₁, .., e_k]`.
    pub fn soc(&mut self, cone: Vec<LinExpr>) {
        assert!(cone.len() >= 2);
        self.socs.push(cone);
    }

    /// Constrain the symmetric `MatExpr` to be positive semidefinite.
    pub fn psd(&mut self, m: MatExpr) {
        debug_assert!(m.dim >= 1);
        self.psds.push(m);
    }

    /// Add an epigraph variable `t ≥ Σ zⱼ²` and return it.
    pub fn quad_epigraph(&mut self, name: &str, zs: Vec<LinExpr>) -> Var {
        let t = self.scalar(name);
        // ‖(2z, t−1)‖ ≤ t+1  ⟺  t ≥ Σ zⱼ²
        let mut cone = Vec::with_capacity(zs.len() + 2);
        let mut head = LinExpr::var(t);
        head.add_const(1.0);
        cone.push(head);
        for z in zs {
            cone.push(z.scaled(2.0));
        }
        let mut tail = LinExpr::var(t);
        tail.add_const(-1.0);
        cone.push(tail);
        self.soc(cone);
        t
    }

    fn extract_values(&self, x: &[f64]) -> BTreeMap<String, VarValue> {
        let mut map = BTreeMap::new();
        for def in &self.vars {
            let val = match def.shape {
                VarShape::Scalar => VarValue::Scalar(x[def.start]),
                VarShape::Vector(len) => {
                    VarValue::Vector(DVector::from_iterator(len, (0..len).map(|i| x[def.start + i])))
                }
                VarShape::SymMat(dim) => {
                    let mut m = DMatrix::zeros(dim, dim);
                    for i in 0..dim {
                        for j in 0..=i {
                            let v = x[def.start + i * (i + 1) / 2 + j];
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                    VarValue::Matrix(m)
                }
            };
            map.insert(def.name.clone(), val);
        }
        map
    }

    fn recheck(&self, x: &[f64]) -> CertificateReport {
        let mut rep = CertificateReport {
            min_soc_margin: f64::INFINITY,
            min_psd_eig: f64::INFINITY,
            ..Default::default()
        };
        for e in &self.eqs {
            rep.max_eq_violation = rep.max_eq_violation.max(e.eval(x).abs());
        }
        for e in &self.ineqs {
            rep.max_ineq_violation = rep.max_ineq_violation.max(e.eval(x));
        }
        for cone in &self.socs {
            let t = cone[0].eval(x);
            let z: f64 = cone[1..].iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
            rep.min_soc_margin = rep.min_soc_margin.min(t - z);
        }
        for m in &self.psds {
            rep.min_psd_eig = rep.min_psd_eig.min(min_eig_sym(&m.eval(x)));
        }
        if self.socs.is_empty() {
            rep.min_soc_margin = 0.0;
        }
        if self.psds.is_empty() {
            rep.min_psd_eig = 0.0;
        }
        rep
    }

    /// Solve the program. The returned status reflects both the embedded
    /// interior-point algorithm and the independent certificate recheck.
    pub fn solve(&self, opts: &SolveOptions) -> ConicSolution {
        // Assemble A v + s = b with cones ordered [zero, nonneg, soc.., psd..].
        let mut rows: Vec<usize> = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row = 0usize;

        let push_expr = |expr: &LinExpr, negate: bool, rows: &mut Vec<usize>, cols: &mut Vec<usize>, vals: &mut Vec<f64>, b: &mut Vec<f64>, row: &mut usize| {
            let e = expr.compressed();
            let sgn = if negate { -1.0 } else { 1.0 };
            for (i, c) in &e.terms {
                rows.push(*row);
                cols.push(*i);
                vals.push(sgn * c);
            }
            b.push(if negate { e.constant } else { -e.constant });
            *row += 1;
        };

        // Equalities: A = coef, b = -const, s = 0.
        for e in &self.eqs {
            push_expr(e, false, &mut rows, &mut cols, &mut vals, &mut b, &mut row);
        }
        if !self.eqs.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.eqs.len()));
        }
        // Inequalities e <= 0: s = -const - coef·v >= 0.
        for e in &self.ineqs {
            push_expr(e, false, &mut rows, &mut cols, &mut vals, &mut b, &mut row);
        }
        if !self.ineqs.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.ineqs.len()));
        }
        // SOC: s = expr (A = -coef, b = const).
        for cone in &self.socs {
            for e in cone {
                push_expr(e, true, &mut rows, &mut cols, &mut vals, &mut b, &mut row);
            }
            cones.push(SupportedConeT::SecondOrderConeT(cone.len()));
        }
        // PSD: s = svec(M), upper triangle column-major, off-diagonals × √2.
        let sqrt2 = 2.0_f64.sqrt();
        for m in &self.psds {
            for j in 0..m.dim {
                for i in 0..=j {
                    let scale = if i == j { 1.0 } else { sqrt2 };
                    let e = m.at(i, j).clone().scaled(scale);
                    push_expr(&e, true, &mut rows, &mut cols, &mut vals, &mut b, &mut row);
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(m.dim));
        }
        if row == 0 {
            // Degenerate: give the solver one vacuous inequality.
            b.push(1.0);
            cones.push(SupportedConeT::NonnegativeConeT(1));
            row = 1;
        }

        let a = CscMatrix::new_from_triplets(row, self.nvars, rows, cols, vals);
        let p = CscMatrix::<f64>::zeros((self.nvars, self.nvars));
        let obj = self.objective.compressed();
        let mut q = vec![0.0; self.nvars];
        for (i, c) in &obj.terms {
            q[*i] += c;
        }

        let settings = DefaultSettingsBuilder::default()
            .verbose(opts.verbose)
            .max_iter(opts.max_iter)
            .tol_feas(opts.eps_feas * 0.1)
            .tol_gap_abs(opts.eps_gap * 0.1)
            .tol_gap_rel(opts.eps_gap * 0.1)
            .build()
            .expect("solver settings");

        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => {
                return ConicSolution {
                    status: SolveStatus::NumericalError,
                    values: BTreeMap::new(),
                    x: vec![0.0; self.nvars],
                    objective: f64::NAN,
                    iterations: 0,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    gap: f64::NAN,
                    certificate: CertificateReport::default(),
                    message: format!("solver setup failed: {e:?}"),
                }
            }
        };
        solver.solve();

        let x = solver.solution.x.clone();
        let mut status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::AlmostSolved => SolveStatus::MaxIter,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIter,
            _ => SolveStatus::NumericalError,
        };
        let mut message = format!("{:?}", solver.solution.status);

        let certificate = self.recheck(&x);
        if status == SolveStatus::Optimal {
            let bad = certificate.max_eq_violation > opts.eps_feas
                || certificate.max_ineq_violation > opts.eps_feas
                || certificate.min_soc_margin < -1e-6
                || certificate.min_psd_eig < -1e-6;
            if bad {
                status = SolveStatus::NumericalError;
                message = format!(
                    "solver reported Solved but recheck failed: eq {:.3e}, ineq {:.3e}, soc {:.3e}, psd {:.3e}",
                    certificate.max_eq_violation,
                    certificate.max_ineq_violation,
                    certificate.min_soc_margin,
                    certificate.min_psd_eig
                );
            }
        }

        ConicSolution {
            status,
            values: self.extract_values(&x),
            objective: obj.eval(&x),
            x,
            iterations: solver.info.iterations,
            primal_residual: solver.info.res_primal,
            dual_residual: solver.info.res_dual,
            gap: solver.info.gap_abs,
            certificate,
            message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psd_scalar_bound() {
        // minimize x s.t. [[x, 1], [1, x]] ⪰ 0  →  x* = 1
        let mut p = ConicProgram::new();
        let x = p.scalar("x");
        p.set_objective(LinExpr::var(x));
        let mut m = MatExpr::zeros(2);
        m.set(0, 0, LinExpr::var(x));
        m.set(1, 1, LinExpr::var(x));
        m.set_sym(0, 1, LinExpr::constant(1.0));
        p.psd(m);
        let sol = p.solve(&SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.scalar("x").unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn trace_min_identity() {
        // minimize trace(S) s.t. S ⪰ I (2×2)  →  trace = 2, S = I
        let mut p = ConicProgram::new();
        let s = p.sym_matrix("S", 2);
        p.set_objective(s.trace());
        let mut m = s.as_mat_expr();
        for i in 0..2 {
            *m.at_mut(i, i) = m.at(i, i).clone().plus(&LinExpr::constant(-1.0));
        }
        p.psd(m);
        let sol = p.solve(&SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-6);
        let sm = sol.matrix("S").unwrap();
        assert_abs_diff_eq!((sm - DMatrix::<f64>::identity(2, 2)).norm(), 0.0, epsilon = 1e-5);
    }

    #[test]
    fn random_feasibility_lmi_with_known_interior_point() {
        // A₀ + Σ xᵢAᵢ ⪰ 0 built from a sampled feasible x̂ and a PSD slack,
        // so feasibility is known by construction.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let dim = 4;
            let k = 3;
            let ais: Vec<DMatrix<f64>> = (0..k)
                .map(|_| {
                    let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
                    (&m + m.transpose()) * 0.5
                })
                .collect();
            let xhat: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            let slack = &g * g.transpose() + DMatrix::identity(dim, dim) * 0.1;
            let mut a0 = slack.clone();
            for (ai, xi) in ais.iter().zip(&xhat) {
                a0 -= ai * *xi;
            }

            let mut p = ConicProgram::new();
            let xv = p.vector("x", k);
            let mut m = MatExpr::from_const(&a0);
            for (idx, ai) in ais.iter().enumerate() {
                for i in 0..dim {
                    for j in 0..=i {
                        let mut e = m.at(i, j).clone();
                        e.push(xv.at(idx), ai[(i, j)]);
                        m.set_sym(i, j, e);
                    }
                }
            }
            p.psd(m);
            p.set_objective(LinExpr::zero());
            let sol = p.solve(&SolveOptions::default());
            assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
            assert!(sol.certificate.min_psd_eig >= -1e-6);
        }
    }

    #[test]
    fn soc_epigraph_norm() {
        // minimize t s.t. t ≥ ‖(1,2)‖² → t = 5
        let mut p = ConicProgram::new();
        let t = p.quad_epigraph("t", vec![LinExpr::constant(1.0), LinExpr::constant(2.0)]);
        p.set_objective(LinExpr::var(t));
        let sol = p.solve(&SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.scalar("t").unwrap(), 5.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_program_is_flagged() {
        // x ≥ 1 and x ≤ -1
        let mut p = ConicProgram::new();
        let x = p.scalar("x");
        let mut e1 = LinExpr::term(x, -1.0);
        e1.add_const(1.0); // 1 - x <= 0
        let mut e2 = LinExpr::var(x);
        e2.add_const(1.0); // x + 1 <= 0
        p.le(e1);
        p.le(e2);
        p.set_objective(LinExpr::var(x));
        let sol = p.solve(&SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn deterministic_resolve() {
        let build = || {
            let mut p = ConicProgram::new();
            let s = p.sym_matrix("S", 3);
            p.set_objective(s.trace());
            let mut m = s.as_mat_expr();
            for i in 0..3 {
                *m.at_mut(i, i) = m.at(i, i).clone().plus(&LinExpr::constant(-0.5));
            }
            p.psd(m);
            p
        };
        let s1 = build().solve(&SolveOptions::default());
        let s2 = build().solve(&SolveOptions::default());
        assert_eq!(s1.status, s2.status);
        assert!((s1.objective - s2.objective).abs() <= 1e-9);
    }

    #[test]
    fn equality_and_bounds() {
        // minimize x + y s.t. x + y = 2, x >= 0, y >= 0, x <= 0.5
        let mut p = ConicProgram::new();
        let x = p.scalar("x");
        let y = p.scalar("y");
        p.set_objective(LinExpr::var(x).plus(&LinExpr::var(y)));
        let mut eq = LinExpr::var(x).plus(&LinExpr::var(y));
        eq.add_const(-2.0);
        p.eq(eq);
        p.le(LinExpr::term(x, -1.0));
        p.le(LinExpr::term(y, -1.0));
        let mut ub = LinExpr::var(x);
        ub.add_const(-0.5);
        p.le(ub);
        let sol = p.solve(&SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-6);
        assert!(sol.scalar("x").unwrap() <= 0.5 + 1e-7);
    }
}
