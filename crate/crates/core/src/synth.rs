//! Offline synthesis: tube feedback gains with robust positively invariant
//! certificates, separable terminal costs/gains, and precomputed tightened
//! constraint sequences.
//!
//! Gain synthesis solves small semidefinite programs:
//!
//! * global mode — `minimize trace(S)` subject to the RPI condition on
//!   `Z = {x : xᵀS⁻¹x ≤ 1}` (S-procedure over the state ellipsoid and the
//!   disturbance ellipsoid, multipliers `τ₁` fixed per grid point, `τ₂`
//!   free) plus containment conditions `Z ⊆ X`, `KZ ⊆ U`;
//! * local mode — per-agent conditions coupled through the neighbors'
//!   shape matrices `S_ij`, solved jointly for all agents at each grid
//!   point of the scalar multipliers.
//!
//! Every LMI solution is re-verified by eigendecomposition and Monte-Carlo
//! sampling before it is accepted; no step trusts solver status alone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{ConicProgram, LinExpr, MatExpr, SolveOptions, SolveStatus};
use crate::linalg::{
    inv_spd, mat_from_rows, mat_pow, mat_to_rows, max_eig_sym, min_eig_sym, spectral_radius,
    sqrt_psd, symmetrize,
};
use crate::model::{GainModeConfig, NetworkModel, SynthesisConfig};
use crate::setalg::{
    linmap_zonotope, pontryagin_diff, project_product, reach_tube, EllipsoidSet,
    HPolytope, HalfSpace, Zonotope,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{what} infeasible: {detail}")]
    Infeasible { what: String, detail: String },
    #[error("no grid point admits certified local gains; per-point reasons: {}",
            .reasons.iter().map(|(p, r)| format!("[{p}: {r}]")).collect::<Vec<_>>().join(" "))]
    InfeasibleAllGrid { reasons: Vec<(String, String)> },
    #[error("tightened {kind} set empty at t = {t} (row {row}); Assumption-4 style non-emptiness violated")]
    EmptyTightenedSet { kind: String, t: usize, row: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("set algebra failure: {0}")]
    Set(#[from] crate::setalg::SetError),
    #[error("disturbance set degenerate: {0}")]
    DegenerateDisturbance(String),
}

/// Which feedback architecture the bundle carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainMode {
    GlobalK,
    LocalK,
}

/// Products of the global-gain synthesis.
#[derive(Clone, Debug)]
pub struct GlobalGain {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub z: EllipsoidSet,
    pub trace_s: f64,
    pub tau1: f64,
    /// Whether the `Z ⊆ X` rows were kept. Plants whose actuation is weak
    /// relative to the worst-case disturbance cannot hold any invariant set
    /// inside `X`; the rows are then dropped and the finite-horizon
    /// non-emptiness of the tightened sets is verified directly by
    /// [`tighten_sequences`].
    pub state_containment: bool,
    /// Slack factor on the `KZ ⊆ U` rows: `1.0` means true containment;
    /// larger values mean the rows were kept only up to the scaled bound
    /// `√β·g` (same non-emptiness verification applies downstream).
    pub input_slack: f64,
}

/// Products of the local-gain synthesis.
#[derive(Clone, Debug)]
pub struct LocalGains {
    /// `K_{N_i}` per agent (`m_i × n_{N_i}`).
    pub k_ni: Vec<DMatrix<f64>>,
    /// `P_i` per agent (`n_i × n_i`).
    pub p: Vec<DMatrix<f64>>,
    pub grid_point: (f64, f64, f64),
}

/// Separable terminal certificate.
#[derive(Clone, Debug)]
pub struct TerminalCert {
    pub p_f: Vec<DMatrix<f64>>,
    pub k_f: Vec<DMatrix<f64>>,
    pub gamma: Vec<DMatrix<f64>>,
}

/// Tightened constraint sequences and terminal error sets.
#[derive(Clone, Debug)]
pub struct Tightened {
    /// Global `X̄(t)`, `t = 0..N−1`.
    pub x_global: Vec<HPolytope>,
    /// Global `Ū(t)`, `t = 0..N−1`.
    pub u_global: Vec<HPolytope>,
    /// Per-agent neighborhood projections `X̄_{N_i}(t)`.
    pub x_ni: Vec<Vec<HPolytope>>,
    /// Per-agent input projections `Ū_i(t)`.
    pub u_i: Vec<Vec<HPolytope>>,
    /// Terminal error zonotopes `Ē_{N_i}(N−1) = T_{N_i} A_K^{N−1} W`.
    pub ebar: Vec<Zonotope>,
    /// Terminal error ellipsoid shapes `E_{N_i}`; `None` when `W` is a point.
    pub e_shape: Vec<Option<DMatrix<f64>>>,
}

/// Everything the online controller needs, produced offline.
#[derive(Clone, Debug)]
pub struct SynthesisBundle {
    pub mode: GainMode,
    pub k_global: Option<DMatrix<f64>>,
    pub p_global: Option<DMatrix<f64>>,
    pub k_ni: Option<Vec<DMatrix<f64>>>,
    pub p_local: Option<Vec<DMatrix<f64>>>,
    pub p_f: Vec<DMatrix<f64>>,
    pub k_f: Vec<DMatrix<f64>>,
    pub gamma: Vec<DMatrix<f64>>,
    pub tightened: Tightened,
    pub horizon: usize,
    pub model_hash: String,
    pub tau1_used: Option<f64>,
    pub local_grid_point: Option<(f64, f64, f64)>,
}

impl SynthesisBundle {
    /// The assembled tube gain: `K` directly in global mode, or
    /// `K = Σᵢ Lᵢᵀ K_{N_i} T_{N_i}` in local mode.
    pub fn assembled_k(&self, net: &NetworkModel) -> DMatrix<f64> {
        match self.mode {
            GainMode::GlobalK => self.k_global.clone().expect("global bundle carries K"),
            GainMode::LocalK => {
                assemble_local_k(net, self.k_ni.as_ref().expect("local bundle carries K_Ni"))
            }
        }
    }

    /// Chebyshev radii of the tightened global sets per step (state, input).
    pub fn tightening_margins(&self) -> Result<Vec<(usize, f64, f64)>, SynthError> {
        let mut out = Vec::new();
        for t in 0..self.tightened.x_global.len() {
            let rx = self.tightened.x_global[t].chebyshev()?.1;
            let ru = self.tightened.u_global[t].chebyshev()?.1;
            out.push((t, rx, ru));
        }
        Ok(out)
    }
}

/// `K = Σᵢ Lᵢᵀ K_{N_i} T_{N_i}` realized as index scatters.
pub fn assemble_local_k(net: &NetworkModel, k_ni: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(net.input_dim(), net.state_dim());
    for i in 0..net.num_agents() {
        let rows = net.input_indices(i);
        let cols = net.neighborhood_indices(i);
        for (ri, r) in rows.iter().enumerate() {
            for (ci, c) in cols.iter().enumerate() {
                k[(*r, *c)] = k_ni[i][(ri, ci)];
            }
        }
    }
    k
}

fn solve_or_status(prog: &ConicProgram, what: &str) -> Result<crate::conic::ConicSolution, SynthError> {
    let sol = prog.solve(&SolveOptions::default());
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        SolveStatus::Infeasible => Err(SynthError::Infeasible {
            what: what.to_string(),
            detail: sol.message,
        }),
        _ => Err(SynthError::Numerical(format!("{what}: {:?} ({})", sol.status, sol.message))),
    }
}

// ---------------------------------------------------------------------------
// Global gain (minimum-trace RPI ellipsoid)
// ---------------------------------------------------------------------------

/// Half-widths `vⱼ = max(|lⱼ|, |uⱼ|)` with a tiny floor so zero-width axes
/// stay representable in the per-axis disturbance quadratics.
fn dist_axis_bounds(b: &crate::setalg::BoxSet) -> Vec<f64> {
    (0..b.dim())
        .map(|j| b.lower()[j].abs().max(b.upper()[j].abs()).max(1e-9))
        .collect()
}

/// Synthesize the global tube gain for a fixed multiplier `tau1 ∈ (0,1)`:
/// `minimize trace(S)` over `S ≻ 0`, `Y` and disturbance multipliers
/// subject to the RPI LMI and the `Z ⊆ X`, `KZ ⊆ U` rows. The S-procedure
/// carries one multiplier per disturbance axis (`wⱼ² ≤ vⱼ²`), which
/// quantifies over exactly the disturbance box; a single multiplier on the
/// box's outer ellipsoid is the special case with all axis multipliers
/// equal. Returns `K = Y S⁻¹`, `P = S⁻¹` and the RPI ellipsoid,
/// post-verified by eigendecomposition, Schur-stability and Monte-Carlo
/// sampling.
pub fn synth_global_gain(net: &NetworkModel, tau1: f64) -> Result<GlobalGain, SynthError> {
    // Preference order: the full Theorem-style problem, then without the
    // Z ⊆ X rows, then with slacked input rows. Downstream, Algorithm 1
    // verifies the tightened-set non-emptiness exactly in all cases.
    match synth_global_gain_inner(net, tau1, true, false) {
        Err(SynthError::Infeasible { .. }) => match synth_global_gain_inner(net, tau1, false, false)
        {
            Err(SynthError::Infeasible { .. }) => synth_global_gain_inner(net, tau1, false, true),
            other => other,
        },
        other => other,
    }
}

fn synth_global_gain_inner(
    net: &NetworkModel,
    tau1: f64,
    state_rows: bool,
    input_slack: bool,
) -> Result<GlobalGain, SynthError> {
    if !(tau1 > 0.0 && tau1 < 1.0) {
        return Err(SynthError::Numerical(format!("tau1 = {tau1} outside (0,1)")));
    }
    let (a, b) = net.assemble_global();
    let n = net.state_dim();
    let m = net.input_dim();
    let v = dist_axis_bounds(&net.global_dist_box());

    let mut prog = ConicProgram::new();
    let s = prog.sym_matrix("S", n);
    let y = prog.vector("Y", m * n);
    // Scaled per-axis multipliers σⱼ = τ₂ⱼ/vⱼ² (better conditioned).
    let sigma = prog.vector("sigma_w", n);
    let beta = if input_slack { Some(prog.scalar("beta")) } else { None };

    // S ⪰ εI.
    let mut s_pd = s.as_mat_expr();
    for i in 0..n {
        s_pd.at_mut(i, i).add_const(-1e-8);
    }
    prog.psd(s_pd);

    // σⱼ ≥ 0 and τ₁ + Σⱼ vⱼ²σⱼ ≤ 1.
    let mut sum = LinExpr::constant(tau1 - 1.0);
    for j in 0..n {
        prog.le(LinExpr::term(sigma.at(j), -1.0));
        sum.push(sigma.at(j), v[j] * v[j]);
    }
    prog.le(sum);

    // RPI block: [[diag(σⱼ), I, 0], [•, S, AS+BY], [•, •, τ₁S]] ⪰ 0.
    // The paper's proof derives the (3,3) correction (τ₁P)⁻¹ = S/τ₁ applied
    // through V = [0; AS+BY], which pins that block to τ₁·S.
    let mut big = MatExpr::zeros(3 * n);
    for j in 0..n {
        big.set(j, j, LinExpr::var(sigma.at(j)));
    }
    for i in 0..n {
        big.set_sym(i, n + i, LinExpr::constant(1.0));
    }
    for i in 0..n {
        for j in 0..=i {
            big.set_sym(n + i, n + j, LinExpr::var(s.entry(i, j)));
        }
    }
    for r in 0..n {
        for c in 0..n {
            let mut e = LinExpr::zero();
            for k in 0..n {
                e.push(s.entry(k, c), a[(r, k)]);
            }
            for k in 0..m {
                e.push(y.at(k * n + c), b[(r, k)]);
            }
            big.set_sym(n + r, 2 * n + c, e);
        }
    }
    for i in 0..n {
        for j in 0..=i {
            big.set_sym(2 * n + i, 2 * n + j, LinExpr::term(s.entry(i, j), tau1));
        }
    }
    prog.psd(big);

    // Z ⊆ X rows: [[d², aᵀS], [•, S]] ⪰ 0.
    let state_row_list = if state_rows {
        net.global_state_box().to_hpolytope().rows().to_vec()
    } else {
        Vec::new()
    };
    for row in &state_row_list {
        let mut blk = MatExpr::zeros(n + 1);
        blk.set(0, 0, LinExpr::constant(row.offset * row.offset));
        for c in 0..n {
            let mut e = LinExpr::zero();
            for k in 0..n {
                e.push(s.entry(k, c), row.normal[k]);
            }
            blk.set_sym(0, 1 + c, e);
        }
        for i in 0..n {
            for j in 0..=i {
                blk.set_sym(1 + i, 1 + j, LinExpr::var(s.entry(i, j)));
            }
        }
        prog.psd(blk);
    }

    // KZ ⊆ U rows: [[βg², hᵀY], [•, S]] ⪰ 0 (β fixed to 1 unless slacked).
    for row in net.global_input_box().to_hpolytope().rows() {
        let mut blk = MatExpr::zeros(n + 1);
        let g2 = row.offset * row.offset;
        match beta {
            Some(bv) => blk.set(0, 0, LinExpr::term(bv, g2)),
            None => blk.set(0, 0, LinExpr::constant(g2)),
        }
        for c in 0..n {
            let mut e = LinExpr::zero();
            for k in 0..m {
                e.push(y.at(k * n + c), row.normal[k]);
            }
            blk.set_sym(0, 1 + c, e);
        }
        for i in 0..n {
            for j in 0..=i {
                blk.set_sym(1 + i, 1 + j, LinExpr::var(s.entry(i, j)));
            }
        }
        prog.psd(blk);
    }

    let mut obj = s.trace();
    if let Some(bv) = beta {
        // β ≥ 1; keep the input overshoot as small as the RPI admits.
        let mut lb = LinExpr::term(bv, -1.0);
        lb.add_const(1.0);
        prog.le(lb);
        obj = obj.plus(&LinExpr::term(bv, 1e4));
    }
    prog.set_objective(obj);
    let sol = solve_or_status(&prog, "global gain synthesis")?;

    let s_val = sol.matrix("S").unwrap().clone();
    let y_flat = sol.vector("Y").unwrap();
    let y_val = DMatrix::from_fn(m, n, |r, c| y_flat[r * n + c]);
    let p = inv_spd(&s_val).ok_or_else(|| SynthError::Numerical("S not invertible".into()))?;
    let k = &y_val * &p;

    // Post-verification.
    let a_k = &a + &b * &k;
    let rho = spectral_radius(&a_k);
    if rho >= 1.0 - 1e-9 {
        return Err(SynthError::Numerical(format!("closed loop not Schur stable (ρ = {rho})")));
    }
    let violations =
        verify::mc_rpi_violations(&a_k, &p, &net.global_dist_box(), 10_000, 2024, 1e-9);
    if violations > 0 {
        return Err(SynthError::Numerical(format!(
            "RPI Monte-Carlo check failed with {violations} exits from Z"
        )));
    }
    let z = EllipsoidSet::new(p.clone(), 1.0).map_err(SynthError::Set)?;
    let slack = if beta.is_some() { sol.scalar("beta").unwrap_or(f64::NAN).max(1.0) } else { 1.0 };
    Ok(GlobalGain {
        k,
        p,
        z,
        trace_s: s_val.trace(),
        tau1,
        state_containment: state_rows,
        input_slack: slack,
    })
}

/// Grid-search `tau1` and keep the minimum-trace certified solution,
/// preferring solutions that also certified `Z ⊆ X`.
pub fn synth_global_gain_grid(net: &NetworkModel, grid: &[f64]) -> Result<GlobalGain, SynthError> {
    let mut best: Option<GlobalGain> = None;
    let mut last_err = None;
    for &tau1 in grid {
        match synth_global_gain(net, tau1) {
            Ok(g) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (g.state_containment, -g.input_slack, -g.trace_s)
                            > (b.state_containment, -b.input_slack, -b.trace_s)
                    }
                };
                if better {
                    best = Some(g);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| match last_err {
        Some(e) => e,
        None => SynthError::Numerical("empty tau1 grid".into()),
    })
}

// ---------------------------------------------------------------------------
// Local gains (coupled per-agent RPI conditions)
// ---------------------------------------------------------------------------

/// Scalar multiplier grids for the local-gain synthesis: direct values for
/// `τ̄ᵢ` and `τ̄ᵢⱼ` (shared across neighbors of an agent), and fractions of
/// `g_ip/|N_i|` for the input multipliers `τ̃ᵢⱼₚ`.
#[derive(Clone, Debug)]
pub struct LocalGainGrids {
    pub tau_bar_i: Vec<f64>,
    pub tau_bar_ij: Vec<f64>,
    pub tau_tilde_frac: Vec<f64>,
}

impl Default for LocalGainGrids {
    fn default() -> Self {
        Self {
            tau_bar_i: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            tau_bar_ij: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            tau_tilde_frac: vec![1.0, 0.75, 0.5, 0.25],
        }
    }
}

impl From<&SynthesisConfig> for LocalGainGrids {
    fn from(c: &SynthesisConfig) -> Self {
        Self {
            tau_bar_i: c.tau_bar_grid.clone(),
            tau_bar_ij: c.tau_bar_ij_grid.clone(),
            tau_tilde_frac: c.tau_tilde_frac_grid.clone(),
        }
    }
}

fn local_point_program(
    net: &NetworkModel,
    tau_bar_i: f64,
    tau_bar_ij: f64,
    tau_tilde_frac: f64,
    state_rows: bool,
    input_slack: bool,
) -> Result<ConicProgram, String> {
    let m_agents = net.num_agents();
    // Pre-check the scalar budget constraints.
    for i in 0..m_agents {
        let q = net.agent(i).neighbors.len() as f64;
        if tau_bar_i + q * tau_bar_ij > 1.0 + 1e-12 {
            return Err(format!("agent {i}: τ̄ᵢ + Σⱼ τ̄ᵢⱼ = {} > 1", tau_bar_i + q * tau_bar_ij));
        }
    }

    let mut prog = ConicProgram::new();
    let s_vars: Vec<_> = (0..m_agents)
        .map(|i| prog.sym_matrix(&format!("S{i}"), net.agent(i).state_dim()))
        .collect();
    let g_vars: Vec<_> = (0..m_agents)
        .map(|i| {
            let nn = net.neighborhood_dim(i);
            prog.vector(&format!("G{i}"), nn * nn)
        })
        .collect();
    let y_vars: Vec<_> = (0..m_agents)
        .map(|i| {
            let nn = net.neighborhood_dim(i);
            prog.vector(&format!("Y{i}"), net.agent(i).input_dim() * nn)
        })
        .collect();

    // Coupled-coherence term Σⱼ S_ij/τ: block-diagonal with neighbor shapes.
    // Writes −(that sum) plus G + Gᵀ into `blk` at offset (r0, r0).
    let add_g_minus_coupling = |prog_blk: &mut MatExpr,
                                r0: usize,
                                i: usize,
                                tau: f64| {
        let nn = net.neighborhood_dim(i);
        for r in 0..nn {
            for c in 0..=r {
                let mut e = LinExpr::zero();
                e.push(crate::conic::Var(0), 0.0); // keep shape; removed by compression
                let g = &g_vars[i];
                e.push(g.at(r * nn + c), 1.0);
                e.push(g.at(c * nn + r), 1.0);
                // subtract neighbor shape if (r,c) lives in one neighbor block
                let mut off = 0;
                for j in &net.agent(i).neighbors {
                    let nj = net.agent(*j).state_dim();
                    if r >= off && r < off + nj && c >= off && c < off + nj {
                        e.push(s_vars[*j].entry(r - off, c - off), -1.0 / tau);
                    }
                    off += nj;
                }
                prog_blk.set_sym(r0 + r, r0 + c, e);
            }
        }
    };

    // Scaled per-axis disturbance multipliers σⱼ, budgeted by the gridded
    // τ̄ᵢ through Σⱼ vⱼ²σⱼ ≤ τ̄ᵢ.
    let sigma_vars: Vec<_> = (0..m_agents)
        .map(|i| prog.vector(&format!("sigma_w{i}"), net.agent(i).state_dim()))
        .collect();
    let beta_vars: Vec<_> = (0..m_agents)
        .map(|i| input_slack.then(|| prog.scalar(&format!("beta{i}"))))
        .collect();

    for i in 0..m_agents {
        let ag = net.agent(i);
        let n_i = ag.state_dim();
        let m_i = ag.input_dim();
        let nn = net.neighborhood_dim(i);
        let a_ni = ag.a_ni();
        let v = dist_axis_bounds(&ag.dist_box);

        // S_i ⪰ εI.
        let mut s_pd = s_vars[i].as_mat_expr();
        for d in 0..n_i {
            s_pd.at_mut(d, d).add_const(-1e-8);
        }
        prog.psd(s_pd);

        // Axis multipliers: σⱼ ≥ 0, Σⱼ vⱼ²σⱼ ≤ τ̄ᵢ.
        let mut budget = LinExpr::constant(-tau_bar_i);
        for jx in 0..n_i {
            prog.le(LinExpr::term(sigma_vars[i].at(jx), -1.0));
            budget.push(sigma_vars[i].at(jx), v[jx] * v[jx]);
        }
        prog.le(budget);

        // RPI block:
        // [[diag(σⱼ), I, 0], [•, Sᵢ, A_{N_i}Gᵢ + BᵢYᵢ], [•, •, Gᵢ+Gᵢᵀ − Σⱼ S_ij/τ̄ᵢⱼ]].
        let dim = 2 * n_i + nn;
        let mut big = MatExpr::zeros(dim);
        for r in 0..n_i {
            big.set(r, r, LinExpr::var(sigma_vars[i].at(r)));
            big.set_sym(r, n_i + r, LinExpr::constant(1.0));
        }
        for r in 0..n_i {
            for c in 0..=r {
                big.set_sym(n_i + r, n_i + c, LinExpr::var(s_vars[i].entry(r, c)));
            }
        }
        for r in 0..n_i {
            for c in 0..nn {
                let mut e = LinExpr::zero();
                for k in 0..nn {
                    if a_ni[(r, k)] != 0.0 {
                        e.push(g_vars[i].at(k * nn + c), a_ni[(r, k)]);
                    }
                }
                for k in 0..m_i {
                    if ag.b[(r, k)] != 0.0 {
                        e.push(y_vars[i].at(k * nn + c), ag.b[(r, k)]);
                    }
                }
                big.set_sym(n_i + r, 2 * n_i + c, e);
            }
        }
        add_g_minus_coupling(&mut big, 2 * n_i, i, tau_bar_ij);
        prog.psd(big);

        // Zᵢ ⊆ Xᵢ rows: [[d², aᵀSᵢ], [•, Sᵢ]].
        let state_row_list =
            if state_rows { ag.state_box.to_hpolytope().rows().to_vec() } else { Vec::new() };
        for row in &state_row_list {
            let mut blk = MatExpr::zeros(n_i + 1);
            blk.set(0, 0, LinExpr::constant(row.offset * row.offset));
            for c in 0..n_i {
                let mut e = LinExpr::zero();
                for k in 0..n_i {
                    e.push(s_vars[i].entry(k, c), row.normal[k]);
                }
                blk.set_sym(0, 1 + c, e);
            }
            for r in 0..n_i {
                for c in 0..=r {
                    blk.set_sym(1 + r, 1 + c, LinExpr::var(s_vars[i].entry(r, c)));
                }
            }
            prog.psd(blk);
        }

        // Input rows: [[βg_ip, h_ipᵀYᵢ], [•, Gᵢ+Gᵢᵀ − Σⱼ S_ij/τ̃ᵢⱼₚ]],
        // Σⱼ τ̃ᵢⱼₚ ≤ βg_ip (β fixed to 1 unless slacked).
        for row in ag.input_box.to_hpolytope().rows() {
            let g_ip = row.offset;
            if g_ip <= 0.0 {
                return Err(format!("agent {i}: input bound g = {g_ip} not positive"));
            }
            let q = ag.neighbors.len() as f64;
            let tau_tilde = tau_tilde_frac * g_ip / q;
            if q * tau_tilde > g_ip + 1e-12 {
                return Err(format!("agent {i}: Σⱼ τ̃ᵢⱼₚ > g_ip"));
            }
            let mut blk = MatExpr::zeros(1 + nn);
            match beta_vars[i] {
                Some(bv) => blk.set(0, 0, LinExpr::term(bv, g_ip)),
                None => blk.set(0, 0, LinExpr::constant(g_ip)),
            }
            for c in 0..nn {
                let mut e = LinExpr::zero();
                for k in 0..m_i {
                    if row.normal[k] != 0.0 {
                        e.push(y_vars[i].at(k * nn + c), row.normal[k]);
                    }
                }
                blk.set_sym(0, 1 + c, e);
            }
            add_g_minus_coupling(&mut blk, 1, i, tau_tilde);
            prog.psd(blk);
        }
    }

    let mut obj = LinExpr::zero();
    for sv in &s_vars {
        obj = obj.plus(&sv.trace());
    }
    for bv in beta_vars.iter().flatten() {
        let mut lb = LinExpr::term(*bv, -1.0);
        lb.add_const(1.0);
        prog.le(lb);
        obj = obj.plus(&LinExpr::term(*bv, 1e4));
    }
    prog.set_objective(obj);
    Ok(prog)
}

/// Solve the coupled local-gain LMIs over the scalar grid; the first grid
/// point whose solution passes all certificates wins. When no point admits
/// the `Zᵢ ⊆ Xᵢ` rows, a second pass drops them (the tightened-set
/// non-emptiness is then verified directly by [`tighten_sequences`]).
pub fn synth_local_gains(
    net: &NetworkModel,
    grids: &LocalGainGrids,
) -> Result<LocalGains, SynthError> {
    let mut reasons = Vec::new();
    for (state_rows, input_slack) in [(true, false), (false, false), (false, true)] {
        for &a in &grids.tau_bar_i {
            for &c in &grids.tau_bar_ij {
                for &f in &grids.tau_tilde_frac {
                    let tag = format!(
                        "τ̄ᵢ={a}, τ̄ᵢⱼ={c}, τ̃-frac={f}{}{}",
                        if state_rows { "" } else { ", no state rows" },
                        if input_slack { ", slacked input rows" } else { "" }
                    );
                    let prog = match local_point_program(net, a, c, f, state_rows, input_slack) {
                        Ok(p) => p,
                        Err(reason) => {
                            reasons.push((tag, reason));
                            continue;
                        }
                    };
                    let sol = prog.solve(&SolveOptions::default());
                    if sol.status != SolveStatus::Optimal {
                        reasons.push((tag, format!("{:?}: {}", sol.status, sol.message)));
                        continue;
                    }
                    match recover_local(net, &sol) {
                        Ok((k_ni, p)) => {
                            if let Err(reason) = certify_local(net, &k_ni, &p) {
                                reasons.push((tag, reason));
                                continue;
                            }
                            return Ok(LocalGains { k_ni, p, grid_point: (a, c, f) });
                        }
                        Err(reason) => reasons.push((tag, reason)),
                    }
                }
            }
        }
    }
    Err(SynthError::InfeasibleAllGrid { reasons })
}

fn recover_local(
    net: &NetworkModel,
    sol: &crate::conic::ConicSolution,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>), String> {
    let mut k_ni = Vec::new();
    let mut p_list = Vec::new();
    for i in 0..net.num_agents() {
        let nn = net.neighborhood_dim(i);
        let m_i = net.agent(i).input_dim();
        let s_i = sol.matrix(&format!("S{i}")).unwrap().clone();
        let g_flat = sol.vector(&format!("G{i}")).unwrap();
        let y_flat = sol.vector(&format!("Y{i}")).unwrap();
        let g = DMatrix::from_fn(nn, nn, |r, c| g_flat[r * nn + c]);
        let y = DMatrix::from_fn(m_i, nn, |r, c| y_flat[r * nn + c]);
        let g_inv = g.clone().try_inverse().ok_or_else(|| format!("agent {i}: G singular"))?;
        let p = inv_spd(&s_i).ok_or_else(|| format!("agent {i}: S not invertible"))?;
        k_ni.push(&y * &g_inv);
        p_list.push(p);
    }
    Ok((k_ni, p_list))
}

fn certify_local(
    net: &NetworkModel,
    k_ni: &[DMatrix<f64>],
    p_list: &[DMatrix<f64>],
) -> Result<(), String> {
    let (a, b) = net.assemble_global();
    let k = assemble_local_k(net, k_ni);
    let rho = spectral_radius(&(a + b * &k));
    if rho >= 1.0 - 1e-9 {
        return Err(format!("assembled closed loop not Schur stable (ρ = {rho})"));
    }
    let violations = verify::mc_local_rpi_violations(net, k_ni, p_list, 2_000, 99, 1e-9);
    if violations > 0 {
        return Err(format!("local RPI Monte-Carlo check failed ({violations} exits)"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Terminal cost / gain synthesis (separable quadratic certificate)
// ---------------------------------------------------------------------------

/// Find per-agent `P_fᵢ ≻ 0`, `K_fᵢ` and relaxations `Γᵢ` such that, for all
/// neighborhood states,
///
/// ```text
/// ‖A_{K_fᵢ} x_{N_i}‖²_{P_fᵢ} − ‖xᵢ‖²_{P_fᵢ} + ‖x_{N_i}‖²_{Q_{N_i}}
///     + ‖K_fᵢ x_{N_i}‖²_{Rᵢ} ≤ x_{N_i}ᵀ Γᵢ x_{N_i}
/// ```
///
/// with `Σᵢ T_{N_i}ᵀ Γᵢ T_{N_i} ⪯ 0`. Solved as one global LMI after the
/// congruence transform by `S_f = diag(P_fⱼ⁻¹)` with linearizing variables
/// `S_fᵢ`, `Y_fᵢ = K_fᵢ S_{f,N_i}` and `Γ̃ᵢ = S_{f,N_i} Γᵢ S_{f,N_i}`.
pub fn synth_terminal(net: &NetworkModel) -> Result<TerminalCert, SynthError> {
    let m_agents = net.num_agents();
    let n = net.state_dim();
    let lmi_margin = 1e-6;
    let gamma_margin = 1e-7;

    let mut prog = ConicProgram::new();
    let s_vars: Vec<_> = (0..m_agents)
        .map(|i| prog.sym_matrix(&format!("Sf{i}"), net.agent(i).state_dim()))
        .collect();
    let y_vars: Vec<_> = (0..m_agents)
        .map(|i| {
            prog.vector(&format!("Yf{i}"), net.agent(i).input_dim() * net.neighborhood_dim(i))
        })
        .collect();
    let gamma_vars: Vec<_> = (0..m_agents)
        .map(|i| prog.sym_matrix(&format!("Gam{i}"), net.neighborhood_dim(i)))
        .collect();

    // Entry of the block-diagonal neighborhood lift S_{N_i} as an expression.
    let s_ni_entry = |i: usize, r: usize, c: usize| -> Option<(usize, usize, usize)> {
        // returns (neighbor j, local r, local c) when (r,c) sit in one block
        let mut off = 0;
        for j in &net.agent(i).neighbors {
            let nj = net.agent(*j).state_dim();
            if r >= off && r < off + nj {
                if c >= off && c < off + nj {
                    return Some((*j, r - off, c - off));
                }
                return None;
            }
            off += nj;
        }
        None
    };

    for i in 0..m_agents {
        let ag = net.agent(i);
        let n_i = ag.state_dim();
        let m_i = ag.input_dim();
        let nn = net.neighborhood_dim(i);
        let a_ni = ag.a_ni();
        let q_sqrt = sqrt_psd(&net.q_ni(i));
        let r_sqrt = sqrt_psd(&ag.r);
        let own_off = net.offset_in_neighborhood(i, i).expect("i ∈ N_i");

        // S_fᵢ ⪰ εI and a trace cap keeping the maximization bounded.
        let mut s_pd = s_vars[i].as_mat_expr();
        for d in 0..n_i {
            s_pd.at_mut(d, d).add_const(-1e-8);
        }
        prog.psd(s_pd);
        let mut cap = s_vars[i].trace();
        cap.add_const(-1e6);
        prog.le(cap);

        // Per-agent decrease block (congruence-transformed):
        // [[WᵢᵀS_fᵢWᵢ + Γ̃ᵢ, Mᵢᵀ, S_{N_i}Q^{1/2}, Y_fᵢᵀR^{1/2}],
        //  [•, S_fᵢ, 0, 0], [•, •, I, 0], [•, •, •, I]] ⪰ δI
        // with Mᵢ = A_{N_i}S_{N_i} + BᵢY_fᵢ.
        let o2 = nn;
        let o3 = nn + n_i;
        let o4 = 2 * nn + n_i;
        let dim = 2 * nn + n_i + m_i;
        let mut big = MatExpr::zeros(dim);

        for r in 0..nn {
            for c in 0..=r {
                let mut e = LinExpr::var(gamma_vars[i].entry(r, c));
                let own = own_off..own_off + n_i;
                if own.contains(&r) && own.contains(&c) {
                    e.push(s_vars[i].entry(r - own_off, c - own_off), 1.0);
                }
                big.set_sym(r, c, e);
            }
        }
        // (0,1): Mᵢᵀ — entry (r, c) = Mᵢ[c, r].
        for r in 0..nn {
            for c in 0..n_i {
                let mut e = LinExpr::zero();
                // (A_{N_i} S_{N_i})[c, r] = Σ_k A[c,k] S_N[k,r]
                let mut off = 0;
                for j in &ag.neighbors {
                    let nj = net.agent(*j).state_dim();
                    if r >= off && r < off + nj {
                        for k in off..off + nj {
                            if a_ni[(c, k)] != 0.0 {
                                e.push(s_vars[*j].entry(k - off, r - off), a_ni[(c, k)]);
                            }
                        }
                    }
                    off += nj;
                }
                for k in 0..m_i {
                    if ag.b[(c, k)] != 0.0 {
                        e.push(y_vars[i].at(k * nn + r), ag.b[(c, k)]);
                    }
                }
                big.set_sym(r, o2 + c, e);
            }
        }
        for r in 0..n_i {
            for c in 0..=r {
                big.set_sym(o2 + r, o2 + c, LinExpr::var(s_vars[i].entry(r, c)));
            }
        }
        // (0,2): S_{N_i} Q^{1/2} — entry (r,c) = Σ_k S_N[r,k] Qs[k,c].
        for r in 0..nn {
            for c in 0..nn {
                let mut e = LinExpr::zero();
                for k in 0..nn {
                    if let Some((j, rr, kk)) = s_ni_entry(i, r, k) {
                        if q_sqrt[(k, c)] != 0.0 {
                            e.push(s_vars[j].entry(rr, kk), q_sqrt[(k, c)]);
                        }
                    }
                }
                big.set_sym(r, o3 + c, e);
            }
        }
        for r in 0..nn {
            big.set_sym(o3 + r, o3 + r, LinExpr::constant(1.0));
        }
        // (0,3): Y_fᵢᵀ R^{1/2} — entry (r,c) = Σ_k Y(k,r) Rs[k,c].
        for r in 0..nn {
            for c in 0..m_i {
                let mut e = LinExpr::zero();
                for k in 0..m_i {
                    if r_sqrt[(k, c)] != 0.0 {
                        e.push(y_vars[i].at(k * nn + r), r_sqrt[(k, c)]);
                    }
                }
                big.set_sym(r, o4 + c, e);
            }
        }
        for r in 0..m_i {
            big.set_sym(o4 + r, o4 + r, LinExpr::constant(1.0));
        }
        for d in 0..dim {
            big.at_mut(d, d).add_const(-lmi_margin);
        }
        prog.psd(big);
    }

    // Relaxation budget: −Σᵢ T_{N_i}ᵀ Γ̃ᵢ T_{N_i} ⪰ μI.
    let mut gsum = MatExpr::zeros(n);
    for i in 0..m_agents {
        let idx = net.neighborhood_indices(i);
        let nn = idx.len();
        for r in 0..nn {
            for c in 0..nn {
                gsum.at_mut(idx[r], idx[c]).push(gamma_vars[i].entry(r, c), -1.0);
            }
        }
    }
    for d in 0..n {
        gsum.at_mut(d, d).add_const(-gamma_margin);
    }
    prog.psd(gsum);

    // Maximize Σ trace(S_fᵢ): smallest terminal weights, largest usable sets.
    let mut obj = LinExpr::zero();
    for sv in &s_vars {
        obj = obj.minus(&sv.trace());
    }
    prog.set_objective(obj);

    let sol = prog.solve(&SolveOptions::default());
    if sol.status != SolveStatus::Optimal {
        return Err(SynthError::Infeasible {
            what: "terminal synthesis".into(),
            detail: format!(
                "{:?}: {}; no separable quadratic terminal certificate — consider rescaling the stage weights",
                sol.status, sol.message
            ),
        });
    }

    // Recover P_fᵢ = S_fᵢ⁻¹, K_fᵢ = Y_fᵢ S_{N_i}⁻¹, Γᵢ = S_{N_i}⁻¹ Γ̃ᵢ S_{N_i}⁻¹.
    let p_f: Vec<DMatrix<f64>> = (0..m_agents)
        .map(|i| {
            inv_spd(sol.matrix(&format!("Sf{i}")).unwrap())
                .ok_or_else(|| SynthError::Numerical(format!("S_f{i} not invertible")))
        })
        .collect::<Result<_, _>>()?;
    let mut k_f = Vec::new();
    let mut gamma = Vec::new();
    for i in 0..m_agents {
        let nn = net.neighborhood_dim(i);
        let m_i = net.agent(i).input_dim();
        let blocks: Vec<DMatrix<f64>> =
            net.agent(i).neighbors.iter().map(|j| p_f[*j].clone()).collect();
        let p_ni = crate::linalg::block_diag(&blocks);
        let y_flat = sol.vector(&format!("Yf{i}")).unwrap();
        let y = DMatrix::from_fn(m_i, nn, |r, c| y_flat[r * nn + c]);
        k_f.push(&y * &p_ni);
        let gt = sol.matrix(&format!("Gam{i}")).unwrap();
        gamma.push(symmetrize(&(&p_ni * gt * &p_ni)));
    }

    let cert = TerminalCert { p_f, k_f, gamma };
    verify_terminal(net, &cert)?;
    Ok(cert)
}

/// Eigenvalue re-verification of the recovered terminal certificate.
fn verify_terminal(net: &NetworkModel, cert: &TerminalCert) -> Result<(), SynthError> {
    for i in 0..net.num_agents() {
        let d = terminal_decrease_matrix(net, cert, i);
        let me = max_eig_sym(&d);
        if me > 1e-8 {
            return Err(SynthError::Numerical(format!(
                "terminal decrease condition violated for agent {i} (max eig {me:.3e})"
            )));
        }
    }
    let gs = gamma_sum(net, &cert.gamma);
    let me = max_eig_sym(&gs);
    if me > 1e-8 {
        return Err(SynthError::Numerical(format!(
            "relaxation budget violated (max eig of ΣTᵀΓT = {me:.3e})"
        )));
    }
    Ok(())
}

/// `A_{K_fᵢ}ᵀ P_fᵢ A_{K_fᵢ} − WᵢᵀP_fᵢWᵢ + Q_{N_i} + K_fᵢᵀRᵢK_fᵢ − Γᵢ`
/// (must be ⪯ 0 for the Lyapunov decrease with relaxation).
pub fn terminal_decrease_matrix(net: &NetworkModel, cert: &TerminalCert, i: usize) -> DMatrix<f64> {
    let ag = net.agent(i);
    let nn = net.neighborhood_dim(i);
    let own = net.offset_in_neighborhood(i, i).unwrap();
    let n_i = ag.state_dim();
    let a_kf = ag.a_ni() + &ag.b * &cert.k_f[i];
    let mut own_lift = DMatrix::zeros(nn, nn);
    own_lift.view_mut((own, own), (n_i, n_i)).copy_from(&cert.p_f[i]);
    symmetrize(
        &(a_kf.transpose() * &cert.p_f[i] * &a_kf - own_lift
            + net.q_ni(i)
            + cert.k_f[i].transpose() * &ag.r * &cert.k_f[i]
            - &cert.gamma[i]),
    )
}

/// `Σᵢ T_{N_i}ᵀ Γᵢ T_{N_i}` (must be ⪯ 0).
pub fn gamma_sum(net: &NetworkModel, gamma: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = net.state_dim();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..net.num_agents() {
        let idx = net.neighborhood_indices(i);
        for (r, gr) in idx.iter().enumerate() {
            for (c, gc) in idx.iter().enumerate() {
                out[(*gr, *gc)] += gamma[i][(r, c)];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Constraint tightening sequences and terminal error sets
// ---------------------------------------------------------------------------

/// Gain used by the tightening: the global matrix or per-agent gains.
pub enum GainSpec<'a> {
    Global(&'a DMatrix<f64>),
    Local(&'a [DMatrix<f64>]),
}

fn most_violated_row(p: &HPolytope) -> usize {
    match p.chebyshev() {
        Ok((c, _)) => {
            let mut worst = 0;
            let mut margin = f64::INFINITY;
            for (idx, r) in p.rows().iter().enumerate() {
                let m = r.offset - r.normal.dot(&c);
                if m < margin {
                    margin = m;
                    worst = idx;
                }
            }
            worst
        }
        Err(_) => 0,
    }
}

fn check_nonempty(p: &HPolytope, kind: &str, t: usize) -> Result<(), SynthError> {
    if p.is_empty()? {
        return Err(SynthError::EmptyTightenedSet {
            kind: kind.to_string(),
            t,
            row: most_violated_row(p),
        });
    }
    Ok(())
}

/// Rows of a T_{N_i}A_K^{N−1} style selection: gather `rows` of `m`.
fn gather_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), m.ncols());
    for (ri, r) in rows.iter().enumerate() {
        out.row_mut(ri).copy_from(&m.row(*r));
    }
    out
}

/// Exact check that the zonotope lies inside `{e : eᵀEe ≤ 1}` (vertex
/// enumeration up to 16 generators, norm bound beyond).
fn zonotope_in_ellipsoid(z: &Zonotope, e: &DMatrix<f64>) -> bool {
    let p = z.num_generators();
    let quad = |v: &DVector<f64>| (v.transpose() * e * v)[(0, 0)];
    if p <= 16 {
        for mask in 0..(1usize << p) {
            let mut v = z.center().clone();
            for j in 0..p {
                let s = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
                v += z.generators().column(j) * s;
            }
            if quad(&v) > 1.0 + 1e-9 {
                return false;
            }
        }
        true
    } else {
        let e_sqrt = sqrt_psd(e);
        let mut total = (&e_sqrt * z.center()).norm();
        for j in 0..p {
            total += (&e_sqrt * DVector::from(z.generators().column(j).into_owned())).norm();
        }
        total * total <= 1.0 + 1e-9
    }
}

/// Terminal error shape `E_{N_i} = (T_{N_i}A_K^{N−1}) W (T_{N_i}A_K^{N−1})ᵀ`
/// with `W` the disturbance ellipsoid shape; falls back to the Löwner image
/// shape `(M W⁻¹ Mᵀ)⁻¹` whenever the zonotope `Ē_{N_i}` fails the exact
/// containment check against the primary formula.
fn terminal_error_shape(
    m_sel: &DMatrix<f64>,
    w_shape: &DMatrix<f64>,
    ebar: &Zonotope,
) -> Result<DMatrix<f64>, SynthError> {
    let primary = symmetrize(&(m_sel * w_shape * m_sel.transpose()));
    if min_eig_sym(&primary) > 0.0 && zonotope_in_ellipsoid(ebar, &primary) {
        return Ok(primary);
    }
    let w_inv = inv_spd(w_shape)
        .ok_or_else(|| SynthError::Numerical("disturbance shape not invertible".into()))?;
    let mut gram = symmetrize(&(m_sel * w_inv * m_sel.transpose()));
    for d in 0..gram.nrows() {
        gram[(d, d)] += 1e-12;
    }
    let fallback = inv_spd(&gram)
        .ok_or_else(|| SynthError::Numerical("terminal error shape not invertible".into()))?;
    if !zonotope_in_ellipsoid(ebar, &fallback) {
        return Err(SynthError::Numerical(
            "terminal error zonotope escapes its ellipsoidal bound".into(),
        ));
    }
    Ok(fallback)
}

/// Build `X̄(t)`, `Ū(t)` for `t = 0..N−1`, their per-agent projections, and
/// the terminal error sets `Ē_{N_i}(N−1)`, `E_{N_i}`.
pub fn tighten_sequences(
    net: &NetworkModel,
    gain: &GainSpec,
    n_horizon: usize,
) -> Result<Tightened, SynthError> {
    if n_horizon == 0 {
        return Err(SynthError::Numerical("horizon must be at least 1".into()));
    }
    let (a, b) = net.assemble_global();
    let m_agents = net.num_agents();
    let w_box = net.global_dist_box();
    let w_zono = w_box.to_zonotope();

    let (x_global, u_global) = match gain {
        GainSpec::Global(k) => {
            let a_k = &a + &b * *k;
            let x0 = net.global_state_box().to_hpolytope();
            let u0 = net.global_input_box().to_hpolytope();
            let mut xs = vec![x0.clone()];
            let mut us = vec![u0.clone()];
            if n_horizon >= 2 {
                let tube = reach_tube(&a_k, &w_zono, n_horizon - 1)?;
                for (ti, r) in tube.iter().enumerate() {
                    let t = ti + 1;
                    let xt = pontryagin_diff(&x0, r)?;
                    check_nonempty(&xt, "state", t)?;
                    let kr = linmap_zonotope(*k, r)?;
                    let ut = pontryagin_diff(&u0, &kr)?;
                    check_nonempty(&ut, "input", t)?;
                    xs.push(xt);
                    us.push(ut);
                }
            }
            (xs, us)
        }
        GainSpec::Local(k_ni) => {
            // Per-agent error tubes with the coupled recursion
            // Rᵢ(t+1) = A_{K_{N_i}} (×ⱼ Rⱼ(t)) ⊕ Wᵢ, Rᵢ(1) = Wᵢ.
            let mut r_agent: Vec<Vec<Zonotope>> =
                (0..m_agents).map(|i| vec![net.agent(i).dist_box.to_zonotope()]).collect();
            let mut r_nbhd: Vec<Vec<Zonotope>> = vec![Vec::new(); m_agents];
            for t in 1..n_horizon {
                for i in 0..m_agents {
                    let prod: Vec<Zonotope> = net.agent(i)
                        .neighbors
                        .iter()
                        .map(|j| r_agent[*j][t - 1].clone())
                        .collect();
                    r_nbhd[i].push(Zonotope::cartesian_product(&prod));
                }
                if t == n_horizon - 1 {
                    break;
                }
                for i in 0..m_agents {
                    let a_kni = net.agent(i).a_ni() + &net.agent(i).b * &k_ni[i];
                    let mapped = linmap_zonotope(&a_kni, r_nbhd[i].last().unwrap())?;
                    let next =
                        crate::setalg::minkowski_zonotope(&mapped, &net.agent(i).dist_box.to_zonotope())?;
                    r_agent[i].push(next);
                }
            }
            // r_agent[i][t-1] is Rᵢ(t); r_nbhd[i][t-1] is R_{N_i}(t).
            let mut xs = vec![net.global_state_box().to_hpolytope()];
            let mut us = vec![net.global_input_box().to_hpolytope()];
            for t in 1..n_horizon {
                let mut x_rows: Vec<HalfSpace> = Vec::new();
                let mut u_rows: Vec<HalfSpace> = Vec::new();
                for i in 0..m_agents {
                    let ag = net.agent(i);
                    let xt = pontryagin_diff(&ag.state_box.to_hpolytope(), &r_agent[i][t - 1])?;
                    check_nonempty(&xt, &format!("state (agent {i})"), t)?;
                    let kr = linmap_zonotope(&k_ni[i], &r_nbhd[i][t - 1])?;
                    let ut = pontryagin_diff(&ag.input_box.to_hpolytope(), &kr)?;
                    check_nonempty(&ut, &format!("input (agent {i})"), t)?;
                    let sidx = net.state_indices(i);
                    for r in xt.rows() {
                        let mut normal = DVector::zeros(net.state_dim());
                        for (lc, gc) in sidx.iter().enumerate() {
                            normal[*gc] = r.normal[lc];
                        }
                        x_rows.push(HalfSpace { normal, offset: r.offset });
                    }
                    let uidx = net.input_indices(i);
                    for r in ut.rows() {
                        let mut normal = DVector::zeros(net.input_dim());
                        for (lc, gc) in uidx.iter().enumerate() {
                            normal[*gc] = r.normal[lc];
                        }
                        u_rows.push(HalfSpace { normal, offset: r.offset });
                    }
                }
                xs.push(HPolytope::new(net.state_dim(), x_rows)?);
                us.push(HPolytope::new(net.input_dim(), u_rows)?);
            }
            (xs, us)
        }
    };

    // Per-agent projections (exact: rows never straddle agent blocks).
    let mut x_ni = vec![Vec::with_capacity(n_horizon); m_agents];
    let mut u_i = vec![Vec::with_capacity(n_horizon); m_agents];
    for t in 0..n_horizon {
        for i in 0..m_agents {
            x_ni[i].push(project_product(&x_global[t], &net.neighborhood_indices(i))?);
            u_i[i].push(project_product(&u_global[t], &net.input_indices(i))?);
        }
    }

    // Terminal error sets from the assembled closed loop.
    let k_assembled = match gain {
        GainSpec::Global(k) => (*k).clone(),
        GainSpec::Local(k_ni) => assemble_local_k(net, k_ni),
    };
    let a_k = &a + &b * &k_assembled;
    let a_k_pow = mat_pow(&a_k, n_horizon - 1);
    let w_shape = w_box.bounding_ellipsoid_shape();
    let mut ebar = Vec::with_capacity(m_agents);
    let mut e_shape = Vec::with_capacity(m_agents);
    for i in 0..m_agents {
        let m_sel = gather_rows(&a_k_pow, &net.neighborhood_indices(i));
        let eb = linmap_zonotope(&m_sel, &w_zono)?;
        match &w_shape {
            Some(ws) => {
                let shape = terminal_error_shape(&m_sel, ws, &eb)?;
                e_shape.push(Some(shape));
            }
            None => e_shape.push(None),
        }
        ebar.push(eb);
    }

    Ok(Tightened { x_global, u_global, x_ni, u_i, ebar, e_shape })
}

// ---------------------------------------------------------------------------
// Algorithm-1 front door
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub mode: GainModeConfig,
    pub tau1: Option<f64>,
    pub tau1_grid: Vec<f64>,
    pub local_grids: LocalGainGrids,
    pub horizon: usize,
}

impl SynthOptions {
    pub fn from_config(cfg: &SynthesisConfig, horizon: usize) -> Self {
        Self {
            mode: cfg.mode,
            tau1: cfg.tau1,
            tau1_grid: cfg.tau1_grid.clone(),
            local_grids: LocalGainGrids::from(cfg),
            horizon,
        }
    }
}

/// Offline synthesis end to end: gains → terminal certificate → tightened
/// sequences, with every certificate re-verified.
pub fn synthesize(
    net: &NetworkModel,
    opts: &SynthOptions,
    model_hash: &str,
) -> Result<SynthesisBundle, SynthError> {
    let report = net.validate();
    if !report.all_passed() {
        let names: Vec<String> = report.failures().iter().map(|c| c.name.clone()).collect();
        return Err(SynthError::Numerical(format!("model validation failed: {names:?}")));
    }

    let (mode, k_global, p_global, k_ni, p_local, tau1_used, grid_point) = match opts.mode {
        GainModeConfig::Global => {
            let gain = match opts.tau1 {
                Some(t1) => match synth_global_gain(net, t1) {
                    Ok(g) => g,
                    // A configured tau1 that fails falls back to the grid.
                    Err(SynthError::Infeasible { .. }) => synth_global_gain_grid(net, &opts.tau1_grid)?,
                    Err(e) => return Err(e),
                },
                None => synth_global_gain_grid(net, &opts.tau1_grid)?,
            };
            (GainMode::GlobalK, Some(gain.k), Some(gain.p), None, None, Some(gain.tau1), None)
        }
        GainModeConfig::Local => {
            let gains = synth_local_gains(net, &opts.local_grids)?;
            (
                GainMode::LocalK,
                None,
                None,
                Some(gains.k_ni),
                Some(gains.p),
                None,
                Some(gains.grid_point),
            )
        }
    };

    let terminal = synth_terminal(net)?;
    let tightened = match mode {
        GainMode::GlobalK => {
            tighten_sequences(net, &GainSpec::Global(k_global.as_ref().unwrap()), opts.horizon)?
        }
        GainMode::LocalK => {
            tighten_sequences(net, &GainSpec::Local(k_ni.as_ref().unwrap()), opts.horizon)?
        }
    };

    Ok(SynthesisBundle {
        mode,
        k_global,
        p_global,
        k_ni,
        p_local,
        p_f: terminal.p_f,
        k_f: terminal.k_f,
        gamma: terminal.gamma,
        tightened,
        horizon: opts.horizon,
        model_hash: model_hash.to_string(),
        tau1_used,
        local_grid_point: grid_point,
    })
}

// ---------------------------------------------------------------------------
// Bundle JSON round trip
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PolyJson {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ZonoJson {
    center: Vec<f64>,
    generators: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct BundleJson {
    mode: GainMode,
    k_global: Option<Vec<Vec<f64>>>,
    p_global: Option<Vec<Vec<f64>>>,
    k_ni: Option<Vec<Vec<Vec<f64>>>>,
    p_local: Option<Vec<Vec<Vec<f64>>>>,
    p_f: Vec<Vec<Vec<f64>>>,
    k_f: Vec<Vec<Vec<f64>>>,
    gamma: Vec<Vec<Vec<f64>>>,
    tightened_x: Vec<PolyJson>,
    tightened_u: Vec<PolyJson>,
    x_ni: Vec<Vec<PolyJson>>,
    u_i: Vec<Vec<PolyJson>>,
    ebar: Vec<ZonoJson>,
    e_shape: Vec<Option<Vec<Vec<f64>>>>,
    horizon: usize,
    model_hash: String,
    tau1_used: Option<f64>,
    local_grid_point: Option<(f64, f64, f64)>,
}

fn poly_to_json(p: &HPolytope) -> PolyJson {
    PolyJson {
        dim: p.dim(),
        normals: p.rows().iter().map(|r| r.normal.iter().cloned().collect()).collect(),
        offsets: p.rows().iter().map(|r| r.offset).collect(),
    }
}

fn poly_from_json(p: &PolyJson) -> Result<HPolytope, SynthError> {
    let rows = p
        .normals
        .iter()
        .zip(&p.offsets)
        .map(|(n, d)| HalfSpace { normal: DVector::from_column_slice(n), offset: *d })
        .collect();
    Ok(HPolytope::new(p.dim, rows)?)
}

fn zono_to_json(z: &Zonotope) -> ZonoJson {
    ZonoJson {
        center: z.center().iter().cloned().collect(),
        generators: (0..z.num_generators())
            .map(|j| z.generators().column(j).iter().cloned().collect())
            .collect(),
    }
}

fn zono_from_json(z: &ZonoJson) -> Result<Zonotope, SynthError> {
    let n = z.center.len();
    let mut g = DMatrix::zeros(n, z.generators.len());
    for (j, col) in z.generators.iter().enumerate() {
        g.column_mut(j).copy_from(&DVector::from_column_slice(col));
    }
    Ok(Zonotope::new(DVector::from_column_slice(&z.center), g)?)
}

impl SynthesisBundle {
    pub fn to_json_string(&self) -> String {
        let file = BundleJson {
            mode: self.mode,
            k_global: self.k_global.as_ref().map(mat_to_rows),
            p_global: self.p_global.as_ref().map(mat_to_rows),
            k_ni: self.k_ni.as_ref().map(|v| v.iter().map(mat_to_rows).collect()),
            p_local: self.p_local.as_ref().map(|v| v.iter().map(mat_to_rows).collect()),
            p_f: self.p_f.iter().map(mat_to_rows).collect(),
            k_f: self.k_f.iter().map(mat_to_rows).collect(),
            gamma: self.gamma.iter().map(mat_to_rows).collect(),
            tightened_x: self.tightened.x_global.iter().map(poly_to_json).collect(),
            tightened_u: self.tightened.u_global.iter().map(poly_to_json).collect(),
            x_ni: self.tightened.x_ni.iter().map(|v| v.iter().map(poly_to_json).collect()).collect(),
            u_i: self.tightened.u_i.iter().map(|v| v.iter().map(poly_to_json).collect()).collect(),
            ebar: self.tightened.ebar.iter().map(zono_to_json).collect(),
            e_shape: self.tightened.e_shape.iter().map(|o| o.as_ref().map(mat_to_rows)).collect(),
            horizon: self.horizon,
            model_hash: self.model_hash.clone(),
            tau1_used: self.tau1_used,
            local_grid_point: self.local_grid_point,
        };
        serde_json::to_string_pretty(&file).expect("bundle serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, SynthError> {
        let file: BundleJson =
            serde_json::from_str(s).map_err(|e| SynthError::Numerical(format!("bundle parse: {e}")))?;
        let mat = |rows: &Vec<Vec<f64>>| {
            mat_from_rows(rows).ok_or_else(|| SynthError::Numerical("ragged matrix in bundle".into()))
        };
        let mats = |v: &Vec<Vec<Vec<f64>>>| v.iter().map(mat).collect::<Result<Vec<_>, _>>();
        Ok(Self {
            mode: file.mode,
            k_global: file.k_global.as_ref().map(mat).transpose()?,
            p_global: file.p_global.as_ref().map(mat).transpose()?,
            k_ni: file.k_ni.as_ref().map(mats).transpose()?,
            p_local: file.p_local.as_ref().map(mats).transpose()?,
            p_f: mats(&file.p_f)?,
            k_f: mats(&file.k_f)?,
            gamma: mats(&file.gamma)?,
            tightened: Tightened {
                x_global: file.tightened_x.iter().map(poly_from_json).collect::<Result<_, _>>()?,
                u_global: file.tightened_u.iter().map(poly_from_json).collect::<Result<_, _>>()?,
                x_ni: file
                    .x_ni
                    .iter()
                    .map(|v| v.iter().map(poly_from_json).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()?,
                u_i: file
                    .u_i
                    .iter()
                    .map(|v| v.iter().map(poly_from_json).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()?,
                ebar: file.ebar.iter().map(zono_from_json).collect::<Result<_, _>>()?,
                e_shape: file
                    .e_shape
                    .iter()
                    .map(|o| o.as_ref().map(mat).transpose())
                    .collect::<Result<_, _>>()?,
            },
            horizon: file.horizon,
            model_hash: file.model_hash,
            tau1_used: file.tau1_used,
            local_grid_point: file.local_grid_point,
        })
    }
}

// ---------------------------------------------------------------------------
// Monte-Carlo verification helpers (shared with the acceptance suite)
// ---------------------------------------------------------------------------

pub mod verify {
    use super::*;
    use crate::setalg::BoxSet;

    /// Uniform sample from the unit ball in `R^n`.
    pub fn sample_unit_ball(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        let mut g = DVector::from_fn(n, |_, _| {
            // Box-Muller from two uniforms.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let norm = g.norm();
        if norm == 0.0 {
            return g;
        }
        let radius: f64 = rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
        g *= radius / norm;
        g
    }

    /// Uniform sample from `{x : xᵀPx ≤ level}`.
    pub fn sample_in_ellipsoid(rng: &mut ChaCha8Rng, p_half_inv: &DMatrix<f64>, level: f64) -> DVector<f64> {
        let ball = sample_unit_ball(rng, p_half_inv.nrows());
        p_half_inv * ball * level.sqrt()
    }

    /// `P^{-1/2}` for ellipsoid sampling.
    pub fn shape_half_inverse(p: &DMatrix<f64>) -> DMatrix<f64> {
        sqrt_psd(&inv_spd(p).expect("shape invertible"))
    }

    pub fn sample_in_box(rng: &mut ChaCha8Rng, b: &BoxSet) -> DVector<f64> {
        DVector::from_fn(b.dim(), |i, _| {
            let (lo, up) = (b.lower()[i], b.upper()[i]);
            if lo == up {
                lo
            } else {
                rng.gen_range(lo..up)
            }
        })
    }

    /// One-step RPI violations of `Z = {xᵀPx ≤ 1}` under `x⁺ = A_K x + w`,
    /// `w` sampled from the disturbance box.
    pub fn mc_rpi_violations(
        a_k: &DMatrix<f64>,
        p: &DMatrix<f64>,
        w_box: &BoxSet,
        samples: usize,
        seed: u64,
        tol: f64,
    ) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half_inv = shape_half_inverse(p);
        let mut violations = 0;
        for _ in 0..samples {
            let x = sample_in_ellipsoid(&mut rng, &half_inv, 1.0);
            let w = sample_in_box(&mut rng, w_box);
            let xp = a_k * x + w;
            if (xp.transpose() * p * &xp)[(0, 0)] > 1.0 + tol {
                violations += 1;
            }
        }
        violations
    }

    /// Per-agent one-step RPI violations: neighbors sampled inside their own
    /// ellipsoids `Z_j`, disturbance inside `W_i`.
    pub fn mc_local_rpi_violations(
        net: &NetworkModel,
        k_ni: &[DMatrix<f64>],
        p_list: &[DMatrix<f64>],
        samples: usize,
        seed: u64,
        tol: f64,
    ) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half_invs: Vec<DMatrix<f64>> = p_list.iter().map(shape_half_inverse).collect();
        let mut violations = 0;
        for _ in 0..samples {
            for i in 0..net.num_agents() {
                let ag = net.agent(i);
                let mut x_ni = DVector::zeros(net.neighborhood_dim(i));
                let mut off = 0;
                for j in &ag.neighbors {
                    let nj = net.agent(*j).state_dim();
                    let xj = sample_in_ellipsoid(&mut rng, &half_invs[*j], 1.0);
                    x_ni.rows_mut(off, nj).copy_from(&xj);
                    off += nj;
                }
                let w = sample_in_box(&mut rng, &ag.dist_box);
                let xp = ag.a_ni() * &x_ni + &ag.b * &k_ni[i] * &x_ni + w;
                if (xp.transpose() * &p_list[i] * &xp)[(0, 0)] > 1.0 + tol {
                    violations += 1;
                }
            }
        }
        violations
    }

    /// Max over samples of `Σᵢ [V_fᵢ decrease + ℓᵢ − γᵢ]` evaluated on random
    /// unit-scale states (must stay ≤ 0 up to the certified margin).
    pub fn mc_terminal_decrease_max(
        net: &NetworkModel,
        cert: &TerminalCert,
        samples: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats: Vec<DMatrix<f64>> =
            (0..net.num_agents()).map(|i| terminal_decrease_matrix(net, cert, i)).collect();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let mut x = DVector::from_fn(net.state_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let norm = x.norm();
            if norm > 0.0 {
                x /= norm;
            }
            let mut total = 0.0;
            for i in 0..net.num_agents() {
                let xn = NetworkModel::gather(&x, &net.neighborhood_indices(i));
                total += (xn.transpose() * &mats[i] * &xn)[(0, 0)];
            }
            worst = worst.max(total);
        }
        worst
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_msd, AgentModel, MsdParams};
    use crate::setalg::{support_zonotope, BoxSet};
    use approx::assert_abs_diff_eq;

    fn scalar_system(a: f64, b: f64, w: f64, x_lim: f64, u_lim: f64) -> NetworkModel {
        let agent = AgentModel {
            id: 0,
            neighbors: vec![0],
            a_blocks: vec![DMatrix::from_row_slice(1, 1, &[a])],
            b: DMatrix::from_row_slice(1, 1, &[b]),
            state_box: BoxSet::symmetric(&[x_lim]).unwrap(),
            input_box: BoxSet::symmetric(&[u_lim]).unwrap(),
            dist_box: BoxSet::symmetric(&[w]).unwrap(),
            q: DMatrix::identity(1, 1),
            r: DMatrix::identity(1, 1),
        };
        NetworkModel::new(vec![agent]).unwrap()
    }

    #[test]
    fn scalar_uncontrolled_contains_minimal_invariant_interval() {
        // a = 0.5, b = 0: minimal invariant interval is |x| ≤ 0.1/(1−0.5) = 0.2.
        let net = scalar_system(0.5, 0.0, 0.1, 1.0, 1.0);
        let gain = synth_global_gain_grid(&net, &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let z_radius = (1.0 / gain.p[(0, 0)]).sqrt();
        assert!(z_radius >= 0.2 - 1e-6, "Z radius {z_radius} misses the minimal invariant set");
    }

    #[test]
    fn scalar_integrator_matches_grid_oracle() {
        // a = 1, b = 1, w ∈ ±0.1: oracle grids K and computes the minimal
        // invariant interval radius 0.1/(1−|1+K|) per gain.
        let net = scalar_system(1.0, 1.0, 0.1, 1.0, 1.0);
        let at_half = synth_global_gain(&net, 0.5).unwrap();
        let a_k = 1.0 + at_half.k[(0, 0)];
        assert!(a_k.abs() < 1.0, "closed loop unstable: {a_k}");
        let z_radius = (1.0 / at_half.p[(0, 0)]).sqrt();
        assert!(z_radius <= 1.0 + 1e-9, "Z escapes X");

        let mut oracle_best = f64::INFINITY;
        let mut k = -1.9;
        while k <= -0.1 {
            let rho = (1.0 + k as f64).abs();
            if rho < 1.0 {
                let r = 0.1 / (1.0 - rho);
                oracle_best = oracle_best.min(r * r); // trace of the 1-D shape
            }
            k += 0.01;
        }
        let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        let best = synth_global_gain_grid(&net, &grid).unwrap();
        let trace = 1.0 / best.p[(0, 0)];
        assert!(
            trace <= oracle_best * 1.10 + 1e-12,
            "grid-searched trace {trace} not within 10% of oracle {oracle_best}"
        );
    }

    #[test]
    fn benchmark_global_gain_verifies() {
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let gain = synth_global_gain_grid(&net, &[0.3, 0.5, 0.7]).unwrap();
        let (a, b) = net.assemble_global();
        let a_k = a + b * &gain.k;
        assert!(spectral_radius(&a_k) < 1.0);
        // 10⁴ Monte-Carlo RPI samples, zero exits (checked in synthesis too).
        let v = verify::mc_rpi_violations(&a_k, &gain.p, &net.global_dist_box(), 10_000, 7, 1e-9);
        assert_eq!(v, 0);
    }

    #[test]
    fn decoupled_local_gains_act_on_own_state() {
        // Two independent scalar agents: coupling blocks vanish and each
        // K_{N_i} reduces to a single nonzero entry on the agent itself.
        let mk = |id: usize| AgentModel {
            id,
            neighbors: vec![id],
            a_blocks: vec![DMatrix::from_row_slice(1, 1, &[1.0])],
            b: DMatrix::from_row_slice(1, 1, &[1.0]),
            state_box: BoxSet::symmetric(&[1.0]).unwrap(),
            input_box: BoxSet::symmetric(&[1.0]).unwrap(),
            dist_box: BoxSet::symmetric(&[0.05]).unwrap(),
            q: DMatrix::identity(1, 1),
            r: DMatrix::identity(1, 1),
        };
        let net = NetworkModel::new(vec![mk(0), mk(1)]).unwrap();
        let gains = synth_local_gains(&net, &LocalGainGrids::default()).unwrap();
        for i in 0..2 {
            assert_eq!(gains.k_ni[i].ncols(), 1);
            let a_k = 1.0 + gains.k_ni[i][(0, 0)];
            assert!(a_k.abs() < 1.0);
        }
    }

    #[test]
    fn benchmark_local_gains_verify() {
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let gains = synth_local_gains(&net, &LocalGainGrids::default()).unwrap();
        let v = verify::mc_local_rpi_violations(&net, &gains.k_ni, &gains.p, 10_000, 11, 1e-9);
        assert_eq!(v, 0, "sampled local RPI check failed");
    }

    #[test]
    fn infeasible_grid_reports_reasons() {
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let grids = LocalGainGrids {
            tau_bar_i: vec![0.99],
            tau_bar_ij: vec![0.99],
            tau_tilde_frac: vec![1.0],
        };
        match synth_local_gains(&net, &grids) {
            Err(SynthError::InfeasibleAllGrid { reasons }) => {
                assert!(!reasons.is_empty());
            }
            other => panic!("expected InfeasibleAllGrid, got {other:?}"),
        }
    }

    #[test]
    fn single_agent_terminal_reduces_to_riccati_like_certificate() {
        let net = scalar_system(1.0, 1.0, 0.05, 1.0, 1.0);
        let cert = synth_terminal(&net).unwrap();
        // With one agent the relaxation must be ⪯ 0 on its own.
        assert!(max_eig_sym(&cert.gamma[0]) <= 1e-8);
        // V_f decrease against the stage cost on samples.
        let worst = verify::mc_terminal_decrease_max(&net, &cert, 1000, 5);
        assert!(worst <= 1e-8, "terminal decrease violated: {worst}");
    }

    #[test]
    fn decoupled_terminal_gammas_nonpositive() {
        let mk = |id: usize| AgentModel {
            id,
            neighbors: vec![id],
            a_blocks: vec![DMatrix::from_row_slice(1, 1, &[0.8])],
            b: DMatrix::from_row_slice(1, 1, &[1.0]),
            state_box: BoxSet::symmetric(&[1.0]).unwrap(),
            input_box: BoxSet::symmetric(&[1.0]).unwrap(),
            dist_box: BoxSet::symmetric(&[0.05]).unwrap(),
            q: DMatrix::identity(1, 1),
            r: DMatrix::identity(1, 1),
        };
        let net = NetworkModel::new(vec![mk(0), mk(1)]).unwrap();
        let cert = synth_terminal(&net).unwrap();
        for g in &cert.gamma {
            assert!(max_eig_sym(g) <= 1e-8);
        }
    }

    #[test]
    fn benchmark_terminal_certificate() {
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let cert = synth_terminal(&net).unwrap();
        let worst = verify::mc_terminal_decrease_max(&net, &cert, 10_000, 13);
        assert!(worst <= 1e-8, "decrease-with-relaxation violated: {worst}");
        assert!(max_eig_sym(&gamma_sum(&net, &cert.gamma)) <= 1e-8);
        for p in &cert.p_f {
            assert!(min_eig_sym(p) > 0.0);
        }
    }

    #[test]
    fn tighten_zero_disturbance_is_identity() {
        let mut net = benchmark_msd(&MsdParams::default()).unwrap();
        // Zero out all disturbance boxes.
        let agents: Vec<AgentModel> = net
            .agents()
            .iter()
            .map(|a| {
                let mut a = a.clone();
                a.dist_box = BoxSet::symmetric(&[0.0, 0.0]).unwrap();
                a
            })
            .collect();
        net = NetworkModel::new(agents).unwrap();
        let k = DMatrix::zeros(3, 6);
        let t = tighten_sequences(&net, &GainSpec::Global(&k), 5).unwrap();
        for tt in 0..5 {
            for (r0, r1) in net
                .global_state_box()
                .to_hpolytope()
                .rows()
                .iter()
                .zip(t.x_global[tt].rows())
            {
                assert_abs_diff_eq!(r0.offset, r1.offset, epsilon = 1e-15);
            }
        }
        assert!(t.e_shape.iter().all(|e| e.is_none()));
    }

    #[test]
    fn tighten_scalar_closed_loop_values() {
        // a_K = 0.5, w ∈ ±0.1, X = [−1,1]: X̄(2) = [−0.85, 0.85].
        let net = scalar_system(0.5, 0.0, 0.1, 1.0, 1.0);
        let k = DMatrix::zeros(1, 1);
        let t = tighten_sequences(&net, &GainSpec::Global(&k), 3).unwrap();
        for r in t.x_global[2].rows() {
            assert_abs_diff_eq!(r.offset, 0.85, epsilon = 1e-12);
        }
    }

    #[test]
    fn tighten_detects_empty_sets() {
        // Inflate W to over-tighten X.
        let net = scalar_system(0.9, 0.0, 0.6, 1.0, 1.0);
        let k = DMatrix::zeros(1, 1);
        match tighten_sequences(&net, &GainSpec::Global(&k), 5) {
            Err(SynthError::EmptyTightenedSet { kind, t, .. }) => {
                assert_eq!(kind, "state");
                assert!(t >= 1);
            }
            other => panic!("expected EmptyTightenedSet, got {other:?}"),
        }
    }

    #[test]
    fn tightened_sequences_nested() {
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let gain = synth_global_gain_grid(&net, &[0.5]).unwrap();
        let t = tighten_sequences(&net, &GainSpec::Global(&gain.k), 5).unwrap();
        for tt in 0..4 {
            for (r0, r1) in t.x_global[tt].rows().iter().zip(t.x_global[tt + 1].rows()) {
                assert!(r1.offset <= r0.offset + 1e-12);
            }
            for (r0, r1) in t.u_global[tt].rows().iter().zip(t.u_global[tt + 1].rows()) {
                assert!(r1.offset <= r0.offset + 1e-12);
            }
        }
    }

    #[test]
    fn tighten_membership_matches_vertex_oracle() {
        // x ∈ X̄(t) ⟺ x + r ∈ X for all vertices r of R(t) (box case).
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let gain = synth_global_gain_grid(&net, &[0.5]).unwrap();
        let (a, b) = net.assemble_global();
        let a_k = a + b * &gain.k;
        let w = net.global_dist_box().to_zonotope();
        let tube = reach_tube(&a_k, &w, 4).unwrap();
        let t = tighten_sequences(&net, &GainSpec::Global(&gain.k), 5).unwrap();
        let x_poly = net.global_state_box().to_hpolytope();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let x = verify::sample_in_box(&mut rng, &net.global_state_box());
            for tt in [1usize, 3] {
                let r = &tube[tt - 1];
                let ours = t.x_global[tt].contains(&x).unwrap();
                // support-based oracle: max over rows of aᵀx + h_R(a) ≤ d
                let oracle = x_poly.rows().iter().all(|row| {
                    row.normal.dot(&x) + support_zonotope(r, &row.normal).unwrap()
                        <= row.offset + 1e-9
                });
                assert_eq!(ours, oracle);
            }
        }
    }

    #[test]
    fn bundle_json_roundtrip() {
        let net = benchmark_msd(&MsdParams::default()).unwrap();
        let opts = SynthOptions {
            mode: GainModeConfig::Global,
            tau1: Some(0.5),
            tau1_grid: vec![0.3, 0.5, 0.7],
            local_grids: LocalGainGrids::default(),
            horizon: 5,
        };
        let bundle = synthesize(&net, &opts, "deadbeef").unwrap();
        let json = bundle.to_json_string();
        let back = SynthesisBundle::from_json_str(&json).unwrap();
        assert_eq!(back.horizon, 5);
        assert_eq!(back.model_hash, "deadbeef");
        assert_abs_diff_eq!(
            (back.k_global.as_ref().unwrap() - bundle.k_global.as_ref().unwrap()).amax(),
            0.0
        );
        assert_eq!(back.tightened.x_global.len(), 5);
        // Lossless float round trip.
        let json2 = back.to_json_string();
        assert_eq!(json, json2);
    }
}
