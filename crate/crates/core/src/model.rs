//! Coupled multi-agent LTI system description, lifting operators,
//! discretization and structural validation.
//!
//! Each agent `i` owns states `xᵢ ∈ R^{nᵢ}` and inputs `uᵢ ∈ R^{mᵢ}`, with
//! dynamics coupled through the neighborhood `N_i` (which contains `i`):
//!
//! ```text
//! xᵢ(k+1) = A_{N_i} x_{N_i}(k) + Bᵢ uᵢ(k) + wᵢ(k)
//! ```
//!
//! The lifting operators `T_i`, `L_i`, `T_{N_i}` are never materialized as
//! 0/1 matrices; they are index maps applied as coordinate gathers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{block_diag, mat_from_rows, mat_to_rows, min_eig_sym, rank};
use crate::setalg::BoxSet;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("agent {agent}: {msg}")]
    BadAgent { agent: usize, msg: String },
    #[error("inconsistent block dimensions: {0}")]
    BadDimensions(String),
    #[error("config error: {0}")]
    BadConfig(String),
    #[error("physical parameter must be positive: {0}")]
    NonPositiveParameter(String),
}

/// One agent: neighborhood, dynamics blocks, constraint boxes and weights.
#[derive(Clone, Debug)]
pub struct AgentModel {
    pub id: usize,
    /// Sorted neighborhood `N_i`, always containing `id`.
    pub neighbors: Vec<usize>,
    /// `A_ij` blocks aligned with `neighbors`.
    pub a_blocks: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub state_box: BoxSet,
    pub input_box: BoxSet,
    pub dist_box: BoxSet,
    /// Own-block stage weight `Qᵢ` (nᵢ×nᵢ, symmetric positive-definite).
    pub q: DMatrix<f64>,
    /// Input stage weight `Rᵢ` (mᵢ×mᵢ, symmetric positive-definite).
    pub r: DMatrix<f64>,
}

impl AgentModel {
    pub fn state_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `A_{N_i} = [A_{i j₁} … A_{i j_q}]` with neighbor blocks concatenated
    /// in sorted neighbor order.
    pub fn a_ni(&self) -> DMatrix<f64> {
        let n_i = self.state_dim();
        let cols: usize = self.a_blocks.iter().map(|m| m.ncols()).sum();
        let mut out = DMatrix::zeros(n_i, cols);
        let mut off = 0;
        for blk in &self.a_blocks {
            out.view_mut((0, off), (n_i, blk.ncols())).copy_from(blk);
            off += blk.ncols();
        }
        out
    }
}

/// The assembled network: agents plus the coordinate maps realizing the
/// lifting operators. Immutable after construction.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    agents: Vec<AgentModel>,
    state_offsets: Vec<usize>,
    input_offsets: Vec<usize>,
    n: usize,
    m: usize,
}

/// One pass/fail entry of a validation report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl NetworkModel {
    pub fn new(agents: Vec<AgentModel>) -> Result<Self, ModelError> {
        let m_agents = agents.len();
        if m_agents == 0 {
            return Err(ModelError::BadConfig("no agents".into()));
        }
        let dims: Vec<usize> = agents.iter().map(|a| a.state_dim()).collect();
        for (i, a) in agents.iter().enumerate() {
            if a.id != i {
                return Err(ModelError::BadAgent { agent: i, msg: format!("id {} out of order", a.id) });
            }
            if !a.neighbors.contains(&i) {
                return Err(ModelError::BadAgent { agent: i, msg: "neighborhood must contain the agent itself".into() });
            }
            if a.neighbors.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ModelError::BadAgent { agent: i, msg: "neighbors must be sorted and unique".into() });
            }
            if a.neighbors.iter().any(|j| *j >= m_agents) {
                return Err(ModelError::BadAgent { agent: i, msg: "neighbor index out of range".into() });
            }
            if a.a_blocks.len() != a.neighbors.len() {
                return Err(ModelError::BadAgent { agent: i, msg: "one A block per neighbor required".into() });
            }
            for (blk, j) in a.a_blocks.iter().zip(&a.neighbors) {
                if blk.nrows() != a.state_dim() || blk.ncols() != dims[*j] {
                    return Err(ModelError::BadDimensions(format!(
                        "agent {i}: A block for neighbor {j} is {}x{}, expected {}x{}",
                        blk.nrows(), blk.ncols(), a.state_dim(), dims[*j]
                    )));
                }
            }
            if a.state_box.dim() != a.state_dim() || a.dist_box.dim() != a.state_dim() {
                return Err(ModelError::BadDimensions(format!("agent {i}: box dimensions")));
            }
            if a.input_box.dim() != a.input_dim() {
                return Err(ModelError::BadDimensions(format!("agent {i}: input box dimension")));
            }
            if a.q.nrows() != a.state_dim() || a.q.ncols() != a.state_dim() {
                return Err(ModelError::BadDimensions(format!("agent {i}: Q dimension")));
            }
            if a.r.nrows() != a.input_dim() || a.r.ncols() != a.input_dim() {
                return Err(ModelError::BadDimensions(format!("agent {i}: R dimension")));
            }
        }
        let mut state_offsets = Vec::with_capacity(m_agents);
        let mut input_offsets = Vec::with_capacity(m_agents);
        let (mut n, mut m) = (0, 0);
        for a in &agents {
            state_offsets.push(n);
            input_offsets.push(m);
            n += a.state_dim();
            m += a.input_dim();
        }
        Ok(Self { agents, state_offsets, input_offsets, n, m })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentModel {
        &self.agents[i]
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    /// Global state coordinates of agent `i` (the index map behind `T_i`).
    pub fn state_indices(&self, i: usize) -> Vec<usize> {
        let a = &self.agents[i];
        (self.state_offsets[i]..self.state_offsets[i] + a.state_dim()).collect()
    }

    /// Global input coordinates of agent `i` (`L_i`).
    pub fn input_indices(&self, i: usize) -> Vec<usize> {
        let a = &self.agents[i];
        (self.input_offsets[i]..self.input_offsets[i] + a.input_dim()).collect()
    }

    /// Global state coordinates of the neighborhood `N_i` (`T_{N_i}`),
    /// neighbor blocks in sorted order.
    pub fn neighborhood_indices(&self, i: usize) -> Vec<usize> {
        let mut idx = Vec::new();
        for j in &self.agents[i].neighbors {
            idx.extend(self.state_indices(*j));
        }
        idx
    }

    pub fn neighborhood_dim(&self, i: usize) -> usize {
        self.agents[i].neighbors.iter().map(|j| self.agents[*j].state_dim()).sum()
    }

    /// Offset of neighbor `j`'s block inside the neighborhood vector of `i`.
    pub fn offset_in_neighborhood(&self, i: usize, j: usize) -> Option<usize> {
        let mut off = 0;
        for nb in &self.agents[i].neighbors {
            if *nb == j {
                return Some(off);
            }
            off += self.agents[*nb].state_dim();
        }
        None
    }

    /// Number of neighborhoods agent `j` participates in, `|{i : j ∈ N_i}|`.
    pub fn overlap_count(&self, j: usize) -> usize {
        self.agents.iter().filter(|a| a.neighbors.contains(&j)).count()
    }

    /// Gather `v` at `idx` (applies a lifting operator).
    pub fn gather(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.iter().map(|i| v[*i]))
    }

    /// Assembled global `(A, B)`; agent-row blocks equal the local dynamics.
    pub fn assemble_global(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = DMatrix::zeros(self.n, self.n);
        let mut b = DMatrix::zeros(self.n, self.m);
        for (i, ag) in self.agents.iter().enumerate() {
            let r0 = self.state_offsets[i];
            for (blk, j) in ag.a_blocks.iter().zip(&ag.neighbors) {
                a.view_mut((r0, self.state_offsets[*j]), (blk.nrows(), blk.ncols())).copy_from(blk);
            }
            b.view_mut((r0, self.input_offsets[i]), (ag.b.nrows(), ag.b.ncols())).copy_from(&ag.b);
        }
        (a, b)
    }

    /// Neighborhood stage weight `Q_{N_i}`: the overlap-normalized global
    /// weight restricted to `N_i`, i.e. `T_{N_i} diag_j(Q_j/o_j) T_{N_i}ᵀ`
    /// with `o_j` the overlap count. By construction
    /// `Σᵢ ‖x_{N_i}‖²_{Q_{N_i}} = ‖x‖²_Q` with `Q = diag_j(Q_j)`.
    pub fn q_ni(&self, i: usize) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = self.agents[i]
            .neighbors
            .iter()
            .map(|j| &self.agents[*j].q / self.overlap_count(*j) as f64)
            .collect();
        block_diag(&blocks)
    }

    /// Global stage weight `Q = Σᵢ T_{N_i}ᵀ Q_{N_i} T_{N_i} = diag_j(Q_j)`.
    pub fn global_q(&self) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = self.agents.iter().map(|a| a.q.clone()).collect();
        block_diag(&blocks)
    }

    /// Global input weight `R = diag_i(R_i)`.
    pub fn global_r(&self) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = self.agents.iter().map(|a| a.r.clone()).collect();
        block_diag(&blocks)
    }

    pub fn global_state_box(&self) -> BoxSet {
        BoxSet::cartesian_product(&self.agents.iter().map(|a| a.state_box.clone()).collect::<Vec<_>>())
    }

    pub fn global_input_box(&self) -> BoxSet {
        BoxSet::cartesian_product(&self.agents.iter().map(|a| a.input_box.clone()).collect::<Vec<_>>())
    }

    pub fn global_dist_box(&self) -> BoxSet {
        BoxSet::cartesian_product(&self.agents.iter().map(|a| a.dist_box.clone()).collect::<Vec<_>>())
    }

    /// Structural validation: controllability rank, neighbor symmetry,
    /// weight positive-definiteness, non-empty boxes. Failures are report
    /// entries, not errors.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        // Bidirectional neighbor relation (j ∈ N_i ⟺ i ∈ N_j).
        let mut sym_ok = true;
        let mut sym_detail = String::new();
        for (i, a) in self.agents.iter().enumerate() {
            for j in &a.neighbors {
                if !self.agents[*j].neighbors.contains(&i) {
                    sym_ok = false;
                    sym_detail = format!("{j} ∈ N_{i} but {i} ∉ N_{j}");
                }
            }
        }
        checks.push(CheckResult {
            name: "neighbor_symmetry".into(),
            passed: sym_ok,
            detail: if sym_ok { "bidirectional".into() } else { sym_detail },
        });

        // Controllability of the assembled pair.
        let (a, b) = self.assemble_global();
        let mut ctrb = DMatrix::zeros(self.n, self.n * self.m.max(1));
        let mut akb = b.clone();
        for k in 0..self.n {
            ctrb.view_mut((0, k * self.m), (self.n, self.m)).copy_from(&akb);
            akb = &a * &akb;
        }
        let r = rank(&ctrb, 1e-8);
        checks.push(CheckResult {
            name: "controllability".into(),
            passed: r == self.n,
            detail: format!("rank {r} of {}", self.n),
        });

        // Weight positive-definiteness.
        for (i, ag) in self.agents.iter().enumerate() {
            let q_ok = min_eig_sym(&ag.q) > 1e-12 && (&ag.q - ag.q.transpose()).amax() <= 1e-9;
            let r_ok = min_eig_sym(&ag.r) > 1e-12 && (&ag.r - ag.r.transpose()).amax() <= 1e-9;
            checks.push(CheckResult {
                name: format!("weights_pd_agent_{i}"),
                passed: q_ok && r_ok,
                detail: format!(
                    "min eig Q = {:.3e}, min eig R = {:.3e}",
                    min_eig_sym(&ag.q),
                    min_eig_sym(&ag.r)
                ),
            });
        }

        // Non-empty boxes (constructor already enforces lower ≤ upper;
        // report zero-width state/input boxes as failures, zero-width
        // disturbances are legitimate).
        for (i, ag) in self.agents.iter().enumerate() {
            let ok = ag
                .state_box
                .half_widths()
                .iter()
                .chain(ag.input_box.half_widths().iter())
                .all(|h| *h > 0.0);
            checks.push(CheckResult {
                name: format!("boxes_nonempty_agent_{i}"),
                passed: ok,
                detail: "state/input boxes have positive width".into(),
            });
        }

        ValidationReport { checks }
    }
}

/// Continuous-time model plus sampling time.
#[derive(Clone, Debug)]
pub struct ContinuousModel {
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
    pub ts: f64,
}

/// Forward-Euler discretization: `A = I + Ts·A_c`, `B = Ts·B_c`.
pub fn euler_discretize(cm: &ContinuousModel) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
    if cm.ts <= 0.0 {
        return Err(ModelError::NonPositiveParameter(format!("Ts = {}", cm.ts)));
    }
    if cm.a_c.nrows() != cm.a_c.ncols() || cm.b_c.nrows() != cm.a_c.nrows() {
        return Err(ModelError::BadDimensions("continuous model".into()));
    }
    let n = cm.a_c.nrows();
    Ok((DMatrix::identity(n, n) + &cm.a_c * cm.ts, &cm.b_c * cm.ts))
}

/// Physical parameters of the three-mass benchmark. Defaults satisfy the
/// orderings k1 > k2 > k3 and b1 > b2 inside the admissible ranges
/// m ∈ [5,10] kg, k ∈ [0.8,1.2] N·m, b ∈ [0.8,2] kg/s.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MsdParams {
    pub masses: [f64; 3],
    pub springs: [f64; 3],
    pub dampers: [f64; 2],
    pub ts: f64,
}

impl Default for MsdParams {
    fn default() -> Self {
        Self { masses: [10.0, 7.5, 5.0], springs: [1.2, 1.0, 0.8], dampers: [2.0, 0.8], ts: 0.1 }
    }
}

/// The chain-of-three-masses benchmark: three agents, each with position and
/// velocity states and one force input; neighborhoods {0,1}, {0,1,2}, {1,2}.
pub fn benchmark_msd(params: &MsdParams) -> Result<NetworkModel, ModelError> {
    let [m1, m2, m3] = params.masses;
    let [k1, k2, k3] = params.springs;
    let [b1, b2] = params.dampers;
    for (name, v) in [
        ("m1", m1), ("m2", m2), ("m3", m3),
        ("k1", k1), ("k2", k2), ("k3", k3),
        ("b1", b1), ("b2", b2), ("Ts", params.ts),
    ] {
        if !(v > 0.0) {
            return Err(ModelError::NonPositiveParameter(format!("{name} = {v}")));
        }
    }
    let a_c = DMatrix::from_row_slice(6, 6, &[
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        -k1 / m1, -b1 / m1, k1 / m1, b1 / m1, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        k1 / m2, b1 / m2, -(k1 + k2) / m2, -(b1 + b2) / m2, k2 / m2, b2 / m2,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, k2 / m3, b2 / m3, -(k2 + k3) / m3, -b2 / m3,
    ]);
    let b_c = DMatrix::from_row_slice(6, 3, &[
        0.0, 0.0, 0.0,
        1.0 / m1, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.0, 1.0 / m2, 0.0,
        0.0, 0.0, 0.0,
        0.0, 0.0, 1.0 / m3,
    ]);
    let (a, b) = euler_discretize(&ContinuousModel { a_c, b_c, ts: params.ts })?;

    let neighborhoods: [Vec<usize>; 3] = [vec![0, 1], vec![0, 1, 2], vec![1, 2]];
    let state_boxes = [
        BoxSet::from_slices(&[-10.0, -10.0], &[10.0, 10.0]).unwrap(),
        BoxSet::from_slices(&[-2.0, -3.0], &[2.0, 3.0]).unwrap(),
        BoxSet::from_slices(&[-3.0, -5.0], &[3.0, 5.0]).unwrap(),
    ];
    let input_bounds = [10.0, 1.5, 5.0];
    let dist_boxes = [
        BoxSet::symmetric(&[0.15, 0.3]).unwrap(),
        BoxSet::symmetric(&[0.05, 0.1]).unwrap(),
        BoxSet::symmetric(&[0.05, 0.1]).unwrap(),
    ];
    let q_diag = [10.0, 1.0, 2.5];
    let r_diag = [0.1, 0.01, 0.05];

    let mut agents = Vec::with_capacity(3);
    for i in 0..3 {
        let a_blocks = neighborhoods[i]
            .iter()
            .map(|j| a.view((2 * i, 2 * j), (2, 2)).into_owned())
            .collect();
        agents.push(AgentModel {
            id: i,
            neighbors: neighborhoods[i].clone(),
            a_blocks,
            b: b.view((2 * i, i), (2, 1)).into_owned(),
            state_box: state_boxes[i].clone(),
            input_box: BoxSet::symmetric(&[input_bounds[i]]).unwrap(),
            dist_box: dist_boxes[i].clone(),
            q: DMatrix::identity(2, 2) * q_diag[i],
            r: DMatrix::identity(1, 1) * r_diag[i],
        });
    }
    NetworkModel::new(agents)
}

// ---------------------------------------------------------------------------
// JSON model configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentConfig {
    pub neighbors: Vec<usize>,
    #[serde(rename = "A_blocks")]
    pub a_blocks: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub state_box: BoxConfig,
    pub input_box: BoxConfig,
    pub dist_box: BoxConfig,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModeConfig {
    Global,
    Local,
}

impl Default for GainModeConfig {
    fn default() -> Self {
        Self::Global
    }
}

fn default_tau1_grid() -> Vec<f64> {
    // 0.05..0.95 plus near-1 points: lightly damped plants with weak
    // actuation only admit certificates with τ₁ close to ρ(A_K)².
    let mut g: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    g.extend([0.96, 0.97, 0.98, 0.985, 0.99, 0.993, 0.995, 0.997, 0.999]);
    g
}

fn default_tau_bar_grid() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9]
}

fn default_frac_grid() -> Vec<f64> {
    vec![1.0, 0.75, 0.5, 0.25]
}

/// Offline synthesis options. `tau1` fixes the Theorem-style scalar
/// multiplier of the global-gain LMI; when absent (or infeasible) the grid
/// is searched and the minimum-trace point wins. The local-gain grids give
/// candidate values for τ̄ᵢ and τ̄ᵢⱼ directly, and fractions of
/// `g_ip/|N_i|` for the input multipliers τ̃ᵢⱼₚ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisConfig {
    #[serde(default)]
    pub tau1: Option<f64>,
    #[serde(default = "default_tau1_grid")]
    pub tau1_grid: Vec<f64>,
    #[serde(default)]
    pub mode: GainModeConfig,
    #[serde(default = "default_tau_bar_grid")]
    pub tau_bar_grid: Vec<f64>,
    #[serde(default = "default_tau_bar_grid")]
    pub tau_bar_ij_grid: Vec<f64>,
    #[serde(default = "default_frac_grid")]
    pub tau_tilde_frac_grid: Vec<f64>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            tau1: None,
            tau1_grid: default_tau1_grid(),
            mode: GainModeConfig::Global,
            tau_bar_grid: default_tau_bar_grid(),
            tau_bar_ij_grid: default_tau_bar_grid(),
            tau_tilde_frac_grid: default_frac_grid(),
        }
    }
}

fn default_rho() -> f64 {
    1.0
}
fn default_admm_iter() -> usize {
    500
}
fn default_admm_eps() -> f64 {
    1e-5
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdmmConfig {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_admm_iter")]
    pub max_iter: usize,
    #[serde(default = "default_admm_eps")]
    pub eps_primal: f64,
    #[serde(default = "default_admm_eps")]
    pub eps_dual: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho: 1.0, max_iter: 500, eps_primal: 1e-5, eps_dual: 1e-5 }
    }
}

/// Top-level model configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub agents: Vec<AgentConfig>,
    pub horizon: usize,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub admm: AdmmConfig,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn to_network(&self) -> Result<NetworkModel, ModelError> {
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, ac) in self.agents.iter().enumerate() {
            let parse = |rows: &Vec<Vec<f64>>, what: &str| {
                mat_from_rows(rows).ok_or_else(|| ModelError::BadConfig(format!("agent {i}: ragged {what}")))
            };
            let a_blocks = ac
                .a_blocks
                .iter()
                .map(|blk| parse(blk, "A block"))
                .collect::<Result<Vec<_>, _>>()?;
            let mk_box = |bc: &BoxConfig, what: &str| {
                BoxSet::from_slices(&bc.lower, &bc.upper)
                    .map_err(|e| ModelError::BadConfig(format!("agent {i}: {what}: {e}")))
            };
            agents.push(AgentModel {
                id: i,
                neighbors: ac.neighbors.clone(),
                a_blocks,
                b: parse(&ac.b, "B")?,
                state_box: mk_box(&ac.state_box, "state_box")?,
                input_box: mk_box(&ac.input_box, "input_box")?,
                dist_box: mk_box(&ac.dist_box, "dist_box")?,
                q: parse(&ac.q, "Q")?,
                r: parse(&ac.r, "R")?,
            });
        }
        NetworkModel::new(agents)
    }

    pub fn from_network(net: &NetworkModel, horizon: usize, x0: Option<Vec<f64>>) -> Self {
        let agents = net
            .agents()
            .iter()
            .map(|a| AgentConfig {
                neighbors: a.neighbors.clone(),
                a_blocks: a.a_blocks.iter().map(mat_to_rows).collect(),
                b: mat_to_rows(&a.b),
                state_box: BoxConfig {
                    lower: a.state_box.lower().iter().cloned().collect(),
                    upper: a.state_box.upper().iter().cloned().collect(),
                },
                input_box: BoxConfig {
                    lower: a.input_box.lower().iter().cloned().collect(),
                    upper: a.input_box.upper().iter().cloned().collect(),
                },
                dist_box: BoxConfig {
                    lower: a.dist_box.lower().iter().cloned().collect(),
                    upper: a.dist_box.upper().iter().cloned().collect(),
                },
                q: mat_to_rows(&a.q),
                r: mat_to_rows(&a.r),
            })
            .collect();
        Self {
            agents,
            horizon,
            synthesis: SynthesisConfig::default(),
            admm: AdmmConfig::default(),
            x0,
        }
    }

    /// Stable content hash of the model section (agents + horizon), used to
    /// tie trajectory records and bundles to the model they came from.
    pub fn model_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(&self.agents).expect("serializable"));
        hasher.update(self.horizon.to_le_bytes());
        let out = hasher.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// The §-benchmark configuration file content: default physical parameters,
/// horizon 5 and the paper's initial condition.
pub fn benchmark_config() -> ModelConfig {
    let net = benchmark_msd(&MsdParams::default()).expect("default parameters are positive");
    ModelConfig::from_network(&net, 5, Some(vec![-5.0, -3.0, 1.2, 1.0, -1.0, -2.0]))
}
