//! Robust distributed model predictive control for coupled linear systems
//! under bounded additive disturbances.
//!
//! The toolkit has an offline and an online half:
//!
//! * **Offline** ([`synth`]): tube feedback gains (global or per-agent) with
//!   robust positively invariant certificates, separable terminal costs
//!   `V_f(x) = Σᵢ xᵢᵀ P_fᵢ xᵢ` with local relaxations, and the tightened
//!   constraint sequences `X̄(t) = X ⊖ R(t)`, `Ū(t) = U ⊖ K R(t)` built from
//!   the reachable error tube `R(t) = ⊕ⱼ A_Kʲ W`.
//! * **Online** ([`mpc`]): the robust DMPC problem over nominal trajectories
//!   with adaptive local terminal sets `Ω_fᵢ(αᵢ) = {xᵢ : xᵢᵀ Fᵢ xᵢ ≤ αᵢ}`,
//!   where the levels `αᵢ` are decision variables certified by small LMI
//!   blocks. Solvable centrally or by consensus ADMM.
//!
//! [`setalg`] provides the exact zonotope/polytope arithmetic behind the
//! tightening, [`conic`] a declarative SDP/SOCP layer with post-hoc
//! certificate verification, [`model`] the coupled multi-agent system
//! description, and [`sim`] closed-loop simulation and Monte-Carlo campaigns.

// Force linkage of the system BLAS/LAPACK used by the SDP cone kernels.
extern crate openblas_src;

pub mod conic;
pub mod linalg;
pub mod model;
pub mod mpc;
pub mod setalg;
pub mod sim;
pub mod synth;



