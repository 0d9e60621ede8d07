//! Scaled Chebyshev-Jacobi preconditioner actions and the symmetric inexact
//! Uzawa smoother.
//!
//! The smoother performs (with C = 0)
//!
//! ```text
//! u*  = u + Ahat^{-1} (f - A u - B^T p)
//! p+  = p + Shat^{-1} (B u* - g)
//! u+  = u + Ahat^{-1} (f - A u - B^T p+)
//! ```
//!
//! which is one application of x <- x + Khat^{-1} (b - K x) with
//! Khat = [[Ahat, B^T], [B, B Ahat^{-1} B^T - Shat]]; the third half-step
//! reuses the first velocity residual and only corrects for the pressure
//! update. Ahat^{-1} = sigma Cheb(A, D_A, k_A) and
//! Shat^{-1} = tau Cheb(S~, D~, k_S) with S~ = B Ahat^{-1} B^T. The scales
//! sigma, tau = C_{k+1}(3) / (1 + C_{k+1}(3)) guarantee Ahat >= A and
//! Shat >= S~ for the interval choice [beta/2, beta].

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fespace::{pressure_mean_project, BlockVector};
use crate::mfoperator::{ApplyMode, StokesOperator};
use crate::util::{self, SplitMix64};
use crate::verify::{diag_sd, AssembledSystem};

/// Fixed power-iteration budget for spectral-radius estimation.
pub const POWER_ITERATIONS: usize = 40;
/// Multiplicative safety factor applied to the estimated largest eigenvalue.
pub const POWER_SAFETY: f64 = 1.05;
/// Fixed seed for the power-iteration start vector.
pub const POWER_SEED: u64 = 0x7031_7465;
/// Size guard for the exact Schur diagonal (m unit-vector solves).
pub const EXACT_SCHUR_GUARD: usize = 5_000;

/// An apply-only symmetric linear action.
pub trait LinearOp: Send + Sync {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// First-kind Chebyshev polynomial C_j(s) by the three-term recurrence.
pub fn cheb_first_kind(j: usize, s: f64) -> f64 {
    let mut c0 = 1.0;
    let mut c1 = s;
    if j == 0 {
        return c0;
    }
    for _ in 1..j {
        let c2 = 2.0 * s * c1 - c0;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Multiplicative scale C_{k+1}(sbar) / (1 + C_{k+1}(sbar)) that turns the
/// Chebyshev-Jacobi preconditioner into a guaranteed upper bound of the
/// operator; sbar = 3 for the standard interval [beta/2, beta].
pub fn chebyshev_scale(k: usize, sbar: f64) -> f64 {
    let c = cheb_first_kind(k + 1, sbar);
    c / (1.0 + c)
}

/// Smoothing-property envelope eta_0(m) = binom(m, floor((m+1)/2)) / 2^m.
pub fn eta0(m: usize) -> f64 {
    let l = (m + 1) / 2;
    let mut binom = 1.0f64;
    for i in 0..l {
        binom *= (m - i) as f64 / (i + 1) as f64;
    }
    binom / 2.0f64.powi(m as i32)
}

/// Estimate of lambda_max(D^{-1} M), multiplied by a safety factor.
///
/// Runs a fixed budget of Lanczos steps (with full reorthogonalization) on
/// the symmetrized operator D^{-1/2} M D^{-1/2}, whose spectrum equals that
/// of D^{-1} M, and returns 1.05 times the largest Ritz value. Ritz values
/// approach the true maximum from below, so the safety factor keeps the
/// estimate on the overestimating side needed by the scaling guarantee.
/// The optional projector removes components outside the subspace of
/// interest (constrained dofs, pressure mean) from the start vector; the
/// iteration stays in that invariant subspace.
pub fn estimate_lambda_max(
    op: &dyn LinearOp,
    diag: &[f64],
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<f64> {
    let n = op.len();
    debug_assert_eq!(diag.len(), n);
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularDiagonal(i));
    }
    let sqrt_d: Vec<f64> = diag.iter().map(|&d| d.sqrt()).collect();
    // z = D^{-1/2} M D^{-1/2} v in the symmetric variable.
    let sym_apply = |v: &[f64], z: &mut [f64], tmp: &mut [f64]| {
        for i in 0..n {
            tmp[i] = v[i] / sqrt_d[i];
        }
        op.apply(tmp, z);
        for i in 0..n {
            z[i] /= sqrt_d[i];
        }
    };
    let mut rng = SplitMix64::new(POWER_SEED);
    let mut v = vec![0.0; n];
    rng.fill_sym(&mut v);
    if let Some(proj) = project {
        // Project in the original variable: v_orig = D^{-1/2} v.
        for i in 0..n {
            v[i] /= sqrt_d[i];
        }
        proj(&mut v);
        for i in 0..n {
            v[i] *= sqrt_d[i];
        }
    }
    let nrm = util::norm2(&v);
    if nrm == 0.0 {
        return Err(Error::EstimationFailure);
    }
    util::scale(1.0 / nrm, &mut v);

    let steps = POWER_ITERATIONS.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        basis.push(v.clone());
        sym_apply(&v, &mut w, &mut tmp);
        let alpha = util::dot(&v, &w);
        if !alpha.is_finite() {
            return Err(Error::EstimationFailure);
        }
        alphas.push(alpha);
        // Full reorthogonalization against the stored basis.
        for q in &basis {
            let c = util::dot(q, &w);
            util::axpy(-c, q, &mut w);
        }
        let beta = util::norm2(&w);
        if !beta.is_finite() {
            return Err(Error::EstimationFailure);
        }
        if beta <= 1e-14 * alphas[0].abs().max(1.0) {
            break;
        }
        betas.push(beta);
        v.copy_from_slice(&w);
        util::scale(1.0 / beta, &mut v);
    }
    // Largest eigenvalue of the Lanczos tridiagonal.
    let k = alphas.len();
    let mut t = crate::linalg::DMat::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let (ev, _) = t.sym_eig();
    let lambda = ev[k - 1];
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::EstimationFailure);
    }
    Ok(POWER_SAFETY * lambda)
}

/// Scaled Chebyshev-Jacobi preconditioner action
/// z = scale * s_k(D^{-1} M) D^{-1} r for the interval [beta/2, beta].
pub struct ChebyshevJacobi {
    pub degree: usize,
    pub beta: f64,
    pub scale: f64,
    diag: Vec<f64>,
    inv_diag: Vec<f64>,
    op: Box<dyn LinearOp>,
}

impl ChebyshevJacobi {
    pub fn new(
        op: Box<dyn LinearOp>,
        diag: Vec<f64>,
        beta: f64,
        degree: usize,
        scale: f64,
    ) -> Result<Self> {
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::SingularDiagonal(i));
        }
        assert!(beta > 0.0 && (0.0..=1.0).contains(&scale));
        let inv_diag = diag.iter().map(|&d| 1.0 / d).collect();
        Ok(ChebyshevJacobi {
            degree,
            beta,
            scale,
            diag,
            inv_diag,
            op,
        })
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha(&self) -> f64 {
        0.5 * self.beta
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn operator(&self) -> &dyn LinearOp {
        &*self.op
    }

    /// Preconditioner action via the standard three-term recurrence: k+1
    /// semi-iterative steps for M z = r starting from z = 0. For k = 0 this
    /// is the damped Jacobi action with omega = 2/(alpha+beta).
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(r.len(), n);
        debug_assert_eq!(z.len(), n);
        let alpha = self.alpha();
        let theta = 0.5 * (self.beta + alpha);
        let delta = 0.5 * (self.beta - alpha);
        let sigma1 = theta / delta;
        let mut rho = 1.0 / sigma1;
        // d = (1/theta) D^{-1} r; z = d.
        let mut d: Vec<f64> = (0..n).map(|i| r[i] * self.inv_diag[i] / theta).collect();
        z.copy_from_slice(&d);
        let mut res = r.to_vec();
        let mut mdz = vec![0.0; n];
        for _ in 0..self.degree {
            // res <- res - M d (keeps res = r - M z).
            self.op.apply(&d, &mut mdz);
            for i in 0..n {
                res[i] -= mdz[i];
            }
            let rho_next = 1.0 / (2.0 * sigma1 - rho);
            for i in 0..n {
                d[i] = rho_next * rho * d[i] + 2.0 * rho_next / delta * res[i] * self.inv_diag[i];
            }
            rho = rho_next;
            for i in 0..n {
                z[i] += d[i];
            }
        }
        util::scale(self.scale, z);
    }
}

/// Choice of the Schur-complement diagonal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagChoice {
    /// diag(B Ahat^{-1} B^T) by m unit-vector solves (size-guarded).
    Exact,
    /// diag(B diag(A)^{-1} B^T) from the assembled sparse B.
    AssembledD,
    /// diag(M_p), fully matrix-free.
    PressureMass,
    /// Element-local diag(B_tau diag(A_tau)^{-1} B_tau^T), matrix-free.
    Local,
}

impl DiagChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagChoice::Exact => "exact",
            DiagChoice::AssembledD => "d",
            DiagChoice::PressureMass => "p",
            DiagChoice::Local => "loc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(DiagChoice::Exact),
            "d" => Some(DiagChoice::AssembledD),
            "p" => Some(DiagChoice::PressureMass),
            "loc" => Some(DiagChoice::Local),
            _ => None,
        }
    }
}

/// A-block action with identity rows at constrained dofs (smoothing mode).
struct ABlockOp {
    op: Arc<StokesOperator>,
}

impl LinearOp for ABlockOp {
    fn len(&self) -> usize {
        self.op.dofmap.n_velocity()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op
            .apply_a(x, y, ApplyMode::Smoothing)
            .expect("sized by construction");
    }
}

/// Inexact Schur complement S~ = B Ahat^{-1} B^T (uses the scaled velocity
/// preconditioner).
pub struct SchurOp {
    op: Arc<StokesOperator>,
    a_hat_inv: Arc<ChebyshevJacobi>,
}

impl SchurOp {
    pub fn new(op: Arc<StokesOperator>, a_hat_inv: Arc<ChebyshevJacobi>) -> Self {
        SchurOp { op, a_hat_inv }
    }
}

impl LinearOp for SchurOp {
    fn len(&self) -> usize {
        self.op.dofmap.n_pressure()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.op.dofmap.n_velocity();
        let mut btp = vec![0.0; n];
        self.op
            .apply_bt(x, &mut btp, ApplyMode::Residual)
            .expect("sized");
        let mut z = vec![0.0; n];
        self.a_hat_inv.apply(&btp, &mut z);
        self.op.apply_b(&z, y, ApplyMode::Residual).expect("sized");
    }
}

/// Symmetric inexact Uzawa smoother for one level.
pub struct UzawaSmoother {
    pub op: Arc<StokesOperator>,
    pub a_hat_inv: Arc<ChebyshevJacobi>,
    pub s_hat_inv: ChebyshevJacobi,
    pub k_a: usize,
    pub k_s: usize,
    pub diag_choice: DiagChoice,
}

/// Execute the smoother setup: build D_A, estimate beta_A, scale the
/// velocity Chebyshev; then build the chosen Schur diagonal, estimate
/// beta_S on S~ = B Ahat^{-1} B^T (each apply uses the already-scaled
/// Ahat^{-1}) and scale the pressure Chebyshev.
///
/// `assembled` is required for [`DiagChoice::AssembledD`] (the sparse B is
/// needed) and ignored otherwise.
pub fn setup_uzawa(
    op: Arc<StokesOperator>,
    k_a: usize,
    k_s: usize,
    diag_choice: DiagChoice,
    assembled: Option<&AssembledSystem>,
) -> Result<UzawaSmoother> {
    // Velocity part.
    let d_a = op.compute_diag_a();
    let a_block = ABlockOp { op: op.clone() };
    let dofmap = op.dofmap.clone();
    let dm = dofmap.clone();
    let zero_constrained = move |v: &mut [f64]| dm.zero_constrained(v);
    let beta_a = estimate_lambda_max(&a_block, &d_a, Some(&zero_constrained))?;
    let sigma = chebyshev_scale(k_a, 3.0);
    let a_hat_inv = Arc::new(ChebyshevJacobi::new(
        Box::new(ABlockOp { op: op.clone() }),
        d_a,
        beta_a,
        k_a,
        sigma,
    )?);

    // Pressure part.
    let d_s = match diag_choice {
        DiagChoice::PressureMass => op.compute_diag_mp(),
        DiagChoice::Local => op.compute_schur_diag_local()?,
        DiagChoice::AssembledD => {
            let sys = assembled.expect("DiagChoice::AssembledD requires an assembled system");
            diag_sd(sys)
        }
        DiagChoice::Exact => {
            let m = dofmap.n_pressure();
            if m > EXACT_SCHUR_GUARD {
                return Err(Error::GuardExceeded {
                    size: m,
                    limit: EXACT_SCHUR_GUARD,
                });
            }
            let schur = SchurOp::new(op.clone(), a_hat_inv.clone());
            let mut d = vec![0.0; m];
            let mut e = vec![0.0; m];
            let mut col = vec![0.0; m];
            for i in 0..m {
                e[i] = 1.0;
                schur.apply(&e, &mut col);
                e[i] = 0.0;
                d[i] = col[i];
            }
            d
        }
    };
    let schur = SchurOp::new(op.clone(), a_hat_inv.clone());
    let dm2 = dofmap.clone();
    let project_mean = move |v: &mut [f64]| pressure_mean_project(&dm2, v);
    let projector: Option<&dyn Fn(&mut [f64])> = if dofmap.pressure_mean_constrained {
        Some(&project_mean)
    } else {
        None
    };
    let beta_s = estimate_lambda_max(&schur, &d_s, projector)?;
    let tau = chebyshev_scale(k_s, 3.0);
    let s_hat_inv = ChebyshevJacobi::new(
        Box::new(SchurOp::new(op.clone(), a_hat_inv.clone())),
        d_s,
        beta_s,
        k_s,
        tau,
    )?;
    Ok(UzawaSmoother {
        op,
        a_hat_inv,
        s_hat_inv,
        k_a,
        k_s,
        diag_choice,
    })
}

impl UzawaSmoother {
    /// One smoothing step x <- x + Khat^{-1} (b - K x), realized as the
    /// three half-steps: predict the velocity, update the pressure from the
    /// predicted divergence residual, then redo the velocity update with
    /// the new pressure (equivalently, correct the first residual by
    /// B^T delta_p).
    pub fn step(&self, x: &mut BlockVector, b: &BlockVector) {
        let op = &self.op;
        let dm = &op.dofmap;
        let n = dm.n_velocity();
        let m = dm.n_pressure();
        let mut au = vec![0.0; n];
        let mut btp = vec![0.0; n];
        let mut r_u = vec![0.0; n];

        // r_u = f - A u - B^T p (residual convention).
        op.apply_a(&x.u, &mut au, ApplyMode::Residual).expect("sized");
        op.apply_bt(&x.p, &mut btp, ApplyMode::Residual).expect("sized");
        for i in 0..n {
            r_u[i] = b.u[i] - au[i] - btp[i];
        }
        dm.zero_constrained(&mut r_u);
        // u* = u + Ahat^{-1} r_u
        let mut w = vec![0.0; n];
        self.a_hat_inv.apply(&r_u, &mut w);
        let mut u_star = x.u.clone();
        util::axpy(1.0, &w, &mut u_star);

        // p+ = p + Shat^{-1} (B u* - g)
        let mut r_p = vec![0.0; m];
        op.apply_b(&u_star, &mut r_p, ApplyMode::Residual).expect("sized");
        for i in 0..m {
            r_p[i] -= b.p[i];
        }
        let mut dp = vec![0.0; m];
        self.s_hat_inv.apply(&r_p, &mut dp);

        // u+ = u + Ahat^{-1} (f - A u - B^T p+) = u + Ahat^{-1}(r_u - B^T dp)
        let mut bt_dp = vec![0.0; n];
        op.apply_bt(&dp, &mut bt_dp, ApplyMode::Residual).expect("sized");
        for i in 0..n {
            r_u[i] -= bt_dp[i];
        }
        let mut du = vec![0.0; n];
        self.a_hat_inv.apply(&r_u, &mut du);
        util::axpy(1.0, &du, &mut x.u);
        util::axpy(1.0, &dp, &mut x.p);
    }
}
