//! Constrained maximum-likelihood fitting by Lagrangian Fisher scoring.
//!
//! The model is a set of zero constraints `h(ω) = C_D log(T exp(ω)) = 0` on
//! marginal log-linear parameters, with `ω` the log expected counts. The
//! saddle point of the Lagrangian is found by the scoring update
//!
//! ```text
//! solve (Hᵀ D_μ⁻¹ H) x = Hᵀ D_μ⁻¹ e + h,   e = n − μ,
//! δω = D_μ⁻¹ (e − H x),   τ = −x,   ω ← ω + step · δω
//! ```
//!
//! where `H = D_μ Tᵀ D_{Tμ}⁻¹ C_Dᵀ` is the constraint Jacobian (transposed).
//! The step is halved until the joint residual `‖(e + Hτ, h)‖₂` decreases.
//! Since `Hᵀ1 = 0`, the total `Σ μ` stays at `N` automatically.

use crate::mll::{LabeledParams, MllError, ModelSpec};
use crate::table::{ContingencyTable, TableError};
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("table total must be positive")]
    EmptyTable,
    #[error("table variables do not match model variables: {0}")]
    VariableMismatch(String),
    #[error("invalid setting: {0}")]
    BadSettings(String),
    #[error("log expected counts must be finite")]
    NonFiniteOmega,
    #[error("margin total overflowed or vanished; constraints undefined")]
    NonFiniteMargin,
    #[error("constraint normal matrix is rank deficient; constraints are redundant")]
    RedundantConstraints,
    #[error("operation requires a converged fit")]
    NotConverged,
    #[error(transparent)]
    Mll(#[from] MllError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Tolerances and iteration limits for [`fit`].
#[derive(Clone, Debug)]
pub struct FitSettings {
    /// Convergence bound on `‖h(ω)‖∞`.
    pub tol_constraint: f64,
    /// Convergence bound on the scaled score `‖e + Hτ‖∞ / N`.
    pub tol_score: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Additive smoothing δ for the starting value
    /// `ω⁰ = log((n + δ) N / (N + tδ))`; only the start is smoothed.
    pub start_smoothing: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            tol_constraint: 1e-8,
            tol_score: 1e-6,
            max_iter: 500,
            max_halvings: 10,
            start_smoothing: 0.5,
        }
    }
}

impl FitSettings {
    fn validate(&self) -> Result<(), FitError> {
        let all_pos = self.tol_constraint > 0.0
            && self.tol_score > 0.0
            && self.max_iter > 0
            && self.start_smoothing > 0.0;
        if !all_pos {
            return Err(FitError::BadSettings(
                "tolerances, max_iter and start_smoothing must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted iteration of the scoring loop.
#[derive(Clone, Copy, Debug)]
pub struct IterationStat {
    pub step: f64,
    /// `‖h(ω)‖∞` after the step.
    pub constraint_norm: f64,
    /// `‖e + Hτ‖∞ / N` after the step.
    pub score_norm: f64,
}

/// A constrained maximum-likelihood fit.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// The fitted model (scheme plus zero blocks).
    pub model: ModelSpec,
    /// Observed counts in scheme variable order.
    pub observed: DVector<f64>,
    /// Log expected counts `ω̂`.
    pub omega_hat: DVector<f64>,
    /// Expected counts `μ̂ = exp(ω̂)`.
    pub mu_hat: DVector<f64>,
    /// Fitted probabilities `π̂ = μ̂ / N`.
    pub pi_hat: DVector<f64>,
    /// Lagrange multipliers, one per scalar constraint.
    pub tau_hat: DVector<f64>,
    /// The full labeled parameter vector at `π̂`.
    pub lambda_hat: LabeledParams,
    /// Asymptotic covariance of `ω̂` (converged interior fits only).
    pub cov_omega: Option<DMatrix<f64>>,
    /// Asymptotic covariance of `λ̂` (converged interior fits only).
    pub cov_lambda: Option<DMatrix<f64>>,
    /// Deviance `G² = 2 Σ n log(n/μ̂)`, with `0·log 0 = 0`.
    pub deviance: f64,
    /// Pearson `X² = Σ (n − μ̂)²/μ̂`.
    pub pearson: f64,
    /// Degrees of freedom: the number of scalar constraints `q`.
    pub df: usize,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationStat>,
    /// Settings used for this fit.
    pub settings: FitSettings,
}

impl FitResult {
    /// Multinomial log-likelihood kernel `Σ n log π̂` over observed cells,
    /// with `π̂` normalized by its realized total.
    pub fn loglik(&self) -> f64 {
        let total: f64 = self.pi_hat.sum();
        self.observed
            .iter()
            .zip(self.pi_hat.iter())
            .filter(|(&n, _)| n > 0.0)
            .map(|(&n, &p)| n * (p / total).ln())
            .sum()
    }
}

/// Constraint values `h = C_D log(T exp(ω))`, one entry per scalar zero
/// constraint.
pub fn constraint_value(model: &ModelSpec, omega: &DVector<f64>) -> Result<DVector<f64>, FitError> {
    if omega.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonFiniteOmega);
    }
    let mu = omega.map(f64::exp);
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonFiniteMargin);
    }
    let margins = model.scheme().marginalization_matrix() * &mu;
    if margins.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(FitError::NonFiniteMargin);
    }
    let c_d = model.constrained_contrasts();
    Ok(c_d * margins.map(f64::ln))
}

/// Constraint Jacobian (transposed): the `t × q` matrix
/// `H = D_μ Tᵀ D_{Tμ}⁻¹ C_Dᵀ` with `μ = exp(ω)`.
pub fn constraint_jacobian(
    model: &ModelSpec,
    omega: &DVector<f64>,
) -> Result<DMatrix<f64>, FitError> {
    if omega.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonFiniteOmega);
    }
    let mu = omega.map(f64::exp);
    let t_mat = model.scheme().marginalization_matrix();
    let margins = t_mat * &mu;
    if margins.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(FitError::NonFiniteMargin);
    }
    Ok(jacobian_at(&model.constrained_contrasts(), t_mat, &mu, &margins))
}

/// `D_μ Tᵀ D_{Tμ}⁻¹ Cᵀ` for an arbitrary stack of contrast rows.
fn jacobian_at(
    c_rows: &DMatrix<f64>,
    t_mat: &DMatrix<f64>,
    mu: &DVector<f64>,
    margins: &DVector<f64>,
) -> DMatrix<f64> {
    // scale the rows of Cᵀ by 1/(Tμ), multiply by Tᵀ, scale rows by μ
    let mut ct = c_rows.transpose();
    for (r, mut row) in ct.row_iter_mut().enumerate() {
        row /= margins[r];
    }
    let mut h = t_mat.transpose() * ct;
    for (r, mut row) in h.row_iter_mut().enumerate() {
        row *= mu[r];
    }
    h
}

struct Eval {
    mu: DVector<f64>,
    e: DVector<f64>,
    margins: DVector<f64>,
    h: DVector<f64>,
}

fn eval_point(
    omega: &DVector<f64>,
    n: &DVector<f64>,
    c_d: &DMatrix<f64>,
    t_mat: &DMatrix<f64>,
) -> Option<Eval> {
    let mu = omega.map(f64::exp);
    if mu.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let margins = t_mat * &mu;
    if margins.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return None;
    }
    let h = c_d * margins.map(f64::ln);
    if h.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(Eval { e: n - &mu, mu, margins, h })
}

fn joint_residual(e: &DVector<f64>, h_mat: &DMatrix<f64>, tau: &DVector<f64>, h: &DVector<f64>) -> f64 {
    let score = e + h_mat * tau;
    (score.norm_squared() + h.norm_squared()).sqrt()
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Fits the model to the table by constrained maximum likelihood.
///
/// The table's variables must match the model's by name (any order) and
/// level count. Non-convergence is not an error: the result carries
/// `converged = false` and the iteration trace.
pub fn fit(
    table: &ContingencyTable,
    model: &ModelSpec,
    settings: &FitSettings,
) -> Result<FitResult, FitError> {
    settings.validate()?;
    let scheme = model.scheme();
    let names = scheme.variable_names();
    let table = table
        .reorder(&names)
        .map_err(|e| FitError::VariableMismatch(e.to_string()))?;
    for (tv, sv) in table.variables().iter().zip(scheme.variables()) {
        if tv.levels != sv.levels {
            return Err(FitError::VariableMismatch(format!(
                "variable `{}` has {} levels in the table, {} in the model",
                tv.name, tv.levels, sv.levels
            )));
        }
    }
    let n = table.count_vector();
    let total = n.sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(FitError::EmptyTable);
    }
    let t = n.len();
    let q = model.q();

    if q == 0 {
        // unconstrained multinomial MLE: expected counts are the observed ones
        let mu = n.clone();
        let omega = mu.map(f64::ln);
        let pi = &mu / total;
        return Ok(finish(
            model,
            n,
            omega,
            mu,
            pi,
            DVector::zeros(0),
            1,
            true,
            vec![IterationStat { step: 1.0, constraint_norm: 0.0, score_norm: 0.0 }],
            settings,
        ));
    }

    let c_d = model.constrained_contrasts();
    let t_mat = scheme.marginalization_matrix();

    // additively smoothed start rescaled to N
    let delta = settings.start_smoothing;
    let scale = total / (total + t as f64 * delta);
    let mut omega = n.map(|x| ((x + delta) * scale).ln());
    let mut tau = DVector::zeros(q);

    let mut cur = eval_point(&omega, &n, &c_d, t_mat).ok_or(FitError::NonFiniteMargin)?;
    let mut h_mat = jacobian_at(&c_d, t_mat, &cur.mu, &cur.margins);
    let mut merit = joint_residual(&cur.e, &h_mat, &tau, &cur.h);

    let mut trace: Vec<IterationStat> = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 1..=settings.max_iter {
        let score = &cur.e + &h_mat * &tau;
        if inf_norm(&cur.h) <= settings.tol_constraint
            && inf_norm(&score) / total <= settings.tol_score
        {
            converged = true;
            iterations = iter - 1;
            break;
        }

        // block elimination of the saddle-point system
        let hd = {
            let mut hd = h_mat.clone();
            for (r, mut row) in hd.row_iter_mut().enumerate() {
                row /= cur.mu[r];
            }
            hd // D_μ⁻¹ H
        };
        let w = h_mat.transpose() * &hd;
        let chol = nalgebra::Cholesky::new(w).ok_or(FitError::RedundantConstraints)?;
        let rhs = hd.transpose() * &cur.e + &cur.h;
        let x = chol.solve(&rhs);
        let delta_omega = {
            let resid = &cur.e - &h_mat * &x;
            DVector::from_iterator(t, resid.iter().zip(cur.mu.iter()).map(|(&r, &m)| r / m))
        };
        let tau_new = -x;

        // step halving on the joint residual
        let mut step = 1.0f64;
        let mut halvings = 0usize;
        let accepted = loop {
            let omega_try = &omega + &delta_omega * step;
            if let Some(next) = eval_point(&omega_try, &n, &c_d, t_mat) {
                let h_try = jacobian_at(&c_d, t_mat, &next.mu, &next.margins);
                let merit_try = joint_residual(&next.e, &h_try, &tau_new, &next.h);
                if merit_try < merit || halvings >= settings.max_halvings {
                    break Some((omega_try, next, h_try, merit_try));
                }
            } else if halvings >= settings.max_halvings + 50 {
                // cannot even reach a finite point
                break None;
            }
            step *= 0.5;
            halvings += 1;
        };
        let Some((omega_new, next, h_new, merit_new)) = accepted else {
            iterations = iter;
            break;
        };
        omega = omega_new;
        cur = next;
        h_mat = h_new;
        tau = tau_new;
        merit = merit_new;
        iterations = iter;
        let score_new = &cur.e + &h_mat * &tau;
        trace.push(IterationStat {
            step,
            constraint_norm: inf_norm(&cur.h),
            score_norm: inf_norm(&score_new) / total,
        });
        if iter == settings.max_iter {
            let score = &cur.e + &h_mat * &tau;
            if inf_norm(&cur.h) <= settings.tol_constraint
                && inf_norm(&score) / total <= settings.tol_score
            {
                converged = true;
            }
        }
    }

    let mu = cur.mu.clone();
    let pi = &mu / total;
    Ok(finish(model, n, omega, mu, pi, tau, iterations, converged, trace, settings))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &ModelSpec,
    n: DVector<f64>,
    omega: DVector<f64>,
    mu: DVector<f64>,
    pi: DVector<f64>,
    tau: DVector<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<IterationStat>,
    settings: &FitSettings,
) -> FitResult {
    let scheme = model.scheme();
    let t_mat = scheme.marginalization_matrix();
    let c_full = scheme.contrast_matrix();

    // λ̂ = C log(T μ̂); contrasts cancel the N factor
    let margins = t_mat * &mu;
    let lambda_values = c_full * margins.map(f64::ln);
    let lambda_hat = LabeledParams { labels: scheme.labels().to_vec(), values: lambda_values };

    let interior = converged && mu.iter().all(|&x| x > 0.0 && x.is_finite());
    let (cov_omega, cov_lambda) = if interior {
        let f_inv_block = {
            // F^{ωω} = D_μ⁻¹ − D_μ⁻¹ H W⁻¹ Hᵀ D_μ⁻¹
            let mut f = DMatrix::zeros(mu.len(), mu.len());
            for i in 0..mu.len() {
                f[(i, i)] = 1.0 / mu[i];
            }
            if model.q() > 0 {
                let h_mat = jacobian_at(&model.constrained_contrasts(), t_mat, &mu, &margins);
                let mut hd = h_mat.clone();
                for (r, mut row) in hd.row_iter_mut().enumerate() {
                    row /= mu[r];
                }
                let w = h_mat.transpose() * &hd;
                if let Some(chol) = nalgebra::Cholesky::new(w) {
                    let sol = chol.solve(&hd.transpose());
                    f -= &hd * sol;
                }
            }
            f
        };
        let h_sat = jacobian_at(c_full, t_mat, &mu, &margins);
        let cov_l = h_sat.transpose() * &f_inv_block * &h_sat;
        (Some(f_inv_block), Some(cov_l))
    } else {
        (None, None)
    };

    let deviance = 2.0
        * n.iter()
            .zip(mu.iter())
            .filter(|(&ni, _)| ni > 0.0)
            .map(|(&ni, &mi)| ni * (ni / mi).ln())
            .sum::<f64>();
    let pearson = n
        .iter()
        .zip(mu.iter())
        .map(|(&ni, &mi)| {
            let d = ni - mi;
            if d == 0.0 { 0.0 } else { d * d / mi }
        })
        .sum::<f64>();

    FitResult {
        model: model.clone(),
        observed: n,
        omega_hat: omega,
        mu_hat: mu,
        pi_hat: pi,
        tau_hat: tau,
        lambda_hat,
        cov_omega,
        cov_lambda,
        deviance,
        pearson,
        df: model.q(),
        iterations,
        converged,
        trace,
        settings: settings.clone(),
    }
}

/// Studentized estimates `λ̂ / √diag(cov λ̂)`, aligned with the parameter
/// labels. Entries with (numerically) zero variance — in particular the
/// constrained blocks — are reported as `None`.
pub fn studentize(result: &FitResult) -> Result<Vec<Option<f64>>, FitError> {
    if !result.converged {
        return Err(FitError::NotConverged);
    }
    let cov = result.cov_lambda.as_ref().ok_or(FitError::NotConverged)?;
    let max_var = (0..cov.nrows()).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);
    let floor = 1e-8 * max_var.max(f64::MIN_POSITIVE);
    Ok(result
        .lambda_hat
        .values
        .iter()
        .enumerate()
        .map(|(i, &est)| {
            let var = cov[(i, i)];
            if var > floor {
                Some(est / var.sqrt())
            } else {
                None
            }
        })
        .collect())
}

/// Goodness-of-fit statistics referred to chi-squared on `df = q`.
#[derive(Clone, Copy, Debug)]
pub struct GoodnessOfFit {
    pub deviance: f64,
    pub pearson: f64,
    pub df: usize,
    /// Upper-tail p-value of the deviance; `None` when `df = 0`.
    pub p_deviance: Option<f64>,
    /// Upper-tail p-value of the Pearson statistic; `None` when `df = 0`.
    pub p_pearson: Option<f64>,
}

pub fn goodness_of_fit(result: &FitResult) -> Result<GoodnessOfFit, FitError> {
    if !result.converged {
        return Err(FitError::NotConverged);
    }
    let tail = |stat: f64| -> Option<f64> {
        if result.df == 0 {
            return None;
        }
        let dist = ChiSquared::new(result.df as f64).ok()?;
        Some(dist.sf(stat))
    };
    Ok(GoodnessOfFit {
        deviance: result.deviance,
        pearson: result.pearson,
        df: result.df,
        p_deviance: tail(result.deviance),
        p_pearson: tail(result.pearson),
    })
}
