//! Beamforming step: semidefinite relaxation of the CRB-minimizing design
//! under per-user SINR and total-power constraints, then rank-one recovery.

use nalgebra::DMatrix;

use crate::crb::{fisher_bracket, SteeringContext};
use crate::error::{Error, Result};
use crate::linalg::{anti_hermitian_part_over_j, derealify, hermitian_part, realify};
use crate::model::{all_sinrs, sample_covariance, BeamformingMatrix, SystemConfig};
use crate::scalar::{cx, lit, to_f64, CMat, CVec, Real};
use crate::solver::{
    solve_sdp, LinearConstraint, LinearFunctional, LmiConstraint, Relation, SdpProblem, SolveReport, SolveStatus,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SdrOutcome<T: Real> {
    /// Relaxed per-user covariances `W_k` (watts).
    pub covariance_blocks: Vec<CMat<T>>,
    /// Optimal auxiliary `t`, i.e. the relaxed Fisher bracket.
    pub t_value: T,
    /// Rank-one beamformer, rescaled to use the full power budget.
    pub recovered: BeamformingMatrix<T>,
    pub sdr_objective: T,
    /// `(t − bracket(recovered)) / t`; 0 when the relaxation is tight.
    pub recovery_gap: T,
    pub report: SolveReport<T>,
}

/// Coefficient matrices of the Fisher blocks as linear functions of `R_X`:
/// `M11 = tr(Φ R)`, `M12 = tr(Ψ R)`, `M22 = tr(N_r A R)`.
pub(crate) struct BlockFunctionals<T: Real> {
    pub phi: CMat<T>,
    pub psi: CMat<T>,
    pub nr_a: CMat<T>,
}

pub(crate) fn block_functionals<T: Real>(ctx: &SteeringContext<T>) -> BlockFunctionals<T> {
    let nr = cx(lit::<T>(ctx.n_rx() as f64), T::zero());
    let tr_dr = ctx.d_r_diag.sum();
    let tr_drh_dr = ctx.d_r_diag.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    let dt = ctx.d_t_matrix();
    let dt_a = &dt * &ctx.big_a;
    let a_dth = &ctx.big_a * dt.adjoint();
    let dt_a_dth = &ctx.a_dot * ctx.a_dot.adjoint();
    let phi = &dt_a * tr_dr + &a_dth * tr_dr.conj() + dt_a_dth * nr + &ctx.big_a * cx(tr_drh_dr, T::zero());
    let psi = &dt_a * nr + &ctx.big_a * tr_dr.conj();
    let nr_a = &ctx.big_a * nr;
    BlockFunctionals {
        phi: hermitian_part(&phi),
        psi,
        nr_a,
    }
}

/// `tr(C W)` for Hermitian `C` as a functional on realified block `k`.
fn herm_functional<T: Real>(c: &CMat<T>, blocks: std::ops::Range<usize>, scale: T) -> LinearFunctional<T> {
    let coef = realify(&hermitian_part(c)) * (scale * lit(0.5));
    let mut f = LinearFunctional::new();
    for k in blocks {
        f = f.block(k, coef.clone());
    }
    f
}

fn rank_one_channel<T: Real>(h: &CVec<T>) -> CMat<T> {
    h * h.adjoint()
}

/// Builds the relaxed problem in normalized units: `Ŵ_k = W_k / P_T`,
/// functionals divided by `s`. Variables: blocks `0..K` (realified `Ŵ_k`),
/// scalar `0` is `t̂`.
fn build_sdr<T: Real>(
    funcs: &BlockFunctionals<T>,
    channels: &[CVec<T>],
    config: &SystemConfig<T>,
) -> (SdpProblem<T>, T) {
    let k_users = channels.len();
    let n = funcs.phi.nrows();
    let mut p = SdpProblem::new(vec![2 * n; k_users], 1);
    p.objective = LinearFunctional::new().scalar(0, -T::one());

    let gamma = config.sinr_threshold;
    let snr_scale = config.power_budget / config.noise_comm;
    for k in 0..k_users {
        let hk = rank_one_channel(&channels[k]);
        let coef = realify(&hk) * (snr_scale * lit(0.5));
        let mut f = LinearFunctional::new();
        for q in 0..k_users {
            let c = if q == k { coef.clone() } else { &coef * (-gamma) };
            f = f.block(q, c);
        }
        p.constraints.push(LinearConstraint::new(f, Relation::Ge, gamma));
    }
    p.constraints.push(LinearConstraint::new(
        herm_functional(&CMat::identity(n, n), 0..k_users, T::one()),
        Relation::Le,
        T::one(),
    ));

    let psi_re = hermitian_part(&funcs.psi);
    let psi_im = anti_hermitian_part_over_j(&funcs.psi);
    let s = [funcs.phi.norm(), funcs.nr_a.norm(), funcs.psi.norm()]
        .into_iter()
        .fold(T::zero(), |a, b| a.max(b))
        .max(lit(1e-300));
    let inv_s = T::one() / s;
    let m11 = || herm_functional(&funcs.phi, 0..k_users, inv_s);
    let m11_minus_t = || {
        let mut f = m11();
        f.scalars.push((0, -T::one()));
        f
    };
    let re12 = || herm_functional(&psi_re, 0..k_users, inv_s);
    let im12 = || herm_functional(&psi_im, 0..k_users, inv_s);
    let neg_im12 = || herm_functional(&psi_im, 0..k_users, -inv_s);
    let m22 = || herm_functional(&funcs.nr_a, 0..k_users, inv_s);
    // realified [[m11 - t, m12], [conj m12, m22]]
    let lmi = LmiConstraint::new(DMatrix::zeros(4, 4))
        .entry(0, 0, m11_minus_t())
        .entry(2, 2, m11_minus_t())
        .entry(0, 1, re12())
        .entry(2, 3, re12())
        .entry(1, 1, m22())
        .entry(3, 3, m22())
        .entry(0, 3, neg_im12())
        .entry(1, 2, im12());
    p.lmis.push(lmi);
    (p, s)
}

/// Relaxed solve, rank-one recovery and rescale to the power budget.
pub fn solve_beamforming_sdr<T: Real>(
    ctx: &SteeringContext<T>,
    channels: &[CVec<T>],
    config: &SystemConfig<T>,
) -> Result<SdrOutcome<T>> {
    if channels.is_empty() {
        return Err(Error::InvalidProblem("no users".into()));
    }
    let funcs = block_functionals(ctx);
    let (problem, s) = build_sdr(&funcs, channels, config);
    let sol = solve_sdp(&problem, lit(DEFAULT_TOL), DEFAULT_MAX_ITER)?;
    match sol.report.status {
        SolveStatus::Optimal => {}
        SolveStatus::MaxIter if accept_inexact(&sol.report) => {}
        SolveStatus::Infeasible => return Err(sinr_infeasibility(channels, config)),
        other => return Err(Error::Solver(other)),
    }
    let pt = config.power_budget;
    let blocks: Vec<CMat<T>> = sol
        .blocks
        .iter()
        .map(|y| hermitian_part(&derealify(y)) * cx(pt, T::zero()))
        .collect();
    let t_value = sol.scalars[0] * pt * s;

    let recovered = recover_rank_one(&blocks, channels)?;
    let recovered = fill_power_budget(recovered, pt);
    let relaxed_r = blocks.iter().fold(CMat::zeros(ctx.n_tx(), ctx.n_tx()), |acc, w| acc + w);
    let sdr_bracket = fisher_bracket(ctx, &relaxed_r)?;
    let rec_bracket = fisher_bracket(ctx, &sample_covariance(&recovered))?;
    let recovery_gap = if sdr_bracket > T::zero() {
        (sdr_bracket - rec_bracket) / sdr_bracket
    } else {
        T::zero()
    };
    Ok(SdrOutcome {
        covariance_blocks: blocks,
        t_value,
        recovered,
        sdr_objective: t_value,
        recovery_gap,
        report: sol.report,
    })
}

fn accept_inexact<T: Real>(r: &SolveReport<T>) -> bool {
    r.history.last().is_some_and(|h| {
        h.primal_residual < lit(1e-6)
            && h.dual_residual < lit(1e-6)
            && (h.primal_objective - h.dual_objective).abs() < lit::<T>(1e-6) * (T::one() + h.primal_objective.abs())
    })
}

/// `w_k = W_k h_k / √(h_kᴴ W_k h_k)`: keeps every desired-signal power and
/// never increases interference (`w wᴴ ⪯ W_k`).
pub fn recover_rank_one<T: Real>(blocks: &[CMat<T>], channels: &[CVec<T>]) -> Result<BeamformingMatrix<T>> {
    if blocks.len() != channels.len() {
        return Err(Error::InvalidProblem("one covariance block per user required".into()));
    }
    let mut beams = Vec::with_capacity(blocks.len());
    for (k, (w, h)) in blocks.iter().zip(channels).enumerate() {
        let wh = w * h;
        let gain = h.dotc(&wh).re;
        if !(gain > T::zero()) {
            return Err(Error::Degenerate(format!("h_k^H W_k h_k is not positive for user {k}")));
        }
        beams.push(wh * cx(T::one() / gain.sqrt(), T::zero()));
    }
    Ok(BeamformingMatrix::from_beams(&beams))
}

/// Scales all beams by a common factor so that `‖W‖_F² = P_T`. SINRs can
/// only improve, and the Fisher bracket scales linearly.
pub fn fill_power_budget<T: Real>(w: BeamformingMatrix<T>, power_budget: T) -> BeamformingMatrix<T> {
    let p = w.power();
    if !(p > T::zero()) || p >= power_budget {
        return w;
    }
    let c = (power_budget / p).sqrt();
    BeamformingMatrix::new(w.columns * cx(c, T::zero()))
}

/// Minimum total power meeting every SINR target, via the power-minimizing
/// relaxation. Returns `None` when no power level suffices.
pub fn min_sinr_power<T: Real>(channels: &[CVec<T>], config: &SystemConfig<T>) -> Option<(T, BeamformingMatrix<T>)> {
    let k_users = channels.len();
    let n = channels.first()?.len();
    let gamma = config.sinr_threshold;
    // units: Ŵ = W/σ²·g where g normalizes the mean channel gain
    let gain = channels.iter().fold(T::zero(), |a, h| a.max(h.norm_squared()));
    if !(gain > T::zero()) {
        return None;
    }
    let unit = config.noise_comm / gain;
    let mut p = SdpProblem::new(vec![2 * n; k_users], 0);
    p.objective = herm_functional(&CMat::identity(n, n), 0..k_users, T::one());
    for k in 0..k_users {
        let coef = realify(&rank_one_channel(&channels[k])) * (lit::<T>(0.5) / gain);
        let mut f = LinearFunctional::new();
        for q in 0..k_users {
            f = f.block(q, if q == k { coef.clone() } else { &coef * (-gamma) });
        }
        p.constraints.push(LinearConstraint::new(f, Relation::Ge, gamma));
    }
    let sol = solve_sdp(&p, lit(DEFAULT_TOL), DEFAULT_MAX_ITER).ok()?;
    if !(sol.report.status == SolveStatus::Optimal || accept_inexact(&sol.report)) {
        return None;
    }
    let blocks: Vec<CMat<T>> = sol
        .blocks
        .iter()
        .map(|y| hermitian_part(&derealify(y)) * cx(unit, T::zero()))
        .collect();
    let w = recover_rank_one(&blocks, channels).ok()?;
    Some((sol.report.objective * unit, w))
}

fn sinr_infeasibility<T: Real>(channels: &[CVec<T>], config: &SystemConfig<T>) -> Error {
    let gamma = config.sinr_threshold;
    let (min_power, w) = match min_sinr_power(channels, config) {
        Some((p, w)) => (Some(to_f64(p)), w),
        None => {
            // best effort: equal-power matched filters
            let per = (config.power_budget / lit(channels.len() as f64)).sqrt();
            let beams: Vec<CVec<T>> = channels
                .iter()
                .map(|h| h * cx(per / h.norm().max(lit(1e-300)), T::zero()))
                .collect();
            (None, BeamformingMatrix::from_beams(&beams))
        }
    };
    let w = if w.power() > T::zero() {
        BeamformingMatrix::new(&w.columns * cx((config.power_budget / w.power()).sqrt(), T::zero()))
    } else {
        w
    };
    let shortfall = all_sinrs(&w, channels, config.noise_comm)
        .map(|s| s.iter().map(|&v| to_f64((gamma - v).max(T::zero()))).collect())
        .unwrap_or_default();
    Error::InfeasibleSinr { shortfall, min_power }
}
