//! Alternating optimization over the beamformer, the receive array and the
//! user antenna positions, plus the fixed-position baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::crb::{crb_expanded, crb_general, fisher_bracket, steering_context, CrbParams};
use crate::error::{Error, Result};
use crate::model::{
    all_sinrs, channels_for, sample_covariance, spacing_violations, AntennaLayout, BeamformingMatrix, Position,
    Scenario, SystemConfig,
};
use crate::scalar::{lit, Real};
use crate::subproblems::{solve_beamforming_sdr, solve_bs_positions, solve_user_position, ScaSettings, UserStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AoMode {
    /// Receive array and user antennas both movable.
    FullMa,
    /// Everything fixed; beamformer only.
    Fpa,
    /// Movable receive array, users fixed at their region origin.
    BsMaOnly,
    /// Movable user antennas, receive array fixed.
    UserMaOnly,
}

impl AoMode {
    pub const ALL: [AoMode; 4] = [AoMode::FullMa, AoMode::Fpa, AoMode::BsMaOnly, AoMode::UserMaOnly];

    pub fn name(self) -> &'static str {
        match self {
            AoMode::FullMa => "full-ma",
            AoMode::Fpa => "fpa",
            AoMode::BsMaOnly => "bs-ma",
            AoMode::UserMaOnly => "user-ma",
        }
    }

    pub fn moves_receive_array(self) -> bool {
        matches!(self, AoMode::FullMa | AoMode::BsMaOnly)
    }

    pub fn moves_users(self) -> bool {
        matches!(self, AoMode::FullMa | AoMode::UserMaOnly)
    }
}

impl fmt::Display for AoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "full-ma" | "fullma" | "full" => Ok(AoMode::FullMa),
            "fpa" => Ok(AoMode::Fpa),
            "bs-ma" | "bsmaonly" | "bs-ma-only" => Ok(AoMode::BsMaOnly),
            "user-ma" | "usermaonly" | "user-ma-only" => Ok(AoMode::UserMaOnly),
            other => Err(Error::config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoSettings<T> {
    /// Stop when the fractional CRB decrease falls below this.
    pub epsilon: T,
    pub max_outer: usize,
    pub receive_sca: ScaSettings<T>,
    pub user_sca: ScaSettings<T>,
    /// Solve the per-user position problems on the rayon pool.
    pub parallel_users: bool,
}

impl<T: Real> Default for AoSettings<T> {
    fn default() -> Self {
        Self {
            epsilon: lit(1e-3),
            max_outer: 30,
            receive_sca: ScaSettings::receive_default(),
            user_sca: ScaSettings::user_default(),
            parallel_users: true,
        }
    }
}

/// Starting receive positions. Movable arrays start spread over the whole
/// segment; fixed arrays use a half-wavelength grid, compressed if it would
/// not fit in `[0, d_max]`.
pub fn initial_receive_positions<T: Real>(config: &SystemConfig<T>, mode: AoMode) -> DVector<T> {
    let n = config.n_rx;
    if n <= 1 {
        return DVector::zeros(n);
    }
    let span = lit::<T>((n - 1) as f64);
    let fit = config.d_max / span;
    let spacing = if mode.moves_receive_array() {
        config.d_min.max(fit)
    } else {
        (config.wavelength / lit(2.0)).min(fit)
    };
    DVector::from_fn(n, |i, _| (lit::<T>(i as f64) * spacing).min(config.d_max))
}

pub fn init_state<T: Real>(config: &SystemConfig<T>, mode: AoMode) -> Result<AntennaLayout<T>> {
    config.validate()?;
    let d_r = initial_receive_positions(config, mode);
    AntennaLayout::new(config, d_r, vec![Position::zeros(); config.n_users])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    /// The step ran but did not improve; previous value kept.
    RolledBack,
    /// The subproblem failed; previous value kept.
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T: Real> {
    pub crb: T,
    /// Fisher bracket `M11 − |M12|²/M22` of the recorded state.
    pub t_value: T,
    /// Relaxed optimum of this round's beamforming step (upper bound on `t_value`).
    pub sdr_bound: Option<T>,
    pub beamformer: BeamformingMatrix<T>,
    pub d_r: DVector<T>,
    pub user_positions: Vec<Position<T>>,
    pub sinrs: Vec<T>,
    pub power: T,
    pub w_status: StepStatus,
    pub d_r_status: StepStatus,
    pub user_statuses: Vec<UserStatus>,
    /// Constraint violations found when auditing this record (empty when clean).
    pub violations: Vec<String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace<T: Real> {
    pub mode: AoMode,
    pub initial_layout: AntennaLayout<T>,
    pub records: Vec<IterationRecord<T>>,
    pub converged: bool,
}

impl<T: Real> AoTrace<T> {
    pub fn last(&self) -> &IterationRecord<T> {
        self.records.last().expect("trace has at least one record")
    }

    pub fn crbs(&self) -> Vec<T> {
        self.records.iter().map(|r| r.crb).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_layout(&self, config: &SystemConfig<T>) -> AntennaLayout<T> {
        let last = self.last();
        let mut layout = self.initial_layout.clone();
        layout.d_r = last.d_r.clone();
        layout.user_positions = last.user_positions.clone();
        debug_assert_eq!(layout.d_t.len(), config.n_tx);
        layout
    }
}

fn audit<T: Real>(
    config: &SystemConfig<T>,
    w: &BeamformingMatrix<T>,
    layout: &AntennaLayout<T>,
    sinrs: &[T],
) -> Vec<String> {
    let mut v = Vec::new();
    if w.power() > config.power_budget * lit(1.0 + 1e-6) {
        v.push("power budget exceeded".into());
    }
    let floor = config.sinr_threshold * lit(1.0 - 1e-6);
    for (k, s) in sinrs.iter().enumerate() {
        if *s < floor {
            v.push(format!("user {k} SINR below threshold"));
        }
    }
    v.extend(spacing_violations(&layout.d_r, config, lit(1e-9)));
    let h = config.user_region_half_side * lit(1.0 + 1e-9);
    for (k, u) in layout.user_positions.iter().enumerate() {
        if u.x.abs() > h || u.y.abs() > h {
            v.push(format!("user {k} outside its region"));
        }
    }
    v
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the alternating loop. A beamforming failure in the first round aborts
/// (there is nothing to fall back to); later failures keep the previous block.
pub fn run_algorithm1<T: Real>(
    config: &SystemConfig<T>,
    scenario: &Scenario<T>,
    mode: AoMode,
    settings: &AoSettings<T>,
) -> Result<AoTrace<T>> {
    let mut layout = init_state(config, mode)?;
    if scenario.users.len() != config.n_users {
        return Err(Error::config("scenario user count does not match n_users"));
    }
    let mut params = CrbParams::from_config(config);
    params.reflect_gain = scenario.reflect_gain;
    let mut trace = AoTrace {
        mode,
        initial_layout: layout.clone(),
        records: Vec::new(),
        converged: false,
    };
    let mut current_w: Option<BeamformingMatrix<T>> = None;
    let max_outer = if mode == AoMode::Fpa { 1 } else { settings.max_outer.max(1) };

    for iter in 0..max_outer {
        let started = Instant::now();
        let channels = channels_for(config, scenario, &layout);
        let ctx = steering_context(&layout.d_t, &layout.d_r, params.theta, params.wavelength);

        // (1) beamformer
        let (w, w_status, sdr_bound) = match solve_beamforming_sdr(&ctx, &channels, config) {
            Ok(out) => match &current_w {
                Some(prev) => {
                    let f_new = fisher_bracket(&ctx, &sample_covariance(&out.recovered))?;
                    let f_old = fisher_bracket(&ctx, &sample_covariance(prev))?;
                    if f_new >= f_old {
                        (out.recovered, StepStatus::Accepted, Some(out.t_value))
                    } else {
                        (prev.clone(), StepStatus::RolledBack, Some(out.t_value))
                    }
                }
                None => (out.recovered, StepStatus::Accepted, Some(out.t_value)),
            },
            Err(e) => match &current_w {
                Some(prev) => (prev.clone(), StepStatus::Failed, None),
                None => return Err(e),
            },
        };
        let r = sample_covariance(&w);

        // (2) receive array
        let d_r_status = if mode.moves_receive_array() {
            match solve_bs_positions(&r, &ctx, &layout.d_r, config, settings.receive_sca) {
                Ok(out) if out.d_r != layout.d_r => {
                    layout.d_r = out.d_r;
                    StepStatus::Accepted
                }
                Ok(_) => StepStatus::RolledBack,
                Err(_) => StepStatus::Failed,
            }
        } else {
            StepStatus::Skipped
        };

        // (3) user positions, independent per user
        let user_statuses = if mode.moves_users() {
            let solve = |k: usize| {
                solve_user_position(
                    k,
                    &w,
                    &scenario.users[k],
                    &layout.tx_positions_2d,
                    &layout.user_positions[k],
                    config,
                    settings.user_sca,
                )
            };
            let outcomes: Vec<_> = if settings.parallel_users {
                (0..config.n_users).into_par_iter().map(solve).collect()
            } else {
                (0..config.n_users).map(solve).collect()
            };
            outcomes
                .into_iter()
                .enumerate()
                .map(|(k, o)| {
                    if o.status == UserStatus::Feasible {
                        layout.user_positions[k] = o.position;
                    }
                    o.status
                })
                .collect()
        } else {
            Vec::new()
        };

        let channels = channels_for(config, scenario, &layout);
        let sinrs = all_sinrs(&w, &channels, config.noise_comm)?;
        let crb = crb_expanded(&layout.d_t, &layout.d_r, &r, &params)?;
        let t_value = fisher_bracket(&ctx.with_receive(&layout.d_r), &r)?;
        let violations = audit(config, &w, &layout, &sinrs);
        trace.records.push(IterationRecord {
            crb,
            t_value,
            sdr_bound,
            power: w.power(),
            beamformer: w.clone(),
            d_r: layout.d_r.clone(),
            user_positions: layout.user_positions.clone(),
            sinrs,
            w_status,
            d_r_status,
            user_statuses,
            violations,
            wall_ms: ms_since(started),
        });
        current_w = Some(w);

        if mode == AoMode::Fpa {
            trace.converged = true;
            break;
        }
        if iter > 0 {
            let prev = trace.records[iter - 1].crb;
            let decrease = (prev - crb) / prev;
            if !(decrease >= settings.epsilon) {
                trace.converged = true;
                break;
            }
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalSummary<T: Real> {
    pub crb: T,
    /// Same bound through the explicit target-response formula.
    pub crb_general: T,
    pub sinrs: Vec<T>,
    pub power: T,
    pub outer_iterations: usize,
    pub converged: bool,
    pub d_r: DVector<T>,
    pub user_positions: Vec<Position<T>>,
}

fn rel_diff<T: Real>(a: T, b: T) -> T {
    if a == b {
        return T::zero();
    }
    let d = (a - b).abs() / a.abs().max(b.abs()).max(lit(1e-300));
    // one side infinite: inf/inf
    if d == d {
        d
    } else {
        lit(f64::INFINITY)
    }
}

/// Recomputes the final state from scratch (both CRB formulas, every SINR)
/// and certifies the last trace record against it.
pub fn evaluate_final<T: Real>(
    trace: &AoTrace<T>,
    config: &SystemConfig<T>,
    scenario: &Scenario<T>,
) -> Result<FinalSummary<T>> {
    let last = trace
        .records
        .last()
        .ok_or_else(|| Error::Consistency("empty trace".into()))?;
    let layout = trace.final_layout(config);
    let mut params = CrbParams::from_config(config);
    params.reflect_gain = scenario.reflect_gain;
    let r = sample_covariance(&last.beamformer);
    let crb = crb_expanded(&layout.d_t, &layout.d_r, &r, &params)?;
    let ctx = steering_context(&layout.d_t, &layout.d_r, params.theta, params.wavelength);
    let crb_gen = crb_general(&ctx, &r, &params)?;
    let tol = lit::<T>(1e-6);
    if rel_diff(crb, crb_gen) > tol {
        return Err(Error::Consistency(format!(
            "CRB formulas disagree: {} vs {}",
            crate::scalar::to_f64(crb),
            crate::scalar::to_f64(crb_gen)
        )));
    }
    if rel_diff(crb, last.crb) > tol {
        return Err(Error::Consistency("recorded CRB does not match the final state".into()));
    }
    let channels = channels_for(config, scenario, &layout);
    let sinrs = all_sinrs(&last.beamformer, &channels, config.noise_comm)?;
    if sinrs.len() != last.sinrs.len() || sinrs.iter().zip(&last.sinrs).any(|(a, b)| rel_diff(*a, *b) > tol) {
        return Err(Error::Consistency("recorded SINRs do not match the final state".into()));
    }
    if !last.violations.is_empty() {
        return Err(Error::Consistency(format!("final state violates: {}", last.violations.join("; "))));
    }
    Ok(FinalSummary {
        crb,
        crb_general: crb_gen,
        sinrs,
        power: last.beamformer.power(),
        outer_iterations: trace.records.len(),
        converged: trace.converged,
        d_r: layout.d_r,
        user_positions: layout.user_positions,
    })
}
