//! Receive-array step: maximize the Fisher bracket over the receive antenna
//! positions for a fixed transmit covariance, by successive convex
//! approximation of the one convex (non-concave) term.
//!
//! With `κ = (2π/λ) cos θ`, `T0 = tr(A R)` and `c = Σ_n d_t[n] (A R)_nn`, the
//! bracket scaled by `M22 = N_r T0` is
//!
//! ```text
//! M22·F(d) = −dᵀE d + fᵀd + M22·gᵀd + κ² N_r T0² ‖d‖² + const
//! ```
//!
//! where `E = κ² T0² J` and the two linear terms cancel. `‖d‖²` is replaced
//! by its tangent `2 d₀ᵀd − ‖d₀‖²`, a global minorant.

use nalgebra::{DMatrix, DVector};

use crate::crb::{fisher_bracket, trace_terms, SteeringContext};
use crate::error::{Error, Result};
use crate::model::{spacing_violations, SystemConfig};
use crate::scalar::{lit, CMat, Real};
use crate::solver::{solve_qp, QpProblem, SolveStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct P21Data<T: Real> {
    /// `κ² T0² J`, rank one.
    pub e: DMatrix<T>,
    /// Linear term coming from `−|M12|²`.
    pub f: DVector<T>,
    /// Linear term of `M11`, multiplied by `M22` in the objective.
    pub linear_coupling: DVector<T>,
    /// Coefficient of `‖d‖²`: `κ² N_r T0²`.
    pub quad_coef: T,
    /// `N_r² T0 tr(D_t A D_tᴴ R) − |N_r tr(D_t A R)|²`.
    pub const_term: T,
    pub m22: T,
    pub center: DVector<T>,
}

impl<T: Real> P21Data<T> {
    fn common(&self, d: &DVector<T>) -> T {
        -d.dot(&(&self.e * d)) + self.f.dot(d) + self.m22 * self.linear_coupling.dot(d) + self.const_term
    }

    /// `M22 · F(d)`, exact.
    pub fn true_objective(&self, d: &DVector<T>) -> T {
        self.common(d) + self.quad_coef * d.norm_squared()
    }

    /// Concave minorant of [`Self::true_objective`], tight at `center`.
    pub fn surrogate(&self, d: &DVector<T>) -> T {
        let c = &self.center;
        self.common(d) + self.quad_coef * (lit::<T>(2.0) * c.dot(d) - c.norm_squared())
    }
}

pub fn assemble_p21<T: Real>(d_r_center: &DVector<T>, ctx: &SteeringContext<T>, r: &CMat<T>) -> P21Data<T> {
    let n_r = d_r_center.len();
    let nr = lit::<T>(n_r as f64);
    let ctx = ctx.with_receive(d_r_center);
    let tt = trace_terms(&ctx, r);
    let kappa = T::two_pi() / ctx.wavelength * ctx.cos_theta;
    let k2 = kappa * kappa;
    let t0 = tt.t0;
    let ar = &ctx.big_a * r;
    let c = (0..ctx.n_tx()).fold(nalgebra::Complex::new(T::zero(), T::zero()), |acc, n| {
        acc + ar[(n, n)] * ctx.d_t[n]
    });
    let two = lit::<T>(2.0);
    let ones = DVector::from_element(n_r, T::one());
    P21Data {
        e: DMatrix::from_element(n_r, n_r, k2 * t0 * t0),
        f: &ones * (two * k2 * nr * t0 * c.re),
        linear_coupling: &ones * (-two * k2 * c.re),
        quad_coef: k2 * nr * t0 * t0,
        const_term: nr * nr * t0 * tt.t2 - k2 * nr * nr * c.norm_sqr(),
        m22: nr * t0,
        center: d_r_center.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaSettings<T> {
    pub rel_tol: T,
    pub max_rounds: usize,
}

impl<T: Real> ScaSettings<T> {
    pub fn receive_default() -> Self {
        Self {
            rel_tol: lit(1e-5),
            max_rounds: 30,
        }
    }

    pub fn user_default() -> Self {
        Self {
            rel_tol: lit(1e-5),
            max_rounds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsOutcome<T: Real> {
    pub d_r: DVector<T>,
    /// Surrogate optimum of every accepted round.
    pub surrogate_values: Vec<T>,
    /// Fisher bracket at the start and after every accepted round.
    pub true_values: Vec<T>,
    pub rounds: usize,
}

/// Pushes a nearly-feasible point back into the spacing polytope.
fn repair<T: Real>(d: &mut DVector<T>, d_min: T, d_max: T) {
    let n = d.len();
    if n == 0 {
        return;
    }
    d[0] = d[0].max(T::zero());
    for i in 1..n {
        d[i] = d[i].max(d[i - 1] + d_min);
    }
    if d[n - 1] > d_max {
        d[n - 1] = d_max;
        for i in (0..n - 1).rev() {
            d[i] = d[i].min(d[i + 1] - d_min);
        }
        d[0] = d[0].max(T::zero());
    }
}

fn sca_qp<T: Real>(data: &P21Data<T>, config: &SystemConfig<T>) -> QpProblem<T> {
    // variables in wavelengths: d = λ x
    let n = data.center.len();
    let lam = config.wavelength;
    let norm = (data.e[(0, 0)] * lam * lam).max(lit(1e-300));
    let e = &data.e * (lam * lam / norm);
    let lin = (&data.f + &data.linear_coupling * data.m22 + &data.center * (lit::<T>(2.0) * data.quad_coef)) * (lam / norm);
    let m = n + 1;
    let mut g = DMatrix::zeros(m, n);
    let mut h = DVector::zeros(m);
    g[(0, 0)] = -T::one();
    g[(1, n - 1)] = T::one();
    h[1] = config.d_max / lam;
    for i in 1..n {
        g[(i + 1, i - 1)] = T::one();
        g[(i + 1, i)] = -T::one();
        h[i + 1] = -config.d_min / lam;
    }
    QpProblem {
        hessian: e * lit::<T>(2.0),
        linear: -lin,
        g,
        h,
    }
}

/// SCA over `d_r` for fixed `R_X`. The true bracket never decreases across
/// accepted rounds.
pub fn solve_bs_positions<T: Real>(
    r: &CMat<T>,
    ctx: &SteeringContext<T>,
    d_r_init: &DVector<T>,
    config: &SystemConfig<T>,
    settings: ScaSettings<T>,
) -> Result<BsOutcome<T>> {
    let violations = spacing_violations(d_r_init, config, lit(1e-9));
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }
    let truth = |d: &DVector<T>| fisher_bracket(&ctx.with_receive(d), r);
    let mut d = d_r_init.clone();
    let mut current = truth(&d)?;
    let mut out = BsOutcome {
        d_r: d.clone(),
        surrogate_values: Vec::new(),
        true_values: vec![current],
        rounds: 0,
    };
    if d.len() < 2 {
        return Ok(out);
    }
    for round in 0..settings.max_rounds {
        let data = assemble_p21(&d, ctx, r);
        if !(data.e[(0, 0)] > T::zero()) {
            break;
        }
        let sol = solve_qp(&sca_qp(&data, config), lit(DEFAULT_TOL), DEFAULT_MAX_ITER)?;
        if !matches!(sol.report.status, SolveStatus::Optimal | SolveStatus::MaxIter) {
            break;
        }
        let mut cand = sol.x * config.wavelength;
        repair(&mut cand, config.d_min, config.d_max);
        let base = data.surrogate(&d);
        let sur = data.surrogate(&cand);
        let next = truth(&cand)?;
        out.rounds = round + 1;
        if next < current {
            break;
        }
        let improvement = (sur - base) / base.abs().max(lit(1e-300));
        d = cand;
        current = next;
        out.surrogate_values.push(sur);
        out.true_values.push(current);
        if improvement < settings.rel_tol {
            break;
        }
    }
    out.d_r = d;
    Ok(out)
}
