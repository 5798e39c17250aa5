//! User-position step: for fixed beamformers, move user `k`'s antenna inside
//! its box to maximize the SINR margin, by SCA on quadratic bounds of the
//! received powers.
//!
//! With `v = Σ_k T_k w_q` and `A = v vᴴ`, the power user `k` receives from
//! beam `q` at position `u` is
//!
//! ```text
//! ς_q(u) = tr A + 2 Σ_{i<j} |A_ij| cos ψ_ij(u),   ψ_ij = ∠A_ij − (2π/λ) g_ijᵀu
//! ```
//!
//! with `g_ij` the difference of the receive path direction factors. Its
//! Hessian is bounded in spectral norm by `τ = 2 (2π/λ)² Σ |A_ij| ‖g_ij‖²`.

use nalgebra::{Matrix2, Vector2};

use crate::model::{transmit_field_response_matrix, BeamformingMatrix, Position, SystemConfig, UserChannelGeometry};
use crate::scalar::{lit, CMat, CVec, Real};
use crate::solver::{max_concave_quadratic_2d, Rect};

use super::bs::ScaSettings;

/// `Σ_k T_k W_q T_kᴴ Σ_kᴴ` for a rank-one `W_q = w wᴴ`.
pub fn path_covariance<T: Real>(
    geom: &UserChannelGeometry<T>,
    tx_positions: &[Position<T>],
    w: &CVec<T>,
    wavelength: T,
) -> CMat<T> {
    let t = transmit_field_response_matrix(geom, tx_positions, wavelength);
    let tw = t * w;
    let v = CVec::from_fn(tw.len(), |i, _| geom.prm_diag[i] * tw[i]);
    &v * v.adjoint()
}

fn pair_terms<T: Real>(u: &Position<T>, a: &CMat<T>, geom: &UserChannelGeometry<T>, wavelength: T) -> (T, Vector2<T>, T) {
    let kappa = T::two_pi() / wavelength;
    let two = lit::<T>(2.0);
    let mut value = (0..a.nrows()).fold(T::zero(), |acc, i| acc + a[(i, i)].re);
    let mut grad = Vector2::zeros();
    let mut tau = T::zero();
    for i in 0..a.nrows() {
        for j in (i + 1)..a.nrows() {
            let aij = a[(i, j)];
            let mag = aij.norm_sqr().sqrt();
            if mag == T::zero() {
                continue;
            }
            let g = geom.rx_direction(i) - geom.rx_direction(j);
            let psi = aij.im.atan2(aij.re) - kappa * g.dot(u);
            value += two * mag * psi.cos();
            grad += g * (two * kappa * mag * psi.sin());
            tau += two * kappa * kappa * mag * g.norm_squared();
        }
    }
    (value, grad, tau)
}

/// `ς(u)` from the path covariance; equals `|h(u)ᴴ w|²`.
pub fn varsigma<T: Real>(u: &Position<T>, a: &CMat<T>, geom: &UserChannelGeometry<T>, wavelength: T) -> T {
    pair_terms(u, a, geom, wavelength).0
}

pub fn varsigma_gradient<T: Real>(u: &Position<T>, a: &CMat<T>, geom: &UserChannelGeometry<T>, wavelength: T) -> Vector2<T> {
    pair_terms(u, a, geom, wavelength).1
}

/// Quadratic bounds of every received power around `center`: an upper bound
/// for interfering beams and a lower bound for the desired beam.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSurrogate<T: Real> {
    pub user: usize,
    pub center: Position<T>,
    /// `ς_q(center)` for every beam `q` (`q = user` is the desired power `η`).
    pub values_at_center: Vec<T>,
    pub grad: Vec<Vector2<T>>,
    /// Curvature bound per beam (`τ_q`; the `user` entry is `δ`).
    pub tau: Vec<T>,
}

impl<T: Real> UserSurrogate<T> {
    pub fn delta(&self) -> T {
        self.tau[self.user]
    }

    fn model(&self, q: usize, u: &Position<T>, sign: T) -> T {
        let du = u - self.center;
        self.values_at_center[q] + self.grad[q].dot(&du) + sign * self.tau[q] * lit(0.5) * du.norm_squared()
    }

    /// `ς_q^ub(u) ≥ ς_q(u)`.
    pub fn upper(&self, q: usize, u: &Position<T>) -> T {
        self.model(q, u, T::one())
    }

    /// `η^lb(u) ≤ η(u)`.
    pub fn eta_lower(&self, u: &Position<T>) -> T {
        self.model(self.user, u, -T::one())
    }

    /// Surrogate SINR margin `η^lb − γ(Σ_{q≠k} ς_q^ub + σ²)`.
    pub fn slack(&self, u: &Position<T>, gamma: T, noise: T) -> T {
        let interf = (0..self.tau.len())
            .filter(|&q| q != self.user)
            .fold(T::zero(), |acc, q| acc + self.upper(q, u));
        self.eta_lower(u) - gamma * (interf + noise)
    }

    /// The slack as `uᵀQu + lᵀu + c` with `Q = −ρ I`.
    fn slack_quadratic(&self, gamma: T, noise: T) -> (Matrix2<T>, Vector2<T>, T) {
        let half = lit::<T>(0.5);
        let mut rho = self.delta() * half;
        let mut g = self.grad[self.user];
        for q in (0..self.tau.len()).filter(|&q| q != self.user) {
            rho += gamma * self.tau[q] * half;
            g -= self.grad[q] * gamma;
        }
        let c0 = self.slack(&self.center, gamma, noise);
        let c = self.center;
        let two = lit::<T>(2.0);
        let lin = g + c * (two * rho);
        let constant = c0 - g.dot(&c) - rho * c.norm_squared();
        (Matrix2::identity() * -rho, lin, constant)
    }
}

pub fn user_surrogate<T: Real>(
    u_center: &Position<T>,
    k: usize,
    w: &BeamformingMatrix<T>,
    geom: &UserChannelGeometry<T>,
    tx_positions: &[Position<T>],
    wavelength: T,
) -> UserSurrogate<T> {
    let mut values = Vec::with_capacity(w.n_users());
    let mut grad = Vec::with_capacity(w.n_users());
    let mut tau = Vec::with_capacity(w.n_users());
    for q in 0..w.n_users() {
        let a = path_covariance(geom, tx_positions, &w.beam(q), wavelength);
        let (v, g, t) = pair_terms(u_center, &a, geom, wavelength);
        values.push(v);
        grad.push(g);
        tau.push(t);
    }
    UserSurrogate {
        user: k,
        center: *u_center,
        values_at_center: values,
        grad,
        tau,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserStatus {
    /// The returned position meets the SINR target.
    Feasible,
    /// No point with nonnegative margin was found; the initial position is kept.
    NoFeasiblePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserOutcome<T: Real> {
    pub position: Position<T>,
    /// True SINR margin at the start and after every round.
    pub slack_trace: Vec<T>,
    pub status: UserStatus,
}

/// True SINR margin `η − γ(Σ_{q≠k} ς_q + σ²)` at `u`.
pub fn true_slack<T: Real>(
    u: &Position<T>,
    k: usize,
    w: &BeamformingMatrix<T>,
    geom: &UserChannelGeometry<T>,
    tx_positions: &[Position<T>],
    config: &SystemConfig<T>,
) -> T {
    let h = crate::model::channel_vector(u, geom, tx_positions, config.wavelength);
    let mut interf = T::zero();
    let mut eta = T::zero();
    for q in 0..w.n_users() {
        let p = h.dotc(&w.columns.column(q)).norm_sqr();
        if q == k {
            eta = p;
        } else {
            interf += p;
        }
    }
    eta - config.sinr_threshold * (interf + config.noise_comm)
}

/// Max-margin SCA over the user's box `[-h, h]²`.
pub fn solve_user_position<T: Real>(
    k: usize,
    w: &BeamformingMatrix<T>,
    geom: &UserChannelGeometry<T>,
    tx_positions: &[Position<T>],
    u_init: &Position<T>,
    config: &SystemConfig<T>,
    settings: ScaSettings<T>,
) -> UserOutcome<T> {
    let rect = Rect::centered(Vector2::zeros(), config.user_region_half_side);
    let gamma = config.sinr_threshold;
    let noise = config.noise_comm;
    let mut u = *u_init;
    let mut slack = true_slack(&u, k, w, geom, tx_positions, config);
    let mut trace = vec![slack];
    for _ in 0..settings.max_rounds {
        let sur = user_surrogate(&u, k, w, geom, tx_positions, config.wavelength);
        let (q, l, c) = sur.slack_quadratic(gamma, noise);
        let (cand, model_value) = max_concave_quadratic_2d(&q, &l, c, &rect);
        let cand_slack = true_slack(&cand, k, w, geom, tx_positions, config);
        if !(cand_slack >= slack) {
            break;
        }
        let scale = sur.values_at_center[k].abs().max(gamma * noise).max(lit(1e-300));
        let improvement = (model_value - slack) / scale;
        u = cand;
        slack = cand_slack;
        trace.push(slack);
        if improvement < settings.rel_tol {
            break;
        }
    }
    if slack >= T::zero() {
        UserOutcome {
            position: u,
            slack_trace: trace,
            status: UserStatus::Feasible,
        }
    } else {
        UserOutcome {
            position: *u_init,
            slack_trace: trace,
            status: UserStatus::NoFeasiblePoint,
        }
    }
}
