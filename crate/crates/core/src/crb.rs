//! Steering vectors and the CRB of the target direction.
//!
//! [`crb_expanded`] is the production path: it works on the four trace
//! blocks `M11, M12, M21, M22` and never forms the `N_r × N_t` target
//! response. [`crb_general`] builds `G(θ)` and its derivative explicitly and
//! is kept as a cross-check, as is the finite-difference [`crb_fd_oracle`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::trace_of_product;
use crate::scalar::{cis, cx, lit, CMat, CVec, Cx, Real};

/// Fisher brackets at or below this fraction of [`bracket_reference`] map to
/// an infinite CRB.
pub const BRACKET_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SteeringContext<T: Real> {
    pub a: CVec<T>,
    pub b: CVec<T>,
    pub a_dot: CVec<T>,
    pub b_dot: CVec<T>,
    /// `A = a aᴴ`.
    pub big_a: CMat<T>,
    /// Diagonal of `D_t = j (2π/λ) diag(d_t) cos θ`.
    pub d_t_diag: CVec<T>,
    /// Diagonal of `D_r`.
    pub d_r_diag: CVec<T>,
    pub cos_theta: T,
    pub d_t: DVector<T>,
    pub d_r: DVector<T>,
    pub theta: T,
    pub wavelength: T,
}

impl<T: Real> SteeringContext<T> {
    pub fn n_tx(&self) -> usize {
        self.a.len()
    }

    pub fn n_rx(&self) -> usize {
        self.b.len()
    }

    pub fn d_t_matrix(&self) -> CMat<T> {
        CMat::from_diagonal(&self.d_t_diag)
    }

    pub fn d_r_matrix(&self) -> CMat<T> {
        CMat::from_diagonal(&self.d_r_diag)
    }

    /// Same transmit side and angle, different receive positions.
    pub fn with_receive(&self, d_r: &DVector<T>) -> Self {
        steering_context(&self.d_t, d_r, self.theta, self.wavelength)
    }

    /// `(2π/λ)² cos² θ`, the factor every receive-position term carries.
    pub fn aperture_scale(&self) -> T {
        let c = T::two_pi() / self.wavelength * self.cos_theta;
        c * c
    }
}

pub fn steering_vector<T: Real>(d: &DVector<T>, theta: T, wavelength: T) -> CVec<T> {
    let k = T::two_pi() / wavelength * theta.sin();
    CVec::from_fn(d.len(), |n, _| cis(k * d[n]))
}

pub fn steering_context<T: Real>(d_t: &DVector<T>, d_r: &DVector<T>, theta: T, wavelength: T) -> SteeringContext<T> {
    let a = steering_vector(d_t, theta, wavelength);
    let b = steering_vector(d_r, theta, wavelength);
    let cos_theta = theta.cos();
    let scale = T::two_pi() / wavelength * cos_theta;
    let d_t_diag = CVec::from_fn(d_t.len(), |n, _| cx(T::zero(), scale * d_t[n]));
    let d_r_diag = CVec::from_fn(d_r.len(), |n, _| cx(T::zero(), scale * d_r[n]));
    let a_dot = a.component_mul(&d_t_diag);
    let b_dot = b.component_mul(&d_r_diag);
    let big_a = &a * a.adjoint();
    SteeringContext {
        a,
        b,
        a_dot,
        b_dot,
        big_a,
        d_t_diag,
        d_r_diag,
        cos_theta,
        d_t: d_t.clone(),
        d_r: d_r.clone(),
        theta,
        wavelength,
    }
}

/// The 2×2 block matrix whose Schur complement `M11 - |M12|²/M22` is the
/// Fisher bracket of the direction estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimBlocks<T> {
    pub m11: Cx<T>,
    pub m12: Cx<T>,
    pub m21: Cx<T>,
    pub m22: Cx<T>,
}

impl<T: Real> FimBlocks<T> {
    pub fn schur(&self) -> T {
        self.m11.re - self.m12.norm_sqr() / self.m22.re
    }
}

/// Trace sums that every block is built from.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TraceTerms<T> {
    /// `tr(A R)`
    pub t0: T,
    /// `tr(D_t A R)`
    pub t1: Cx<T>,
    /// `tr(D_t A D_tᴴ R)`
    pub t2: T,
    /// `tr(D_r)`
    pub tr_dr: Cx<T>,
    /// `tr(D_rᴴ D_r)`
    pub tr_drh_dr: T,
    pub n_rx: T,
}

pub(crate) fn trace_terms<T: Real>(ctx: &SteeringContext<T>, r: &CMat<T>) -> TraceTerms<T> {
    let ar = &ctx.big_a * r;
    let t0 = ar.trace().re;
    let t1 = (0..ctx.n_tx()).fold(cx(T::zero(), T::zero()), |acc, n| acc + ctx.d_t_diag[n] * ar[(n, n)]);
    // D_t A D_tᴴ = ȧ ȧᴴ
    let t2 = ctx.a_dot.dotc(&(r * &ctx.a_dot)).re;
    let tr_dr = ctx.d_r_diag.sum();
    let tr_drh_dr = ctx.d_r_diag.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
    TraceTerms {
        t0,
        t1,
        t2,
        tr_dr,
        tr_drh_dr,
        n_rx: lit(ctx.n_rx() as f64),
    }
}

pub fn fim_blocks<T: Real>(ctx: &SteeringContext<T>, r: &CMat<T>) -> Result<FimBlocks<T>> {
    let tt = trace_terms(ctx, r);
    let nr = cx(tt.n_rx, T::zero());
    let t0 = cx(tt.t0, T::zero());
    let m11 = tt.t1 * tt.tr_dr
        + cx(tt.t2 * tt.n_rx, T::zero())
        + cx(tt.t0 * tt.tr_drh_dr, T::zero())
        + tt.t1.conj() * tt.tr_dr.conj();
    let m12 = nr * tt.t1 + tt.tr_dr.conj() * t0;
    let m22 = nr * t0;
    if !(m22.re > T::zero()) {
        return Err(Error::Degenerate("M22 = N_r tr(A R_X) is not positive".into()));
    }
    Ok(FimBlocks {
        m11,
        m12,
        m21: m12.conj(),
        m22,
    })
}

/// `M11 − |M12|²/M22` for covariance `r`.
pub fn fisher_bracket<T: Real>(ctx: &SteeringContext<T>, r: &CMat<T>) -> Result<T> {
    fim_blocks(ctx, r).map(|b| b.schur())
}

/// Angle-independent magnitude of the Fisher bracket:
/// `N_r tr(A R) (2π/λ)² (max d_t² + max d_r²)`. Zero only for zero aperture.
pub fn bracket_reference<T: Real>(d_t: &DVector<T>, d_r: &DVector<T>, nr_t0: T, wavelength: T) -> T {
    let k = T::two_pi() / wavelength;
    let sq_max = |d: &DVector<T>| d.iter().fold(T::zero(), |m, &x| m.max(x * x));
    nr_t0.abs() * k * k * (sq_max(d_t) + sq_max(d_r))
}

/// Maps a Fisher bracket to the CRB. Brackets at or below
/// `BRACKET_FLOOR · reference` (cancellation noise) give `+∞`.
pub fn crb_from_bracket<T: Real>(bracket: T, reference: T, reflect_gain: T, noise_radar: T, frame_len: usize) -> T {
    let floor = lit::<T>(BRACKET_FLOOR) * reference;
    if !(bracket > floor) {
        return lit(f64::INFINITY);
    }
    noise_radar / (lit::<T>(2.0) * reflect_gain * lit::<T>(frame_len as f64) * bracket)
}

#[derive(Debug, Clone, Copy)]
pub struct CrbParams<T> {
    pub theta: T,
    pub wavelength: T,
    pub reflect_gain: T,
    pub noise_radar: T,
    pub frame_len: usize,
}

impl<T: Real> CrbParams<T> {
    pub fn from_config(config: &crate::model::SystemConfig<T>) -> Self {
        Self {
            theta: config.target_angle,
            wavelength: config.wavelength,
            reflect_gain: config.reflect_gain(),
            noise_radar: config.noise_radar,
            frame_len: config.frame_len,
        }
    }
}

fn check_covariance<T: Real>(r: &CMat<T>) -> Result<()> {
    if !(r.trace().re > T::zero()) {
        return Err(Error::Degenerate("transmit covariance has zero trace".into()));
    }
    Ok(())
}

/// CRB through the trace-block (expanded) form.
pub fn crb_expanded<T: Real>(d_t: &DVector<T>, d_r: &DVector<T>, r: &CMat<T>, p: &CrbParams<T>) -> Result<T> {
    check_covariance(r)?;
    let ctx = steering_context(d_t, d_r, p.theta, p.wavelength);
    let blocks = fim_blocks(&ctx, r)?;
    Ok(crb_from_bracket(
        blocks.schur(),
        bracket_reference(d_t, d_r, blocks.m22.re, p.wavelength),
        p.reflect_gain,
        p.noise_radar,
        p.frame_len,
    ))
}

/// `G = α b aᴴ`, with `α = |α|` (its phase does not enter the bound).
fn target_response<T: Real>(a: &CVec<T>, b: &CVec<T>, alpha: T) -> CMat<T> {
    b * a.adjoint() * cx(alpha, T::zero())
}

/// Evaluates `σ²/(2L(tr(ĠᴴĠR) − |tr(ĠᴴGR)|²/tr(GᴴGR)))` with `G`, `Ġ` carrying α.
fn crb_from_responses<T: Real>(g: &CMat<T>, g_dot: &CMat<T>, r: &CMat<T>, reference: T, p: &CrbParams<T>) -> T {
    let gh_g = g.adjoint() * g;
    let gdh_g = g_dot.adjoint() * g;
    let gdh_gd = g_dot.adjoint() * g_dot;
    let t_gg = trace_of_product(&gh_g, r).re;
    let t_dg = trace_of_product(&gdh_g, r);
    let t_dd = trace_of_product(&gdh_gd, r).re;
    let bracket = t_dd - t_dg.norm_sqr() / t_gg;
    // the bracket here already carries |α|²
    let scaled = bracket / p.reflect_gain;
    crb_from_bracket(scaled, reference, p.reflect_gain, p.noise_radar, p.frame_len)
}

/// CRB through the explicit target-response form.
pub fn crb_general<T: Real>(ctx: &SteeringContext<T>, r: &CMat<T>, p: &CrbParams<T>) -> Result<T> {
    check_covariance(r)?;
    let alpha = p.reflect_gain.sqrt();
    let g = target_response(&ctx.a, &ctx.b, alpha);
    let g_dot = (&ctx.b_dot * ctx.a.adjoint() + &ctx.b * ctx.a_dot.adjoint()) * cx(alpha, T::zero());
    let nr_t0 = trace_of_product(&(g.adjoint() * &g), r).re / p.reflect_gain;
    let reference = bracket_reference(&ctx.d_t, &ctx.d_r, nr_t0, p.wavelength);
    Ok(crb_from_responses(&g, &g_dot, r, reference, p))
}

/// Same as [`crb_general`] with `Ġ` replaced by a central difference of step `h`.
pub fn crb_fd_oracle<T: Real>(d_t: &DVector<T>, d_r: &DVector<T>, r: &CMat<T>, p: &CrbParams<T>, h: T) -> Result<T> {
    check_covariance(r)?;
    if !(h > T::zero()) {
        return Err(Error::InvalidProblem("finite-difference step must be positive".into()));
    }
    let alpha = p.reflect_gain.sqrt();
    let g_at = |theta: T| {
        target_response(
            &steering_vector(d_t, theta, p.wavelength),
            &steering_vector(d_r, theta, p.wavelength),
            alpha,
        )
    };
    let g = g_at(p.theta);
    let g_dot = (g_at(p.theta + h) - g_at(p.theta - h)) * cx(T::one() / (h + h), T::zero());
    let nr_t0 = trace_of_product(&(g.adjoint() * &g), r).re / p.reflect_gain;
    let reference = bracket_reference(d_t, d_r, nr_t0, p.wavelength);
    Ok(crb_from_responses(&g, &g_dot, r, reference, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_cov(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
        let w = CMat::from_fn(n, rank, |_, _| cx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &w * w.adjoint()
    }

    fn params(theta: f64) -> CrbParams<f64> {
        CrbParams {
            theta,
            wavelength: 0.05,
            reflect_gain: 2.5e-3,
            noise_radar: 1e-3,
            frame_len: 64,
        }
    }

    fn ula(n: usize, spacing: f64) -> DVector<f64> {
        DVector::from_fn(n, |i, _| i as f64 * spacing)
    }

    #[test]
    fn broadside_steering() {
        let ctx = steering_context(&ula(3, 0.025), &ula(2, 0.03), 0.0, 0.05);
        assert!(ctx.a.iter().chain(ctx.b.iter()).all(|z| (z - cx(1.0, 0.0)).norm() < 1e-15));
        for n in 0..3 {
            assert!((ctx.d_t_diag[n] - cx(0.0, 2.0 * PI / 0.05 * 0.025 * n as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_phase_arithmetic() {
        let ctx = steering_context(&ula(4, 0.025), &ula(2, 0.025), PI / 3.0, 0.05);
        for n in 0..4 {
            let expect = n as f64 * PI * (PI / 3.0).sin();
            assert!((ctx.a[n] - cis(expect)).norm() < 1e-12);
        }
        assert!((ctx.big_a.trace().re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let theta = rng.random_range(-1.2..1.2);
            let d_t = ula(5, 0.025);
            let ctx = steering_context(&d_t, &ula(3, 0.04), theta, 0.05);
            let h = 1e-6;
            let fd = (steering_vector(&d_t, theta + h, 0.05) - steering_vector(&d_t, theta - h, 0.05)) / cx(2.0 * h, 0.0);
            let rel = (&fd - &ctx.a_dot).norm() / ctx.a_dot.norm().max(1e-300);
            assert!(rel < 1e-6, "{rel}");
        }
    }

    #[test]
    fn endfire_gives_infinite_crb() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_cov(3, 2, &mut rng);
        let mut p = params(PI / 2.0);
        p.theta = PI / 2.0;
        let ctx = steering_context(&ula(3, 0.025), &ula(3, 0.03), p.theta, p.wavelength);
        let general = crb_general(&ctx, &r, &p).unwrap();
        let expanded = crb_expanded(&ula(3, 0.025), &ula(3, 0.03), &r, &p).unwrap();
        assert!(general.is_infinite() && expanded.is_infinite());
    }

    #[test]
    fn general_and_expanded_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let nt = rng.random_range(1..7);
            let nr = rng.random_range(1..7);
            let d_t = ula(nt, 0.025);
            let d_r = DVector::from_fn(nr, |_, _| rng.random_range(0.0..0.2));
            let p = params(rng.random_range(-1.3..1.3));
            let r = random_cov(nt, rng.random_range(1..=nt), &mut rng);
            let ctx = steering_context(&d_t, &d_r, p.theta, p.wavelength);
            let g = crb_general(&ctx, &r, &p).unwrap();
            let e = crb_expanded(&d_t, &d_r, &r, &p).unwrap();
            if g.is_finite() {
                assert!((g - e).abs() <= 1e-8 * e, "{g} vs {e}");
            }
        }
    }

    #[test]
    fn crb_scales_with_frame_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = random_cov(4, 2, &mut rng);
        let d_t = ula(4, 0.025);
        let d_r = ula(3, 0.07);
        let p = params(0.4);
        let base = crb_expanded(&d_t, &d_r, &r, &p).unwrap();
        let p2 = CrbParams { frame_len: 128, ..p };
        assert!((crb_expanded(&d_t, &d_r, &r, &p2).unwrap() - base / 2.0).abs() <= 1e-12 * base);
        let scaled = &r * cx(3.0, 0.0);
        assert!((crb_expanded(&d_t, &d_r, &scaled, &p).unwrap() - base / 3.0).abs() <= 1e-12 * base);
    }

    #[test]
    fn single_receive_antenna_uses_transmit_aperture_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = random_cov(4, 3, &mut rng);
        let d_t = ula(4, 0.025);
        let d_r = DVector::from_vec(vec![0.0]);
        let ctx = steering_context(&d_t, &d_r, 0.3, 0.05);
        assert_eq!(ctx.d_r_diag[0], cx(0.0, 0.0));
        let blocks = fim_blocks(&ctx, &r).unwrap();
        let tt = trace_terms(&ctx, &r);
        let expect = tt.t2 - tt.t1.norm_sqr() / tt.t0;
        assert!((blocks.schur() - expect).abs() <= 1e-10 * expect.abs());
    }

    #[test]
    fn zero_receive_positions_leave_only_transmit_term_in_m11() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = random_cov(3, 2, &mut rng);
        let ctx = steering_context(&ula(3, 0.025), &DVector::zeros(4), 0.5, 0.05);
        let b = fim_blocks(&ctx, &r).unwrap();
        let tt = trace_terms(&ctx, &r);
        assert!((b.m11.re - tt.t2 * 4.0).abs() <= 1e-12 * b.m11.re);
    }

    #[test]
    fn fim_blocks_are_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let nt = rng.random_range(2..6);
            let r = random_cov(nt, 2, &mut rng);
            let d_r = DVector::from_fn(3, |_, _| rng.random_range(0.0..0.2));
            let ctx = steering_context(&ula(nt, 0.025), &d_r, rng.random_range(-1.0..1.0), 0.05);
            let b = fim_blocks(&ctx, &r).unwrap();
            assert_eq!(b.m21, b.m12.conj());
            assert!(b.m11.im.abs() <= 1e-10 * b.m11.re.abs());
            assert!(b.m12.norm_sqr() <= b.m11.re * b.m22.re * (1.0 + 1e-10));
            // eigenvalues of the 2x2 Hermitian block
            let tr = b.m11.re + b.m22.re;
            let det = b.m11.re * b.m22.re - b.m12.norm_sqr();
            let lmin = tr / 2.0 - ((tr / 2.0).powi(2) - det).max(0.0).sqrt();
            assert!(lmin >= -1e-9 * tr);
            assert!(b.schur() >= -1e-9 * b.m11.re);
        }
    }

    #[test]
    fn zero_covariance_is_degenerate() {
        let r = CMat::<f64>::zeros(3, 3);
        let err = crb_expanded(&ula(3, 0.025), &ula(2, 0.03), &r, &params(0.2)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn fd_oracle_tracks_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = random_cov(4, 2, &mut rng);
        let d_t = ula(4, 0.025);
        let d_r = ula(3, 0.05);
        let p = params(0.0);
        let ctx = steering_context(&d_t, &d_r, p.theta, p.wavelength);
        let exact = crb_general(&ctx, &r, &p).unwrap();
        let fd = crb_fd_oracle(&d_t, &d_r, &r, &p, 1e-6).unwrap();
        assert!((fd - exact).abs() <= 1e-7 * exact);
    }
}
