//! Convex QP `min ½xᵀQx + cᵀx  s.t.  Gx ≤ h` by a Mehrotra primal-dual
//! interior-point method on the reduced normal equations.

use nalgebra::{DMatrix, DVector};

use super::{IterStats, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue_sym, symmetrize};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T: Real> {
    pub hessian: DMatrix<T>,
    pub linear: DVector<T>,
    pub g: DMatrix<T>,
    pub h: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T: Real> {
    pub x: DVector<T>,
    /// Inequality multipliers.
    pub z: DVector<T>,
    pub report: SolveReport<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &DVector<T>) -> T {
        (x.dot(&(&self.hessian * x))) * lit(0.5) + self.linear.dot(x)
    }

    /// Adds `lo ≤ x ≤ hi` rows.
    pub fn with_box(mut self, lo: &DVector<T>, hi: &DVector<T>) -> Self {
        let n = self.dim();
        let m0 = self.g.nrows();
        let mut g = DMatrix::zeros(m0 + 2 * n, n);
        let mut h = DVector::zeros(m0 + 2 * n);
        g.view_mut((0, 0), (m0, n)).copy_from(&self.g);
        h.rows_mut(0, m0).copy_from(&self.h);
        for i in 0..n {
            g[(m0 + i, i)] = T::one();
            h[m0 + i] = hi[i];
            g[(m0 + n + i, i)] = -T::one();
            h[m0 + n + i] = -lo[i];
        }
        self.g = g;
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.hessian.shape() != (n, n) || self.g.ncols() != n || self.g.nrows() != self.h.len() {
            return Err(Error::InvalidProblem("QP dimensions are inconsistent".into()));
        }
        let finite = self
            .hessian
            .iter()
            .chain(self.linear.iter())
            .chain(self.g.iter())
            .chain(self.h.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProblem("QP data must be finite".into()));
        }
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        let scale = self.hessian.amax().max(T::one());
        if asym > lit::<T>(1e-9) * scale {
            return Err(Error::InvalidProblem("QP hessian is not symmetric".into()));
        }
        if n > 0 && min_eigenvalue_sym(&self.hessian) < -lit::<T>(1e-9) * scale {
            return Err(Error::InvalidProblem("QP hessian is not positive semidefinite".into()));
        }
        Ok(())
    }
}

fn max_step<T: Real>(v: &DVector<T>, dv: &DVector<T>) -> T {
    let mut a = T::one();
    for (x, d) in v.iter().zip(dv.iter()) {
        if *d < T::zero() {
            a = a.min(-*x / *d);
        }
    }
    a
}

pub fn solve_qp<T: Real>(p: &QpProblem<T>, tol: T, max_iter: usize) -> Result<QpSolution<T>> {
    p.validate()?;
    let n = p.dim();
    let m = p.h.len();
    let q = symmetrize(&p.hessian);
    let mut x = DVector::<T>::zeros(n);
    let mut s = DVector::<T>::from_fn(m, |i, _| (p.h[i]).max(T::one()));
    let mut z = DVector::<T>::from_element(m, T::one());
    let hnorm = p.h.norm();
    let cnorm = p.linear.norm();
    let infeas_tol = lit::<T>(1e-9);
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut best: Option<(T, DVector<T>, DVector<T>)> = None;
    let mut iterations = 0;

    for iter in 0..=max_iter {
        iterations = iter;
        let rd = &q * &x + &p.linear + p.g.transpose() * &z;
        let rp = &p.g * &x + &s - &p.h;
        let pobj = p.objective(&x);
        // Lagrangian dual value at (x, z)
        let dobj = pobj + z.dot(&(&p.g * &x - &p.h));
        let gap = if m > 0 { s.dot(&z) } else { T::zero() };
        let rel_p = rp.norm() / (T::one() + hnorm);
        let rel_d = rd.norm() / (T::one() + cnorm);
        let rel_gap = gap / (T::one() + pobj.abs());
        history.push(IterStats {
            primal_objective: pobj,
            dual_objective: dobj,
            gap,
            primal_residual: rel_p,
            dual_residual: rel_d,
        });
        let merit = rel_p.max(rel_d).max(rel_gap);
        if best.as_ref().map_or(true, |(b, _, _)| merit < *b) {
            best = Some((merit, x.clone(), z.clone()));
        }
        if rel_p <= tol && rel_d <= tol && rel_gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        // Farkas: Gᵀz ≈ 0, hᵀz < 0
        let hz = p.h.dot(&z);
        if hz < T::zero() && (p.g.transpose() * &z).norm() / (-hz) < infeas_tol && z.amax() > lit(1e6) {
            status = SolveStatus::Infeasible;
            break;
        }
        // recession direction: Qx ≈ 0, Gx ≤ 0, cᵀx < 0
        let cx = p.linear.dot(&x);
        if cx < T::zero() && x.amax() > lit(1e6) {
            let gx = &p.g * &x;
            let pos = gx.iter().fold(T::zero(), |a, v| a.max(*v));
            if (&q * &x).norm() / (-cx) < infeas_tol && pos / (-cx) < lit(1e-6) {
                status = SolveStatus::Unbounded;
                break;
            }
        }
        if iter == max_iter {
            break;
        }
        let mu = if m > 0 { gap / lit(m as f64) } else { T::zero() };

        let w = DVector::from_fn(m, |i, _| z[i] / s[i]);
        let mut kmat = q.clone();
        for i in 0..m {
            let gi = p.g.row(i);
            kmat += gi.transpose() * gi * w[i];
        }
        let reg = lit::<T>(1e-13) * (T::one() + kmat.diagonal().amax());
        for i in 0..n {
            kmat[(i, i)] += reg;
        }
        let lu = kmat.lu();

        let solve = |rc: &DVector<T>| -> Option<(DVector<T>, DVector<T>, DVector<T>)> {
            // Δs = -rp - GΔx,  Δz = S⁻¹(-rc + Z rp + Z G Δx)
            let t = DVector::from_fn(m, |i, _| (z[i] * rp[i] - rc[i]) / s[i]);
            let rhs = -&rd - p.g.transpose() * &t;
            let dx = if n > 0 { lu.solve(&rhs)? } else { DVector::zeros(0) };
            let gdx = &p.g * &dx;
            let ds = -&rp - &gdx;
            let dz = DVector::from_fn(m, |i, _| (-rc[i] + z[i] * rp[i] + z[i] * gdx[i]) / s[i]);
            if dx.iter().chain(dz.iter()).any(|v| !v.is_finite()) {
                return None;
            }
            Some((dx, ds, dz))
        };

        let rc_aff = s.component_mul(&z);
        let Some((_, dsa, dza)) = solve(&rc_aff) else {
            break;
        };
        let alpha_aff = max_step(&s, &dsa).min(max_step(&z, &dza));
        let mu_aff = if m > 0 {
            (&s + &dsa * alpha_aff).dot(&(&z + &dza * alpha_aff)) / lit(m as f64)
        } else {
            T::zero()
        };
        let sigma = if mu > T::zero() {
            let r = (mu_aff / mu).max(T::zero()).min(T::one());
            r * r * r
        } else {
            T::zero()
        };
        let rc = DVector::from_fn(m, |i, _| s[i] * z[i] + dsa[i] * dza[i] - sigma * mu);
        let Some((dx, ds, dz)) = solve(&rc) else {
            break;
        };
        let alpha = (max_step(&s, &ds).min(max_step(&z, &dz)) * lit(0.99)).min(T::one());
        x += &dx * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }

    if status == SolveStatus::MaxIter {
        if let Some((_, bx, bz)) = best {
            x = bx;
            z = bz;
        }
    }
    let objective = p.objective(&x);
    let gx = &p.g * &x;
    let primal_residual = (0..m).fold(T::zero(), |a, i| a.max(gx[i] - p.h[i]));
    let rd = &q * &x + &p.linear + p.g.transpose() * &z;
    let slack = &p.h - &gx;
    let gap = slack.dot(&z).abs();
    let report = SolveReport {
        status,
        objective,
        dual_objective: objective + z.dot(&(&gx - &p.h)),
        primal_residual,
        dual_residual: rd.norm(),
        gap,
        iterations,
        history,
    };
    Ok(QpSolution { x, z, report })
}
