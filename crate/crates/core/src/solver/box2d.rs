//! Exact maximization of a concave quadratic over an axis-aligned rectangle.

use nalgebra::{Matrix2, Vector2};

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T: Real> {
    pub lo: Vector2<T>,
    pub hi: Vector2<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(lo: Vector2<T>, hi: Vector2<T>) -> Self {
        Self { lo, hi }
    }

    /// `[c - h, c + h]²`.
    pub fn centered(center: Vector2<T>, half_side: T) -> Self {
        let h = Vector2::new(half_side, half_side);
        Self {
            lo: center - h,
            hi: center + h,
        }
    }

    pub fn contains(&self, p: &Vector2<T>, tol: T) -> bool {
        (0..2).all(|i| p[i] >= self.lo[i] - tol && p[i] <= self.hi[i] + tol)
    }

    pub fn clamp(&self, p: &Vector2<T>) -> Vector2<T> {
        Vector2::new(p[0].max(self.lo[0]).min(self.hi[0]), p[1].max(self.lo[1]).min(self.hi[1]))
    }
}

/// Maximizes `xᵀQx + lᵀx + c` over `rect` for negative semidefinite `Q`.
///
/// Checks the interior stationary point (when `Q` is definite) and the exact
/// maximizer on each of the four edges; returns the best.
pub fn max_concave_quadratic_2d<T: Real>(quad: &Matrix2<T>, lin: &Vector2<T>, c: T, rect: &Rect<T>) -> (Vector2<T>, T) {
    let q = (quad + quad.transpose()) * lit::<T>(0.5);
    let f = |x: &Vector2<T>| x.dot(&(q * x)) + lin.dot(x) + c;
    let mut best = rect.lo;
    let mut best_val = f(&best);
    let mut consider = |x: Vector2<T>| {
        let v = f(&x);
        if v > best_val {
            best = x;
            best_val = v;
        }
    };

    let det = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
    let scale = q.abs().max();
    if det > lit::<T>(1e-14) * scale * scale {
        // ∇ = 2Qx + l = 0
        if let Some(inv) = q.try_inverse() {
            let x = -(inv * lin) * lit::<T>(0.5);
            if rect.contains(&x, T::zero()) {
                consider(x);
            }
        }
    }

    // Edges: one coordinate fixed, maximize a 1D concave quadratic in the other.
    for fixed_axis in 0..2 {
        let free = 1 - fixed_axis;
        for &val in &[rect.lo[fixed_axis], rect.hi[fixed_axis]] {
            // g(t) = a t² + b t + const
            let a = q[(free, free)];
            let b = lit::<T>(2.0) * q[(free, fixed_axis)] * val + lin[free];
            let lo = rect.lo[free];
            let hi = rect.hi[free];
            let mut candidates = vec![lo, hi];
            if a < T::zero() {
                let t = -b / (lit::<T>(2.0) * a);
                candidates.push(t.max(lo).min(hi));
            }
            for t in candidates {
                let mut x = Vector2::zeros();
                x[fixed_axis] = val;
                x[free] = t;
                consider(x);
            }
        }
    }
    (best, best_val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn negative_identity_peaks_at_origin() {
        let rect = Rect::centered(Vector2::zeros(), 1.0);
        let (x, v) = max_concave_quadratic_2d(&(-Matrix2::identity()), &Vector2::zeros(), 3.5, &rect);
        assert!(x.norm() < 1e-15);
        assert_eq!(v, 3.5);
    }

    #[test]
    fn zero_quad_hits_a_corner() {
        let rect = Rect::new(Vector2::new(-1.0, 2.0), Vector2::new(3.0, 5.0));
        let (x, v) = max_concave_quadratic_2d(&Matrix2::zeros(), &Vector2::new(1.0, -2.0), 0.0, &rect);
        assert_eq!(x, Vector2::new(3.0, 2.0));
        assert_eq!(v, -1.0);
    }

    #[test]
    fn boundary_maximizer_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let b = Matrix2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let q = -(b * b.transpose()) - Matrix2::identity() * 0.01;
            // stationary point far outside the box
            let lin = Vector2::new(5.0 + rng.random::<f64>(), -4.0 - rng.random::<f64>());
            let rect = Rect::new(Vector2::new(-0.3, -0.2), Vector2::new(0.4, 0.5));
            let (x, v) = max_concave_quadratic_2d(&q, &lin, 0.0, &rect);
            assert!(rect.contains(&x, 0.0));
            let f = |p: Vector2<f64>| p.dot(&(q * p)) + lin.dot(&p);
            let steps = 1000;
            let mut grid_best = f64::NEG_INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    let p = Vector2::new(
                        rect.lo[0] + (rect.hi[0] - rect.lo[0]) * i as f64 / steps as f64,
                        rect.lo[1] + (rect.hi[1] - rect.lo[1]) * j as f64 / steps as f64,
                    );
                    grid_best = grid_best.max(f(p));
                }
            }
            assert!(v >= grid_best - 1e-12, "{v} < {grid_best}");
            assert!(v - grid_best <= 1e-6, "grid too far: {v} vs {grid_best}");
        }
    }
}
