//! Primal-dual path-following SDP solver (HKM direction, Mehrotra
//! predictor-corrector, infeasible start).
//!
//! The user-facing [`SdpProblem`] has symmetric PSD matrix blocks, free scalars,
//! linear (in)equalities and affine LMIs. It is lowered to the standard form
//!
//! ```text
//! min Σ⟨C_j, X_j⟩ + c_fᵀx_f   s.t.  Σ⟨A_ij, X_j⟩ + B_i x_f = b_i,  X_j ⪰ 0
//! ```
//!
//! where inequalities get `1×1` slack blocks and each LMI gets its own slack
//! block tied to the affine map entry by entry.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::{IterStats, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{inner, max_step_to_boundary, min_eigenvalue_sym, symmetrize};
use crate::scalar::{lit, Real};

/// `Σ_b ⟨C_b, X_b⟩ + Σ_i c_i x_i`. Block coefficients are symmetrized on use.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional<T: Real> {
    pub blocks: Vec<(usize, DMatrix<T>)>,
    pub scalars: Vec<(usize, T)>,
}

impl<T: Real> Default for LinearFunctional<T> {
    fn default() -> Self {
        Self {
            blocks: Vec::new(),
            scalars: Vec::new(),
        }
    }
}

impl<T: Real> LinearFunctional<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(mut self, idx: usize, coef: DMatrix<T>) -> Self {
        self.blocks.push((idx, coef));
        self
    }

    pub fn scalar(mut self, idx: usize, coef: T) -> Self {
        self.scalars.push((idx, coef));
        self
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            blocks: self.blocks.iter().map(|(i, m)| (*i, m * c)).collect(),
            scalars: self.scalars.iter().map(|(i, v)| (*i, *v * c)).collect(),
        }
    }

    pub fn eval(&self, blocks: &[DMatrix<T>], scalars: &DVector<T>) -> T {
        let mut acc = T::zero();
        for (i, m) in &self.blocks {
            acc += inner(m, &blocks[*i]);
        }
        for (i, c) in &self.scalars {
            acc += *c * scalars[*i];
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T: Real> {
    pub lhs: LinearFunctional<T>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Real> LinearConstraint<T> {
    pub fn new(lhs: LinearFunctional<T>, relation: Relation, rhs: T) -> Self {
        Self { lhs, relation, rhs }
    }

    /// Amount by which the constraint is violated (0 when satisfied).
    pub fn violation(&self, blocks: &[DMatrix<T>], scalars: &DVector<T>) -> T {
        let v = self.lhs.eval(blocks, scalars) - self.rhs;
        match self.relation {
            Relation::Eq => v.abs(),
            Relation::Le => v.max(T::zero()),
            Relation::Ge => (-v).max(T::zero()),
        }
    }
}

/// `constant + Σ entries ⪰ 0`, where each entry `(p, q, φ)` with `p ≤ q`
/// adds `φ(X, x)` at positions `(p, q)` and `(q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiConstraint<T: Real> {
    pub dim: usize,
    pub constant: DMatrix<T>,
    pub entries: Vec<(usize, usize, LinearFunctional<T>)>,
}

impl<T: Real> LmiConstraint<T> {
    pub fn new(constant: DMatrix<T>) -> Self {
        Self {
            dim: constant.nrows(),
            constant,
            entries: Vec::new(),
        }
    }

    pub fn entry(mut self, p: usize, q: usize, f: LinearFunctional<T>) -> Self {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        self.entries.push((p, q, f));
        self
    }

    pub fn eval(&self, blocks: &[DMatrix<T>], scalars: &DVector<T>) -> DMatrix<T> {
        let mut m = symmetrize(&self.constant);
        for (p, q, f) in &self.entries {
            let v = f.eval(blocks, scalars);
            m[(*p, *q)] += v;
            if p != q {
                m[(*q, *p)] += v;
            }
        }
        m
    }
}

/// Minimize `objective` over PSD blocks of sizes `block_dims` and
/// `n_scalars` free scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem<T: Real> {
    pub block_dims: Vec<usize>,
    pub n_scalars: usize,
    pub objective: LinearFunctional<T>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub lmis: Vec<LmiConstraint<T>>,
}

impl<T: Real> SdpProblem<T> {
    pub fn new(block_dims: Vec<usize>, n_scalars: usize) -> Self {
        Self {
            block_dims,
            n_scalars,
            objective: LinearFunctional::new(),
            constraints: Vec::new(),
            lmis: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_fn = |f: &LinearFunctional<T>, what: &str| -> Result<()> {
            for (b, m) in &f.blocks {
                let d = *self.block_dims.get(*b).ok_or_else(|| {
                    Error::InvalidProblem(format!("{what}: block index {b} out of range"))
                })?;
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::InvalidProblem(format!("{what}: coefficient for block {b} has wrong shape")));
                }
                if m.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidProblem(format!("{what}: non-finite coefficient")));
                }
            }
            for (i, c) in &f.scalars {
                if *i >= self.n_scalars || !c.is_finite() {
                    return Err(Error::InvalidProblem(format!("{what}: bad scalar term {i}")));
                }
            }
            Ok(())
        };
        if self.block_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidProblem("zero-sized PSD block".into()));
        }
        check_fn(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check_fn(&c.lhs, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidProblem(format!("constraint {i}: non-finite right-hand side")));
            }
        }
        for (l, lmi) in self.lmis.iter().enumerate() {
            if lmi.constant.nrows() != lmi.dim || lmi.constant.ncols() != lmi.dim || lmi.dim == 0 {
                return Err(Error::InvalidProblem(format!("lmi {l}: constant has wrong shape")));
            }
            for (p, q, f) in &lmi.entries {
                if *q >= lmi.dim || p > q {
                    return Err(Error::InvalidProblem(format!("lmi {l}: entry ({p}, {q}) out of range")));
                }
                check_fn(f, &format!("lmi {l}"))?;
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint, LMI or block cone at the point.
    pub fn max_violation(&self, blocks: &[DMatrix<T>], scalars: &DVector<T>) -> T {
        let mut v = T::zero();
        for c in &self.constraints {
            v = v.max(c.violation(blocks, scalars));
        }
        for lmi in &self.lmis {
            v = v.max(-min_eigenvalue_sym(&lmi.eval(blocks, scalars)));
        }
        for b in blocks {
            v = v.max(-min_eigenvalue_sym(b));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution<T: Real> {
    pub blocks: Vec<DMatrix<T>>,
    pub scalars: DVector<T>,
    /// Multipliers of `constraints`, in the order given.
    pub duals: DVector<T>,
    pub report: SolveReport<T>,
}

// ---------------------------------------------------------------------------
// standard form

struct Row<T: Real> {
    blocks: Vec<(usize, DMatrix<T>)>,
    free: Vec<(usize, T)>,
    b: T,
}

struct Standard<T: Real> {
    dims: Vec<usize>,
    n_free: usize,
    c: Vec<DMatrix<T>>,
    c_free: DVector<T>,
    b: DVector<T>,
    /// Per block: `(row, A_ij)`.
    by_block: Vec<Vec<(usize, DMatrix<T>)>>,
    /// Dense `B`, rows × free.
    b_free: DMatrix<T>,
    /// Original row norms (rows are stored normalized).
    row_scale: Vec<T>,
    /// Standard-form row index of each user constraint (None if dropped).
    user_rows: Vec<Option<usize>>,
    cost_scale: T,
    n_user_blocks: usize,
}

fn unit_sym<T: Real>(d: usize, p: usize, q: usize) -> DMatrix<T> {
    let mut e = DMatrix::zeros(d, d);
    if p == q {
        e[(p, p)] = T::one();
    } else {
        let half = lit::<T>(0.5);
        e[(p, q)] = half;
        e[(q, p)] = half;
    }
    e
}

fn push_functional<T: Real>(row: &mut Row<T>, f: &LinearFunctional<T>, sign: T) {
    for (b, m) in &f.blocks {
        let m = symmetrize(m) * sign;
        if let Some(existing) = row.blocks.iter_mut().find(|(i, _)| i == b) {
            existing.1 += m;
        } else {
            row.blocks.push((*b, m));
        }
    }
    for (i, c) in &f.scalars {
        if let Some(existing) = row.free.iter_mut().find(|(j, _)| j == i) {
            existing.1 += *c * sign;
        } else {
            row.free.push((*i, *c * sign));
        }
    }
}

fn lower<T: Real>(p: &SdpProblem<T>) -> Result<Standard<T>> {
    let mut dims = p.block_dims.clone();
    let mut rows: Vec<Row<T>> = Vec::new();
    let mut row_of_user = Vec::with_capacity(p.constraints.len());

    for con in &p.constraints {
        let mut row = Row {
            blocks: Vec::new(),
            free: Vec::new(),
            b: con.rhs,
        };
        push_functional(&mut row, &con.lhs, T::one());
        let slack_sign = match con.relation {
            Relation::Eq => None,
            Relation::Le => Some(T::one()),
            Relation::Ge => Some(-T::one()),
        };
        if let Some(s) = slack_sign {
            row.blocks.push((dims.len(), DMatrix::from_element(1, 1, s)));
            dims.push(1);
        }
        row_of_user.push(rows.len());
        rows.push(row);
    }
    for lmi in &p.lmis {
        let z = dims.len();
        dims.push(lmi.dim);
        let constant = symmetrize(&lmi.constant);
        for q in 0..lmi.dim {
            for pp in 0..=q {
                let mut row = Row {
                    blocks: vec![(z, unit_sym(lmi.dim, pp, q))],
                    free: Vec::new(),
                    b: constant[(pp, q)],
                };
                for (ep, eq, f) in &lmi.entries {
                    if *ep == pp && *eq == q {
                        push_functional(&mut row, f, -T::one());
                    }
                }
                rows.push(row);
            }
        }
    }

    // normalize rows, dropping empty ones
    let eps = lit::<T>(1e-300);
    let mut kept = Vec::new();
    let mut new_index = vec![None; rows.len()];
    let mut row_scale = Vec::new();
    for (i, mut row) in rows.into_iter().enumerate() {
        let mut nrm2 = T::zero();
        for (_, m) in &row.blocks {
            nrm2 += inner(m, m);
        }
        for (_, c) in &row.free {
            nrm2 += *c * *c;
        }
        let nrm = nrm2.sqrt();
        if !(nrm > eps) {
            if row.b.abs() > T::zero() {
                return Err(Error::InvalidProblem(format!(
                    "constraint row {i} has no variables but a nonzero right-hand side"
                )));
            }
            continue;
        }
        let inv = T::one() / nrm;
        for (_, m) in row.blocks.iter_mut() {
            *m *= inv;
        }
        for (_, c) in row.free.iter_mut() {
            *c *= inv;
        }
        row.b *= inv;
        new_index[i] = Some(kept.len());
        row_scale.push(nrm);
        kept.push(row);
    }

    let m = kept.len();
    let mut by_block: Vec<Vec<(usize, DMatrix<T>)>> = vec![Vec::new(); dims.len()];
    let mut b_free = DMatrix::zeros(m, p.n_scalars);
    let mut b = DVector::zeros(m);
    for (i, row) in kept.into_iter().enumerate() {
        b[i] = row.b;
        for (j, c) in row.free {
            b_free[(i, j)] += c;
        }
        for (blk, a) in row.blocks {
            by_block[blk].push((i, a));
        }
    }

    let mut c: Vec<DMatrix<T>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut c_free = DVector::zeros(p.n_scalars);
    for (blk, m) in &p.objective.blocks {
        c[*blk] += symmetrize(m);
    }
    for (i, v) in &p.objective.scalars {
        c_free[*i] += *v;
    }
    let mut cost_scale: T = c_free.norm();
    for cj in &c {
        cost_scale = cost_scale.max(cj.norm());
    }
    let cost_scale = cost_scale.max(T::one());
    for cj in c.iter_mut() {
        *cj /= cost_scale;
    }
    c_free /= cost_scale;

    Ok(Standard {
        user_rows: row_of_user.iter().map(|&r| new_index[r]).collect(),
        n_user_blocks: p.block_dims.len(),
        dims,
        n_free: p.n_scalars,
        c,
        c_free,
        b,
        by_block,
        b_free,
        row_scale,
        cost_scale,
    })
}

// ---------------------------------------------------------------------------
// iteration

struct Iterate<T: Real> {
    x: Vec<DMatrix<T>>,
    s: Vec<DMatrix<T>>,
    y: DVector<T>,
    xf: DVector<T>,
}

impl<T: Real> Clone for Iterate<T> {
    fn clone(&self) -> Self {
        Self {
            x: self.x.clone(),
            s: self.s.clone(),
            y: self.y.clone(),
            xf: self.xf.clone(),
        }
    }
}

struct Residuals<T: Real> {
    rp: DVector<T>,
    rd: Vec<DMatrix<T>>,
    rf: DVector<T>,
}

impl<T: Real> Standard<T> {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply_a(&self, x: &[DMatrix<T>]) -> DVector<T> {
        let mut out = DVector::zeros(self.m());
        for (j, rows) in self.by_block.iter().enumerate() {
            for (i, a) in rows {
                out[*i] += inner(a, &x[j]);
            }
        }
        out
    }

    fn apply_at(&self, y: &DVector<T>, j: usize) -> DMatrix<T> {
        let d = self.dims[j];
        let mut out = DMatrix::zeros(d, d);
        for (i, a) in &self.by_block[j] {
            out += a * y[*i];
        }
        out
    }

    fn residuals(&self, it: &Iterate<T>) -> Residuals<T> {
        let rp = &self.b - self.apply_a(&it.x) - &self.b_free * &it.xf;
        let rd = (0..self.dims.len())
            .map(|j| &self.c[j] - self.apply_at(&it.y, j) - &it.s[j])
            .collect();
        let rf = &self.c_free - self.b_free.transpose() * &it.y;
        Residuals { rp, rd, rf }
    }

    fn pobj(&self, it: &Iterate<T>) -> T {
        let mut v = self.c_free.dot(&it.xf);
        for (c, x) in self.c.iter().zip(&it.x) {
            v += inner(c, x);
        }
        v
    }

    fn n_total(&self) -> T {
        lit(self.dims.iter().sum::<usize>() as f64)
    }
}

fn complementarity<T: Real>(x: &[DMatrix<T>], s: &[DMatrix<T>]) -> T {
    x.iter().zip(s).fold(T::zero(), |acc, (a, b)| acc + inner(a, b))
}

fn frob2<T: Real>(ms: &[DMatrix<T>]) -> T {
    ms.iter().fold(T::zero(), |acc, m| acc + m.norm_squared())
}

/// Factored Newton system for one iterate.
struct Newton<'a, T: Real> {
    sf: &'a Standard<T>,
    x: &'a [DMatrix<T>],
    s_inv: Vec<DMatrix<T>>,
    lu: Option<LU<T, Dyn, Dyn>>,
}

struct Direction<T: Real> {
    dx: Vec<DMatrix<T>>,
    ds: Vec<DMatrix<T>>,
    dy: DVector<T>,
    dxf: DVector<T>,
}

impl<'a, T: Real> Newton<'a, T> {
    fn new(sf: &'a Standard<T>, it: &'a Iterate<T>, s_chol: &[Cholesky<T, Dyn>]) -> Option<Self> {
        let m = sf.m();
        let nf = sf.n_free;
        let s_inv: Vec<DMatrix<T>> = s_chol.iter().map(|c| symmetrize(&c.inverse())).collect();
        let mut schur = DMatrix::<T>::zeros(m, m);
        for (j, rows) in sf.by_block.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let xj = &it.x[j];
            let sij = &s_inv[j];
            if sf.dims[j] == 1 {
                let f = xj[(0, 0)] * sij[(0, 0)];
                for (i, ai) in rows {
                    for (k, ak) in rows {
                        schur[(*i, *k)] += ai[(0, 0)] * ak[(0, 0)] * f;
                    }
                }
                continue;
            }
            for (k, ak) in rows {
                let g = xj * ak * sij;
                for (i, ai) in rows {
                    if i <= k {
                        schur[(*i, *k)] += inner(ai, &g);
                    }
                }
            }
        }
        // fill lower triangle from the upper one
        for k in 0..m {
            for i in (k + 1)..m {
                schur[(i, k)] = schur[(k, i)];
            }
        }
        let dim = m + nf;
        let lu = if dim == 0 {
            None
        } else {
            let mut kkt = DMatrix::<T>::zeros(dim, dim);
            let max_diag = (0..m).fold(T::zero(), |acc, i| acc.max(schur[(i, i)]));
            let reg = lit::<T>(1e-14) * max_diag.max(T::one());
            kkt.view_mut((0, 0), (m, m)).copy_from(&schur);
            for i in 0..m {
                kkt[(i, i)] += reg;
            }
            kkt.view_mut((0, m), (m, nf)).copy_from(&sf.b_free);
            kkt.view_mut((m, 0), (nf, m)).copy_from(&sf.b_free.transpose());
            let lu = kkt.lu();
            if !lu.is_invertible() {
                return None;
            }
            Some(lu)
        };
        Some(Self {
            sf,
            x: &it.x,
            s_inv,
            lu,
        })
    }

    fn solve_kkt(&self, ry: &DVector<T>, rf: &DVector<T>) -> Option<(DVector<T>, DVector<T>)> {
        let m = self.sf.m();
        let nf = self.sf.n_free;
        let Some(lu) = &self.lu else {
            return Some((DVector::zeros(0), DVector::zeros(0)));
        };
        let mut rhs = DVector::zeros(m + nf);
        rhs.rows_mut(0, m).copy_from(ry);
        rhs.rows_mut(m, nf).copy_from(rf);
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((sol.rows(0, m).into_owned(), sol.rows(m, nf).into_owned()))
    }

    /// Solves the Newton system with complementarity right-hand side `rc`
    /// (the target for `ΔX + sym(X ΔS S⁻¹)`).
    fn solve(&self, res: &Residuals<T>, rc: &[DMatrix<T>]) -> Option<Direction<T>> {
        let sf = self.sf;
        let h: Vec<DMatrix<T>> = (0..sf.dims.len())
            .map(|j| &rc[j] - symmetrize(&(&self.x[j] * &res.rd[j] * &self.s_inv[j])))
            .collect();
        let rhs_y = &res.rp - sf.apply_a(&h);
        let (mut dy, mut dxf) = self.solve_kkt(&rhs_y, &res.rf)?;
        let mut dx = Vec::with_capacity(h.len());
        let mut ds = Vec::with_capacity(h.len());
        for (j, hj) in h.into_iter().enumerate() {
            let aty = sf.apply_at(&dy, j);
            ds.push(&res.rd[j] - &aty);
            dx.push(hj + symmetrize(&(&self.x[j] * aty * &self.s_inv[j])));
        }
        // iterative refinement against the primal and free-variable equations
        for _ in 0..2 {
            let ep = &res.rp - sf.apply_a(&dx) - &sf.b_free * &dxf;
            let ef = &res.rf - sf.b_free.transpose() * &dy;
            let (cy, cf) = self.solve_kkt(&ep, &ef)?;
            dy += &cy;
            dxf += &cf;
            for j in 0..dx.len() {
                let aty = sf.apply_at(&cy, j);
                dx[j] += symmetrize(&(&self.x[j] * &aty * &self.s_inv[j]));
                ds[j] -= aty;
            }
        }
        Some(Direction { dx, ds, dy, dxf })
    }
}

fn step_length<T: Real>(chols: &[Cholesky<T, Dyn>], d: &[DMatrix<T>], frac: T) -> T {
    let mut alpha = T::one();
    for (c, dj) in chols.iter().zip(d) {
        if let Some(a) = max_step_to_boundary(c, dj) {
            alpha = alpha.min(frac * a);
        }
    }
    alpha
}

fn cholesky_all<T: Real>(ms: &[DMatrix<T>]) -> Option<Vec<Cholesky<T, Dyn>>> {
    ms.iter().map(|m| Cholesky::new(symmetrize(m))).collect()
}

/// Solves an SDP to relative tolerance `tol`.
///
/// `Optimal` means the relative primal/dual residuals and the relative
/// duality gap are all below `tol`. On `MaxIter` the best iterate seen is
/// returned.
pub fn solve_sdp<T: Real>(p: &SdpProblem<T>, tol: T, max_iter: usize) -> Result<SdpSolution<T>> {
    p.validate()?;
    let sf = lower(p)?;
    let m = sf.m();
    let n = sf.n_total();

    let bnorm = sf.b.norm();
    let cnorm = (frob2(&sf.c) + sf.c_free.norm_squared()).sqrt();
    let xi = lit::<T>(10.0).max(n.sqrt()).max(sf.b.amax() + T::one());
    let eta = lit::<T>(10.0).max(n.sqrt()).max(cnorm + T::one());
    let mut it = Iterate {
        x: sf.dims.iter().map(|&d| DMatrix::identity(d, d) * xi).collect(),
        s: sf.dims.iter().map(|&d| DMatrix::identity(d, d) * eta).collect(),
        y: DVector::zeros(m),
        xf: DVector::zeros(sf.n_free),
    };

    let infeas_tol = lit::<T>(1e-7);
    let mut history = Vec::new();
    let mut best: Option<(T, Iterate<T>)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;

    for iter in 0..=max_iter {
        iterations = iter;
        let res = sf.residuals(&it);
        let pobj = sf.pobj(&it);
        let dobj = sf.b.dot(&it.y);
        let xs = complementarity(&it.x, &it.s);
        let dres = (frob2(&res.rd) + res.rf.norm_squared()).sqrt();
        let rel_p = res.rp.norm() / (T::one() + bnorm);
        let rel_d = dres / (T::one() + cnorm);
        let rel_gap = (pobj - dobj).abs().max(xs) / (T::one() + pobj.abs() + dobj.abs());
        history.push(IterStats {
            primal_objective: pobj * sf.cost_scale,
            dual_objective: dobj * sf.cost_scale,
            gap: xs * sf.cost_scale,
            primal_residual: rel_p,
            dual_residual: rel_d,
        });
        let merit = rel_p.max(rel_d).max(rel_gap);
        if best.as_ref().map_or(true, |(b, _)| merit < *b) {
            best = Some((merit, it.clone()));
        }
        if rel_p <= tol && rel_d <= tol && rel_gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        // infeasibility certificates
        if dobj > T::zero() {
            let cert = ((0..sf.dims.len())
                .map(|j| (&sf.c[j] - &res.rd[j]).norm_squared())
                .fold(T::zero(), |a, b| a + b)
                + (&sf.c_free - &res.rf).norm_squared())
            .sqrt();
            if cert / dobj < infeas_tol {
                status = SolveStatus::Infeasible;
                break;
            }
        }
        if pobj < T::zero() {
            let cert = (&sf.b - &res.rp).norm();
            if cert / (-pobj) < infeas_tol {
                status = SolveStatus::Unbounded;
                break;
            }
        }
        if iter == max_iter {
            break;
        }

        let (Some(x_chol), Some(s_chol)) = (cholesky_all(&it.x), cholesky_all(&it.s)) else {
            break;
        };
        let Some(newton) = Newton::new(&sf, &it, &s_chol) else {
            break;
        };
        let mu = xs / n;

        // predictor
        let rc_aff: Vec<DMatrix<T>> = it.x.iter().map(|x| -x).collect();
        let Some(aff) = newton.solve(&res, &rc_aff) else {
            break;
        };
        let ap = step_length(&x_chol, &aff.dx, T::one());
        let ad = step_length(&s_chol, &aff.ds, T::one());
        let mut mu_aff = T::zero();
        for j in 0..sf.dims.len() {
            mu_aff += inner(&(&it.x[j] + &aff.dx[j] * ap), &(&it.s[j] + &aff.ds[j] * ad));
        }
        mu_aff /= n;
        let ratio = (mu_aff / mu).max(T::zero()).min(T::one());
        let sigma = ratio * ratio * ratio;

        // corrector
        let rc: Vec<DMatrix<T>> = (0..sf.dims.len())
            .map(|j| {
                &newton.s_inv[j] * (sigma * mu)
                    - &it.x[j]
                    - symmetrize(&(&aff.dx[j] * &aff.ds[j] * &newton.s_inv[j]))
            })
            .collect();
        let Some(dir) = newton.solve(&res, &rc) else {
            break;
        };
        let frac = lit::<T>(0.95);
        let ap = step_length(&x_chol, &dir.dx, frac);
        let ad = step_length(&s_chol, &dir.ds, frac);
        for j in 0..sf.dims.len() {
            it.x[j] = symmetrize(&(&it.x[j] + &dir.dx[j] * ap));
            it.s[j] = symmetrize(&(&it.s[j] + &dir.ds[j] * ad));
        }
        it.xf += &dir.dxf * ap;
        it.y += &dir.dy * ad;
    }

    if status == SolveStatus::MaxIter {
        if let Some((_, b)) = best {
            it = b;
        }
    }
    Ok(finish(p, &sf, it, status, iterations, history))
}

fn finish<T: Real>(
    p: &SdpProblem<T>,
    sf: &Standard<T>,
    it: Iterate<T>,
    status: SolveStatus,
    iterations: usize,
    history: Vec<IterStats<T>>,
) -> SdpSolution<T> {
    let blocks: Vec<DMatrix<T>> = it.x[..sf.n_user_blocks].to_vec();
    let scalars = it.xf.clone();
    let duals = DVector::from_iterator(
        sf.user_rows.len(),
        sf.user_rows.iter().map(|r| match r {
            Some(i) => it.y[*i] * sf.cost_scale / sf.row_scale[*i],
            None => T::zero(),
        }),
    );
    let res = sf.residuals(&it);
    let objective = p.objective.eval(&blocks, &scalars);
    let dual_objective = sf.b.dot(&it.y) * sf.cost_scale;
    let dres = (frob2(&res.rd) + res.rf.norm_squared()).sqrt() * sf.cost_scale;
    let primal_residual = p.max_violation(&blocks, &scalars);
    SdpSolution {
        report: SolveReport {
            status,
            objective,
            dual_objective,
            primal_residual,
            dual_residual: dres,
            gap: (objective - dual_objective).abs(),
            iterations,
            history,
        },
        blocks,
        scalars,
        duals,
    }
}
