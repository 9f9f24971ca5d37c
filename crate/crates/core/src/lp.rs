//! Bounded-variable revised primal simplex and an L1 objective builder.
//!
//! The solver keeps a dense basis inverse updated by elementary row
//! operations, prices with Dantzig's rule and falls back to Bland's rule
//! after a run of degenerate pivots. Ties are broken by lowest index, so
//! results are reproducible.

use rayon::prelude::*;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
const REFRESH_EVERY: usize = 64;

/// `min cᵀx  s.t.  A x = b,  l ≤ x ≤ u` with columns stored sparsely.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    rows: usize,
    b: Vec<f64>,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    cost: Vec<f64>,
    cost2: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(b: Vec<f64>) -> Self {
        Self {
            rows: b.len(),
            b,
            col_start: vec![0],
            ..Default::default()
        }
    }

    /// Adds a column; returns its index.
    pub fn add_column(&mut self, entries: &[(usize, f64)], cost: f64, lower: f64, upper: f64) -> usize {
        self.add_column2(entries, cost, 0.0, lower, upper)
    }

    /// Adds a column with a secondary (lexicographic) cost.
    pub fn add_column2(
        &mut self,
        entries: &[(usize, f64)],
        cost: f64,
        cost2: f64,
        lower: f64,
        upper: f64,
    ) -> usize {
        for &(r, v) in entries {
            debug_assert!(r < self.rows);
            if v != 0.0 {
                self.row_idx.push(r);
                self.vals.push(v);
            }
        }
        self.col_start.push(self.row_idx.len());
        self.cost.push(cost);
        self.cost2.push(cost2);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        self.row_idx[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    fn dot(&self, y: &[f64], j: usize) -> f64 {
        self.column(j).map(|(r, v)| y[r] * v).sum()
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub secondary: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic variable resting at 0.
    Zero,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    /// Column-major dense basis inverse.
    binv: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    y: Vec<f64>,
    /// Columns allowed to enter.
    eligible: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, basis: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lp.num_cols();
        let m = lp.rows;
        let mut status = vec![Status::Lower; n];
        let mut x = vec![0.0; n];
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            status[j] = if l.is_finite() {
                x[j] = l;
                Status::Lower
            } else if u.is_finite() {
                x[j] = u;
                Status::Upper
            } else {
                Status::Zero
            };
        }
        for &j in &basis {
            status[j] = Status::Basic;
        }
        let mut s = Self {
            lp,
            m,
            binv: vec![0.0; m * m],
            basis,
            status,
            x,
            lower,
            upper,
            cost: vec![0.0; n],
            y: vec![0.0; m],
            eligible: vec![true; n],
            iterations: 0,
            max_iterations: 50_000 + 200 * (n + m),
        };
        s.reinvert()?;
        s.recompute_primal();
        Ok(s)
    }

    fn reinvert(&mut self) -> Result<()> {
        let m = self.m;
        // Gauss–Jordan on [B | I], both column-major.
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.lp.column(j) {
                bmat[k * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        // Work row-wise: bmat[col*m + row].
        for c in 0..m {
            let mut piv = c;
            let mut best = 0.0;
            for r in c..m {
                let v = bmat[c * m + r].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::Invalid("singular basis".into()));
            }
            if piv != c {
                for k in 0..m {
                    bmat.swap(k * m + c, k * m + piv);
                    inv.swap(k * m + c, k * m + piv);
                }
            }
            let p = bmat[c * m + c];
            for k in 0..m {
                bmat[k * m + c] /= p;
                inv[k * m + c] /= p;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = bmat[c * m + r];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    let t = bmat[k * m + c];
                    if t != 0.0 {
                        bmat[k * m + r] -= f * t;
                    }
                    let t = inv[k * m + c];
                    if t != 0.0 {
                        inv[k * m + r] -= f * t;
                    }
                }
            }
        }
        // `inv` now holds B⁻¹ with rows indexed by basis position.
        self.binv = inv;
        Ok(())
    }

    fn binv_times(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (j, &r) in rhs.iter().enumerate() {
            if r != 0.0 {
                let col = &self.binv[j * m..(j + 1) * m];
                for (o, c) in out.iter_mut().zip(col) {
                    *o += r * c;
                }
            }
        }
        out
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (r, v) in self.lp.column(q) {
            let col = &self.binv[r * m..(r + 1) * m];
            for (o, c) in out.iter_mut().zip(col) {
                *o += v * c;
            }
        }
        out
    }

    fn recompute_primal(&mut self) {
        let mut rhs = self.lp.b.clone();
        for j in 0..self.lp.num_cols() {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                for (r, v) in self.lp.column(j) {
                    rhs[r] -= v * self.x[j];
                }
            }
        }
        let xb = self.binv_times(&rhs);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        for j in 0..m {
            let col = &self.binv[j * m..(j + 1) * m];
            self.y[j] = self
                .basis
                .iter()
                .zip(col)
                .map(|(&b, c)| self.cost[b] * c)
                .sum();
        }
    }

    fn residual(&self) -> f64 {
        let mut r = self.lp.b.clone();
        for j in 0..self.lp.num_cols() {
            if self.x[j] != 0.0 {
                for (i, v) in self.lp.column(j) {
                    r[i] -= v * self.x[j];
                }
            }
        }
        r.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.lp.dot(&self.y, j)
    }

    /// Entering column and direction (+1 increase, −1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.lp.num_cols() {
            if !self.eligible[j] {
                continue;
            }
            let dir = match self.status[j] {
                Status::Basic => continue,
                Status::Lower => {
                    if self.upper[j] <= self.lower[j] {
                        continue;
                    }
                    1.0
                }
                Status::Upper => {
                    if self.upper[j] <= self.lower[j] {
                        continue;
                    }
                    -1.0
                }
                Status::Zero => 0.0,
            };
            let d = self.reduced_cost(j);
            let gain = if dir == 0.0 { d.abs() } else { -dir * d };
            if gain <= OPT_TOL * (1.0 + self.cost[j].abs()) {
                continue;
            }
            let dir = if dir == 0.0 { -d.signum() } else { dir };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((j, dir, gain));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// Runs to optimality with the current cost vector.
    fn optimize(&mut self) -> Result<()> {
        self.recompute_duals();
        let mut degenerate_run = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::IterationLimit(self.iterations));
            }
            let bland = degenerate_run >= DEGENERATE_RUN;
            let Some((q, dir)) = self.price(bland) else {
                // Confirm with freshly computed quantities before stopping.
                self.recompute_primal();
                self.recompute_duals();
                if self.price(false).is_none() {
                    return Ok(());
                }
                continue;
            };
            let alpha = self.ftran(q);
            // Ratio test.
            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<usize> = None;
            let mut leave_abs = 0.0;
            for (k, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[k];
                let s = dir * a;
                let room = if s > 0.0 {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    ((self.x[j] - self.lower[j]) / s).max(0.0)
                } else {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    ((self.upper[j] - self.x[j]) / -s).max(0.0)
                };
                let better = match leave {
                    None => room < theta,
                    Some(l) => {
                        if room < theta - 1e-12 {
                            true
                        } else if room <= theta + 1e-12 {
                            if bland {
                                j < self.basis[l]
                            } else {
                                a.abs() > leave_abs
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = theta.min(room);
                    leave = Some(k);
                    leave_abs = a.abs();
                }
            }
            if !theta.is_finite() {
                return Err(Error::Unbounded);
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            // Move.
            let step = dir * theta;
            if step != 0.0 {
                self.x[q] += step;
                for (k, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let j = self.basis[k];
                        self.x[j] -= step * a;
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    let s = dir * alpha[r];
                    if s > 0.0 {
                        self.status[out] = Status::Lower;
                        self.x[out] = self.lower[out];
                    } else {
                        self.status[out] = Status::Upper;
                        self.x[out] = self.upper[out];
                    }
                    let d_q = self.reduced_cost(q);
                    self.pivot(r, q, &alpha, d_q);
                    since_refresh += 1;
                    if since_refresh >= REFRESH_EVERY {
                        since_refresh = 0;
                        self.recompute_primal();
                        if self.residual() > FEAS_TOL {
                            self.reinvert()?;
                            self.recompute_primal();
                        }
                        self.recompute_duals();
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], d_q: f64) {
        let m = self.m;
        let ar = alpha[r];
        // y ← y + (d_q / α_r) ρ_r with ρ_r the old row r of B⁻¹.
        let f = d_q / ar;
        for j in 0..m {
            let v = self.binv[j * m + r];
            if v != 0.0 {
                self.y[j] += f * v;
            }
        }
        for j in 0..m {
            let col = &mut self.binv[j * m..(j + 1) * m];
            let t = col[r];
            if t == 0.0 {
                continue;
            }
            let t = t / ar;
            for (i, c) in col.iter_mut().enumerate() {
                let a = alpha[i];
                if a != 0.0 {
                    *c -= a * t;
                }
            }
            col[r] = t;
        }
        self.basis[r] = q;
        self.status[q] = Status::Basic;
    }

    fn objective(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }
}

/// Solves the program. With `basis` (one column per row, forming a basis
/// whose basic solution is feasible) phase 1 is skipped.
pub fn solve_lp(lp: &LinearProgram, basis: Option<Vec<usize>>) -> Result<LpSolution> {
    let n = lp.num_cols();
    let extended;
    let (prog, basis, phase1) = match basis {
        Some(basis) => {
            if basis.len() != lp.rows {
                return Err(Error::Invalid("initial basis has wrong size".into()));
            }
            (lp, basis, false)
        }
        None => {
            let (e, b) = with_artificials(lp);
            extended = e;
            (&extended, b, true)
        }
    };
    let mut simplex = Simplex::new(prog, basis, prog.lower.clone(), prog.upper.clone())?;
    if phase1 {
        let mut c1 = vec![0.0; prog.num_cols()];
        c1[n..].iter_mut().for_each(|c| *c = 1.0);
        simplex.cost = c1.clone();
        simplex.optimize()?;
        let scale = 1.0 + lp.b.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if simplex.objective(&c1) > FEAS_TOL * scale {
            return Err(Error::Infeasible);
        }
        // Artificials are pinned to zero for phase 2.
        for j in n..prog.num_cols() {
            simplex.upper[j] = 0.0;
            if simplex.status[j] != Status::Basic {
                simplex.status[j] = Status::Lower;
                simplex.x[j] = 0.0;
            }
        }
    }
    simplex.cost = prog.cost.clone();
    simplex.optimize()?;
    if prog.cost2.iter().any(|&c| c != 0.0) {
        // Lexicographic second stage: only columns with zero primary
        // reduced cost may enter, so the primary objective is preserved.
        simplex.recompute_duals();
        for j in 0..prog.num_cols() {
            if simplex.status[j] != Status::Basic {
                let d = simplex.reduced_cost(j);
                simplex.eligible[j] = d.abs() <= OPT_TOL * (1.0 + simplex.cost[j].abs());
            }
        }
        simplex.cost = prog.cost2.clone();
        simplex.optimize()?;
    }
    simplex.recompute_primal();
    for j in 0..prog.num_cols() {
        let (l, u) = (simplex.lower[j], simplex.upper[j]);
        let x = simplex.x[j];
        if x < l - 1e-7 * (1.0 + l.abs()) || x > u + 1e-7 * (1.0 + u.abs()) {
            return Err(Error::Infeasible);
        }
    }
    let x: Vec<f64> = simplex.x[..n].to_vec();
    Ok(LpSolution {
        objective: lp.cost.iter().zip(&x).map(|(c, x)| c * x).sum(),
        secondary: lp.cost2.iter().zip(&x).map(|(c, x)| c * x).sum(),
        iterations: simplex.iterations,
        x,
    })
}

/// The program extended by one artificial per row, with the artificial
/// basis that makes the starting point feasible.
fn with_artificials(lp: &LinearProgram) -> (LinearProgram, Vec<usize>) {
    let mut rhs = lp.b.clone();
    for j in 0..lp.num_cols() {
        let x0 = if lp.lower[j].is_finite() {
            lp.lower[j]
        } else if lp.upper[j].is_finite() {
            lp.upper[j]
        } else {
            0.0
        };
        if x0 != 0.0 {
            for (r, v) in lp.column(j) {
                rhs[r] -= v * x0;
            }
        }
    }
    let mut ext = lp.clone();
    let basis = rhs
        .iter()
        .enumerate()
        .map(|(r, &v)| {
            let sign = if v >= 0.0 { 1.0 } else { -1.0 };
            ext.add_column(&[(r, sign)], 0.0, 0.0, f64::INFINITY)
        })
        .collect();
    (ext, basis)
}

/// `min Σ_i w_i |a_i·x + g_i|` over free `x`, with optional secondary terms
/// minimized lexicographically among primary optima.
#[derive(Clone, Debug, Default)]
pub struct L1Problem {
    nvars: usize,
    terms: Vec<Term>,
}

#[derive(Clone, Debug)]
struct Term {
    coeffs: Vec<(usize, f64)>,
    constant: f64,
    weight: f64,
    secondary: bool,
}

#[derive(Clone, Debug)]
pub struct L1Solution {
    pub x: Vec<f64>,
    /// Primary objective at `x`.
    pub objective: f64,
    pub secondary: f64,
    pub iterations: usize,
    pub blocks: usize,
}

impl L1Problem {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Adds `weight · |Σ coeffs·x + constant|`.
    pub fn add_term(&mut self, coeffs: &[(usize, f64)], constant: f64, weight: f64) {
        self.push(coeffs, constant, weight, false);
    }

    pub fn add_secondary_term(&mut self, coeffs: &[(usize, f64)], constant: f64, weight: f64) {
        self.push(coeffs, constant, weight, true);
    }

    fn push(&mut self, coeffs: &[(usize, f64)], constant: f64, weight: f64, secondary: bool) {
        if weight == 0.0 {
            return;
        }
        let mut c: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for &(i, v) in coeffs {
            assert!(i < self.nvars, "variable index out of range");
            if v == 0.0 {
                continue;
            }
            match c.iter_mut().find(|(j, _)| *j == i) {
                Some(e) => e.1 += v,
                None => c.push((i, v)),
            }
        }
        c.retain(|&(_, v)| v != 0.0);
        self.terms.push(Term {
            coeffs: c,
            constant,
            weight,
            secondary,
        });
    }

    pub fn evaluate(&self, x: &[f64], secondary: bool) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.secondary == secondary)
            .map(|t| t.weight * (t.coeffs.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + t.constant).abs())
            .sum()
    }

    /// Independent groups of variables (connected through shared terms).
    fn blocks(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut parent: Vec<usize> = (0..self.nvars).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for t in &self.terms {
            if let Some(&(first, _)) = t.coeffs.first() {
                for &(i, _) in &t.coeffs[1..] {
                    let (a, b) = (find(&mut parent, first), find(&mut parent, i));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut slot = vec![usize::MAX; self.nvars];
        let mut out: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for v in 0..self.nvars {
            let r = find(&mut parent, v);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push((Vec::new(), Vec::new()));
            }
            out[slot[r]].0.push(v);
        }
        for (k, t) in self.terms.iter().enumerate() {
            if let Some(&(first, _)) = t.coeffs.first() {
                let r = find(&mut parent, first);
                out[slot[r]].1.push(k);
            }
        }
        out.retain(|b| !b.1.is_empty());
        out
    }

    pub fn solve(&self) -> Result<L1Solution> {
        let blocks = self.blocks();
        let solved: Vec<Result<_>> =
            blocks.par_iter().map(|(vars, terms)| self.solve_block(vars, terms)).collect();
        let mut x = vec![0.0; self.nvars];
        let mut iterations = 0;
        for r in solved {
            let (vals, it) = r?;
            iterations += it;
            for (i, v) in vals {
                x[i] = v;
            }
        }
        Ok(L1Solution {
            objective: self.evaluate(&x, false),
            secondary: self.evaluate(&x, true),
            iterations,
            blocks: blocks.len(),
            x,
        })
    }

    fn solve_block(&self, vars: &[usize], terms: &[usize]) -> Result<(Vec<(usize, f64)>, usize)> {
        let mut local = vec![usize::MAX; self.nvars];
        for (k, &v) in vars.iter().enumerate() {
            local[v] = k;
        }
        let m = terms.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vars.len()];
        let mut b = vec![0.0; m];
        for (r, &t) in terms.iter().enumerate() {
            let term = &self.terms[t];
            b[r] = -term.constant;
            for &(i, v) in &term.coeffs {
                rows[local[i]].push((r, v));
            }
        }
        let mut lp = LinearProgram::new(b);
        for col in &rows {
            lp.add_column(col, 0.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        let mut basis = Vec::with_capacity(m);
        for (r, &t) in terms.iter().enumerate() {
            let term = &self.terms[t];
            let (c1, c2) = if term.secondary {
                (0.0, term.weight)
            } else {
                (term.weight, 0.0)
            };
            let p = lp.add_column2(&[(r, -1.0)], c1, c2, 0.0, f64::INFINITY);
            let q = lp.add_column2(&[(r, 1.0)], c1, c2, 0.0, f64::INFINITY);
            basis.push(if term.constant >= 0.0 { p } else { q });
        }
        let sol = solve_lp(&lp, Some(basis))?;
        Ok((
            vars.iter().enumerate().map(|(k, &v)| (v, sol.x[k])).collect(),
            sol.iterations,
        ))
    }
}
