//! Exact rational linear programming: dense two-phase simplex with Bland's rule.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::probcore::{fmt_rational, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    pub rhs: Rational,
}

/// Per-variable bounds; `None` is unbounded in that direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl Default for Bound {
    fn default() -> Bound {
        Bound { lo: Some(Rational::zero()), hi: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    pub vars: usize,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Rational>,
    pub maximize: bool,
    pub bounds: Vec<Bound>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("constraint row has {got} coefficients, expected {want}")]
    Shape { got: usize, want: usize },
    #[error("simplex exceeded its iteration cap")]
    IterationLimit,
    #[error("solver produced an unverifiable result: {0}")]
    Internal(String),
}

/// Farkas multipliers over `LinearProgram::rows`: signs match the relations,
/// Σ y_i a_i = 0 and Σ y_i b_i < 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub y: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Point(Vec<Rational>),
    Infeasible(Certificate),
}

impl LinearProgram {
    /// `vars` variables, each ≥ 0 until rebounded.
    pub fn new(vars: usize) -> LinearProgram {
        LinearProgram {
            vars,
            constraints: Vec::new(),
            objective: vec![Rational::zero(); vars],
            maximize: true,
            bounds: vec![Bound::default(); vars],
        }
    }

    pub fn add(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) -> &mut Self {
        self.constraints.push(Constraint { coeffs, rel, rhs });
        self
    }

    /// Add a sparse row given as (variable, coefficient) pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, Rational)], rel: Relation, rhs: Rational) -> &mut Self {
        let mut coeffs = vec![Rational::zero(); self.vars];
        for (j, c) in terms {
            coeffs[*j] += c;
        }
        self.add(coeffs, rel, rhs)
    }

    pub fn bound(&mut self, j: usize, lo: Option<Rational>, hi: Option<Rational>) -> &mut Self {
        self.bounds[j] = Bound { lo, hi };
        self
    }

    pub fn free(&mut self, j: usize) -> &mut Self {
        self.bound(j, None, None)
    }

    pub fn maximize(&mut self, objective: Vec<Rational>) -> &mut Self {
        self.objective = objective;
        self.maximize = true;
        self
    }

    pub fn minimize(&mut self, objective: Vec<Rational>) -> &mut Self {
        self.objective = objective;
        self.maximize = false;
        self
    }

    fn check_shape(&self) -> Result<(), LpError> {
        for row in self.constraints.iter().map(|c| c.coeffs.len()).chain([self.objective.len(), self.bounds.len()]) {
            if row != self.vars {
                return Err(LpError::Shape { got: row, want: self.vars });
            }
        }
        Ok(())
    }

    /// Every constraint, then one row per finite bound (lower before upper).
    pub fn rows(&self) -> Vec<Constraint> {
        let mut out = self.constraints.clone();
        for (j, b) in self.bounds.iter().enumerate() {
            let unit = |_| {
                let mut e = vec![Rational::zero(); self.vars];
                e[j] = Rational::one();
                e
            };
            if let Some(lo) = &b.lo {
                out.push(Constraint { coeffs: unit(()), rel: Relation::Ge, rhs: lo.clone() });
            }
            if let Some(hi) = &b.hi {
                out.push(Constraint { coeffs: unit(()), rel: Relation::Le, rhs: hi.clone() });
            }
        }
        out
    }

    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.vars && self.rows().iter().all(|c| c.rel.holds(&dot(&c.coeffs, x), &c.rhs))
    }

    pub fn objective_at(&self, x: &[Rational]) -> Rational {
        dot(&self.objective, x)
    }

    pub fn certifies(&self, cert: &Certificate) -> bool {
        let rows = self.rows();
        if cert.y.len() != rows.len() {
            return false;
        }
        let mut combo = vec![Rational::zero(); self.vars];
        let mut rhs = Rational::zero();
        for (c, y) in rows.iter().zip(&cert.y) {
            let sign_ok = match c.rel {
                Relation::Le => !y.is_negative(),
                Relation::Ge => !y.is_positive(),
                Relation::Eq => true,
            };
            if !sign_ok {
                return false;
            }
            for (acc, a) in combo.iter_mut().zip(&c.coeffs) {
                *acc += y * a;
            }
            rhs += y * &c.rhs;
        }
        combo.iter().all(Zero::is_zero) && rhs.is_negative()
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |c: &[Rational]| c.iter().map(fmt_rational).collect::<Vec<_>>().join(" ");
        writeln!(f, "{} [{}]", if self.maximize { "max" } else { "min" }, row(&self.objective))?;
        for c in self.rows() {
            let rel = match c.rel {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            writeln!(f, "  [{}] {rel} {}", row(&c.coeffs), fmt_rational(&c.rhs))?;
        }
        Ok(())
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).filter(|(x, y)| !x.is_zero() && !y.is_zero()).map(|(x, y)| x * y).sum()
}

fn trace() -> bool {
    std::env::var_os("HYPERFLOW_LP_TRACE").is_some()
}

/// x_j = offset + Σ sign · y_k over standard columns.
struct VarMap {
    offset: Rational,
    cols: Vec<(usize, Rational)>,
}

/// Standard form: A y = b, y ≥ 0, b ≥ 0, minimize c·y.
struct Standard {
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
    c: Vec<Rational>,
    /// Column usable as the initial basic variable of each row.
    slack_basis: Vec<Option<usize>>,
    maps: Vec<VarMap>,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let mut maps = Vec::new();
    let mut ncols = 0;
    let mut extra: Vec<(usize, Rational)> = Vec::new();
    for b in &lp.bounds {
        let map = match (&b.lo, &b.hi) {
            (Some(lo), hi) => {
                if let Some(hi) = hi {
                    extra.push((ncols, hi - lo));
                }
                ncols += 1;
                VarMap { offset: lo.clone(), cols: vec![(ncols - 1, Rational::one())] }
            }
            (None, Some(hi)) => {
                ncols += 1;
                VarMap { offset: hi.clone(), cols: vec![(ncols - 1, -Rational::one())] }
            }
            (None, None) => {
                ncols += 2;
                VarMap { offset: Rational::zero(), cols: vec![(ncols - 2, Rational::one()), (ncols - 1, -Rational::one())] }
            }
        };
        maps.push(map);
    }
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    for con in &lp.constraints {
        let mut row = vec![Rational::zero(); ncols];
        let mut rhs = con.rhs.clone();
        for (a, m) in con.coeffs.iter().zip(&maps) {
            if a.is_zero() {
                continue;
            }
            rhs -= a * &m.offset;
            for (k, s) in &m.cols {
                row[*k] += a * s;
            }
        }
        rows.push((row, con.rel, rhs));
    }
    for (k, cap) in extra {
        let mut row = vec![Rational::zero(); ncols];
        row[k] = Rational::one();
        rows.push((row, Relation::Le, cap));
    }
    let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let total = ncols + slacks;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut slack_basis = Vec::new();
    let mut next = ncols;
    for (mut row, rel, mut rhs) in rows {
        row.resize(total, Rational::zero());
        let mut slack = None;
        match rel {
            Relation::Le => {
                row[next] = Rational::one();
                slack = Some(next);
                next += 1;
            }
            Relation::Ge => {
                row[next] = -Rational::one();
                slack = Some(next);
                next += 1;
            }
            Relation::Eq => {}
        }
        if rhs.is_negative() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
            rhs = -rhs;
        }
        let usable = slack.filter(|s| row[*s].is_one());
        a.push(row);
        b.push(rhs);
        slack_basis.push(usable);
    }
    let mut c = vec![Rational::zero(); total];
    for (obj, m) in lp.objective.iter().zip(&maps) {
        for (k, s) in &m.cols {
            let v = obj * s;
            c[*k] += if lp.maximize { -v } else { v };
        }
    }
    Standard { a, b, c, slack_basis, maps }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    width: usize,
    pivots: u64,
    cap: u64,
}

enum Outcome {
    Optimal,
    Unbounded,
}

fn binomial_cap(n: usize, k: usize) -> u64 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    (acc as u64).max(1)
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize, obj: &mut [Rational]) {
        let p = self.rows[r][col].clone();
        for x in self.rows[r].iter_mut() {
            *x /= &p;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (x, y) in row.iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        if !obj[col].is_zero() {
            let f = obj[col].clone();
            for (x, y) in obj.iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Reduced-cost row for minimizing `c` under the current basis; last entry is −objective.
    fn reduced(&self, c: &[Rational]) -> Vec<Rational> {
        let mut obj: Vec<Rational> = c.to_vec();
        obj.push(Rational::zero());
        for (r, &bcol) in self.basis.iter().enumerate() {
            let f = obj[bcol].clone();
            if f.is_zero() {
                continue;
            }
            for (x, y) in obj.iter_mut().zip(&self.rows[r]) {
                *x -= &f * y;
            }
        }
        obj
    }

    fn run(&mut self, obj: &mut Vec<Rational>, allowed: usize) -> Result<Outcome, LpError> {
        loop {
            if self.pivots > self.cap {
                return Err(LpError::IterationLimit);
            }
            if trace() {
                self.dump(obj);
            }
            let Some(col) = (0..allowed).find(|&j| obj[j].is_negative()) else {
                return Ok(Outcome::Optimal);
            };
            let mut best: Option<(Rational, usize, usize)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[col].is_positive() {
                    continue;
                }
                let ratio = &row[self.width] / &row[col];
                let better = match &best {
                    None => true,
                    Some((q, _, b)) => ratio < *q || (ratio == *q && self.basis[i] < *b),
                };
                if better {
                    best = Some((ratio, i, self.basis[i]));
                }
            }
            let Some((_, r, _)) = best else { return Ok(Outcome::Unbounded) };
            self.pivot(r, col, obj);
        }
    }

    fn dump(&self, obj: &[Rational]) {
        let fmt = |row: &[Rational]| row.iter().map(fmt_rational).collect::<Vec<_>>().join(" ");
        eprintln!("tableau after {} pivots, basis {:?}", self.pivots, self.basis);
        for row in &self.rows {
            eprintln!("  {}", fmt(row));
        }
        eprintln!("  z: {}", fmt(obj));
    }
}

enum StdResult {
    Optimal(Vec<Rational>),
    Infeasible,
    Unbounded,
}

fn solve_standard(s: &Standard, phase2: bool) -> Result<StdResult, LpError> {
    let m = s.a.len();
    let n = s.c.len();
    let arts: Vec<usize> = (0..m).filter(|&i| s.slack_basis[i].is_none()).collect();
    let width = n + arts.len();
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut k = n;
    for i in 0..m {
        let mut row = s.a[i].clone();
        row.resize(width, Rational::zero());
        match s.slack_basis[i] {
            Some(col) => basis.push(col),
            None => {
                row[k] = Rational::one();
                basis.push(k);
                k += 1;
            }
        }
        row.push(s.b[i].clone());
        rows.push(row);
    }
    let cap = binomial_cap(width, m).saturating_mul(2).saturating_add(m as u64);
    let mut t = Tableau { rows, basis, width, pivots: 0, cap };

    if !arts.is_empty() {
        let mut c1 = vec![Rational::zero(); width];
        for x in c1.iter_mut().skip(n) {
            *x = Rational::one();
        }
        let mut obj = t.reduced(&c1);
        t.run(&mut obj, width)?;
        if !obj[width].is_zero() {
            return Ok(StdResult::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop rows that are redundant.
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] >= n {
                match (0..n).find(|&j| !t.rows[r][j].is_zero()) {
                    Some(j) => t.pivot(r, j, &mut obj),
                    None => {
                        t.rows.remove(r);
                        t.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }
    for row in t.rows.iter_mut() {
        let rhs = row[width].clone();
        row.truncate(n);
        row.push(rhs);
    }
    t.width = n;
    if !phase2 {
        return Ok(StdResult::Optimal(basic_point(&t, n)));
    }
    let mut obj = t.reduced(&s.c);
    match t.run(&mut obj, n)? {
        Outcome::Optimal => Ok(StdResult::Optimal(basic_point(&t, n))),
        Outcome::Unbounded => Ok(StdResult::Unbounded),
    }
}

fn basic_point(t: &Tableau, n: usize) -> Vec<Rational> {
    let mut y = vec![Rational::zero(); n];
    for (r, &col) in t.basis.iter().enumerate() {
        y[col] = t.rows[r][t.width].clone();
    }
    y
}

fn recover(s: &Standard, y: &[Rational]) -> Vec<Rational> {
    s.maps
        .iter()
        .map(|m| {
            let mut x = m.offset.clone();
            for (k, sign) in &m.cols {
                x += sign * &y[*k];
            }
            x
        })
        .collect()
}

fn find_point(lp: &LinearProgram) -> Result<Option<Vec<Rational>>, LpError> {
    lp.check_shape()?;
    let s = standardize(lp);
    match solve_standard(&s, false)? {
        StdResult::Optimal(y) => {
            let x = recover(&s, &y);
            if !lp.satisfied_by(&x) {
                return Err(LpError::Internal("feasible point fails a constraint".into()));
            }
            Ok(Some(x))
        }
        StdResult::Infeasible => Ok(None),
        StdResult::Unbounded => Err(LpError::Internal("phase one reported unbounded".into())),
    }
}

/// The Farkas system of `lp`, whose solutions are infeasibility certificates.
fn farkas_system(lp: &LinearProgram) -> LinearProgram {
    let rows = lp.rows();
    let mut f = LinearProgram::new(rows.len());
    for (i, c) in rows.iter().enumerate() {
        match c.rel {
            Relation::Le => f.bound(i, Some(Rational::zero()), None),
            Relation::Ge => f.bound(i, None, Some(Rational::zero())),
            Relation::Eq => f.free(i),
        };
    }
    for j in 0..lp.vars {
        let coeffs = rows.iter().map(|c| c.coeffs[j].clone()).collect();
        f.add(coeffs, Relation::Eq, Rational::zero());
    }
    f.add(rows.iter().map(|c| c.rhs.clone()).collect(), Relation::Eq, -Rational::one());
    f
}

/// A feasible point, or a verified Farkas certificate of infeasibility.
pub fn solve_feasibility(lp: &LinearProgram) -> Result<Feasibility, LpError> {
    if let Some(x) = find_point(lp)? {
        return Ok(Feasibility::Point(x));
    }
    let cert = match find_point(&farkas_system(lp))? {
        Some(y) => Certificate { y },
        None => return Err(LpError::Internal("neither a point nor a certificate exists".into())),
    };
    if !lp.certifies(&cert) {
        return Err(LpError::Internal("certificate failed verification".into()));
    }
    Ok(Feasibility::Infeasible(cert))
}

/// Optimum of the objective (in the program's direction) and a basic optimal point.
pub fn solve_max(lp: &LinearProgram) -> Result<(Rational, Vec<Rational>), LpError> {
    lp.check_shape()?;
    let s = standardize(lp);
    match solve_standard(&s, true)? {
        StdResult::Optimal(y) => {
            let x = recover(&s, &y);
            if !lp.satisfied_by(&x) {
                return Err(LpError::Internal("optimal point fails a constraint".into()));
            }
            Ok((lp.objective_at(&x), x))
        }
        StdResult::Infeasible => Err(LpError::Infeasible),
        StdResult::Unbounded => Err(LpError::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::{int, rat};

    #[test]
    fn equality_point() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![int(1)], Relation::Eq, int(1));
        assert_eq!(solve_feasibility(&lp).unwrap(), Feasibility::Point(vec![int(1)]));
    }

    #[test]
    fn contradictory_bounds_certified() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![int(1)], Relation::Ge, int(1)).add(vec![int(1)], Relation::Le, int(0));
        let Feasibility::Infeasible(c) = solve_feasibility(&lp).unwrap() else { panic!() };
        assert!(lp.certifies(&c));
    }

    #[test]
    fn simple_max() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![int(1)], Relation::Le, int(3)).maximize(vec![int(1)]);
        assert_eq!(solve_max(&lp).unwrap(), (int(3), vec![int(3)]));
    }

    #[test]
    fn degenerate_zero_objective() {
        let mut lp = LinearProgram::new(2);
        lp.add(vec![int(1), int(1)], Relation::Le, int(1));
        let (opt, x) = solve_max(&lp).unwrap();
        assert_eq!(opt, int(0));
        assert!(lp.satisfied_by(&x));
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        let mut lp = LinearProgram::new(2);
        lp.free(0).bound(1, None, Some(int(2)));
        lp.add(vec![int(1), int(1)], Relation::Eq, rat(1, 2)).maximize(vec![int(-1), int(0)]);
        let (opt, x) = solve_max(&lp).unwrap();
        assert_eq!(opt, rat(3, 2));
        assert_eq!(x, vec![rat(-3, 2), int(2)]);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(1);
        lp.maximize(vec![int(1)]);
        assert_eq!(solve_max(&lp), Err(LpError::Unbounded));
    }

    #[test]
    fn box_bounds() {
        let mut lp = LinearProgram::new(2);
        lp.bound(0, Some(int(-1)), Some(int(1))).bound(1, Some(int(-1)), Some(int(1)));
        lp.add(vec![int(1), int(-1)], Relation::Le, rat(1, 2)).maximize(vec![int(1), int(1)]);
        let (opt, _) = solve_max(&lp).unwrap();
        assert_eq!(opt, int(2));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.add(vec![int(1), int(1)], Relation::Eq, int(1))
            .add(vec![int(2), int(2)], Relation::Eq, int(2))
            .maximize(vec![int(1), int(0)]);
        assert_eq!(solve_max(&lp).unwrap().0, int(1));
    }
}
