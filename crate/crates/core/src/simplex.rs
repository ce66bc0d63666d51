//! Exact-rational feasibility via phase-one simplex with Bland's rule.
//!
//! All variables are free. Each is split as `x = x⁺ − x⁻`, rows are scaled so
//! the right-hand side is non-negative, and artificial variables are added to
//! rows that have no natural basic slack. Bland's rule (lowest index enters,
//! lowest basic index leaves on ties) makes the pivot sequence, and therefore
//! the returned point, a deterministic function of the input.

use num_traits::{Signed, Zero};

use crate::rational::{zero, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        let lhs = self.coeffs.iter().zip(x).fold(zero(), |acc, (a, v)| acc + a * v);
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Ge => lhs >= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

/// Statistics from the last solve, mostly useful in tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub rows: usize,
    pub columns: usize,
    pub pivots: usize,
}

/// Returns a point satisfying every constraint, or `None` if none exists.
///
/// Coefficient vectors shorter than `num_vars` are zero-extended.
pub fn find_feasible(num_vars: usize, constraints: &[Constraint]) -> Option<Vec<Rational>> {
    find_feasible_with_stats(num_vars, constraints).0
}

pub fn find_feasible_with_stats(
    num_vars: usize,
    constraints: &[Constraint],
) -> (Option<Vec<Rational>>, SolveStats) {
    let m = constraints.len();
    let split = 2 * num_vars;

    // Normalize each row to a non-negative rhs and decide its auxiliary columns.
    struct Row {
        coeffs: Vec<Rational>,
        rhs: Rational,
        slack: Option<bool>, // Some(true): +s (basic), Some(false): −s (surplus)
        artificial: bool,
    }
    let mut rows = Vec::with_capacity(m);
    for c in constraints {
        let mut coeffs: Vec<Rational> = c.coeffs.clone();
        coeffs.resize(num_vars, zero());
        let mut rhs = c.rhs.clone();
        let mut rel = c.relation;
        if rhs.is_negative() || (rhs.is_zero() && rel == Relation::Ge) {
            coeffs.iter_mut().for_each(|a| *a = -a.clone());
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        let (slack, artificial) = match rel {
            Relation::Le => (Some(true), false),
            Relation::Ge => (Some(false), true),
            Relation::Eq => (None, true),
        };
        rows.push(Row { coeffs, rhs, slack, artificial });
    }

    let n_slack = rows.iter().filter(|r| r.slack.is_some()).count();
    let n_art = rows.iter().filter(|r| r.artificial).count();
    let art_start = split + n_slack;
    let ncols = art_start + n_art;

    let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rational> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (split, art_start);
    for r in &rows {
        let mut t = vec![zero(); ncols];
        for (j, a) in r.coeffs.iter().enumerate() {
            if !a.is_zero() {
                t[2 * j] = a.clone();
                t[2 * j + 1] = -a.clone();
            }
        }
        let mut basic = None;
        if let Some(plus) = r.slack {
            t[next_slack] = if plus { crate::rational::one() } else { -crate::rational::one() };
            if plus {
                basic = Some(next_slack);
            }
            next_slack += 1;
        }
        if r.artificial {
            t[next_art] = crate::rational::one();
            basic = Some(next_art);
            next_art += 1;
        }
        tab.push(t);
        rhs.push(r.rhs.clone());
        basis.push(basic.expect("every row has a basic column"));
    }

    // Phase-one objective: minimize the sum of artificials. `cost[j]` holds
    // reduced costs and `obj` holds minus the current objective value.
    let mut cost = vec![zero(); ncols];
    let mut obj = zero();
    for (i, r) in rows.iter().enumerate() {
        if r.artificial {
            for j in 0..art_start {
                if !tab[i][j].is_zero() {
                    cost[j] -= &tab[i][j];
                }
            }
            obj -= &rhs[i];
        }
    }

    let mut stats = SolveStats { rows: m, columns: ncols, pivots: 0 };
    while let Some(enter) = (0..ncols).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            if tab[i][enter].is_positive() {
                let ratio = &rhs[i] / &tab[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase one is bounded below by zero, so an entering column always has a pivot row.
        let (pr, _) = leave.expect("phase-one objective is bounded");
        pivot(&mut tab, &mut rhs, &mut cost, &mut obj, pr, enter);
        basis[pr] = enter;
        stats.pivots += 1;
    }

    if !obj.is_zero() {
        return (None, stats);
    }
    let mut split_vals = vec![zero(); split];
    for (i, &b) in basis.iter().enumerate() {
        if b < split {
            split_vals[b] = rhs[i].clone();
        }
    }
    let x: Vec<Rational> =
        (0..num_vars).map(|j| &split_vals[2 * j] - &split_vals[2 * j + 1]).collect();
    debug_assert!(constraints.iter().all(|c| c.holds(&x)));
    (Some(x), stats)
}

fn pivot(
    tab: &mut [Vec<Rational>],
    rhs: &mut [Rational],
    cost: &mut [Rational],
    obj: &mut Rational,
    pr: usize,
    pc: usize,
) {
    let p = tab[pr][pc].clone();
    for a in tab[pr].iter_mut() {
        if !a.is_zero() {
            *a /= &p;
        }
    }
    rhs[pr] /= &p;
    let prow = tab[pr].clone();
    let prhs = rhs[pr].clone();
    let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
    for i in 0..tab.len() {
        if i == pr || tab[i][pc].is_zero() {
            continue;
        }
        let factor = tab[i][pc].clone();
        for &j in &nz {
            let d = &factor * &prow[j];
            tab[i][j] -= d;
        }
        rhs[i] -= &factor * &prhs;
    }
    if !cost[pc].is_zero() {
        let factor = cost[pc].clone();
        for &j in &nz {
            let d = &factor * &prow[j];
            cost[j] -= d;
        }
        *obj -= &factor * &prhs;
    }
}
