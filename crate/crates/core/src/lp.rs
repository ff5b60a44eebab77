//! Exact feasibility of `A x = b, x >= 0` by phase-1 simplex over rationals.

use num_traits::{Signed, Zero};

use crate::numeric::Rational;

/// Returns a nonnegative solution of `a x = b`, or `None` if there is none.
/// Every row of `a` must have the same length.
pub fn feasible_point(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    if m == 0 {
        return Some(vec![Rational::zero(); n]);
    }
    // Tableau columns: n originals, m artificials, rhs.
    let width = n + m + 1;
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
        let flip = rhs.is_negative();
        let mut r = Vec::with_capacity(width);
        for v in row {
            r.push(if flip { -v } else { v.clone() });
        }
        for j in 0..m {
            r.push(if i == j { Rational::from_integer(1.into()) } else { Rational::zero() });
        }
        r.push(if flip { -rhs } else { rhs.clone() });
        t.push(r);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // Reduced costs of minimising the sum of artificials.
    let mut cost = vec![Rational::zero(); width];
    for r in &t {
        for c in 0..n {
            cost[c] -= &r[c];
        }
        cost[width - 1] -= &r[width - 1];
    }
    loop {
        let Some(enter) = (0..n + m).find(|c| cost[*c].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rational)> = None;
        for (i, r) in t.iter().enumerate() {
            if r[enter].is_positive() {
                let ratio = &r[width - 1] / &r[enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // The phase-1 objective is bounded below by zero.
        let (row, _) = leave.expect("bounded");
        let p = t[row][enter].clone();
        for v in t[row].iter_mut() {
            *v /= &p;
        }
        let pivot_row = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row && !r[enter].is_zero() {
                let f = r[enter].clone();
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        }
        if !cost[enter].is_zero() {
            let f = cost[enter].clone();
            for (v, pv) in cost.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        basis[row] = enter;
    }
    if !cost[width - 1].is_zero() {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (i, c) in basis.iter().enumerate() {
        if *c < n {
            x[*c] = t[i][width - 1].clone();
        }
    }
    Some(x)
}
