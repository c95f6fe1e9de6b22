//! Dense two-phase tableau simplex with Bland's rule. Test oracle only.

#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
}

const EPS: f64 = 1e-10;

fn pivot(t: &mut [Vec<f64>], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let row = t[r].clone();
    for (i, ti) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = ti[c];
        if f != 0.0 {
            for (v, rv) in ti.iter_mut().zip(&row) {
                *v -= f * rv;
            }
        }
    }
}

/// Minimizes the cost row (last row) over columns `0..allowed`. Returns false when unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], allowed: usize) -> bool {
    let m = basis.len();
    let last = t[0].len() - 1;
    loop {
        let Some(c) = (0..allowed).find(|&j| t[m][j] < -EPS) else {
            return true;
        };
        let mut best: Option<(f64, usize)> = None;
        for i in 0..m {
            if t[i][c] > EPS {
                let ratio = t[i][last] / t[i][c];
                best = match best {
                    Some((br, bi)) if ratio > br + EPS || (ratio >= br - EPS && basis[i] > basis[bi]) => Some((br, bi)),
                    _ => Some((ratio, i)),
                };
            }
        }
        let Some((_, r)) = best else {
            return false;
        };
        pivot(t, r, c);
        basis[r] = c;
    }
}

/// `min c.x` subject to `a x <= b` and finite bounds `lo <= x <= hi`.
pub fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64], lo: &[f64], hi: &[f64]) -> Oracle {
    let n = c.len();
    // Shift to y = x - lo >= 0 and add the upper bounds as rows.
    let mut rows: Vec<(Vec<f64>, f64)> = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| (r.clone(), bi - r.iter().zip(lo).map(|(v, l)| v * l).sum::<f64>()))
        .collect();
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        rows.push((r, hi[j] - lo[j]));
    }
    let m = rows.len();
    let negative: Vec<usize> = (0..m).filter(|&i| rows[i].1 < 0.0).collect();
    let k = negative.len();
    let width = n + m + k + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0; m];
    for (i, (r, rhs)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * r[j];
        }
        t[i][n + i] = sign;
        t[i][width - 1] = sign * rhs;
        basis[i] = n + i;
    }
    for (q, &i) in negative.iter().enumerate() {
        t[i][n + m + q] = 1.0;
        basis[i] = n + m + q;
        t[m][n + m + q] = 1.0;
    }
    for &i in &negative {
        let row = t[i].clone();
        for (v, rv) in t[m].iter_mut().zip(&row) {
            *v -= rv;
        }
    }
    run(&mut t, &mut basis, n + m + k);
    if -t[m][width - 1] > 1e-7 {
        return Oracle::Infeasible;
    }
    for i in 0..m {
        if basis[i] >= n + m {
            if let Some(c) = (0..n + m).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, i, c);
                basis[i] = c;
            }
        }
    }
    t[m] = vec![0.0; width];
    t[m][..n].copy_from_slice(c);
    for i in 0..m {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            let row = t[i].clone();
            for (v, rv) in t[m].iter_mut().zip(&row) {
                *v -= cb * rv;
            }
        }
    }
    let bounded = run(&mut t, &mut basis, n + m);
    assert!(bounded, "bounded problem reported unbounded");
    let mut x = lo.to_vec();
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] += t[i][width - 1];
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Oracle::Optimal { value, x }
}
