//! Primal active-set solver for
//!
//! ```text
//! minimize   ½ wᵀ H w + cᵀ w
//! subject to A w = b,  lower ≤ w ≤ upper
//! ```
//!
//! for small dense problems. `H` must be positive definite on the null space
//! of the equality rows; callers ridge a singular covariance before calling.
//! The working set only ever holds bound constraints, and it is kept such that
//! the equality rows restricted to the free variables have full row rank, so
//! every equality-constrained subproblem has a unique KKT solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 10_000;
/// Multiplier sign violations below this are treated as zero.
pub const STATIONARITY_TOLERANCE: f64 = 1e-9;
/// Bound activity and equality tolerance.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-10;

const STEP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Free,
    AtLower,
    AtUpper,
    Fixed,
}

#[derive(Debug, Clone)]
pub(crate) struct QpProblem<'a> {
    pub h: &'a DMatrix<f64>,
    pub c: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub w: Vec<f64>,
    pub iterations: usize,
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = smax * 1e-12 * m.nrows().max(m.ncols()) as f64;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

fn columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    a.select_columns(idx)
}

/// Drops equality rows that are linearly dependent over the non-fixed columns.
fn independent_rows(a: &DMatrix<f64>, movable: &[usize]) -> Vec<usize> {
    let sub = columns(a, movable);
    let mut keep: Vec<usize> = Vec::new();
    for r in 0..a.nrows() {
        let mut trial = keep.clone();
        trial.push(r);
        if rank(&sub.select_rows(&trial)) == trial.len() {
            keep = trial;
        }
    }
    keep
}

/// Solves the QP from the feasible starting point `w0`.
pub(crate) fn solve(problem: &QpProblem<'_>, w0: &[f64]) -> Result<QpSolution> {
    let n = w0.len();
    let (lower, upper) = (problem.lower, problem.upper);
    let mut w = w0.to_vec();

    let eq_residual = (problem.a * DVector::from_column_slice(w0) - problem.b).amax();
    if eq_residual > 1e-9 || !(0..n).all(|i| w0[i] >= lower[i] - 1e-12 && w0[i] <= upper[i] + 1e-12) {
        return Err(Error::numerical(
            "optimizer",
            format!("infeasible starting point (equality residual {eq_residual:e})"),
        ));
    }

    let mut status: Vec<Status> = (0..n)
        .map(|i| {
            if upper[i] - lower[i] <= FEASIBILITY_TOLERANCE {
                Status::Fixed
            } else if (w[i] - lower[i]).abs() <= FEASIBILITY_TOLERANCE {
                Status::AtLower
            } else if (upper[i] - w[i]).abs() <= FEASIBILITY_TOLERANCE {
                Status::AtUpper
            } else {
                Status::Free
            }
        })
        .collect();
    for i in 0..n {
        match status[i] {
            Status::AtLower | Status::Fixed => w[i] = lower[i],
            Status::AtUpper => w[i] = upper[i],
            Status::Free => {}
        }
    }

    let movable: Vec<usize> = (0..n).filter(|&i| status[i] != Status::Fixed).collect();
    let rows = independent_rows(problem.a, &movable);
    let a = problem.a.select_rows(&rows);
    let m = a.nrows();

    // Release bound-held variables (highest index first) until the free
    // columns span the equality rows.
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == Status::Free).collect();
        if rank(&columns(&a, &free)) == m {
            break;
        }
        match (0..n)
            .rev()
            .find(|&i| matches!(status[i], Status::AtLower | Status::AtUpper))
        {
            Some(i) => status[i] = Status::Free,
            None => {
                return Err(Error::numerical(
                    "optimizer",
                    "equality constraints are degenerate over the free variables",
                ))
            }
        }
    }

    for iteration in 0..MAX_ITERATIONS {
        let g = problem.h * DVector::from_column_slice(&w) + problem.c;
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == Status::Free).collect();
        let nf = free.len();

        let (p, nu) = if nf == 0 {
            (Vec::new(), DVector::zeros(m))
        } else {
            let mut kkt = DMatrix::zeros(nf + m, nf + m);
            let mut rhs = DVector::zeros(nf + m);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    kkt[(r, s)] = problem.h[(i, j)];
                }
                for k in 0..m {
                    kkt[(r, nf + k)] = a[(k, i)];
                    kkt[(nf + k, r)] = a[(k, i)];
                }
                rhs[r] = -g[i];
            }
            let sol = kkt
                .full_piv_lu()
                .solve(&rhs)
                .ok_or_else(|| Error::numerical("optimizer", "singular KKT system in active-set step"))?;
            let p: Vec<f64> = sol.rows(0, nf).iter().copied().collect();
            let nu = -sol.rows(nf, m).into_owned();
            (p, nu)
        };

        let step_norm = p.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if step_norm <= STEP_TOLERANCE {
            let at = a.transpose() * &nu;
            let scale = g.amax().max(1.0);
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                let z = g[i] - at[i];
                let violation = match status[i] {
                    Status::AtLower => -z,
                    Status::AtUpper => z,
                    _ => continue,
                };
                if violation > STATIONARITY_TOLERANCE * scale && worst.is_none_or(|(_, v)| violation > v) {
                    worst = Some((i, violation));
                }
            }
            match worst {
                None => {
                    return Ok(QpSolution {
                        w,
                        iterations: iteration,
                    })
                }
                Some((i, _)) => status[i] = Status::Free,
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking: Option<(usize, Status)> = None;
        for (k, &i) in free.iter().enumerate() {
            let pi = p[k];
            let (ratio, hit) = if pi < -STEP_TOLERANCE {
                ((lower[i] - w[i]) / pi, Status::AtLower)
            } else if pi > STEP_TOLERANCE {
                ((upper[i] - w[i]) / pi, Status::AtUpper)
            } else {
                continue;
            };
            let ratio = ratio.max(0.0);
            if ratio < alpha {
                alpha = ratio;
                blocking = Some((i, hit));
            }
        }
        for (k, &i) in free.iter().enumerate() {
            w[i] = (w[i] + alpha * p[k]).clamp(lower[i], upper[i]);
        }
        if let Some((i, hit)) = blocking {
            status[i] = hit;
            w[i] = if hit == Status::AtLower { lower[i] } else { upper[i] };
        }
    }
    Err(Error::IterationLimit {
        iterations: MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_constrained_least_squares() {
        // min (w0-2)² + (w1+1)² with w in [0,1]², no equalities → (1, 0).
        let h = DMatrix::from_diagonal_element(2, 2, 2.0);
        let c = DVector::from_vec(vec![-4.0, 2.0]);
        let a = DMatrix::zeros(0, 2);
        let b = DVector::zeros(0);
        let problem = QpProblem {
            h: &h,
            c: &c,
            a: &a,
            b: &b,
            lower: &[0.0, 0.0],
            upper: &[1.0, 1.0],
        };
        let sol = solve(&problem, &[0.5, 0.5]).unwrap();
        assert_eq!(sol.w, vec![1.0, 0.0]);
    }

    #[test]
    fn fixed_variables_are_respected() {
        let h = DMatrix::identity(3, 3) * 2.0;
        let c = DVector::zeros(3);
        let a = DMatrix::from_element(1, 3, 1.0);
        let b = DVector::from_element(1, 1.0);
        let problem = QpProblem {
            h: &h,
            c: &c,
            a: &a,
            b: &b,
            lower: &[0.4, 0.0, 0.0],
            upper: &[0.4, 1.0, 1.0],
        };
        let sol = solve(&problem, &[0.4, 0.6, 0.0]).unwrap();
        assert_eq!(sol.w[0], 0.4);
        assert!((sol.w[1] - 0.3).abs() < 1e-12);
        assert!((sol.w[2] - 0.3).abs() < 1e-12);
    }
}
