use super::{dot, norm, ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

const POWER_MAX_ITERS: usize = 2_000;

/// Largest singular value by power iteration on `A^H A`, falling back to the
/// full Jacobi decomposition when the top of the spectrum is too clustered
/// for the iteration to settle.
pub fn operator_norm(a: &ComplexMatrix) -> Result<f64> {
    let n = a.cols();
    if n == 0 || a.rows() == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if let Some(index) = a.as_slice().iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFiniteEntry { index });
    }
    // Deterministic start with no special structure.
    let mut v: Vec<C64> = (0..n)
        .map(|k| {
            let t = k as f64;
            C64::new(1.0 + 0.37 * (1.3 * t + 0.1).cos(), 0.29 * (0.7 * t + 0.3).sin())
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);

    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let av = a.matvec(&v);
        let w = a.adjoint_matvec(&av);
        let lambda = dot(&w, &v).re;
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        // Rayleigh quotient settled, or v is already an eigenvector.
        let resid: f64 = w.iter().zip(&v).map(|(x, y)| (x - y * lambda).norm_sqr()).sum::<f64>().sqrt();
        if (lambda - prev).abs() <= 1e-15 * lambda || resid <= 1e-12 * lambda {
            return Ok(lambda.max(0.0).sqrt());
        }
        prev = lambda;
        v = w.into_iter().map(|z| z / nw).collect();
    }
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Singular values (descending) by one-sided Jacobi orthogonalisation.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    // Work on the orientation with fewer columns.
    let work = if a.cols() > a.rows() { a.adjoint() } else { a.clone() };
    let (m, n) = (work.rows(), work.cols());
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| work.column(j)).collect();
    // Columns below this squared norm are numerically zero and never rotated.
    let negligible = 1e-30 * work.frobenius_norm().powi(2);
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                // gamma = <col_q, col_p> = sum conj(p) q
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let x = cols[p][k];
                    let y = cols[q][k] * phase.conj();
                    cols[p][k] = x * c - y * s;
                    cols[q][k] = (x * s + y * c) * phase;
                }
            }
        }
        sweeps += 1;
        if !rotated {
            break;
        }
        if sweeps > 60 {
            return Err(Error::NoConvergence { iterations: sweeps });
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &ComplexMatrix, rel_tol: f64) -> Result<usize> {
    let sv = singular_values(a)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * smax).count())
}

/// Orthonormal basis of the column space (columns assumed independent),
/// by Gram-Schmidt with one reorthogonalisation pass.
pub fn orthonormal_columns(a: &ComplexMatrix) -> ComplexMatrix {
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut v = a.column(j);
        for _ in 0..2 {
            for qi in &q {
                let r = dot(&v, qi);
                for (x, y) in v.iter_mut().zip(qi) {
                    *x -= r * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 0.0 {
            v.iter_mut().for_each(|z| *z /= nv);
        } else {
            v = vec![ZERO; a.rows()];
        }
        q.push(v);
    }
    ComplexMatrix::from_columns(a.rows(), &q)
}
