use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `A = U diag(eigenvalues) U^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// Rebuild `U f(Λ) U^H` for a real spectral function `f`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let fvals: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let scaled = ComplexMatrix::from_fn(n, n, |i, k| u[(i, k)] * fvals[k]);
        scaled.matmul(&u.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|l| C64::new(l, 0.0))
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if let Some(index) = a.as_slice().iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFiniteEntry { index });
    }
    let residual = a.hermitian_residual();
    if a.frobenius_norm() > 0.0 && residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();

    let off = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while scale > 0.0 && off(&m) > 1e-15 * scale {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { iterations: sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 || g <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / g;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = [[c, s e^{iφ}], [-s e^{-iφ}, c]] on columns (p, q).
                let jpq = phase * s;
                let jqp = -phase.conj() * s;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c + akq * jqp;
                    m[(k, q)] = akp * jpq + akq * c;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c + aqk * jqp.conj();
                    m[(q, k)] = apk * jpq.conj() + aqk * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// Eigenvalues only, ascending: Householder reduction to real tridiagonal
/// form followed by implicit QL. Scales to a few thousand unknowns.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if let Some(index) = a.as_slice().iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFiniteEntry { index });
    }
    let residual = a.hermitian_residual();
    if a.frobenius_norm() > 0.0 && residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m = a.hermitian_part();
    let mut off = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut v: Vec<C64> = (0..len).map(|i| m[(k + 1 + i, k)]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        off[k] = xnorm;
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        // A22 <- A22 - 2 v q^H - 2 q v^H with p = A22 v, q = p - (v^H p) v
        let p: Vec<C64> = (0..len)
            .map(|i| {
                let row = &m.row(k + 1 + i)[k + 1..];
                row.iter().zip(&v).map(|(a, b)| a * b).sum()
            })
            .collect();
        let kk: C64 = v.iter().zip(&p).map(|(a, b)| a.conj() * b).sum();
        let q: Vec<C64> = p.iter().zip(&v).map(|(p, v)| p - kk * v).collect();
        for i in 0..len {
            let (vi, qi) = (v[i] * 2.0, q[i] * 2.0);
            let row = &mut m.row_mut(k + 1 + i)[k + 1..];
            for j in 0..len {
                row[j] -= vi * q[j].conj() + qi * v[j].conj();
            }
        }
    }
    if n >= 2 {
        off[n - 2] = m[(n - 1, n - 2)].norm();
    }
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    tridiagonal_ql(&mut d, &mut off)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Implicit QL on a real symmetric tridiagonal matrix; `e[i]` couples `i` and `i + 1`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence { iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Hermitian PSD square root through the eigendecomposition, clamping
/// eigenvalues in `[-1e-8 ||P||, 0)` to zero.
pub fn psd_sqrt(p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(p)?;
    let scale = eig.max_abs_eigenvalue();
    if let Some(&lmin) = eig.eigenvalues.first() {
        if lmin < -1e-8 * scale {
            return Err(Error::NotPsd { eigenvalue: lmin });
        }
    }
    Ok(eig.map_spectrum(|l| C64::new(l.max(0.0).sqrt(), 0.0)))
}
