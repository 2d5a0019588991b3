//! Dense complex linear algebra used by the estimators: Hermitian
//! eigendecomposition (Householder tridiagonalization and QL) and LU solves on small systems.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = Array2<Complex64>;
pub type CVector = Array1<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Conjugated inner product `aᴴ b`.
#[inline]
pub fn inner(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
pub fn norm_sqr(a: ArrayView1<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius(a: ArrayView2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate transpose.
pub fn hermitian_transpose(a: ArrayView2<Complex64>) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

/// Largest `|a_ij - conj(a_ji)|`.
pub fn hermitian_defect(a: ArrayView2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Eigenpairs of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `i` pairs with `values[i]`.
    pub vectors: CMatrix,
    /// Complex multiplications spent (reduction plus QL rotations).
    pub ops: u64,
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Householder reflections reduce `A` to a tridiagonal matrix whose
/// off-diagonal phases are then absorbed into a diagonal unitary, leaving a
/// real symmetric tridiagonal `T` with `A = Z T Zᴴ`. Implicit-shift QL
/// iterations diagonalize `T` and the plane rotations are accumulated into
/// `Z`.
pub fn hermitian_eig(a: ArrayView2<Complex64>) -> Result<HermitianEig> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = frobenius(a);
    if !scale.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let defect = hermitian_defect(a);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::invalid(format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    if n == 0 {
        return Ok(HermitianEig {
            values: Vec::new(),
            vectors: CMatrix::zeros((0, 0)),
            ops: 0,
        });
    }

    // Column-major working copy, symmetrized: b[j * n + i] = A[i, j].
    let mut b = vec![ZERO; n * n];
    for j in 0..n {
        b[j * n + j] = Complex64::new(a[[j, j]].re, 0.0);
        for i in (j + 1)..n {
            let v = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
            b[j * n + i] = v;
            b[i * n + j] = v.conj();
        }
    }
    // Q, column-major.
    let mut q = vec![ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let mut ops = 0u64;
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];

    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let x0 = b[k * n + lo];
        let sigma = (lo..n).map(|i| b[k * n + i].norm_sqr()).sum::<f64>().sqrt();
        let tail = sigma * sigma - x0.norm_sqr();
        if sigma == 0.0 || tail <= 1e-300 * scale * scale {
            continue;
        }
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * sigma;
        for i in lo..n {
            v[i] = b[k * n + i];
        }
        v[lo] -= alpha;
        let tau = 1.0 / (sigma * (sigma + x0.norm()));
        // p = τ B v on the trailing block.
        for i in lo..n {
            p[i] = ZERO;
        }
        for j in lo..n {
            let vj = v[j] * tau;
            let col = &b[j * n..(j + 1) * n];
            for i in lo..n {
                p[i] += col[i] * vj;
            }
        }
        let vhp: Complex64 = (lo..n).map(|i| v[i].conj() * p[i]).sum();
        let kk = 0.5 * tau * vhp.re;
        for i in lo..n {
            p[i] -= v[i] * kk;
        }
        // B ← B − v pᴴ − p vᴴ.
        for j in lo..n {
            let pj = p[j].conj();
            let vj = v[j].conj();
            let col = &mut b[j * n..(j + 1) * n];
            for i in lo..n {
                col[i] -= v[i] * pj + p[i] * vj;
            }
        }
        for i in lo..n {
            b[k * n + i] = ZERO;
            b[i * n + k] = ZERO;
        }
        b[k * n + lo] = alpha;
        b[lo * n + k] = alpha.conj();
        // Q ← Q (I − τ v vᴴ).
        for r in 0..n {
            let mut s = ZERO;
            for j in lo..n {
                s += q[j * n + r] * v[j];
            }
            let s = s * tau;
            for j in lo..n {
                q[j * n + r] -= s * v[j].conj();
            }
        }
        let m = (n - lo) as u64;
        ops += 3 * m * m + 2 * n as u64 * m;
    }

    let mut d: Vec<f64> = (0..n).map(|i| b[i * n + i].re).collect();
    let mut e = vec![0.0f64; n];
    // Absorb off-diagonal phases: Z = Q·diag(δ).
    let mut delta = Complex64::new(1.0, 0.0);
    for i in 0..n {
        if i > 0 {
            let t = b[(i - 1) * n + i];
            let mag = t.norm();
            e[i - 1] = mag;
            if mag > 0.0 {
                delta *= t / mag;
            }
        }
        if delta != Complex64::new(1.0, 0.0) {
            for z in &mut q[i * n..(i + 1) * n] {
                *z *= delta;
            }
        }
    }

    let mut z = q;
    let mut sweeps = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= f64::MIN_POSITIVE * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > 60 * n {
                return Err(Error::invalid("eigendecomposition did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let bb = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
                let (left, right) = z.split_at_mut((i + 1) * n);
                let zi = &mut left[i * n..];
                let zj = &mut right[..n];
                for (a, b) in zi.iter_mut().zip(zj.iter_mut()) {
                    let f = *b;
                    *b = *a * s + f * c;
                    *a = *a * c - f * s;
                }
                ops += 4 * n as u64;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Descending; ties keep index order.
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = CMatrix::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = z[src * n + k];
        }
    }
    Ok(HermitianEig { values, vectors, ops })
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    norm1: f64,
}

impl Lu {
    pub fn new(a: ArrayView2<Complex64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("LU needs a square matrix"));
        }
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[[i, j]].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu: Vec<Complex64> = (0..n * n).map(|k| a[[k / n, k % n]]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[col * n + col].norm();
            for r in (col + 1)..n {
                let x = lu[r * n + col].norm();
                if x > best {
                    best = x;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            if piv != col {
                for k in 0..n {
                    lu.swap(col * n + k, piv * n + k);
                }
                perm.swap(col, piv);
            }
            let d = lu[col * n + col];
            for r in (col + 1)..n {
                let f = lu[r * n + col] / d;
                lu[r * n + col] = f;
                if f != ZERO {
                    for k in (col + 1)..n {
                        let u = lu[col * n + k];
                        lu[r * n + k] -= f * u;
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm, norm1 })
    }

    /// Solves `A·X = B` column by column.
    pub fn solve(&self, b: ArrayView2<Complex64>) -> CMatrix {
        let n = self.n;
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut x = CMatrix::zeros(b.raw_dim());
        let mut y = vec![ZERO; n];
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = b[[self.perm[i], c]];
                for k in 0..i {
                    s -= self.lu[i * n + k] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= self.lu[i * n + k] * y[k];
                }
                y[i] = s / self.lu[i * n + i];
            }
            for i in 0..n {
                x[[i, c]] = y[i];
            }
        }
        x
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve(CMatrix::eye(self.n).view())
    }

    /// One-norm condition number `‖A‖₁·‖A⁻¹‖₁`.
    pub fn condition(&self) -> f64 {
        let inv = self.inverse();
        let inv_norm = (0..self.n)
            .map(|j| (0..self.n).map(|i| inv[[i, j]].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        self.norm1 * inv_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream, Purpose};

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = stream(seed, Purpose::Test, &[n as u64]);
        let g = CMatrix::from_shape_fn((n, n), |_| complex_normal(&mut rng));
        let gh = hermitian_transpose(g.view());
        (&g + &gh) * Complex64::new(0.5, 0.0)
    }

    fn residual(a: &CMatrix, eig: &HermitianEig) -> f64 {
        let lam = CMatrix::from_diag(&Array1::from_iter(eig.values.iter().map(|&x| Complex64::new(x, 0.0))));
        frobenius((a.dot(&eig.vectors) - eig.vectors.dot(&lam)).view())
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = hermitian_eig(CMatrix::eye(5).view()).unwrap();
        assert!(eig.values.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_matrix_gives_axis_vectors() {
        let a = CMatrix::from_diag(&Array1::from(vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)]));
        let eig = hermitian_eig(a.view()).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert!((eig.vectors[[1, 0]].norm() - 1.0).abs() < 1e-15);
        assert!((eig.vectors[[0, 1]].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_plus_noise_floor() {
        // a aᴴ + σ² I with ‖a‖² = M: top eigenvalue M + σ², the rest σ².
        let m = 8;
        let sigma2 = 0.3;
        let a = Array1::from_iter((0..m).map(|k| Complex64::from_polar(1.0, 0.7 * k as f64)));
        let mut r = CMatrix::eye(m) * Complex64::new(sigma2, 0.0);
        for i in 0..m {
            for j in 0..m {
                r[[i, j]] += a[i] * a[j].conj();
            }
        }
        let eig = hermitian_eig(r.view()).unwrap();
        assert!((eig.values[0] - (m as f64 + sigma2)).abs() < 1e-12);
        for &x in &eig.values[1..] {
            assert!((x - sigma2).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = CMatrix::eye(3);
        a[[0, 1]] = Complex64::new(1.0, 0.0);
        assert!(matches!(hermitian_eig(a.view()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn random_hermitian_residual_and_unitarity() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (33, 4), (100, 5)] {
            let a = random_hermitian(n, seed);
            let eig = hermitian_eig(a.view()).unwrap();
            let res = residual(&a, &eig);
            assert!(res <= 1e-10 * frobenius(a.view()), "n={n} residual {res}");
            let vhv = hermitian_transpose(eig.vectors.view()).dot(&eig.vectors);
            let dev = frobenius((vhv - CMatrix::eye(n)).view());
            assert!(dev < 1e-10, "n={n} unitarity {dev}");
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn large_hermitian_residual() {
        let a = random_hermitian(256, 9);
        let eig = hermitian_eig(a.view()).unwrap();
        assert!(residual(&a, &eig) <= 1e-6 * frobenius(a.view()));
    }

    #[test]
    fn lu_solves_and_inverts() {
        let mut rng = stream(11, Purpose::Test, &[]);
        let a = CMatrix::from_shape_fn((6, 6), |_| complex_normal(&mut rng));
        let b = CMatrix::from_shape_fn((6, 3), |_| complex_normal(&mut rng));
        let lu = Lu::new(a.view()).unwrap();
        let x = lu.solve(b.view());
        assert!(frobenius((a.dot(&x) - &b).view()) < 1e-12);
        let inv = lu.inverse();
        assert!(frobenius((a.dot(&inv) - CMatrix::eye(6)).view()) < 1e-12);
        assert!(lu.condition() >= 1.0);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = CMatrix::zeros((3, 3));
        assert!(matches!(Lu::new(a.view()), Err(Error::IllConditioned(_))));
    }
}
