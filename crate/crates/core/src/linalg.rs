//! Dense linear algebra used throughout the crate: LU solves (plain and
//! adjoint), column-pivoted Householder QR, sorted SVDs and a Schur-based
//! generalized Lyapunov solver.

use nalgebra::{ComplexField, DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Relative rank tolerance used by default for QR and SVD truncation.
pub const RANK_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn complexify(a: &RMat) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}

pub fn real_part(a: &CMat) -> RMat {
    a.map(|x| x.re)
}

pub fn imag_part(a: &CMat) -> RMat {
    a.map(|x| x.im)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.norm()))
}

pub fn max_abs_imag(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.im.abs()))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.len() == 1 {
        return a[(0, 0)].norm();
    }
    if a.ncols() == 1 || a.nrows() == 1 {
        return a.norm();
    }
    svd(a).sigma.first().copied().unwrap_or(0.0)
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    rcond: f64,
}

impl Lu {
    pub fn new(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularOperator {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                lu.swap_rows(k, p);
                perm.swap(k, p);
            }
            let pivot_inv = lu[(k, k)].inv();
            for i in k + 1..n {
                lu[(i, k)] *= pivot_inv;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let v = lu[(k, k)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let rcond = if n == 0 { 1.0 } else { lo / hi };
        if rcond <= n as f64 * f64::EPSILON {
            return Err(Error::SingularOperator {
                condition: 1.0 / rcond,
            });
        }
        Ok(Lu { lu, perm, rcond })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Crude reciprocal condition estimate from the pivot magnitudes.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut x = CMat::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for col in 0..x.ncols() {
            for k in 0..n {
                let xk = x[(k, col)];
                if xk == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in k + 1..n {
                    x[(i, col)] -= self.lu[(i, k)] * xk;
                }
            }
            for k in (0..n).rev() {
                let xk = x[(k, col)] / self.lu[(k, k)];
                x[(k, col)] = xk;
                for i in 0..k {
                    x[(i, col)] -= self.lu[(i, k)] * xk;
                }
            }
        }
        x
    }

    /// Solves `A^H X = B` reusing the factorization of `A`.
    pub fn solve_adjoint(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut w = b.clone();
        for col in 0..w.ncols() {
            // U^H y = b
            for k in 0..n {
                let mut acc = w[(k, col)];
                for i in 0..k {
                    acc -= self.lu[(i, k)].conj() * w[(i, col)];
                }
                w[(k, col)] = acc / self.lu[(k, k)].conj();
            }
            // L^H z = y
            for k in (0..n).rev() {
                let mut acc = w[(k, col)];
                for i in k + 1..n {
                    acc -= self.lu[(i, k)].conj() * w[(i, col)];
                }
                w[(k, col)] = acc;
            }
        }
        let mut x = CMat::zeros(n, b.ncols());
        for i in 0..n {
            x.set_row(self.perm[i], &w.row(i));
        }
        x
    }
}

pub fn solve_linear(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(Lu::new(a)?.solve(b))
}

/// `A P = Q R` with `Q` having `min(n, q)` orthonormal columns.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    pub q: CMat,
    pub r: CMat,
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl PivotedQr {
    /// Leading `rank` columns of `Q`.
    pub fn range_basis(&self) -> CMat {
        self.q.columns(0, self.rank).into_owned()
    }
}

/// Householder QR with column pivoting. The phase of each reflector is
/// taken as `x0 / |x0|`, so real input produces exactly real factors.
pub fn qr_pivoted(a: &CMat, tau_rank: f64) -> PivotedQr {
    let (n, q) = a.shape();
    let k = n.min(q);
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..q).collect();
    let mut reflectors: Vec<Option<(nalgebra::DVector<C64>, f64)>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut p = j;
        let mut best = -1.0;
        for col in j..q {
            let v = r.view((j, col), (n - j, 1)).norm_squared();
            if v > best {
                best = v;
                p = col;
            }
        }
        if p != j {
            r.swap_columns(j, p);
            perm.swap(j, p);
        }
        let x = r.view((j, j), (n - j, 1)).column(0).into_owned();
        let xnorm = x.norm();
        if xnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            reflectors.push(None);
            continue;
        }
        for col in j..q {
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..n - j {
                dot += v[i].conj() * r[(j + i, col)];
            }
            let coef = dot * (2.0 / vnorm2);
            for i in 0..n - j {
                r[(j + i, col)] -= v[i] * coef;
            }
        }
        r[(j, j)] = alpha;
        for i in j + 1..n {
            r[(i, j)] = C64::new(0.0, 0.0);
        }
        reflectors.push(Some((v, vnorm2)));
    }
    let mut qm = CMat::identity(n, k);
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some((v, vnorm2)) = refl {
            for col in 0..k {
                let mut dot = C64::new(0.0, 0.0);
                for i in 0..n - j {
                    dot += v[i].conj() * qm[(j + i, col)];
                }
                let coef = dot * (2.0 / vnorm2);
                for i in 0..n - j {
                    qm[(j + i, col)] -= v[i] * coef;
                }
            }
        }
    }
    let rr = CMat::from_fn(k, q, |i, j| if i <= j { r[(i, j)] } else { C64::new(0.0, 0.0) });
    let r00 = if k > 0 { rr[(0, 0)].norm() } else { 0.0 };
    let rank = if r00 == 0.0 {
        0
    } else {
        (0..k).take_while(|&i| rr[(i, i)].norm() > tau_rank * r00).count()
    };
    PivotedQr {
        q: qm,
        r: rr,
        perm,
        rank,
    }
}

/// Orthonormal basis of the numerical range of `a`.
pub fn orthonormal_basis(a: &CMat, tau_rank: f64) -> CMat {
    qr_pivoted(a, tau_rank).range_basis()
}

/// `A = U diag(sigma) T^H`, singular values sorted non-increasing.
#[derive(Clone, Debug)]
pub struct SvdFactors<T: ComplexField> {
    pub u: DMatrix<T>,
    pub sigma: Vec<f64>,
    pub t: DMatrix<T>,
}

impl<T: ComplexField<RealField = f64>> SvdFactors<T> {
    pub fn numerical_rank(&self, tau_rank: f64) -> usize {
        match self.sigma.first() {
            Some(&s1) if s1 > 0.0 => self.sigma.iter().filter(|&&s| s > tau_rank * s1).count(),
            _ => 0,
        }
    }
}

pub fn svd<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> SvdFactors<T> {
    let (n, m) = a.shape();
    let k = n.min(m);
    if k == 0 {
        return SvdFactors {
            u: DMatrix::zeros(n, 0),
            sigma: Vec::new(),
            t: DMatrix::zeros(m, 0),
        };
    }
    let s = a.clone().svd(true, true);
    let u = s.u.expect("left singular vectors requested");
    let vt = s.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        s.singular_values[j]
            .partial_cmp(&s.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma = order.iter().map(|&i| s.singular_values[i]).collect();
    let u = DMatrix::from_fn(n, k, |r, cidx| u[(r, order[cidx])].clone());
    let t = DMatrix::from_fn(m, k, |r, cidx| vt[(order[cidx], r)].clone().conjugate());
    SvdFactors { u, sigma, t }
}

/// Leading `r` singular triplets. Fails when `sigma_r <= tau_rank * sigma_1`.
pub fn svd_truncate<T: ComplexField<RealField = f64>>(
    f: &SvdFactors<T>,
    r: usize,
    tau_rank: f64,
) -> Result<(DMatrix<T>, Vec<f64>, DMatrix<T>)> {
    let rank = f.numerical_rank(tau_rank);
    if r > rank {
        return Err(Error::RankDeficient { requested: r, rank });
    }
    Ok((
        f.u.columns(0, r).into_owned(),
        f.sigma[..r].to_vec(),
        f.t.columns(0, r).into_owned(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramianSide {
    Controllability,
    Observability,
}

/// Eigenvalues of the pencil `(A, E)`, i.e. of `E^{-1} A`.
pub fn pencil_eigenvalues(a: &RMat, e: &RMat) -> Result<Vec<C64>> {
    let lu = Lu::new(&complexify(e)).map_err(|_| Error::SingularE)?;
    let at = lu.solve(&complexify(a));
    let schur = Schur::new(at);
    let t = schur.unpack().1;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Solves `A P E^T + E P A^T + Z Z^T = 0` (controllability) or
/// `A^T Q E + E^T Q A + Z Z^T = 0` (observability) densely and returns a
/// factor `R` with `N` rows and `P = R R^T`.
///
/// The pencil is reduced to `E^{-1} A`, brought to complex Schur form, and
/// the triangular Sylvester system is solved column by column.
pub fn lyapunov_solve(a: &RMat, e: &RMat, z: &RMat, side: GramianSide) -> Result<RMat> {
    let nn = a.nrows();
    if a.ncols() != nn || e.shape() != (nn, nn) || z.nrows() != nn {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov data: A {:?}, E {:?}, Z {:?}",
            a.shape(),
            e.shape(),
            z.shape()
        )));
    }
    let (a, e) = match side {
        GramianSide::Controllability => (a.clone(), e.clone()),
        GramianSide::Observability => (a.transpose(), e.transpose()),
    };
    let p = lyapunov_dense(&a, &e, z)?;
    Ok(psd_factor(&p))
}

/// Full Gramian of `A P E^T + E P A^T + Z Z^T = 0`.
pub fn lyapunov_dense(a: &RMat, e: &RMat, z: &RMat) -> Result<RMat> {
    let nn = a.nrows();
    let lu = Lu::new(&complexify(e)).map_err(|_| Error::SingularE)?;
    let at = lu.solve(&complexify(a));
    let zt = lu.solve(&complexify(z));
    let rhs = &zt * zt.transpose();
    let (u, t) = Schur::new(at).unpack();
    let scale = (0..nn).fold(0.0f64, |m, i| m.max(t[(i, i)].norm()));
    for i in 0..nn {
        if t[(i, i)].re >= -1e-13 * scale {
            return Err(Error::UnstablePencil);
        }
    }
    let cm = u.adjoint() * &rhs * &u;
    let mut y = CMat::zeros(nn, nn);
    for j in (0..nn).rev() {
        let mut b: Vec<C64> = (0..nn).map(|i| -cm[(i, j)]).collect();
        for k in j + 1..nn {
            let tjk = t[(j, k)].conj();
            if tjk == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, bi) in b.iter_mut().enumerate() {
                *bi -= tjk * y[(i, k)];
            }
        }
        let shift = t[(j, j)].conj();
        for i in (0..nn).rev() {
            let mut acc = b[i];
            for k in i + 1..nn {
                acc -= t[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = acc / (t[(i, i)] + shift);
        }
    }
    let p = real_part(&(&u * y * u.adjoint()));
    Ok((&p + p.transpose()) * 0.5)
}

/// `R` with `P = R R^T` from the non-negative part of the spectrum of a
/// symmetric matrix.
pub fn psd_factor(p: &RMat) -> RMat {
    let nn = p.nrows();
    let eig = SymmetricEigen::new(p.clone());
    let mut idx: Vec<usize> = (0..nn).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    RMat::from_fn(nn, idx.len(), |r, cidx| {
        let i = idx[cidx];
        eig.eigenvectors[(r, i)] * eig.eigenvalues[i].sqrt()
    })
}
