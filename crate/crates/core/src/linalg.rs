//! Krylov solvers on flat sample vectors.
//!
//! Operators are closures so callers can apply them spectrally without
//! assembling a matrix. All inner products are plain Euclidean sums.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`, recomputed from scratch.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn true_residual(apply: &mut impl FnMut(&[f64]) -> Vec<f64>, b: &[f64], x: &[f64]) -> f64 {
    let ax = apply(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    norm(&r)
}

/// Preconditioned conjugate gradient for a symmetric positive
/// (semi-)definite operator. `precondition` must be symmetric positive
/// definite on the range of interest.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precondition: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let b_norm = norm(b);
    let mut x = vec![0.0; b.len()];
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < max_iterations {
        // recursive residual drifts from the true one; aim below the target
        if norm(&r) <= 0.1 * tolerance * b_norm {
            break;
        }
        iterations += 1;
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let relative_residual = true_residual(&mut apply, b, &x) / b_norm;
    if relative_residual > tolerance {
        return Err(Error::NoConvergence {
            iterations,
            residual: relative_residual,
        });
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual,
        },
    ))
}

/// Preconditioned MINRES for symmetric, possibly indefinite operators.
/// The preconditioner must be symmetric positive definite.
pub fn minres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precondition: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    // Lanczos on M^{-1} A with the M-inner product (Paige-Saunders).
    let mut r1 = b.to_vec();
    let mut y = precondition(&r1);
    let mut beta1 = dot(&r1, &y);
    if beta1 <= 0.0 {
        return Err(Error::InvalidArgument("preconditioner is not positive definite".into()));
    }
    beta1 = beta1.sqrt();

    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        let mut yk = apply(&v);
        if iterations >= 2 {
            axpy(&mut yk, -beta / oldb, &r1);
        }
        let alfa = dot(&v, &yk);
        axpy(&mut yk, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, yk);
        y = precondition(&r2);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(Error::InvalidArgument("preconditioner is not positive definite".into()));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;

        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        // phibar estimates the preconditioned residual norm; confirm with
        // the true residual before stopping.
        if phibar <= 0.1 * tolerance * beta1 || beta == 0.0 {
            let rel = true_residual(&mut apply, b, &x) / b_norm;
            if rel <= tolerance {
                return Ok((
                    x,
                    SolveStats {
                        iterations,
                        relative_residual: rel,
                    },
                ));
            }
            if beta == 0.0 {
                break;
            }
        }
    }
    let relative_residual = true_residual(&mut apply, b, &x) / b_norm;
    if relative_residual <= tolerance {
        Ok((
            x,
            SolveStats {
                iterations,
                relative_residual,
            },
        ))
    } else {
        Err(Error::NoConvergence {
            iterations,
            residual: relative_residual,
        })
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate gradient on the normal equations (CGLS) for a complex
/// operator `A` with adjoint `A*`. Starts from `x0`.
pub fn cg_normal(
    mut apply: impl FnMut(&[Complex64]) -> Vec<Complex64>,
    mut apply_adjoint: impl FnMut(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: Vec<Complex64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<Complex64>, SolveStats)> {
    let b_norm = cnorm(b);
    let mut x = x0;
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let ax = apply(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut s = apply_adjoint(&r);
    let mut p = s.clone();
    let mut gamma = cdot(&s, &s).re;
    let mut iterations = 0;
    // Aim below the contract so the recomputed residual clears it.
    let target = 0.1 * tolerance * b_norm;
    let mut best = cnorm(&r);
    let mut stalled = 0;
    while iterations < max_iterations && cnorm(&r) > target && gamma > 0.0 {
        iterations += 1;
        let q = apply(&p);
        let qq = cdot(&q, &q).re;
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        s = apply_adjoint(&r);
        let gamma_new = cdot(&s, &s).re;
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        let rn = cnorm(&r);
        if rn < 0.99 * best {
            best = rn;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 20 {
                break;
            }
        }
    }
    let ax = apply(&x);
    let rel = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / b_norm;
    if rel > tolerance {
        return Err(Error::NoConvergence {
            iterations,
            residual: rel,
        });
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual: rel,
        },
    ))
}
