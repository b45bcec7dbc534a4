//! Small dense / Krylov linear-algebra routines used by the front and
//! dispersion modules.
//!
//! The extreme-eigenvalue path (Lanczos + Sturm bisection) is self-contained
//! so it can serve as an implementation independent of the dense
//! `nalgebra` eigensolvers used as test oracles.

use nalgebra::{Complex, DMatrix, DVector};

/// Smallest eigenvalue of a symmetric operator restricted to the orthogonal
/// complement of `deflate` (pass an empty slice for the full space).
///
/// `apply` must implement a symmetric positive-semidefinite matrix-vector
/// product; `upper` is any upper bound for its spectrum (e.g. Gershgorin).
/// Lanczos with full reorthogonalization runs on `upper*I - A` so the target
/// becomes the largest eigenvalue of a definite operator.
pub fn smallest_eigenvalue_deflated<F: Fn(&[f64], &mut [f64])>(
    apply: F,
    n: usize,
    deflate: &[Vec<f64>],
    upper: f64,
    max_iter: usize,
    tol: f64,
) -> (f64, Vec<f64>) {
    // orthonormalize the deflation set
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for d in deflate {
        let mut v = d.clone();
        for b in &basis {
            let c = dot(&v, b);
            axpy(&mut v, b, -c);
        }
        let nv = norm(&v);
        if nv > 1e-300 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    let project = |v: &mut [f64]| {
        for b in &basis {
            let c = dot(v, b);
            axpy(v, b, -c);
        }
    };

    // deterministic, non-degenerate start vector
    let mut q: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.7391).sin()))
        .collect();
    project(&mut q);
    let nq = norm(&q);
    q.iter_mut().for_each(|x| *x /= nq);

    let m = max_iter.min(n.saturating_sub(basis.len()).max(1));
    let mut qs: Vec<Vec<f64>> = vec![q.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    let mut prev_eig = f64::NAN;
    for j in 0..m {
        apply(&qs[j], &mut w);
        // shifted operator: upper*q - A q
        for i in 0..n {
            w[i] = upper * qs[j][i] - w[i];
        }
        project(&mut w);
        let alpha = dot(&w, &qs[j]);
        alphas.push(alpha);
        axpy(&mut w, &qs[j], -alpha);
        if j > 0 {
            let b = betas[j - 1];
            let prev = qs[j - 1].clone();
            axpy(&mut w, &prev, -b);
        }
        // full reorthogonalization (twice for safety)
        for _ in 0..2 {
            for q_old in &qs {
                let c = dot(&w, q_old);
                axpy(&mut w, q_old, -c);
            }
            project(&mut w);
        }
        let b = norm(&w);
        if j + 1 < m {
            if b < 1e-14 * upper.abs().max(1.0) {
                break;
            }
            betas.push(b);
            let mut next = w.clone();
            next.iter_mut().for_each(|x| *x /= b);
            qs.push(next);
        }
        // convergence check on the current top Ritz value
        if j >= 4 || j + 1 == m {
            let top = tridiag_extreme_eigenvalue(&alphas, &betas[..alphas.len() - 1], true);
            let converged = (top - prev_eig).abs() < tol * top.abs().max(1.0);
            prev_eig = top;
            if converged {
                break;
            }
        }
    }
    let _ = prev_eig;

    let k = alphas.len();
    let top = tridiag_extreme_eigenvalue(&alphas, &betas[..k - 1], true);
    // Ritz vector for the top eigenvalue of the tridiagonal
    let tv = tridiag_eigenvector(&alphas, &betas[..k - 1], top);
    let mut ritz = vec![0.0; n];
    for (c, qv) in tv.iter().zip(&qs) {
        axpy(&mut ritz, qv, *c);
    }
    let nr = norm(&ritz);
    if nr > 0.0 {
        ritz.iter_mut().for_each(|x| *x /= nr);
    }
    (upper - top, ritz)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Number of eigenvalues of the symmetric tridiagonal (alpha, beta) strictly
/// below `x`, by the Sturm sequence count.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - b2 / d;
        if d == 0.0 {
            d = 1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest (or smallest) eigenvalue of a symmetric tridiagonal matrix by
/// Sturm bisection.
pub fn tridiag_extreme_eigenvalue(alpha: &[f64], beta: &[f64], largest: bool) -> f64 {
    let n = alpha.len();
    assert!(n >= 1 && beta.len() + 1 == n);
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { beta[i - 1].abs() } else { 0.0 })
            + (if i < n - 1 { beta[i].abs() } else { 0.0 });
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let (mut a, mut b) = (lo, hi);
    let target = if largest { n - 1 } else { 0 };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        if sturm_count(alpha, beta, mid) <= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Eigenvector of the tridiagonal for a computed eigenvalue, by inverse
/// iteration with the Thomas algorithm.
fn tridiag_eigenvector(alpha: &[f64], beta: &[f64], lambda: f64) -> Vec<f64> {
    let n = alpha.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let shift = lambda + 1e-12 * (1.0 + lambda.abs());
    for _ in 0..3 {
        // solve (T - shift) w = v
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = alpha[0] - shift;
        if denom.abs() < 1e-300 {
            denom = 1e-300;
        }
        c[0] = if n > 1 { beta[0] / denom } else { 0.0 };
        d[0] = v[0] / denom;
        for i in 1..n {
            let b_im1 = beta[i - 1];
            let mut den = alpha[i] - shift - b_im1 * c[i - 1];
            if den.abs() < 1e-300 {
                den = 1e-300;
            }
            if i < n - 1 {
                c[i] = beta[i] / den;
            }
            d[i] = (v[i] - b_im1 * d[i - 1]) / den;
        }
        let mut w = vec![0.0; n];
        w[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            w[i] = d[i] - c[i] * w[i + 1];
        }
        let nw = norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            break;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
    }
    v
}

/// All eigenvalues of a complex matrix, computed through the real Schur form
/// of the 2N x 2N embedding [[X, -Y], [Y, X]] of M = X + iY. The embedding's
/// spectrum is spec(M) together with its conjugate; for the operators built
/// here the spectrum is conjugation-closed, so nothing is lost.
pub fn complex_eigenvalues(m: &DMatrix<Complex<f64>>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            big[(i, j)] = z.re;
            big[(i, j + n)] = -z.im;
            big[(i + n, j)] = z.im;
            big[(i + n, j + n)] = z.re;
        }
    }
    let schur = big.schur();
    let eigs = schur.complex_eigenvalues();
    let mut out: Vec<Complex<f64>> = eigs.iter().cloned().collect();
    // conjugation-closed spectrum: the embedding reports every eigenvalue of
    // M exactly twice (up to roundoff). Pair each value with its nearest
    // unused neighbor and keep the average.
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut used = vec![false; out.len()];
    let mut dedup: Vec<Complex<f64>> = Vec::with_capacity(n);
    for i in 0..out.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, cand) in out.iter().enumerate().skip(i + 1) {
            if used[j] {
                continue;
            }
            let d = (cand - out[i]).norm();
            if d < best_d {
                best_d = d;
                best = j;
            }
            // sorted by real part: once the gap exceeds the best distance,
            // nothing later can be closer
            if cand.re - out[i].re > best_d {
                break;
            }
        }
        if best != usize::MAX {
            used[best] = true;
            dedup.push((out[i] + out[best]) * Complex::new(0.5, 0.0));
        } else {
            dedup.push(out[i]);
        }
    }
    dedup
}

/// Eigenvector for a known eigenvalue by shifted inverse iteration.
/// Returns (vector, residual ||Mq - lambda q|| / ||q||).
pub fn inverse_iteration(
    m: &DMatrix<Complex<f64>>,
    lambda: Complex<f64>,
    iters: usize,
) -> (DVector<Complex<f64>>, f64) {
    let n = m.nrows();
    let eps = 1e-10 * (1.0 + lambda.norm());
    let shifted = m.clone() - DMatrix::identity(n, n) * (lambda + Complex::new(eps, eps));
    let lu = shifted.lu();
    let mut v = DVector::<Complex<f64>>::from_fn(n, |i, _| {
        Complex::new(1.0 + (i as f64 * 0.37).sin(), (i as f64 * 0.61).cos())
    });
    v /= Complex::new(v.norm(), 0.0);
    for _ in 0..iters {
        if let Some(w) = lu.solve(&v) {
            let nw = w.norm();
            if nw.is_finite() && nw > 0.0 {
                v = w / Complex::new(nw, 0.0);
            } else {
                break;
            }
        } else {
            break;
        }
    }
    let res = (m * &v - &v * lambda).norm() / v.norm();
    (v, res)
}
