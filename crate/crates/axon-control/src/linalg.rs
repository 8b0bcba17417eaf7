//! Small fixed-size linear algebra: 2x2/4x4 matrices, eigenvalues of 2x2
//! systems, a matrix exponential by scaling and squaring, and a tridiagonal
//! solver. Everything is stack-allocated and generic over [`Scalar`].

use crate::scalar::Scalar;

/// 2-vector.
pub type Vec2<T> = [T; 2];

/// 2x2 matrix, row-major.
pub type Mat2<T> = [[T; 2]; 2];

/// 4x4 matrix, row-major.
pub type Mat4<T> = [[T; 4]; 4];

pub fn mat2_mul_vec<T: Scalar>(m: &Mat2<T>, v: &Vec2<T>) -> Vec2<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn vec2_add<T: Scalar>(a: &Vec2<T>, b: &Vec2<T>) -> Vec2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn vec2_scale<T: Scalar>(s: T, v: &Vec2<T>) -> Vec2<T> {
    [s * v[0], s * v[1]]
}

pub fn vec2_dot<T: Scalar>(a: &Vec2<T>, b: &Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

pub fn vec2_norm<T: Scalar>(v: &Vec2<T>) -> T {
    vec2_dot(v, v).sqrt()
}

/// Eigenvalues of a real 2x2 matrix as (re, im) pairs.
///
/// Complex pairs come out conjugate; real pairs have zero imaginary part.
pub fn eig2<T: Scalar>(m: &Mat2<T>) -> [(T, T); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = T::from_f64_lossy(0.5);
    let disc = tr * tr - T::from_f64_lossy(4.0) * det;
    if disc >= T::zero() {
        let sq = disc.sqrt();
        [(half * (tr + sq), T::zero()), (half * (tr - sq), T::zero())]
    } else {
        let sq = (-disc).sqrt();
        [(half * tr, half * sq), (half * tr, -(half * sq))]
    }
}

pub fn mat4_zero<T: Scalar>() -> Mat4<T> {
    [[T::zero(); 4]; 4]
}

pub fn mat4_identity<T: Scalar>() -> Mat4<T> {
    let mut m = mat4_zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn mat4_mul<T: Scalar>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut out = mat4_zero();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn mat4_scale<T: Scalar>(s: T, a: &Mat4<T>) -> Mat4<T> {
    let mut out = *a;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    out
}

pub fn mat4_add_assign<T: Scalar>(a: &mut Mat4<T>, b: &Mat4<T>) {
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] += b[i][j];
        }
    }
}

/// Maximum row sum (infinity) norm.
pub fn mat4_norm_inf<T: Scalar>(a: &Mat4<T>) -> T {
    let mut best = T::zero();
    for row in a.iter() {
        let s: T = row.iter().map(|v| v.abs()).sum();
        if s > best {
            best = s;
        }
    }
    best
}

pub fn row4_mul_mat4<T: Scalar>(r: &[T; 4], m: &Mat4<T>) -> [T; 4] {
    let mut out = [T::zero(); 4];
    for k in 0..4 {
        let rk = r[k];
        for j in 0..4 {
            out[j] += rk * m[k][j];
        }
    }
    out
}

/// Matrix exponential of a 4x4 matrix by scaling and squaring with an
/// adaptive truncated Taylor series.
pub fn expm4<T: Scalar>(a: &Mat4<T>) -> Mat4<T> {
    let norm = mat4_norm_inf(a);
    // Scale so the series argument has norm <= 1/2.
    let mut squarings = 0u32;
    let mut scale = T::one();
    if norm > T::from_f64_lossy(0.5) {
        let log2 = (norm.to_f64().unwrap() / 0.5).log2().ceil() as u32;
        squarings = log2;
        scale = T::from_f64_lossy((2.0f64).powi(log2 as i32)).recip();
    }
    let b = mat4_scale(scale, a);

    let mut result = mat4_identity();
    let mut term = mat4_identity();
    let tol = T::epsilon();
    for k in 1..64 {
        term = mat4_scale(T::from_index(k).recip(), &mat4_mul(&term, &b));
        mat4_add_assign(&mut result, &term);
        if mat4_norm_inf(&term) < tol * mat4_norm_inf(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat4_mul(&result, &result);
    }
    result
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` multiplies x[i-1] in row i (lower[0] unused), `diag[i]` x[i],
/// `upper[i]` x[i+1] (upper[n-1] unused). Overwrites `rhs` with the solution.
pub fn solve_tridiagonal<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &mut [T],
    scratch: &mut Vec<T>,
) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    scratch.clear();
    scratch.resize(n, T::zero());

    let mut beta = diag[0];
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - scratch[i + 1] * next;
    }
}
