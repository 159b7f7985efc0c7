//! Independent oracles and randomized-input helpers shared by the
//! integration suites. Everything here recomputes results from first
//! principles (index formulas, Taylor series, Gaussian elimination) so
//! that agreement with the library is evidence, not tautology.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use qcontrol::operators::{ComplexMatrix, HermitianOperator, TensorSpace};
use qcontrol::state::{make_pure, QuantumState};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha12Rng) -> Complex64 {
    Complex64::new(
        2.0 * rng.random::<f64>() - 1.0,
        2.0 * rng.random::<f64>() - 1.0,
    )
}

pub fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| random_complex(rng)).collect();
    ComplexMatrix::from_fn(rows, cols, |r, c| data[r * cols + c])
}

pub fn random_hermitian(rng: &mut ChaCha12Rng, n: usize) -> HermitianOperator {
    let a = random_matrix(rng, n, n);
    let h = a.add(&a.adjoint()).unwrap().scale_re(0.5);
    HermitianOperator::new(h).unwrap()
}

pub fn random_pure_state(rng: &mut ChaCha12Rng, space: &TensorSpace) -> QuantumState {
    let amps: Vec<Complex64> = (0..space.total_dim()).map(|_| random_complex(rng)).collect();
    make_pure(space, &amps).unwrap()
}

/// Random full-rank mixed state: a convex mixture of random pure
/// projectors plus a sliver of the maximally mixed state.
pub fn random_mixed_state(rng: &mut ChaCha12Rng, space: &TensorSpace) -> QuantumState {
    let n = space.total_dim();
    let mut rho = ComplexMatrix::identity(n).scale_re(0.05 / n as f64);
    let mut weight_left = 0.95;
    for k in 0..3 {
        let w = if k == 2 {
            weight_left
        } else {
            weight_left * rng.random::<f64>()
        };
        weight_left -= w;
        let amps: Vec<Complex64> = (0..n).map(|_| random_complex(rng)).collect();
        let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let proj = ComplexMatrix::from_fn(n, n, |r, c| amps[r] * amps[c].conj() / norm2);
        rho = rho.add(&proj.scale_re(w)).unwrap();
    }
    QuantumState::from_density(space.clone(), rho).unwrap()
}

/// Schoolbook triple-loop product.
pub fn naive_mul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(a.cols(), b.rows());
    ComplexMatrix::from_fn(a.rows(), b.cols(), |r, c| {
        (0..a.cols()).map(|k| a[(r, k)] * b[(k, c)]).sum()
    })
}

/// Kronecker product straight from the index formula.
pub fn kron_oracle(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |r, c| {
        a[(r / b.rows(), c / b.cols())] * b[(r % b.rows(), c % b.cols())]
    })
}

/// Mixed-radix index with factor 0 most significant.
pub fn ravel_oracle(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter()
        .zip(dims)
        .fold(0, |acc, (&i, &d)| acc * d + i)
}

pub fn unravel_oracle(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

/// Operator embedding by explicit delta-function loops: the entry is the
/// local matrix element on the target factors times a Kronecker delta on
/// every other factor.
pub fn embed_oracle(
    op: &ComplexMatrix,
    dims: &[usize],
    targets: &[usize],
) -> ComplexMatrix {
    let total: usize = dims.iter().product();
    let target_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    ComplexMatrix::from_fn(total, total, |r, c| {
        let ri = unravel_oracle(dims, r);
        let ci = unravel_oracle(dims, c);
        for (k, d) in ri.iter().enumerate() {
            if !targets.contains(&k) && d != &ci[k] {
                return Complex64::new(0.0, 0.0);
            }
        }
        let rsub: Vec<usize> = targets.iter().map(|&t| ri[t]).collect();
        let csub: Vec<usize> = targets.iter().map(|&t| ci[t]).collect();
        op[(
            ravel_oracle(&target_dims, &rsub),
            ravel_oracle(&target_dims, &csub),
        )]
    })
}

/// Partial trace by summing matrix elements over the traced factors.
pub fn partial_trace_oracle(
    rho: &ComplexMatrix,
    dims: &[usize],
    keep: &[usize],
) -> ComplexMatrix {
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = traced_dims.iter().product::<usize>().max(1);
    ComplexMatrix::from_fn(dk, dk, |a, b| {
        let ai = unravel_oracle(&keep_dims, a);
        let bi = unravel_oracle(&keep_dims, b);
        (0..dt)
            .map(|t| {
                let ti = unravel_oracle(&traced_dims, t);
                let mut full_a = vec![0; dims.len()];
                let mut full_b = vec![0; dims.len()];
                for (pos, &k) in keep.iter().enumerate() {
                    full_a[k] = ai[pos];
                    full_b[k] = bi[pos];
                }
                for (pos, &k) in traced.iter().enumerate() {
                    full_a[k] = ti[pos];
                    full_b[k] = ti[pos];
                }
                rho[(ravel_oracle(dims, &full_a), ravel_oracle(dims, &full_b))]
            })
            .sum()
    })
}

/// `exp(-i t H)` by scaled-and-squared Taylor series; no eigensolver.
pub fn taylor_expm(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let n = h.rows();
    let bound = h.max_abs() * t.abs() * n as f64;
    let halvings = if bound > 0.5 {
        (bound / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = h.scale(Complex64::new(0.0, -t * (0.5f64).powi(halvings)));
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for j in 1..=30 {
        term = naive_mul(&term, &a).scale_re(1.0 / j as f64);
        sum = sum.add(&term).unwrap();
    }
    for _ in 0..halvings {
        sum = naive_mul(&sum, &sum);
    }
    sum
}

/// Row rank of a real matrix by Gaussian elimination with partial
/// pivoting; the tolerance is relative to the largest entry.
pub fn real_rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let (nrows, ncols) = (m.len(), m[0].len());
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    let mut col = 0;
    while rank < nrows && col < ncols {
        let (pivot_row, pivot) = (rank..nrows)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if pivot <= tol {
            col += 1;
            continue;
        }
        m.swap(rank, pivot_row);
        let pivot_tail = m[rank][col..].to_vec();
        for row in m.iter_mut().skip(rank + 1) {
            let f = row[col] / pivot_tail[0];
            if f != 0.0 {
                for (dst, &src) in row[col..].iter_mut().zip(&pivot_tail) {
                    *dst -= f * src;
                }
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

fn traceless_oracle(m: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let shift = m.trace().unwrap() / n as f64;
    ComplexMatrix::from_fn(n, n, |r, c| {
        if r == c {
            m[(r, c)] - shift
        } else {
            m[(r, c)]
        }
    })
}

fn as_real_row(m: &ComplexMatrix) -> Vec<f64> {
    m.data().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn try_add_independent(
    selected: &mut Vec<ComplexMatrix>,
    rows: &mut Vec<Vec<f64>>,
    candidate: &ComplexMatrix,
    n: usize,
) {
    let c = traceless_oracle(candidate, n);
    let norm = c.frobenius_norm();
    if norm < 1e-10 {
        return;
    }
    let c = c.scale_re(1.0 / norm);
    rows.push(as_real_row(&c));
    if real_rank(rows, 1e-8) > selected.len() {
        selected.push(c);
    } else {
        rows.pop();
    }
}

/// Dimension of the smallest commutator-closed traceless operator space
/// containing the generators, computed by brute-force rank growth: keep
/// a spanning list, bracket every pair, and test candidates by Gaussian
/// elimination on their vectorized real coordinates. Bilinearity of the
/// bracket makes the spanning list sufficient.
pub fn closure_dim_oracle(generators: &[HermitianOperator], n: usize) -> usize {
    let full = n * n - 1;
    let mut selected: Vec<ComplexMatrix> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for g in generators {
        try_add_independent(&mut selected, &mut rows, g.matrix(), n);
    }
    loop {
        let before = selected.len();
        let snapshot = selected.clone();
        for a in &snapshot {
            for b in &snapshot {
                let bracket = naive_mul(a, b)
                    .sub(&naive_mul(b, a))
                    .unwrap()
                    .scale(Complex64::new(0.0, 1.0));
                try_add_independent(&mut selected, &mut rows, &bracket, n);
                if selected.len() == full {
                    return full;
                }
            }
        }
        if selected.len() == before {
            return selected.len();
        }
    }
}

/// Three-sigma acceptance band for a binomial count.
pub fn binomial_band(p: f64, n: usize) -> (f64, f64) {
    let mean = p * n as f64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (mean - 3.0 * sd, mean + 3.0 * sd)
}
