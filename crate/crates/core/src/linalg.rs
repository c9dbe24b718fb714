//! Dense exact linear algebra over Gaussian rationals: row reduction with
//! canonical echelon bases, kernels, linear solves, and an LDL* routine used
//! to certify positive semidefiniteness of Hermitian Gram matrices.

use crate::scalar::Scalar;
use num_traits::Zero;

#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Scalar>,
}

impl Mat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![Scalar::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn at(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Scalar] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vec(&self, r: usize) -> Vec<Scalar> {
        self.row(r).to_vec()
    }

    pub fn col_vec(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self.at(r, c).clone()).collect()
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Mat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.at(i, j) + &(a * b);
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Mat {
        let mut out = Mat::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c).conj());
            }
        }
        out
    }

    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        let mut out = vec![Scalar::zero(); self.rows];
        for (j, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for i in 0..self.rows {
                let a = self.at(i, j);
                if !a.is_zero() {
                    out[i] += &(a * x);
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Canonical reduced row echelon basis of the row space.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub basis: Vec<Vec<Scalar>>,
    pub pivots: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of `v` in the echelon basis, or `None` if outside the span.
    pub fn express(&self, v: &[Scalar]) -> Option<Vec<Scalar>> {
        let mut rem = v.to_vec();
        let mut coords = vec![Scalar::zero(); self.basis.len()];
        for (i, (row, &p)) in self.basis.iter().zip(self.pivots.iter()).enumerate() {
            let c = rem[p].clone();
            if !c.is_zero() {
                for (r, b) in rem.iter_mut().zip(row.iter()) {
                    *r -= &(&c * b);
                }
                coords[i] = c;
            }
        }
        if rem.iter().all(|x| x.is_zero()) {
            Some(coords)
        } else {
            None
        }
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        self.express(v).is_some()
    }

    /// Reduces `v` modulo the row space; zero iff contained.
    pub fn reduce(&self, v: &[Scalar]) -> Vec<Scalar> {
        let mut rem = v.to_vec();
        for (row, &p) in self.basis.iter().zip(self.pivots.iter()) {
            let c = rem[p].clone();
            if !c.is_zero() {
                for (r, b) in rem.iter_mut().zip(row.iter()) {
                    *r -= &(&c * b);
                }
            }
        }
        rem
    }

    /// Inserts a vector, returning true if the rank grew.
    pub fn insert(&mut self, v: &[Scalar]) -> bool {
        let rem = self.reduce(v);
        let Some(p) = rem.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = rem[p].inv();
        let mut row: Vec<Scalar> = rem.iter().map(|x| x * &inv).collect();
        row[p] = Scalar::one();
        // Back-substitute into earlier rows and keep pivot order sorted.
        for (b, _) in self.basis.iter_mut().zip(self.pivots.iter()) {
            let c = b[p].clone();
            if !c.is_zero() {
                for (x, y) in b.iter_mut().zip(row.iter()) {
                    *x -= &(&c * y);
                }
            }
        }
        let pos = self.pivots.iter().position(|&q| q > p).unwrap_or(self.pivots.len());
        self.basis.insert(pos, row);
        self.pivots.insert(pos, p);
        true
    }
}

/// Reduced row echelon form of a list of vectors (deterministic).
pub fn rref(vectors: &[Vec<Scalar>]) -> Echelon {
    let mut ech = Echelon { basis: Vec::new(), pivots: Vec::new() };
    for v in vectors {
        ech.insert(v);
    }
    ech
}

pub fn rank(vectors: &[Vec<Scalar>]) -> usize {
    rref(vectors).rank()
}

/// Basis of the right kernel of `m` (canonical free-variable vectors).
pub fn kernel(m: &Mat) -> Vec<Vec<Scalar>> {
    let rows: Vec<Vec<Scalar>> = (0..m.rows).map(|r| m.row_vec(r)).collect();
    let ech = rref(&rows);
    let pivot_set: std::collections::BTreeSet<usize> = ech.pivots.iter().copied().collect();
    let mut out = Vec::new();
    for free in 0..m.cols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![Scalar::zero(); m.cols];
        v[free] = Scalar::one();
        for (row, &p) in ech.basis.iter().zip(ech.pivots.iter()) {
            v[p] = -&row[free];
        }
        out.push(v);
    }
    out
}

/// One solution of `m x = b` (free variables zero), or `None`.
pub fn solve(m: &Mat, b: &[Scalar]) -> Option<Vec<Scalar>> {
    assert_eq!(m.rows, b.len());
    // Row-reduce the augmented system.
    let mut aug: Vec<Vec<Scalar>> = (0..m.rows)
        .map(|r| {
            let mut row = m.row_vec(r);
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0usize;
    for col in 0..m.cols {
        let Some(pr) = (rank..aug.len()).find(|&r| !aug[r][col].is_zero()) else {
            continue;
        };
        aug.swap(rank, pr);
        let inv = aug[rank][col].inv();
        for x in aug[rank].iter_mut() {
            *x *= &inv;
        }
        for r in 0..aug.len() {
            if r != rank && !aug[r][col].is_zero() {
                let c = aug[r][col].clone();
                for j in 0..=m.cols {
                    let s = &c * &aug[rank][j];
                    aug[r][j] -= &s;
                }
            }
        }
        pivots.push((rank, col));
        rank += 1;
    }
    // Inconsistent if a zero row has nonzero rhs.
    for r in rank..aug.len() {
        if !aug[r][m.cols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Scalar::zero(); m.cols];
    for &(r, c) in &pivots {
        x[c] = aug[r][m.cols].clone();
    }
    Some(x)
}

/// Inverse of a square matrix by Gauss-Jordan elimination.
pub fn invert(m: &Mat) -> Option<Mat> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    let mut inv = Mat::identity(n);
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a.at(r, col).is_zero())?;
        if pivot != col {
            for j in 0..n {
                let (x, y) = (a.at(col, j).clone(), a.at(pivot, j).clone());
                a.set(col, j, y);
                a.set(pivot, j, x);
                let (x, y) = (inv.at(col, j).clone(), inv.at(pivot, j).clone());
                inv.set(col, j, y);
                inv.set(pivot, j, x);
            }
        }
        let piv_inv = a.at(col, col).inv();
        for j in 0..n {
            a.set(col, j, a.at(col, j) * &piv_inv);
            inv.set(col, j, inv.at(col, j) * &piv_inv);
        }
        for r in 0..n {
            if r != col && !a.at(r, col).is_zero() {
                let f = a.at(r, col).clone();
                for j in 0..n {
                    let av = a.at(r, j) - &(&f * a.at(col, j));
                    a.set(r, j, av);
                    let iv = inv.at(r, j) - &(&f * inv.at(col, j));
                    inv.set(r, j, iv);
                }
            }
        }
    }
    Some(inv)
}

/// Intersection of two row spaces as a canonical echelon basis.
pub fn intersect_spans(a: &[Vec<Scalar>], b: &[Vec<Scalar>]) -> Vec<Vec<Scalar>> {
    // v in span(a) ∩ span(b)  <=>  v = xA = yB. Solve for null space of [A^T | -B^T].
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a[0].len();
    let ra = a.len();
    let rb = b.len();
    let mut m = Mat::zero(n, ra + rb);
    for (i, v) in a.iter().enumerate() {
        for (j, x) in v.iter().enumerate() {
            m.set(j, i, x.clone());
        }
    }
    for (i, v) in b.iter().enumerate() {
        for (j, x) in v.iter().enumerate() {
            m.set(j, ra + i, -x);
        }
    }
    let ker = kernel(&m);
    let mut vecs = Vec::new();
    for k in ker {
        let mut v = vec![Scalar::zero(); n];
        for (i, coeff) in k[..ra].iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            for (vv, av) in v.iter_mut().zip(a[i].iter()) {
                *vv += &(coeff * av);
            }
        }
        vecs.push(v);
    }
    rref(&vecs).basis
}

/// Outcome of the exact LDL* factorization attempt on a Hermitian matrix.
pub enum PsdVerdict {
    /// All pivots nonnegative, zero diagonals had zero rows: PSD certified.
    Psd,
    /// A negative pivot or a zero diagonal with a nonzero row was found.
    NotPsd { index: usize },
    /// Input is not Hermitian.
    NotHermitian { row: usize, col: usize },
}

/// Certifies positive semidefiniteness of a Hermitian matrix by exact
/// LDL* with diagonal pivoting.
pub fn ldl_psd(g: &Mat) -> PsdVerdict {
    assert_eq!(g.rows, g.cols);
    let n = g.rows;
    for r in 0..n {
        for c in 0..n {
            if *g.at(r, c) != g.at(c, r).conj() {
                return PsdVerdict::NotHermitian { row: r, col: c };
            }
        }
    }
    let mut a = g.clone();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        // Pick a remaining index with nonzero diagonal.
        let pick = active.iter().position(|&i| !a.at(i, i).is_zero());
        match pick {
            None => {
                // All diagonals zero: PSD forces the whole active block to vanish.
                for &i in &active {
                    for &j in &active {
                        if !a.at(i, j).is_zero() {
                            return PsdVerdict::NotPsd { index: i };
                        }
                    }
                }
                return PsdVerdict::Psd;
            }
            Some(pos) => {
                let p = active.remove(pos);
                let d = a.at(p, p).clone();
                if !d.im.is_zero() || d.re < Zero::zero() {
                    return PsdVerdict::NotPsd { index: p };
                }
                let dinv = d.inv();
                // Schur complement update on the remaining block.
                let col: Vec<(usize, Scalar)> = active
                    .iter()
                    .map(|&i| (i, a.at(i, p).clone()))
                    .filter(|(_, x)| !x.is_zero())
                    .collect();
                for &(i, ref ci) in &col {
                    for &(j, ref cj) in &col {
                        let upd = &(&(ci * &cj.conj()) * &dinv);
                        let cur = a.at(i, j) - upd;
                        a.set(i, j, cur);
                    }
                }
            }
        }
    }
    PsdVerdict::Psd
}
