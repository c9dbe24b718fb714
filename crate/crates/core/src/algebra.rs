//! Finite-dimensional unital *-algebras over exact Gaussian rationals, given
//! by structure constants on a fixed basis.
//!
//! Associativity, unit laws, and the involution laws are verified on all
//! basis tuples at construction time. Products of basis elements are stored
//! sparsely; in all the algebras this crate builds (matrix algebras, group
//! algebras, tensor products, relation algebras) they are close to monomial.

use crate::linalg::{rref, Echelon, Mat};
use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("structure constants are not associative at basis triple ({0},{1},{2})")]
    NotAssociative(usize, usize, usize),
    #[error("unit law fails at basis element {0}")]
    UnitLawFails(usize),
    #[error("star is not an involution at basis element {0}")]
    StarNotInvolutive(usize),
    #[error("star is not an anti-homomorphism at basis pair ({0},{1})")]
    StarNotAntiHom(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the algebra carries no declared tensor factorization")]
    NoTensorStructure,
    #[error("element is not unitary")]
    NotUnitary,
    #[error("span is not closed under multiplication")]
    SpanNotClosed,
    #[error("span does not contain the unit")]
    SpanMissingUnit,
    #[error("span is not closed under the involution")]
    SpanNotStarClosed,
    #[error("vector does not lie in the subalgebra span")]
    OutsideSpan,
    #[error("morphism is not unital")]
    NotUnital,
    #[error("morphism fails multiplicativity at basis pair ({0},{1})")]
    NotMultiplicative(usize, usize),
    #[error("morphism does not preserve the involution at basis element {0}")]
    NotStarPreserving(usize),
    #[error("morphism is not injective")]
    NotInjective,
    #[error("expectation is not idempotent")]
    NotIdempotent,
    #[error("expectation does not restrict to the identity on its target")]
    NotIdentityOnTarget,
    #[error("expectation violates the bimodule law at (b1={b1}, x={x}, b2={b2})")]
    BimoduleLawFails { b1: usize, x: usize, b2: usize },
    #[error("expectation does not commute with the involution at basis element {0}")]
    ExpectationNotStar(usize),
    #[error("expectations have different source algebras")]
    SourceMismatch,
    #[error("functional is not a trace (tr(xy) != tr(yx) at ({0},{1}))")]
    NotTrace(usize, usize),
    #[error("trace form is degenerate")]
    TraceNotFaithful,
}

/// Sparse vector: sorted `(index, coefficient)` pairs, no zero coefficients.
pub type SparseVec = Vec<(usize, Scalar)>;

pub fn sparse_insert(v: &mut SparseVec, idx: usize, c: &Scalar) {
    if c.is_zero() {
        return;
    }
    match v.binary_search_by_key(&idx, |e| e.0) {
        Ok(p) => {
            v[p].1 += c;
            if v[p].1.is_zero() {
                v.remove(p);
            }
        }
        Err(p) => v.insert(p, (idx, c.clone())),
    }
}

pub fn sparse_to_dense(v: &SparseVec, dim: usize) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); dim];
    for (i, c) in v {
        out[*i] = c.clone();
    }
    out
}

pub fn dense_to_sparse(v: &[Scalar]) -> SparseVec {
    v.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i, c.clone())).collect()
}

/// A finite-dimensional unital *-algebra over `Q(i)`.
#[derive(Clone, PartialEq, Eq)]
pub struct StarAlgebra {
    dim: usize,
    labels: Vec<String>,
    /// `structure[i * dim + j]` is the product of basis elements i and j.
    structure: Vec<SparseVec>,
    unit: Vec<Scalar>,
    /// Images of basis elements under the involution. The involution of a
    /// general vector conjugates coordinates before applying this table.
    star: Vec<SparseVec>,
    /// Set when the basis is the matrix-unit basis of `M_n (x) M_k` with
    /// index `((i*n + j)*k + a)*k + b`.
    tensor_info: Option<(usize, usize)>,
}

impl std::fmt::Debug for StarAlgebra {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StarAlgebra(dim={})", self.dim)
    }
}

impl StarAlgebra {
    pub fn new(
        labels: Vec<String>,
        structure: Vec<SparseVec>,
        unit: Vec<Scalar>,
        star: Vec<SparseVec>,
        tensor_info: Option<(usize, usize)>,
    ) -> Result<Self, AlgebraError> {
        let dim = labels.len();
        if structure.len() != dim * dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: dim * dim,
                got: structure.len(),
            });
        }
        if unit.len() != dim || star.len() != dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: dim,
                got: unit.len().min(star.len()),
            });
        }
        let alg = StarAlgebra { dim, labels, structure, unit, star, tensor_info };
        alg.validate()?;
        Ok(alg)
    }

    fn validate(&self) -> Result<(), AlgebraError> {
        for i in 0..self.dim {
            let basis = self.basis_vec(i);
            if self.mul_vec(&self.unit, &basis) != basis
                || self.mul_vec(&basis, &self.unit) != basis
            {
                return Err(AlgebraError::UnitLawFails(i));
            }
        }
        // Associativity on all basis triples, exploiting sparsity.
        for i in 0..self.dim {
            for j in 0..self.dim {
                let ij = &self.structure[i * self.dim + j];
                for k in 0..self.dim {
                    let mut lhs: SparseVec = Vec::new();
                    for (m, c) in ij {
                        for (t, d) in &self.structure[m * self.dim + k] {
                            sparse_insert(&mut lhs, *t, &(c * d));
                        }
                    }
                    let jk = &self.structure[j * self.dim + k];
                    let mut rhs: SparseVec = Vec::new();
                    for (m, c) in jk {
                        for (t, d) in &self.structure[i * self.dim + m] {
                            sparse_insert(&mut rhs, *t, &(c * d));
                        }
                    }
                    if lhs != rhs {
                        return Err(AlgebraError::NotAssociative(i, j, k));
                    }
                }
            }
        }
        // Involution: involutive, anti-multiplicative, fixes the unit.
        for i in 0..self.dim {
            let si = sparse_to_dense(&self.star[i], self.dim);
            if self.star_vec(&si) != self.basis_vec(i) {
                return Err(AlgebraError::StarNotInvolutive(i));
            }
        }
        if self.star_vec(&self.unit) != self.unit {
            return Err(AlgebraError::StarNotInvolutive(usize::MAX));
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                let prod = sparse_to_dense(&self.structure[i * self.dim + j], self.dim);
                let lhs = self.star_vec(&prod);
                let sj = sparse_to_dense(&self.star[j], self.dim);
                let si = sparse_to_dense(&self.star[i], self.dim);
                if lhs != self.mul_vec(&sj, &si) {
                    return Err(AlgebraError::StarNotAntiHom(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn unit(&self) -> &[Scalar] {
        &self.unit
    }

    pub fn tensor_info(&self) -> Option<(usize, usize)> {
        self.tensor_info
    }

    pub fn basis_product(&self, i: usize, j: usize) -> &SparseVec {
        &self.structure[i * self.dim + j]
    }

    pub fn basis_star(&self, i: usize) -> &SparseVec {
        &self.star[i]
    }

    pub fn basis_vec(&self, i: usize) -> Vec<Scalar> {
        let mut v = vec![Scalar::zero(); self.dim];
        v[i] = Scalar::one();
        v
    }

    pub fn mul_vec(&self, x: &[Scalar], y: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.dim];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if yj.is_zero() {
                    continue;
                }
                let c = xi * yj;
                for (t, d) in &self.structure[i * self.dim + j] {
                    out[*t] += &(&c * d);
                }
            }
        }
        out
    }

    /// Involution of a coordinate vector (conjugate-linear).
    pub fn star_vec(&self, x: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.dim];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            let c = xi.conj();
            for (t, d) in &self.star[i] {
                out[*t] += &(&c * d);
            }
        }
        out
    }

    pub fn is_unitary(&self, u: &[Scalar]) -> bool {
        let us = self.star_vec(u);
        self.mul_vec(&us, u) == self.unit && self.mul_vec(u, &us) == self.unit
    }

    /// Left-multiplication operator as a matrix.
    pub fn left_mul_matrix(&self, x: &[Scalar]) -> Mat {
        let mut m = Mat::zero(self.dim, self.dim);
        for j in 0..self.dim {
            let col = self.mul_vec(x, &self.basis_vec(j));
            for (r, c) in col.into_iter().enumerate() {
                m.set(r, j, c);
            }
        }
        m
    }

    /// Elements commuting with every member of `gens` (which must generate
    /// the algebra for this to be the center).
    pub fn central_elements(&self, gens: &[Vec<Scalar>]) -> Vec<Vec<Scalar>> {
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        for g in gens {
            let mut block = vec![vec![Scalar::zero(); self.dim]; self.dim];
            for j in 0..self.dim {
                let b = self.basis_vec(j);
                let lg = self.mul_vec(g, &b);
                let rg = self.mul_vec(&b, g);
                for r in 0..self.dim {
                    block[r][j] = &lg[r] - &rg[r];
                }
            }
            rows.extend(block);
        }
        crate::linalg::kernel(&Mat::from_rows(rows))
    }

    /// Full matrix algebra `M_n` on the matrix-unit basis `e(i,j)`.
    pub fn matrix_algebra(n: usize) -> StarAlgebra {
        assert!(n >= 1);
        let dim = n * n;
        let idx = |i: usize, j: usize| i * n + j;
        let mut structure = vec![SparseVec::new(); dim * dim];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        if j == k {
                            structure[idx(i, j) * dim + idx(k, l)] =
                                vec![(idx(i, l), Scalar::one())];
                        }
                    }
                }
            }
        }
        let mut unit = vec![Scalar::zero(); dim];
        for i in 0..n {
            unit[idx(i, i)] = Scalar::one();
        }
        let mut star = vec![SparseVec::new(); dim];
        let mut labels = vec![String::new(); dim];
        for i in 0..n {
            for j in 0..n {
                star[idx(i, j)] = vec![(idx(j, i), Scalar::one())];
                labels[idx(i, j)] = format!("e({},{})", i + 1, j + 1);
            }
        }
        StarAlgebra::new(labels, structure, unit, star, Some((n, 1)))
            .expect("matrix algebra laws hold")
    }

    /// Tensor product on the pair basis; componentwise structure and star.
    pub fn tensor(a: &StarAlgebra, b: &StarAlgebra) -> StarAlgebra {
        let dim = a.dim * b.dim;
        let idx = |p: usize, q: usize| p * b.dim + q;
        let mut structure = vec![SparseVec::new(); dim * dim];
        for p1 in 0..a.dim {
            for q1 in 0..b.dim {
                for p2 in 0..a.dim {
                    for q2 in 0..b.dim {
                        let mut out = SparseVec::new();
                        for (pa, ca) in a.basis_product(p1, p2) {
                            for (qb, cb) in b.basis_product(q1, q2) {
                                sparse_insert(&mut out, idx(*pa, *qb), &(ca * cb));
                            }
                        }
                        structure[idx(p1, q1) * dim + idx(p2, q2)] = out;
                    }
                }
            }
        }
        let mut unit = vec![Scalar::zero(); dim];
        for (p, cp) in a.unit.iter().enumerate() {
            for (q, cq) in b.unit.iter().enumerate() {
                let c = cp * cq;
                if !c.is_zero() {
                    unit[idx(p, q)] = c;
                }
            }
        }
        let mut star = vec![SparseVec::new(); dim];
        let mut labels = vec![String::new(); dim];
        for p in 0..a.dim {
            for q in 0..b.dim {
                let mut out = SparseVec::new();
                for (pa, ca) in a.basis_star(p) {
                    for (qb, cb) in b.basis_star(q) {
                        sparse_insert(&mut out, idx(*pa, *qb), &(ca * cb));
                    }
                }
                star[idx(p, q)] = out;
                labels[idx(p, q)] = format!("{}(x){}", a.labels[p], b.labels[q]);
            }
        }
        // The bipartite matrix-unit layout survives only when tensoring two
        // plain matrix algebras.
        let tensor_info = match (a.tensor_info, b.tensor_info) {
            (Some((n, 1)), Some((k, 1))) => Some((n, k)),
            _ => None,
        };
        StarAlgebra::new(labels, structure, unit, star, tensor_info)
            .expect("tensor of algebras is an algebra")
    }

    /// Group *-algebra: basis indexed by group elements, `g* = g^{-1}`.
    pub fn group_algebra(g: &crate::group::FiniteGroup) -> StarAlgebra {
        let dim = g.order();
        let mut structure = vec![SparseVec::new(); dim * dim];
        for x in 0..dim {
            for y in 0..dim {
                structure[x * dim + y] = vec![(g.mul(x, y), Scalar::one())];
            }
        }
        let mut unit = vec![Scalar::zero(); dim];
        unit[g.identity()] = Scalar::one();
        let star = (0..dim).map(|x| vec![(g.inv(x), Scalar::one())]).collect();
        let labels = (0..dim).map(|x| g.label(x)).collect();
        StarAlgebra::new(labels, structure, unit, star, None).expect("group algebra laws hold")
    }

    /// Basis index of the matrix unit `E(r,c)` of `M_{nk}` under the declared
    /// bipartite layout.
    pub fn matrix_unit_index(&self, r: usize, c: usize) -> Result<usize, AlgebraError> {
        let (n, k) = self.tensor_info.ok_or(AlgebraError::NoTensorStructure)?;
        assert!(r < n * k && c < n * k);
        let (i, a) = (r / k, r % k);
        let (j, b) = (c / k, c % k);
        Ok(((i * n + j) * k + a) * k + b)
    }

    /// Coordinate vector of a dense `nk x nk` matrix.
    pub fn from_dense_matrix(&self, entries: &[Vec<Scalar>]) -> Result<Vec<Scalar>, AlgebraError> {
        let (n, k) = self.tensor_info.ok_or(AlgebraError::NoTensorStructure)?;
        let size = n * k;
        if entries.len() != size || entries.iter().any(|r| r.len() != size) {
            return Err(AlgebraError::DimensionMismatch { expected: size, got: entries.len() });
        }
        let mut out = vec![Scalar::zero(); self.dim];
        for r in 0..size {
            for c in 0..size {
                if !entries[r][c].is_zero() {
                    out[self.matrix_unit_index(r, c)?] = entries[r][c].clone();
                }
            }
        }
        Ok(out)
    }

    /// Coordinate vector of a permutation matrix (`perm[c]` is the row of the
    /// 1 in column `c`).
    pub fn permutation_matrix(&self, perm: &[usize]) -> Result<Vec<Scalar>, AlgebraError> {
        let (n, k) = self.tensor_info.ok_or(AlgebraError::NoTensorStructure)?;
        let size = n * k;
        if perm.len() != size {
            return Err(AlgebraError::DimensionMismatch { expected: size, got: perm.len() });
        }
        let mut out = vec![Scalar::zero(); self.dim];
        for (c, &r) in perm.iter().enumerate() {
            out[self.matrix_unit_index(r, c)?] = Scalar::one();
        }
        Ok(out)
    }

    /// Block transpose of an element of `M_n (x) M_k`: outer indices are
    /// transposed, inner indices kept.
    pub fn block_transpose(&self, w: &[Scalar]) -> Result<Vec<Scalar>, AlgebraError> {
        let (n, k) = self.tensor_info.ok_or(AlgebraError::NoTensorStructure)?;
        let mut out = vec![Scalar::zero(); self.dim];
        for i in 0..n {
            for j in 0..n {
                for a in 0..k {
                    for b in 0..k {
                        let src = ((i * n + j) * k + a) * k + b;
                        let dst = ((j * n + i) * k + a) * k + b;
                        out[dst] = w[src].clone();
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A unital *-closed subspace of an algebra, held as a canonical echelon
/// basis.
#[derive(Clone, Debug)]
pub struct SubalgebraSpan {
    parent_dim: usize,
    ech: Echelon,
}

impl SubalgebraSpan {
    /// Validates that the span of `vectors` is a unital *-closed subalgebra.
    pub fn new(alg: &StarAlgebra, vectors: &[Vec<Scalar>]) -> Result<Self, AlgebraError> {
        let ech = rref(vectors);
        let span = SubalgebraSpan { parent_dim: alg.dim(), ech };
        if !span.contains(alg.unit()) {
            return Err(AlgebraError::SpanMissingUnit);
        }
        for x in span.basis() {
            if !span.contains(&alg.star_vec(x)) {
                return Err(AlgebraError::SpanNotStarClosed);
            }
            for y in span.basis() {
                if !span.contains(&alg.mul_vec(x, y)) {
                    return Err(AlgebraError::SpanNotClosed);
                }
            }
        }
        Ok(span)
    }

    pub fn dim(&self) -> usize {
        self.ech.rank()
    }

    pub fn parent_dim(&self) -> usize {
        self.parent_dim
    }

    pub fn basis(&self) -> &[Vec<Scalar>] {
        &self.ech.basis
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        self.ech.contains(v)
    }

    pub fn express(&self, v: &[Scalar]) -> Option<Vec<Scalar>> {
        self.ech.express(v)
    }

    /// Rebuilds a vector from coordinates in the span basis.
    pub fn lift(&self, coords: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.parent_dim];
        for (c, row) in coords.iter().zip(self.basis()) {
            if c.is_zero() {
                continue;
            }
            for (o, r) in out.iter_mut().zip(row.iter()) {
                *o += &(c * r);
            }
        }
        out
    }

    pub fn equals(&self, other: &SubalgebraSpan) -> bool {
        self.dim() == other.dim() && self.basis().iter().all(|v| other.contains(v))
    }

    pub fn intersect(&self, other: &SubalgebraSpan) -> Vec<Vec<Scalar>> {
        crate::linalg::intersect_spans(self.basis(), other.basis())
    }
}

/// Smallest unital *-closed subalgebra span containing `gens`, computed by
/// alternating products and exact rank updates until stable.
pub fn span_closure(alg: &StarAlgebra, gens: &[Vec<Scalar>]) -> SubalgebraSpan {
    let mut ech = rref(&[alg.unit().to_vec()]);
    let mut worklist: Vec<Vec<Scalar>> = Vec::new();
    for g in gens {
        if ech.insert(g) {
            worklist.push(g.clone());
        }
        let sg = alg.star_vec(g);
        if ech.insert(&sg) {
            worklist.push(sg);
        }
    }
    let mut stable: Vec<Vec<Scalar>> = vec![alg.unit().to_vec()];
    while let Some(x) = worklist.pop() {
        let mut new_vecs = Vec::new();
        let sx = alg.star_vec(&x);
        if ech.insert(&sx) {
            new_vecs.push(sx);
        }
        for y in stable.iter().chain(std::iter::once(&x)) {
            for v in [alg.mul_vec(&x, y), alg.mul_vec(y, &x)] {
                if ech.insert(&v) {
                    new_vecs.push(v);
                }
            }
        }
        stable.push(x);
        worklist.extend(new_vecs);
    }
    SubalgebraSpan { parent_dim: alg.dim(), ech }
}

/// A unital *-homomorphism between algebras, as the matrix of basis images.
#[derive(Clone, Debug)]
pub struct StarMorphism {
    pub matrix: Mat,
}

impl StarMorphism {
    pub fn new(
        source: &StarAlgebra,
        target: &StarAlgebra,
        images: Vec<Vec<Scalar>>,
    ) -> Result<Self, AlgebraError> {
        if images.len() != source.dim() || images.iter().any(|v| v.len() != target.dim()) {
            return Err(AlgebraError::DimensionMismatch {
                expected: source.dim(),
                got: images.len(),
            });
        }
        let mut matrix = Mat::zero(target.dim(), source.dim());
        for (j, img) in images.iter().enumerate() {
            for (r, c) in img.iter().enumerate() {
                matrix.set(r, j, c.clone());
            }
        }
        let m = StarMorphism { matrix };
        m.check(source, target)?;
        Ok(m)
    }

    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        self.matrix.apply(v)
    }

    pub fn image_of_basis(&self, j: usize) -> Vec<Scalar> {
        self.matrix.col_vec(j)
    }

    pub fn check(&self, source: &StarAlgebra, target: &StarAlgebra) -> Result<(), AlgebraError> {
        if self.apply(source.unit()) != target.unit() {
            return Err(AlgebraError::NotUnital);
        }
        for i in 0..source.dim() {
            for j in 0..source.dim() {
                let prod = sparse_to_dense(source.basis_product(i, j), source.dim());
                let lhs = self.apply(&prod);
                let rhs = target.mul_vec(&self.image_of_basis(i), &self.image_of_basis(j));
                if lhs != rhs {
                    return Err(AlgebraError::NotMultiplicative(i, j));
                }
            }
        }
        for i in 0..source.dim() {
            let si = sparse_to_dense(source.basis_star(i), source.dim());
            if self.apply(&si) != target.star_vec(&self.image_of_basis(i)) {
                return Err(AlgebraError::NotStarPreserving(i));
            }
        }
        Ok(())
    }

    pub fn is_injective(&self) -> bool {
        self.rank() == self.matrix.cols
    }

    pub fn rank(&self) -> usize {
        let cols: Vec<Vec<Scalar>> =
            (0..self.matrix.cols).map(|j| self.matrix.col_vec(j)).collect();
        crate::linalg::rank(&cols)
    }

    pub fn compose(&self, then: &StarMorphism) -> StarMorphism {
        StarMorphism { matrix: then.matrix.mul(&self.matrix) }
    }

    pub fn identity(alg: &StarAlgebra) -> StarMorphism {
        StarMorphism { matrix: Mat::identity(alg.dim()) }
    }
}

/// Normalized trace of a matrix tensor algebra.
pub fn normalized_trace(alg: &StarAlgebra) -> Result<Vec<Scalar>, AlgebraError> {
    let (n, k) = alg.tensor_info().ok_or(AlgebraError::NoTensorStructure)?;
    let mut tau = vec![Scalar::zero(); alg.dim()];
    for i in 0..n {
        for a in 0..k {
            let idx = ((i * n + i) * k + a) * k + a;
            tau[idx] = Scalar::from_ratio(1, (n * k) as i64);
        }
    }
    Ok(tau)
}

/// Canonical trace of a group algebra: the coefficient of the identity.
pub fn group_trace(g: &crate::group::FiniteGroup) -> Vec<Scalar> {
    let mut tau = vec![Scalar::zero(); g.order()];
    tau[g.identity()] = Scalar::one();
    tau
}

/// Applies a linear functional to a coordinate vector.
pub fn apply_functional(tau: &[Scalar], v: &[Scalar]) -> Scalar {
    let mut out = Scalar::zero();
    for (t, x) in tau.iter().zip(v.iter()) {
        if !t.is_zero() && !x.is_zero() {
            out += &(t * x);
        }
    }
    out
}

/// Checks the trace law `tau(xy) = tau(yx)` on all basis pairs and that the
/// sesquilinear trace form is nondegenerate.
pub fn check_faithful_trace(alg: &StarAlgebra, tau: &[Scalar]) -> Result<(), AlgebraError> {
    for i in 0..alg.dim() {
        for j in 0..alg.dim() {
            let xy = sparse_to_dense(alg.basis_product(i, j), alg.dim());
            let yx = sparse_to_dense(alg.basis_product(j, i), alg.dim());
            if apply_functional(tau, &xy) != apply_functional(tau, &yx) {
                return Err(AlgebraError::NotTrace(i, j));
            }
        }
    }
    let mut rows: Vec<Vec<Scalar>> = Vec::new();
    for i in 0..alg.dim() {
        let si = alg.star_vec(&alg.basis_vec(i));
        let mut row = Vec::with_capacity(alg.dim());
        for j in 0..alg.dim() {
            let prod = alg.mul_vec(&si, &alg.basis_vec(j));
            row.push(apply_functional(tau, &prod));
        }
        rows.push(row);
    }
    if crate::linalg::rank(&rows) != alg.dim() {
        return Err(AlgebraError::TraceNotFaithful);
    }
    Ok(())
}


#[cfg(test)]
mod closure_tests {
    use super::*;

    #[test]
    fn span_closure_output_is_multiplicatively_closed() {
        // A proper subalgebra: the u-conjugated units inside M2 (x) M2.
        let m2 = StarAlgebra::matrix_algebra(2);
        let m4 = StarAlgebra::tensor(&m2, &m2);
        let u = m4.permutation_matrix(&[0, 3, 2, 1]).unwrap();
        let units = crate::expect::conjugated_units(&m4, &u, crate::expect::Side::Left).unwrap();
        let span = span_closure(&m4, &units);
        assert_eq!(span.dim(), 4);
        // Closure: products of span basis vectors stay inside, rank fixed.
        for x in span.basis() {
            for y in span.basis() {
                assert!(span.contains(&m4.mul_vec(x, y)));
            }
            assert!(span.contains(&m4.star_vec(x)));
        }
        // The validated constructor accepts the same basis.
        assert!(SubalgebraSpan::new(&m4, span.basis()).is_ok());
    }
}
