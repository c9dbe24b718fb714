//! GNS modules for conditional expectations and truncated free-product Fock
//! modules with their representations and moment maps.
//!
//! All modules are finite truncations: word spaces are kept up to a fixed
//! depth and the operators are exact on the interior block; any application
//! that would spill past the last stored depth is flagged as boundary
//! affected. Gram matrices are scalarized through a faithful base trace and
//! certified positive semidefinite by exact LDL*.

use crate::algebra::{
    apply_functional, check_faithful_trace, AlgebraError, StarAlgebra, StarMorphism,
};
use crate::expect::ConditionalExpectation;
use crate::linalg::{invert, kernel, ldl_psd, rref, Mat, PsdVerdict};
use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FockError {
    #[error("base trace form is degenerate")]
    TraceNotFaithful,
    #[error("factor {0} does not share the requested base algebra")]
    BaseMismatch(usize),
    #[error("word length {len} exceeds the truncation depth {depth}")]
    DepthExceeded { len: usize, depth: usize },
    #[error("factor index {0} out of range")]
    FactorIndexBad(usize),
    #[error("scalarized Gram matrix is not positive semidefinite at tuple {tuple:?}")]
    GramNotPsd { tuple: Vec<usize> },
    #[error("base embedding does not match the expectation target")]
    IotaTargetMismatch,
    #[error("an exact computation touched the truncation boundary")]
    TruncationTouched,
    #[error("depth-0 compression of factor {0} is not injective")]
    SigmaNotInjective(usize),
    #[error("complement of factor {factor} is not free over its base (dim {dim}, base {base})")]
    NotFree { factor: usize, dim: usize, base: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Exact faithfulness of the GNS representation of `(A, E)`: no nonzero
/// element acts as zero on the separated module. Decided by the kernel of
/// the pairing tensor `s(y, a x)` with `s(x, y) = tau(E(x* y))`.
pub fn expectation_gns_faithful(
    alg: &StarAlgebra,
    e: &ConditionalExpectation,
    tau_parent: &[Scalar],
) -> bool {
    let dim = alg.dim();
    let mut rows: Vec<Vec<Scalar>> = Vec::new();
    for y in 0..dim {
        let sy = alg.star_vec(&alg.basis_vec(y));
        for x in 0..dim {
            let mut row = Vec::with_capacity(dim);
            for k in 0..dim {
                let prod = alg.mul_vec(&alg.mul_vec(&sy, &alg.basis_vec(k)), &alg.basis_vec(x));
                row.push(apply_functional(tau_parent, &e.apply(&prod)));
            }
            rows.push(row);
        }
    }
    kernel(&Mat::from_rows(rows)).is_empty()
}

/// The separated GNS module of an algebra with a conditional expectation
/// onto a distinguished base copy.
///
/// Module coordinates are arranged as `xi B` first (in base coordinates)
/// followed by a basis of the complement `E minus xi B`, so the distinguished
/// vector is the base unit in the leading block.
pub struct ExpectationModule {
    pub algebra: StarAlgebra,
    pub base: StarAlgebra,
    /// Base basis elements as parent coordinates (the embedding iota).
    pub iota: Vec<Vec<Scalar>>,
    /// Expectation in base coordinates (base_dim x parent_dim).
    pub phi_b: Mat,
    pub dim: usize,
    pub b_dim: usize,
    /// Parent coordinates -> module coordinates.
    pub quot: Mat,
    /// Module coordinates -> representative parent coordinates.
    pub lift: Mat,
    /// Left action of each parent basis element.
    pub pi: Vec<Mat>,
    /// Base-valued inner product of the module basis.
    pub form: Vec<Vec<Vec<Scalar>>>,
    /// The trace used for scalarization, in base coordinates.
    pub tau_base: Vec<Scalar>,
    pub faithful: bool,
}

/// GNS construction. `iota` embeds the abstract base onto the expectation's
/// target; `tau_base` must be a faithful trace on the base.
pub fn gns(
    alg: &StarAlgebra,
    e: &ConditionalExpectation,
    base: &StarAlgebra,
    iota: &StarMorphism,
    tau_base: &[Scalar],
) -> Result<ExpectationModule, FockError> {
    let dim = alg.dim();
    let b_dim = base.dim();
    // The embedding must hit exactly the expectation target.
    let iota_cols: Vec<Vec<Scalar>> = (0..b_dim).map(|q| iota.image_of_basis(q)).collect();
    if iota_cols.iter().any(|v| !e.target.contains(v)) || e.target.dim() != b_dim {
        return Err(FockError::IotaTargetMismatch);
    }
    check_faithful_trace(base, tau_base).map_err(|_| FockError::TraceNotFaithful)?;

    // Expectation in base coordinates.
    let mut iota_mat = Mat::zero(dim, b_dim);
    for (q, col) in iota_cols.iter().enumerate() {
        for (r, c) in col.iter().enumerate() {
            iota_mat.set(r, q, c.clone());
        }
    }
    let mut phi_b = Mat::zero(b_dim, dim);
    for j in 0..dim {
        let img = e.apply(&alg.basis_vec(j));
        let coords = crate::linalg::solve(&iota_mat, &img).ok_or(FockError::IotaTargetMismatch)?;
        for (r, c) in coords.into_iter().enumerate() {
            phi_b.set(r, j, c);
        }
    }
    let phi_coords = |x: &[Scalar]| phi_b.apply(x);

    // Scalarized form s(x, y) = tau_base(phi(x* y)).
    let s_pair = |x: &[Scalar], y: &[Scalar]| {
        apply_functional(tau_base, &phi_coords(&alg.mul_vec(&alg.star_vec(x), y)))
    };
    let mut gram = Mat::zero(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            gram.set(i, j, s_pair(&alg.basis_vec(i), &alg.basis_vec(j)));
        }
    }
    if !matches!(ldl_psd(&gram), PsdVerdict::Psd) {
        return Err(FockError::GramNotPsd { tuple: vec![] });
    }
    let null = kernel(&gram);
    let module_dim = dim - null.len();

    // Module basis: the base copy first, then centered complement vectors.
    let mut ech = rref(&null);
    let mut lift_cols: Vec<Vec<Scalar>> = Vec::new();
    for col in &iota_cols {
        if !ech.insert(col) {
            // The base embeds since the trace is faithful on it.
            return Err(FockError::TraceNotFaithful);
        }
        lift_cols.push(col.clone());
    }
    for k in 0..dim {
        if lift_cols.len() == module_dim {
            break;
        }
        let bk = alg.basis_vec(k);
        let mut centered = bk.clone();
        let proj = iota_mat.apply(&phi_coords(&bk));
        for (c, p) in centered.iter_mut().zip(proj.iter()) {
            *c -= p;
        }
        if ech.insert(&centered) {
            lift_cols.push(centered);
        }
    }
    assert_eq!(lift_cols.len(), module_dim, "complement spans the quotient");

    let mut square = Mat::zero(dim, dim);
    for (j, col) in lift_cols.iter().chain(null.iter()).enumerate() {
        for (r, c) in col.iter().enumerate() {
            square.set(r, j, c.clone());
        }
    }
    let inv = invert(&square).expect("module basis plus null space is a basis");
    let mut quot = Mat::zero(module_dim, dim);
    for r in 0..module_dim {
        for c in 0..dim {
            quot.set(r, c, inv.at(r, c).clone());
        }
    }
    let mut lift = Mat::zero(dim, module_dim);
    for (j, col) in lift_cols.iter().enumerate() {
        for (r, c) in col.iter().enumerate() {
            lift.set(r, j, c.clone());
        }
    }

    // Left action and base-valued form on the module basis.
    let mut pi = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut m = Mat::zero(module_dim, module_dim);
        for j in 0..module_dim {
            let img = quot.apply(&alg.mul_vec(&alg.basis_vec(k), &lift.col_vec(j)));
            for (r, c) in img.into_iter().enumerate() {
                m.set(r, j, c);
            }
        }
        pi.push(m);
    }
    let mut form = vec![vec![Vec::new(); module_dim]; module_dim];
    for i in 0..module_dim {
        let si = alg.star_vec(&lift.col_vec(i));
        for j in 0..module_dim {
            form[i][j] = phi_coords(&alg.mul_vec(&si, &lift.col_vec(j)));
        }
    }
    // Faithfulness: a -> pi(a) injective.
    let mut cols: Vec<Vec<Scalar>> = Vec::new();
    for m in &pi {
        let mut v = Vec::with_capacity(module_dim * module_dim);
        for r in 0..module_dim {
            v.extend(m.row_vec(r));
        }
        cols.push(v);
    }
    let faithful = crate::linalg::rank(&cols) == dim;

    Ok(ExpectationModule {
        algebra: alg.clone(),
        base: base.clone(),
        iota: iota_cols,
        phi_b,
        dim: module_dim,
        b_dim,
        quot,
        lift,
        pi,
        form,
        tau_base: tau_base.to_vec(),
        faithful,
    })
}

/// Convenience: GNS over the scalars via the unit embedding.
pub fn gns_over_scalars(
    alg: &StarAlgebra,
    e: &ConditionalExpectation,
) -> Result<ExpectationModule, FockError> {
    let base = StarAlgebra::matrix_algebra(1);
    let iota = StarMorphism::new(&base, alg, vec![alg.unit().to_vec()])?;
    gns(alg, e, &base, &iota, &[Scalar::one()])
}

/// One factor of a free-product module: a based module with a distinguished
/// `xi B` block, the left action of its algebra, and the left action of the
/// base. The lossy flags mark matrix columns whose image dropped a term past
/// an internal truncation boundary.
pub struct FockFactor {
    pub algebra: StarAlgebra,
    pub base: StarAlgebra,
    pub dim: usize,
    pub b_dim: usize,
    pub act: Vec<Mat>,
    pub act_lossy: Vec<Vec<bool>>,
    pub b_act: Vec<Mat>,
    pub b_act_lossy: Vec<Vec<bool>>,
    pub form: Vec<Vec<Vec<Scalar>>>,
}

impl ExpectationModule {
    pub fn comp_dim(&self) -> usize {
        self.dim - self.b_dim
    }

    pub fn to_factor(&self) -> FockFactor {
        let b_act: Vec<Mat> = (0..self.b_dim)
            .map(|q| {
                let mut m = Mat::zero(self.dim, self.dim);
                for j in 0..self.dim {
                    let img =
                        self.quot.apply(&self.algebra.mul_vec(&self.iota[q], &self.lift.col_vec(j)));
                    for (r, c) in img.into_iter().enumerate() {
                        m.set(r, j, c);
                    }
                }
                m
            })
            .collect();
        FockFactor {
            algebra: self.algebra.clone(),
            base: self.base.clone(),
            dim: self.dim,
            b_dim: self.b_dim,
            act_lossy: vec![vec![false; self.dim]; self.algebra.dim()],
            act: self.pi.clone(),
            b_act_lossy: vec![vec![false; self.dim]; self.b_dim],
            b_act,
            form: self.form.clone(),
        }
    }
}

impl FockFactor {
    fn comp_dim(&self) -> usize {
        self.dim - self.b_dim
    }

    /// Applies `sum_k a_k act[k]` to a module vector, tracking lossy columns.
    pub(crate) fn apply_alg(&self, a: &[Scalar], v: &[Scalar]) -> (Vec<Scalar>, bool) {
        let mut out = vec![Scalar::zero(); self.dim];
        let mut lossy = false;
        for (k, ak) in a.iter().enumerate() {
            if ak.is_zero() {
                continue;
            }
            for (col, vc) in v.iter().enumerate() {
                if vc.is_zero() {
                    continue;
                }
                if self.act_lossy[k][col] {
                    lossy = true;
                }
                let c = ak * vc;
                for r in 0..self.dim {
                    let m = self.act[k].at(r, col);
                    if !m.is_zero() {
                        out[r] += &(&c * m);
                    }
                }
            }
        }
        (out, lossy)
    }

    /// Left action of a base value on the complement block.
    pub(crate) fn apply_base_comp(&self, b: &[Scalar], v: &[Scalar]) -> (Vec<Scalar>, bool) {
        let comp = self.comp_dim();
        let mut out = vec![Scalar::zero(); comp];
        let mut lossy = false;
        for (q, bq) in b.iter().enumerate() {
            if bq.is_zero() {
                continue;
            }
            for (col, vc) in v.iter().enumerate() {
                if vc.is_zero() {
                    continue;
                }
                if self.b_act_lossy[q][self.b_dim + col] {
                    lossy = true;
                }
                let c = bq * vc;
                for r in 0..comp {
                    let m = self.b_act[q].at(self.b_dim + r, self.b_dim + col);
                    if !m.is_zero() {
                        out[r] += &(&c * m);
                    }
                }
            }
        }
        (out, lossy)
    }

    /// Base-valued form restricted to the complement block, second argument
    /// an arbitrary complement vector.
    pub(crate) fn comp_form(&self, x: usize, y: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.b_dim];
        for (c, yc) in y.iter().enumerate() {
            if yc.is_zero() {
                continue;
            }
            for (o, f) in out.iter_mut().zip(self.form[self.b_dim + x][self.b_dim + c].iter()) {
                *o += &(yc * f);
            }
        }
        out
    }
}

/// One word space of the truncated module: the alternating tuple, its raw
/// tensor shape, and the exact null-space quotient.
pub struct WordSpace {
    pub tuple: Vec<usize>,
    pub raw_dims: Vec<usize>,
    pub raw_dim: usize,
    pub dim: usize,
    pub quot: Mat,
    pub lift: Mat,
}

/// Truncated free-product module over a common base.
pub struct TruncatedFockModule {
    pub base: StarAlgebra,
    pub tau: Vec<Scalar>,
    pub depth: usize,
    pub factors: Vec<FockFactor>,
    pub tuples: Vec<Vec<usize>>,
    pub spaces: Vec<WordSpace>,
    pub offsets: Vec<usize>,
    pub dim: usize,
}

/// Base-valued pairing of two raw word-basis tensors.
fn raw_pair(
    factors: &[FockFactor],
    base: &StarAlgebra,
    tuple: &[usize],
    raw_dims: &[usize],
    mut xi: usize,
    mut yi: usize,
) -> Vec<Scalar> {
    let n = tuple.len();
    let mut xs = vec![0usize; n];
    let mut ys = vec![0usize; n];
    for k in (0..n).rev() {
        xs[k] = xi % raw_dims[k];
        xi /= raw_dims[k];
        ys[k] = yi % raw_dims[k];
        yi /= raw_dims[k];
    }
    let mut carry: Option<Vec<Scalar>> = None;
    for k in 0..n {
        let f = &factors[tuple[k]];
        let y_vec: Vec<Scalar> = match &carry {
            None => {
                let mut v = vec![Scalar::zero(); f.comp_dim()];
                v[ys[k]] = Scalar::one();
                v
            }
            Some(c) => {
                let mut basis = vec![Scalar::zero(); f.comp_dim()];
                basis[ys[k]] = Scalar::one();
                f.apply_base_comp(c, &basis).0
            }
        };
        carry = Some(f.comp_form(xs[k], &y_vec));
    }
    carry.unwrap_or_else(|| base.unit().to_vec())
}

/// Builds the truncated module: alternating tuples up to the depth, raw
/// base-valued Grams, scalarization, exact PSD certification, and null-space
/// quotients through invertible principal blocks.
pub fn fock_space(
    factors: Vec<FockFactor>,
    base: &StarAlgebra,
    tau: &[Scalar],
    depth: usize,
) -> Result<TruncatedFockModule, FockError> {
    assert!(depth >= 1, "depth must be at least 1");
    check_faithful_trace(base, tau).map_err(|_| FockError::TraceNotFaithful)?;
    for (i, f) in factors.iter().enumerate() {
        if f.base != *base || f.b_dim != base.dim() {
            return Err(FockError::BaseMismatch(i));
        }
    }
    // Alternating tuples in breadth-first lexicographic order.
    let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for t in &layer {
            for i in 0..factors.len() {
                if t.last() == Some(&i) {
                    continue;
                }
                let mut nt = t.clone();
                nt.push(i);
                next.push(nt);
            }
        }
        tuples.extend(next.iter().cloned());
        layer = next;
    }

    let mut spaces = Vec::new();
    let mut offsets = Vec::new();
    let mut dim = 0usize;
    for tuple in &tuples {
        let raw_dims: Vec<usize> = tuple.iter().map(|&i| factors[i].comp_dim()).collect();
        let raw_dim: usize = raw_dims.iter().product::<usize>();
        let (quot, lift, qdim) = if tuple.is_empty() {
            (Mat::identity(base.dim()), Mat::identity(base.dim()), base.dim())
        } else if raw_dim == 0 {
            (Mat::zero(0, 0), Mat::zero(0, 0), 0)
        } else {
            // Scalarized Gram, PSD certificate, and quotient by its kernel.
            let mut s = Mat::zero(raw_dim, raw_dim);
            for x in 0..raw_dim {
                for y in 0..raw_dim {
                    let b = raw_pair(&factors, base, tuple, &raw_dims, x, y);
                    s.set(x, y, apply_functional(tau, &b));
                }
            }
            if !matches!(ldl_psd(&s), PsdVerdict::Psd) {
                return Err(FockError::GramNotPsd { tuple: tuple.clone() });
            }
            // Greedy principal block with independent rows; for a PSD matrix
            // row independence makes the principal block invertible.
            let mut ech = rref(&[]);
            let mut pivots: Vec<usize> = Vec::new();
            for r in 0..raw_dim {
                if ech.insert(&s.row_vec(r)) {
                    pivots.push(r);
                }
            }
            let r = pivots.len();
            let mut sjj = Mat::zero(r, r);
            for (ri, &i) in pivots.iter().enumerate() {
                for (rj, &j) in pivots.iter().enumerate() {
                    sjj.set(ri, rj, s.at(i, j).clone());
                }
            }
            let sjj_inv = invert(&sjj).expect("principal block of a PSD Gram is invertible");
            let mut sj = Mat::zero(r, raw_dim);
            for (ri, &i) in pivots.iter().enumerate() {
                for c in 0..raw_dim {
                    sj.set(ri, c, s.at(i, c).clone());
                }
            }
            let quot = sjj_inv.mul(&sj);
            let mut lift = Mat::zero(raw_dim, r);
            for (ri, &i) in pivots.iter().enumerate() {
                lift.set(i, ri, Scalar::one());
            }
            (quot, lift, r)
        };
        offsets.push(dim);
        dim += qdim;
        spaces.push(WordSpace { tuple: tuple.clone(), raw_dims, raw_dim, dim: qdim, quot, lift });
    }
    Ok(TruncatedFockModule { base: base.clone(), tau: tau.to_vec(), depth, factors, tuples, spaces, offsets, dim })
}

impl TruncatedFockModule {
    pub fn tuple_index(&self, tuple: &[usize]) -> Option<usize> {
        self.tuples.iter().position(|t| t == tuple)
    }

    pub fn block<'v>(&self, v: &'v [Scalar], space: usize) -> &'v [Scalar] {
        let off = self.offsets[space];
        &v[off..off + self.spaces[space].dim]
    }

    /// The distinguished vector: the base unit in the length-zero block.
    pub fn xi(&self) -> Vec<Scalar> {
        let mut v = vec![Scalar::zero(); self.dim];
        for (r, c) in self.base.unit().iter().enumerate() {
            v[r] = c.clone();
        }
        v
    }

    /// Base-valued pairing of the distinguished vector against a module
    /// vector: the length-zero block in base coordinates.
    pub fn xi_pair(&self, v: &[Scalar]) -> Vec<Scalar> {
        v[..self.base.dim()].to_vec()
    }

    /// Applies the free-product representation of factor `i` at `a` to a
    /// module vector. Exact on the interior; the flag reports any dropped
    /// boundary term.
    pub fn apply_lambda(
        &self,
        i: usize,
        a: &[Scalar],
        v: &[Scalar],
    ) -> Result<(Vec<Scalar>, bool), FockError> {
        if i >= self.factors.len() {
            return Err(FockError::FactorIndexBad(i));
        }
        let f = &self.factors[i];
        if a.len() != f.algebra.dim() {
            return Err(FockError::Algebra(AlgebraError::DimensionMismatch {
                expected: f.algebra.dim(),
                got: a.len(),
            }));
        }
        let mut out = vec![Scalar::zero(); self.dim];
        let mut lossy = false;
        for (s_idx, space) in self.spaces.iter().enumerate() {
            let x = self.block(v, s_idx);
            if x.iter().all(|c| c.is_zero()) {
                continue;
            }
            let tuple = &space.tuple;
            if tuple.is_empty() {
                // xi B block: feed through the factor action on xi b.
                let mut vec_f = vec![Scalar::zero(); f.dim];
                vec_f[..f.b_dim].clone_from_slice(x);
                let (w, l) = f.apply_alg(a, &vec_f);
                lossy |= l;
                for q in 0..f.b_dim {
                    out[q] += &w[q];
                }
                if !w[f.b_dim..].iter().all(|c| c.is_zero()) {
                    let target = self.tuple_index(&[i]).expect("depth >= 1");
                    self.add_raw(&mut out, target, &w[f.b_dim..]);
                }
            } else if tuple[0] == i {
                // Merge into the first slot.
                let raw = space.lift.apply(x);
                let first = space.raw_dims[0];
                let rest: usize = space.raw_dims[1..].iter().product();
                for c in 0..first {
                    let xc = &raw[c * rest..(c + 1) * rest];
                    if xc.iter().all(|s| s.is_zero()) {
                        continue;
                    }
                    let mut vec_f = vec![Scalar::zero(); f.dim];
                    vec_f[f.b_dim + c] = Scalar::one();
                    let (w, l) = f.apply_alg(a, &vec_f);
                    lossy |= l;
                    let (w_b, w_c) = w.split_at(f.b_dim);
                    // Complement part stays in this tuple.
                    if !w_c.iter().all(|s| s.is_zero()) {
                        let mut contrib = vec![Scalar::zero(); space.raw_dim];
                        for (cp, wc) in w_c.iter().enumerate() {
                            if wc.is_zero() {
                                continue;
                            }
                            for (r, xr) in xc.iter().enumerate() {
                                if !xr.is_zero() {
                                    contrib[cp * rest + r] += &(wc * xr);
                                }
                            }
                        }
                        self.add_raw(&mut out, s_idx, &contrib);
                    }
                    // Base part descends one level.
                    if !w_b.iter().all(|s| s.is_zero()) {
                        if tuple.len() == 1 {
                            for q in 0..self.base.dim() {
                                out[q] += &(&w_b[q] * &xc[0]);
                            }
                        } else {
                            let tail = &tuple[1..];
                            let target = self.tuple_index(tail).expect("prefix-closed tuples");
                            let g = &self.factors[tail[0]];
                            let first2 = self.spaces[target].raw_dims[0];
                            let rest2: usize = self.spaces[target].raw_dims[1..].iter().product();
                            let mut contrib = vec![Scalar::zero(); first2 * rest2];
                            // Act with w_b on the first slot of the tail.
                            for c2 in 0..first2 {
                                let mut basis = vec![Scalar::zero(); g.comp_dim()];
                                basis[c2] = Scalar::one();
                                let (img, l2) = g.apply_base_comp(w_b, &basis);
                                lossy |= l2;
                                for (r2, iv) in img.iter().enumerate() {
                                    if iv.is_zero() {
                                        continue;
                                    }
                                    for r in 0..rest2 {
                                        let xr = &xc[c2 * rest2 + r];
                                        if !xr.is_zero() {
                                            contrib[r2 * rest2 + r] += &(iv * xr);
                                        }
                                    }
                                }
                            }
                            self.add_raw(&mut out, target, &contrib);
                        }
                    }
                }
            } else {
                // Prepend: a = a_centered (+) phi(a).
                let raw = space.lift.apply(x);
                let mut xi_f = vec![Scalar::zero(); f.dim];
                xi_f[..f.b_dim].clone_from_slice(self.base.unit());
                let (w, l) = f.apply_alg(a, &xi_f);
                lossy |= l;
                let (w_b, w_c) = w.split_at(f.b_dim);
                if !w_c.iter().all(|s| s.is_zero()) {
                    let mut longer = vec![i];
                    longer.extend_from_slice(tuple);
                    match self.tuple_index(&longer) {
                        Some(target) => {
                            let mut contrib =
                                vec![Scalar::zero(); self.spaces[target].raw_dim];
                            for (cp, wc) in w_c.iter().enumerate() {
                                if wc.is_zero() {
                                    continue;
                                }
                                for (r, xr) in raw.iter().enumerate() {
                                    if !xr.is_zero() {
                                        contrib[cp * space.raw_dim + r] += &(wc * xr);
                                    }
                                }
                            }
                            self.add_raw(&mut out, target, &contrib);
                        }
                        None => {
                            // Depth boundary: the term is dropped.
                            lossy = true;
                        }
                    }
                }
                if !w_b.iter().all(|s| s.is_zero()) {
                    let g = &self.factors[tuple[0]];
                    let first = space.raw_dims[0];
                    let rest: usize = space.raw_dims[1..].iter().product();
                    let mut contrib = vec![Scalar::zero(); space.raw_dim];
                    for c in 0..first {
                        let mut basis = vec![Scalar::zero(); g.comp_dim()];
                        basis[c] = Scalar::one();
                        let (img, l2) = g.apply_base_comp(w_b, &basis);
                        lossy |= l2;
                        for (r2, iv) in img.iter().enumerate() {
                            if iv.is_zero() {
                                continue;
                            }
                            for r in 0..rest {
                                let xr = &raw[c * rest + r];
                                if !xr.is_zero() {
                                    contrib[r2 * rest + r] += &(iv * xr);
                                }
                            }
                        }
                    }
                    self.add_raw(&mut out, s_idx, &contrib);
                }
            }
        }
        Ok((out, lossy))
    }

    fn add_raw(&self, out: &mut [Scalar], space: usize, raw: &[Scalar]) {
        let q = self.spaces[space].quot.apply(raw);
        let off = self.offsets[space];
        for (r, c) in q.into_iter().enumerate() {
            out[off + r] += &c;
        }
    }

    /// Matrix of the representation of one algebra element, with the
    /// boundary flag aggregated over all columns.
    pub fn lambda_matrix(&self, i: usize, a: &[Scalar]) -> Result<(Mat, bool), FockError> {
        let mut m = Mat::zero(self.dim, self.dim);
        let mut lossy = false;
        for j in 0..self.dim {
            let mut v = vec![Scalar::zero(); self.dim];
            v[j] = Scalar::one();
            let (col, l) = self.apply_lambda(i, a, &v)?;
            lossy |= l;
            for (r, c) in col.into_iter().enumerate() {
                m.set(r, j, c);
            }
        }
        Ok((m, lossy))
    }

    /// The free-product expectation `(xi, lambda(word) xi)` in base
    /// coordinates. Words no longer than the depth stay interior, so the
    /// value is exact.
    pub fn free_expectation(
        &self,
        word: &[(usize, Vec<Scalar>)],
    ) -> Result<Vec<Scalar>, FockError> {
        if word.len() > self.depth {
            return Err(FockError::DepthExceeded { len: word.len(), depth: self.depth });
        }
        let mut v = self.xi();
        for (i, a) in word.iter().rev() {
            let (nv, lossy) = self.apply_lambda(*i, a, &v)?;
            if lossy {
                return Err(FockError::TruncationTouched);
            }
            v = nv;
        }
        Ok(self.xi_pair(&v))
    }
}

/// Data of a free product as an abstract algebra family: per factor, the
/// expectation in base coordinates and the base embedding.
pub struct FreeFactorData {
    pub algebra: StarAlgebra,
    pub phi_b: Mat,
    pub iota: Vec<Vec<Scalar>>,
}

pub struct FreeProductData {
    pub base: StarAlgebra,
    pub factors: Vec<FreeFactorData>,
}

impl FreeProductData {
    pub fn from_modules(base: &StarAlgebra, mods: &[&ExpectationModule]) -> Self {
        FreeProductData {
            base: base.clone(),
            factors: mods
                .iter()
                .map(|m| FreeFactorData {
                    algebra: m.algebra.clone(),
                    phi_b: m.phi_b.clone(),
                    iota: m.iota.clone(),
                })
                .collect(),
        }
    }
}

/// A word reduced to its canonical combination: a base part plus alternating
/// words of centered letters.
pub struct CanonicalWord {
    pub base_part: Vec<Scalar>,
    /// Each word: alternating `(factor, centered element)` letters.
    pub words: Vec<Vec<(usize, Vec<Scalar>)>>,
}

/// Rewrites a product of factor elements into its canonical combination by
/// centering every letter and absorbing base parts into neighbors.
pub fn canonical_reduction(
    data: &FreeProductData,
    word: &[(usize, Vec<Scalar>)],
) -> CanonicalWord {
    struct Term {
        letters: Vec<(usize, Vec<Scalar>)>,
        pending: Vec<Scalar>, // base element awaiting the next letter
    }
    let unit_b = data.base.unit().to_vec();
    let mut terms = vec![Term { letters: Vec::new(), pending: unit_b.clone() }];
    // Process a letter against one term, producing up to two descendants.
    fn push_letter(
        data: &FreeProductData,
        term: Term,
        i: usize,
        a: &[Scalar],
        out: &mut Vec<Term>,
    ) {
        let f = &data.factors[i];
        // Fold the pending base value into this letter.
        let mut pending_in_a = vec![Scalar::zero(); f.algebra.dim()];
        for (q, c) in term.pending.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (p, v) in pending_in_a.iter_mut().zip(f.iota[q].iter()) {
                *p += &(c * v);
            }
        }
        let a1 = f.algebra.mul_vec(&pending_in_a, a);
        let b = f.phi_b.apply(&a1);
        let mut centered = a1.clone();
        for (q, c) in b.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (x, v) in centered.iter_mut().zip(f.iota[q].iter()) {
                *x -= &(c * v);
            }
        }
        // Base branch: defer the value to the next letter.
        if !b.iter().all(|c| c.is_zero()) {
            out.push(Term { letters: term.letters.clone(), pending: b });
        }
        // Centered branch.
        if !centered.iter().all(|c| c.is_zero()) {
            let mut letters = term.letters;
            if letters.last().map(|l| l.0) == Some(i) {
                let (_, last) = letters.pop().unwrap();
                let merged = f.algebra.mul_vec(&last, &centered);
                let unit_b = data.base.unit().to_vec();
                push_letter(data, Term { letters, pending: unit_b }, i, &merged, out);
            } else {
                letters.push((i, centered));
                out.push(Term { letters, pending: data.base.unit().to_vec() });
            }
        }
    }
    for (i, a) in word {
        let mut next = Vec::new();
        for t in terms {
            push_letter(data, t, *i, a, &mut next);
        }
        terms = next;
    }
    // Finalize: fold trailing base values into the last letter or the base part.
    let mut base_part = vec![Scalar::zero(); data.base.dim()];
    let mut words = Vec::new();
    for t in terms {
        if t.letters.is_empty() {
            for (b, c) in base_part.iter_mut().zip(t.pending.iter()) {
                *b += c;
            }
        } else if t.pending == data.base.unit() {
            words.push(t.letters);
        } else {
            let mut letters = t.letters;
            let (i, last) = letters.pop().unwrap();
            let f = &data.factors[i];
            let mut b_in_a = vec![Scalar::zero(); f.algebra.dim()];
            for (q, c) in t.pending.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for (p, v) in b_in_a.iter_mut().zip(f.iota[q].iter()) {
                    *p += &(c * v);
                }
            }
            let folded = f.algebra.mul_vec(&last, &b_in_a);
            if !folded.iter().all(|c| c.is_zero()) {
                letters.push((i, folded));
                words.push(letters);
            }
        }
    }
    CanonicalWord { base_part, words }
}

/// Canonical conditional expectation of the free product onto one factor,
/// computed by linear extension over the canonical reduction: identity on
/// the chosen factor, the factor expectations elsewhere, zero on alternating
/// centered words of length at least two.
pub fn factor_expectation(
    data: &FreeProductData,
    i0: usize,
    word: &[(usize, Vec<Scalar>)],
    depth: usize,
) -> Result<Vec<Scalar>, FockError> {
    if i0 >= data.factors.len() {
        return Err(FockError::FactorIndexBad(i0));
    }
    if word.len() > depth {
        return Err(FockError::DepthExceeded { len: word.len(), depth });
    }
    let target = &data.factors[i0];
    let mut out = vec![Scalar::zero(); target.algebra.dim()];
    let canon = canonical_reduction(data, word);
    for (q, c) in canon.base_part.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(target.iota[q].iter()) {
            *o += &(c * v);
        }
    }
    for w in &canon.words {
        if w.len() == 1 && w[0].0 == i0 {
            for (o, v) in out.iter_mut().zip(w[0].1.iter()) {
                *o += v;
            }
        }
        // Longer alternating centered words, and centered letters of other
        // factors, have expectation zero.
    }
    Ok(out)
}

/// Quotient of a raw space by the kernel of a PSD scalar Gram, through an
/// invertible principal block (for PSD matrices, row independence of the
/// selected rows makes the principal block invertible).
fn quotient_from_gram(s: &Mat) -> (Mat, Mat, usize) {
    let raw_dim = s.rows;
    let mut ech = rref(&[]);
    let mut pivots: Vec<usize> = Vec::new();
    for r in 0..raw_dim {
        if ech.insert(&s.row_vec(r)) {
            pivots.push(r);
        }
    }
    let r = pivots.len();
    let mut sjj = Mat::zero(r, r);
    for (ri, &i) in pivots.iter().enumerate() {
        for (rj, &j) in pivots.iter().enumerate() {
            sjj.set(ri, rj, s.at(i, j).clone());
        }
    }
    let sjj_inv = invert(&sjj).expect("principal block of a PSD Gram is invertible");
    let mut sj = Mat::zero(r, raw_dim);
    for (ri, &i) in pivots.iter().enumerate() {
        for c in 0..raw_dim {
            sj.set(ri, c, s.at(i, c).clone());
        }
    }
    let quot = sjj_inv.mul(&sj);
    let mut lift = Mat::zero(raw_dim, r);
    for (ri, &i) in pivots.iter().enumerate() {
        lift.set(i, ri, Scalar::one());
    }
    (quot, lift, r)
}

/// One factor of a reduced family: an algebra with a distinguished base
/// subalgebra copy shared with the minimal amalgam.
pub struct ReducedFactor {
    /// The factor algebra.
    pub algebra: StarAlgebra,
    /// The abstract common subalgebra of this factor and the amalgam.
    pub base_sub: StarAlgebra,
    /// Embedding of the subalgebra into the factor.
    pub iota_a: StarMorphism,
    /// Embedding of the subalgebra into the amalgam.
    pub iota_b: StarMorphism,
    /// Expectation of the factor onto the subalgebra image.
    pub phi: ConditionalExpectation,
    /// Expectation of the amalgam onto the subalgebra image.
    pub psi: ConditionalExpectation,
}

pub struct ReducedFamilyInput {
    /// The realizable minimal amalgam.
    pub base: StarAlgebra,
    pub tau_base: Vec<Scalar>,
    pub factors: Vec<ReducedFactor>,
    pub depth: usize,
}

/// The truncated module of one two-factor product `A_i *_{B_i} B` with its
/// amalgam-valued expectation: the base copy of `B` plus word spaces over
/// alternating `{factor, amalgam}` patterns ending at the factor, each word
/// carrying a trailing `B` slot.
pub struct InnerModule {
    /// The module packaged for the outer free product: coordinates are the
    /// `B` block followed by the pattern blocks.
    pub fock: FockFactor,
    /// Slot patterns of the complement blocks: 0 is a factor slot, 1 an
    /// amalgam slot.
    pub patterns: Vec<Vec<usize>>,
    pub pattern_dims: Vec<usize>,
    pub pattern_raw_dims: Vec<Vec<usize>>,
    pub em_a: ExpectationModule,
    pub em_b: ExpectationModule,
    /// Rank of `a -> L(a) xi`; equals `dim A_i` when the factor embeds at
    /// depth zero.
    pub sigma_rank: usize,
}

enum InnerLetter {
    Factor(usize),
    Amalgam(usize),
}

struct InnerBuilder<'a> {
    base: &'a StarAlgebra,
    iota_b: &'a [Vec<Scalar>],
    fa: FockFactor,
    fb: FockFactor,
    patterns: Vec<Vec<usize>>,
    raw_dims: Vec<Vec<usize>>,
    quots: Vec<Mat>,
    lifts: Vec<Mat>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl<'a> InnerBuilder<'a> {
    fn comp_of(&self, slot: usize) -> usize {
        if slot == 0 {
            self.fa.comp_dim()
        } else {
            self.fb.comp_dim()
        }
    }

    fn eps(&self, s: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.base.dim()];
        for (q, c) in s.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.iota_b[q].iter()) {
                *o += &(c * v);
            }
        }
        out
    }

    /// Base-valued pairing of raw word basis vectors of one pattern.
    fn raw_pair(&self, p: usize, mut xi: usize, mut yi: usize) -> Vec<Scalar> {
        let pattern = &self.patterns[p];
        let dims = &self.raw_dims[p];
        let n = pattern.len();
        let mut xs = vec![0usize; n + 1];
        let mut ys = vec![0usize; n + 1];
        for k in (0..n + 1).rev() {
            xs[k] = xi % dims[k];
            xi /= dims[k];
            ys[k] = yi % dims[k];
            yi /= dims[k];
        }
        // Carry through the inner slots in subalgebra coordinates.
        let mut carry: Option<Vec<Scalar>> = None;
        for k in 0..n {
            let f = if pattern[k] == 0 { &self.fa } else { &self.fb };
            let y_vec: Vec<Scalar> = match &carry {
                None => {
                    let mut v = vec![Scalar::zero(); f.comp_dim()];
                    v[ys[k]] = Scalar::one();
                    v
                }
                Some(c) => {
                    let mut basis = vec![Scalar::zero(); f.comp_dim()];
                    basis[ys[k]] = Scalar::one();
                    f.apply_base_comp(c, &basis).0
                }
            };
            carry = Some(f.comp_form(xs[k], &y_vec));
        }
        // Trailing amalgam slot: b* eps(carry) c.
        let s = carry.expect("patterns are nonempty");
        let mut b = vec![Scalar::zero(); self.base.dim()];
        b[xs[n]] = Scalar::one();
        let mut c = vec![Scalar::zero(); self.base.dim()];
        c[ys[n]] = Scalar::one();
        self.base.mul_vec(&self.base.star_vec(&b), &self.base.mul_vec(&self.eps(&s), &c))
    }

    /// Applies a factor or amalgam letter to one module basis column.
    fn apply_letter(&self, letter: &InnerLetter, col: usize) -> (Vec<Scalar>, bool) {
        let mut out = vec![Scalar::zero(); self.total];
        let mut lossy = false;
        let b_dim = self.base.dim();
        if col < b_dim {
            // xi B block.
            match letter {
                InnerLetter::Amalgam(q) => {
                    let prod = self.base.mul_vec(
                        &{
                            let mut v = vec![Scalar::zero(); b_dim];
                            v[*q] = Scalar::one();
                            v
                        },
                        &{
                            let mut v = vec![Scalar::zero(); b_dim];
                            v[col] = Scalar::one();
                            v
                        },
                    );
                    for (r, c) in prod.into_iter().enumerate() {
                        out[r] += &c;
                    }
                }
                InnerLetter::Factor(a) => {
                    // a (xi b) = centered(a) (x) b + eps(phi(a)) b.
                    let mut av = vec![Scalar::zero(); self.fa.algebra.dim()];
                    av[*a] = Scalar::one();
                    // xi of the inner gns factor is its base unit.
                    let mut xi_f = vec![Scalar::zero(); self.fa.dim];
                    for (r, c) in self.fa.base.unit().iter().enumerate() {
                        xi_f[r] = c.clone();
                    }
                    let (w, l) = self.fa.apply_alg(&av, &xi_f);
                    lossy |= l;
                    let (w_b, w_c) = w.split_at(self.fa.b_dim);
                    let eps_b = self.eps(w_b);
                    let cvec = {
                        let mut v = vec![Scalar::zero(); b_dim];
                        v[col] = Scalar::one();
                        v
                    };
                    let prod = self.base.mul_vec(&eps_b, &cvec);
                    for (r, c) in prod.into_iter().enumerate() {
                        out[r] += &c;
                    }
                    if !w_c.iter().all(|c| c.is_zero()) {
                        // Pattern [0]: slots (comp_a, B).
                        let p = self
                            .patterns
                            .iter()
                            .position(|p| p.as_slice() == [0])
                            .expect("depth >= 1");
                        let mut raw = vec![Scalar::zero(); self.raw_dims[p].iter().product()];
                        for (cp, wc) in w_c.iter().enumerate() {
                            if !wc.is_zero() {
                                raw[cp * b_dim + col] = wc.clone();
                            }
                        }
                        self.add_raw(&mut out, p, &raw);
                    }
                }
            }
            return (out, lossy);
        }
        // Complement blocks.
        let (p, j) = self.locate(col);
        let pattern = self.patterns[p].clone();
        let dims = &self.raw_dims[p];
        let raw = self.lifts[p].col_vec(j);
        let first = dims[0];
        let rest: usize = dims[1..].iter().product();
        let (this, this_slot) = match letter {
            InnerLetter::Factor(_) => (&self.fa, 0usize),
            InnerLetter::Amalgam(_) => (&self.fb, 1usize),
        };
        let letter_vec = match letter {
            InnerLetter::Factor(a) => {
                let mut v = vec![Scalar::zero(); self.fa.algebra.dim()];
                v[*a] = Scalar::one();
                v
            }
            InnerLetter::Amalgam(q) => {
                let mut v = vec![Scalar::zero(); self.fb.algebra.dim()];
                v[*q] = Scalar::one();
                v
            }
        };
        if pattern[0] == this_slot {
            // Merge into the first slot.
            for c in 0..first {
                let xc = &raw[c * rest..(c + 1) * rest];
                if xc.iter().all(|s| s.is_zero()) {
                    continue;
                }
                let mut vec_f = vec![Scalar::zero(); this.dim];
                vec_f[this.b_dim + c] = Scalar::one();
                let (w, l) = this.apply_alg(&letter_vec, &vec_f);
                lossy |= l;
                let (w_b, w_c) = w.split_at(this.b_dim);
                if !w_c.iter().all(|s| s.is_zero()) {
                    let mut contrib = vec![Scalar::zero(); raw.len()];
                    for (cp, wc) in w_c.iter().enumerate() {
                        if wc.is_zero() {
                            continue;
                        }
                        for (r, xr) in xc.iter().enumerate() {
                            if !xr.is_zero() {
                                contrib[cp * rest + r] += &(wc * xr);
                            }
                        }
                    }
                    self.add_raw(&mut out, p, &contrib);
                }
                if !w_b.iter().all(|s| s.is_zero()) {
                    if pattern.len() == 1 {
                        // Slots were (this, B): the subalgebra part lands in
                        // the amalgam block through eps.
                        let eps_b = self.eps(w_b);
                        for (bi, xb) in xc.iter().enumerate() {
                            if xb.is_zero() {
                                continue;
                            }
                            let mut bv = vec![Scalar::zero(); self.base.dim()];
                            bv[bi] = Scalar::one();
                            let prod = self.base.mul_vec(&eps_b, &bv);
                            for (r, c2) in prod.into_iter().enumerate() {
                                out[r] += &(&c2 * xb);
                            }
                        }
                    } else {
                        // Acts on the next slot; the tail pattern drops the
                        // first entry.
                        let tail: Vec<usize> = pattern[1..].to_vec();
                        let tp = self
                            .patterns
                            .iter()
                            .position(|q| *q == tail)
                            .expect("patterns are suffix closed");
                        let g = if tail[0] == 0 { &self.fa } else { &self.fb };
                        let first2 = self.raw_dims[tp][0];
                        let rest2: usize = self.raw_dims[tp][1..].iter().product();
                        let mut contrib = vec![Scalar::zero(); first2 * rest2];
                        for c2 in 0..first2 {
                            let mut basis = vec![Scalar::zero(); g.comp_dim()];
                            basis[c2] = Scalar::one();
                            let (img, l2) = g.apply_base_comp(w_b, &basis);
                            lossy |= l2;
                            for (r2, iv) in img.iter().enumerate() {
                                if iv.is_zero() {
                                    continue;
                                }
                                for r in 0..rest2 {
                                    let xr = &xc[c2 * rest2 + r];
                                    if !xr.is_zero() {
                                        contrib[r2 * rest2 + r] += &(iv * xr);
                                    }
                                }
                            }
                        }
                        self.add_raw(&mut out, tp, &contrib);
                    }
                }
            }
        } else {
            // Prepend: letter = centered (+) subalgebra part.
            let mut xi_f = vec![Scalar::zero(); this.dim];
            for (r, c) in this.base.unit().iter().enumerate() {
                xi_f[r] = c.clone();
            }
            let (w, l) = this.apply_alg(&letter_vec, &xi_f);
            lossy |= l;
            let (w_b, w_c) = w.split_at(this.b_dim);
            if !w_c.iter().all(|s| s.is_zero()) {
                let mut longer = vec![this_slot];
                longer.extend_from_slice(&pattern);
                match self.patterns.iter().position(|q| *q == longer) {
                    Some(tp) => {
                        let mut contrib = vec![Scalar::zero(); self.raw_dims[tp].iter().product()];
                        for (cp, wc) in w_c.iter().enumerate() {
                            if wc.is_zero() {
                                continue;
                            }
                            for (r, xr) in raw.iter().enumerate() {
                                if !xr.is_zero() {
                                    contrib[cp * raw.len() + r] += &(wc * xr);
                                }
                            }
                        }
                        self.add_raw(&mut out, tp, &contrib);
                    }
                    None => lossy = true,
                }
            }
            if !w_b.iter().all(|s| s.is_zero()) {
                let g = if pattern[0] == 0 { &self.fa } else { &self.fb };
                let mut contrib = vec![Scalar::zero(); raw.len()];
                for c in 0..first {
                    let mut basis = vec![Scalar::zero(); g.comp_dim()];
                    basis[c] = Scalar::one();
                    let (img, l2) = g.apply_base_comp(w_b, &basis);
                    lossy |= l2;
                    for (r2, iv) in img.iter().enumerate() {
                        if iv.is_zero() {
                            continue;
                        }
                        for r in 0..rest {
                            let xr = &raw[c * rest + r];
                            if !xr.is_zero() {
                                contrib[r2 * rest + r] += &(iv * xr);
                            }
                        }
                    }
                }
                self.add_raw(&mut out, p, &contrib);
            }
        }
        (out, lossy)
    }

    fn locate(&self, col: usize) -> (usize, usize) {
        let mut c = col - self.base.dim();
        for (p, d) in self.dims.iter().enumerate() {
            if c < *d {
                return (p, c);
            }
            c -= d;
        }
        panic!("column out of range");
    }

    fn add_raw(&self, out: &mut [Scalar], p: usize, raw: &[Scalar]) {
        let q = self.quots[p].apply(raw);
        for (r, c) in q.into_iter().enumerate() {
            out[self.offsets[p] + r] += &c;
        }
    }
}

/// Builds the truncated module of `A_i *_{B_i} B` with its amalgam-valued
/// expectation, packaged as a factor for the outer free product.
pub fn reduced_pair_factor(
    base: &StarAlgebra,
    tau_base: &[Scalar],
    rf: &ReducedFactor,
    depth: usize,
) -> Result<InnerModule, FockError> {
    // Trace on the common subalgebra through its amalgam embedding.
    let iota_b_cols: Vec<Vec<Scalar>> =
        (0..rf.base_sub.dim()).map(|q| rf.iota_b.image_of_basis(q)).collect();
    let tau_sub: Vec<Scalar> =
        iota_b_cols.iter().map(|v| crate::algebra::apply_functional(tau_base, v)).collect();
    let em_a = gns(&rf.algebra, &rf.phi, &rf.base_sub, &rf.iota_a, &tau_sub)?;
    let em_b = gns(base, &rf.psi, &rf.base_sub, &rf.iota_b, &tau_sub)?;
    if !em_a.faithful || !em_b.faithful {
        return Err(FockError::SigmaNotInjective(usize::MAX));
    }
    let fa = em_a.to_factor();
    let fb = em_b.to_factor();

    // Patterns: alternating {0,1} tuples ending at the factor (slot 0), by
    // increasing length.
    let mut patterns: Vec<Vec<usize>> = Vec::new();
    for len in 1..=depth {
        // The pattern is determined by its length: it must alternate and end
        // with 0.
        let p: Vec<usize> = (0..len).map(|k| (len - 1 - k) % 2).collect();
        patterns.push(p);
    }
    let mut builder = InnerBuilder {
        base,
        iota_b: &iota_b_cols,
        fa,
        fb,
        raw_dims: Vec::new(),
        quots: Vec::new(),
        lifts: Vec::new(),
        dims: Vec::new(),
        offsets: Vec::new(),
        total: 0,
        patterns: patterns.clone(),
    };
    let mut total = base.dim();
    for p in 0..patterns.len() {
        let mut dims: Vec<usize> =
            patterns[p].iter().map(|&k| builder.comp_of(k)).collect();
        dims.push(base.dim());
        builder.raw_dims.push(dims.clone());
        let raw_dim: usize = dims.iter().product();
        let mut s = Mat::zero(raw_dim, raw_dim);
        for x in 0..raw_dim {
            for y in 0..raw_dim {
                let b = builder.raw_pair(p, x, y);
                s.set(x, y, crate::algebra::apply_functional(tau_base, &b));
            }
        }
        if !matches!(ldl_psd(&s), PsdVerdict::Psd) {
            return Err(FockError::GramNotPsd { tuple: patterns[p].clone() });
        }
        let (quot, lift, dim) = quotient_from_gram(&s);
        builder.quots.push(quot);
        builder.lifts.push(lift);
        builder.offsets.push(total);
        builder.dims.push(dim);
        total += dim;
    }
    builder.total = total;

    // Materialize the actions.
    let a_dim = rf.algebra.dim();
    let mut act = Vec::with_capacity(a_dim);
    let mut act_lossy = Vec::with_capacity(a_dim);
    for a in 0..a_dim {
        let mut m = Mat::zero(total, total);
        let mut flags = vec![false; total];
        for col in 0..total {
            let (v, l) = builder.apply_letter(&InnerLetter::Factor(a), col);
            flags[col] = l;
            for (r, c) in v.into_iter().enumerate() {
                m.set(r, col, c);
            }
        }
        act.push(m);
        act_lossy.push(flags);
    }
    let mut b_act = Vec::with_capacity(base.dim());
    let mut b_act_lossy = Vec::with_capacity(base.dim());
    for q in 0..base.dim() {
        let mut m = Mat::zero(total, total);
        let mut flags = vec![false; total];
        for col in 0..total {
            let (v, l) = builder.apply_letter(&InnerLetter::Amalgam(q), col);
            flags[col] = l;
            for (r, c) in v.into_iter().enumerate() {
                m.set(r, col, c);
            }
        }
        b_act.push(m);
        b_act_lossy.push(flags);
    }

    // Base-valued form: block diagonal over the xi B block and the patterns.
    let mut form = vec![vec![vec![Scalar::zero(); base.dim()]; total]; total];
    for i in 0..base.dim() {
        let mut bi = vec![Scalar::zero(); base.dim()];
        bi[i] = Scalar::one();
        let sbi = base.star_vec(&bi);
        for j in 0..base.dim() {
            let mut bj = vec![Scalar::zero(); base.dim()];
            bj[j] = Scalar::one();
            form[i][j] = base.mul_vec(&sbi, &bj);
        }
    }
    for p in 0..patterns.len() {
        let off = builder.offsets[p];
        for i in 0..builder.dims[p] {
            let li = builder.lifts[p].col_vec(i);
            for j in 0..builder.dims[p] {
                let lj = builder.lifts[p].col_vec(j);
                let mut val = vec![Scalar::zero(); base.dim()];
                for (xi, xc) in li.iter().enumerate() {
                    if xc.is_zero() {
                        continue;
                    }
                    for (yi, yc) in lj.iter().enumerate() {
                        if yc.is_zero() {
                            continue;
                        }
                        let pair = builder.raw_pair(p, xi, yi);
                        let coeff = &xc.conj() * yc;
                        for (v, w) in val.iter_mut().zip(pair.iter()) {
                            *v += &(&coeff * w);
                        }
                    }
                }
                form[off + i][off + j] = val;
            }
        }
    }

    // Depth-zero compression rank of a -> L(a) xi.
    let mut cols = Vec::new();
    for a in 0..a_dim {
        let mut xi = vec![Scalar::zero(); total];
        for (r, c) in base.unit().iter().enumerate() {
            xi[r] = c.clone();
        }
        let mut img = vec![Scalar::zero(); total];
        for (col, xc) in xi.iter().enumerate() {
            if xc.is_zero() {
                continue;
            }
            let (v, _) = builder.apply_letter(&InnerLetter::Factor(a), col);
            for (o, c) in img.iter_mut().zip(v.iter()) {
                *o += &(xc * c);
            }
        }
        cols.push(img);
    }
    let sigma_rank = crate::linalg::rank(&cols);

    let fock = FockFactor {
        algebra: rf.algebra.clone(),
        base: base.clone(),
        dim: total,
        b_dim: base.dim(),
        act,
        act_lossy,
        b_act,
        b_act_lossy,
        form,
    };
    Ok(InnerModule {
        fock,
        patterns,
        pattern_dims: builder.dims.clone(),
        pattern_raw_dims: builder.raw_dims.clone(),
        em_a,
        em_b,
        sigma_rank,
    })
}

pub struct GeneralizedAmalgam {
    pub outer: TruncatedFockModule,
    pub inner: Vec<InnerModule>,
}

/// The reduced generalized free product at bounded depth: two-factor modules
/// `L^2(A_i *_{B_i} B)` with amalgam-valued expectations, then their free
/// product over the amalgam.
pub fn generalized_reduced_amalgam(
    input: &ReducedFamilyInput,
) -> Result<GeneralizedAmalgam, FockError> {
    let mut inner = Vec::new();
    for (i, rf) in input.factors.iter().enumerate() {
        let m = reduced_pair_factor(&input.base, &input.tau_base, rf, input.depth)?;
        if m.sigma_rank != rf.algebra.dim() {
            return Err(FockError::SigmaNotInjective(i));
        }
        inner.push(m);
    }
    let factors: Vec<FockFactor> = inner
        .iter()
        .map(|m| FockFactor {
            algebra: m.fock.algebra.clone(),
            base: m.fock.base.clone(),
            dim: m.fock.dim,
            b_dim: m.fock.b_dim,
            act: m.fock.act.clone(),
            act_lossy: m.fock.act_lossy.clone(),
            b_act: m.fock.b_act.clone(),
            b_act_lossy: m.fock.b_act_lossy.clone(),
            form: m.fock.form.clone(),
        })
        .collect();
    let outer = fock_space(factors, &input.base, &input.tau_base, input.depth)?;
    Ok(GeneralizedAmalgam { outer, inner })
}

pub struct AuditReport {
    pub nested_dim: usize,
    pub flat_dim: usize,
    /// Per outer tuple: nested word-space dimension and the free-rank count.
    pub per_tuple: Vec<(Vec<usize>, usize, usize)>,
    pub ok: bool,
}

/// Compares the truncated module dimension computed from the nested Gram
/// quotients against the independent count over the double-index families
/// (outer alternating tuples, inner alternating patterns), using free-module
/// rank arithmetic for the tensor words.
pub fn decomposition_audit(ga: &GeneralizedAmalgam) -> Result<AuditReport, FockError> {
    let b_dim = ga.outer.base.dim();
    // Per factor: complement rank of F_i over B, summed over patterns; each
    // pattern contributes the product of its slot ranks. Slot ranks are
    // complement dimensions over the subalgebra, which must divide exactly.
    let mut ranks = Vec::new();
    for (i, m) in ga.inner.iter().enumerate() {
        let bi_dim = m.em_a.b_dim;
        let ra = m.em_a.comp_dim();
        let rb = m.em_b.comp_dim();
        if ra % bi_dim != 0 || rb % bi_dim != 0 {
            return Err(FockError::NotFree { factor: i, dim: ra.max(rb), base: bi_dim });
        }
        let (ra, rb) = (ra / bi_dim, rb / bi_dim);
        let mut rank = 0usize;
        for (p, pattern) in m.patterns.iter().enumerate() {
            let slots: usize = pattern.iter().map(|&k| if k == 0 { ra } else { rb }).product();
            // Cross-check: the Gram-quotient dimension of the pattern space
            // equals the free count slots * dim B.
            if m.pattern_dims[p] != slots * b_dim {
                return Err(FockError::NotFree { factor: i, dim: m.pattern_dims[p], base: b_dim });
            }
            rank += slots;
        }
        // The nested complement dimension must match rank * dim B.
        if m.fock.comp_dim() != rank * b_dim {
            return Err(FockError::NotFree { factor: i, dim: m.fock.comp_dim(), base: b_dim });
        }
        ranks.push(rank);
    }
    let mut per_tuple = Vec::new();
    let mut flat_dim = 0usize;
    for (t, space) in ga.outer.tuples.iter().zip(ga.outer.spaces.iter()) {
        let flat = if t.is_empty() {
            b_dim
        } else {
            rank_product(t, &ranks) * b_dim
        };
        per_tuple.push((t.clone(), space.dim, flat));
        flat_dim += flat;
    }
    let ok = per_tuple.iter().all(|(_, nested, flat)| nested == flat)
        && flat_dim == ga.outer.dim;
    Ok(AuditReport { nested_dim: ga.outer.dim, flat_dim, per_tuple, ok })
}

fn rank_product(t: &[usize], ranks: &[usize]) -> usize {
    t.iter().map(|&i| ranks[i]).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{group_trace, SparseVec};
    use crate::expect::{group_subalgebra_expectation, scalar_expectation};
    use crate::presets;

    fn z2_trace_module() -> ExpectationModule {
        let z2 = presets::cyclic(2);
        let alg = StarAlgebra::group_algebra(&z2);
        let e = group_subalgebra_expectation(&alg, &[z2.identity()]).unwrap();
        gns_over_scalars(&alg, &e).unwrap()
    }

    #[test]
    fn gns_of_group_algebra_trace() {
        let m = z2_trace_module();
        assert_eq!(m.dim, 2);
        assert_eq!(m.b_dim, 1);
        assert!(m.faithful);
        // xi B pairs to b: (xi, xi) = 1.
        assert_eq!(m.form[0][0], vec![Scalar::one()]);
        // The complement is the centered group generator, orthogonal to xi.
        assert!(m.form[0][1].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn gns_of_matrix_trace_is_faithful_dimension_four() {
        let m2 = StarAlgebra::matrix_algebra(2);
        let e = scalar_expectation(&m2).unwrap();
        let m = gns_over_scalars(&m2, &e).unwrap();
        assert_eq!(m.dim, 4);
        assert!(m.faithful);
    }

    #[test]
    fn gns_detects_unfaithful_expectation() {
        // scalars (+) scalars with the first-coordinate expectation: the
        // second idempotent spans the null space and acts as zero.
        let structure: Vec<SparseVec> = vec![
            vec![(0, Scalar::one())],
            vec![],
            vec![],
            vec![(1, Scalar::one())],
        ];
        let unit = vec![Scalar::one(), Scalar::one()];
        let star = vec![vec![(0, Scalar::one())], vec![(1, Scalar::one())]];
        let alg =
            StarAlgebra::new(vec!["p".into(), "q".into()], structure, unit, star, None).unwrap();
        let target = crate::algebra::SubalgebraSpan::new(&alg, &[alg.unit().to_vec()]).unwrap();
        let mut matrix = Mat::zero(2, 2);
        matrix.set(0, 0, Scalar::one());
        matrix.set(1, 0, Scalar::one());
        let e = ConditionalExpectation::new(&alg, target, matrix).unwrap();
        let m = gns_over_scalars(&alg, &e).unwrap();
        assert_eq!(m.dim, 1);
        assert!(!m.faithful);
        assert!(!expectation_gns_faithful(&alg, &e, &[Scalar::one(), Scalar::zero()]));
    }

    fn two_z2_fock(depth: usize) -> (TruncatedFockModule, FreeProductData) {
        let m1 = z2_trace_module();
        let m2 = z2_trace_module();
        let base = m1.base.clone();
        let data = FreeProductData::from_modules(&base, &[&m1, &m2]);
        let f = fock_space(vec![m1.to_factor(), m2.to_factor()], &base, &[Scalar::one()], depth)
            .unwrap();
        (f, data)
    }

    #[test]
    fn fock_dimensions() {
        // Two factors with one-dimensional complements over scalars.
        let (f, _) = two_z2_fock(3);
        assert_eq!(f.dim, 1 + 2 + 2 + 2);

        // Three group-algebra factors at depth 2: 1 + 3 + 6 alternating pairs.
        let ms: Vec<ExpectationModule> = (0..3).map(|_| z2_trace_module()).collect();
        let base = ms[0].base.clone();
        let factors: Vec<FockFactor> = ms.iter().map(|m| m.to_factor()).collect();
        let f = fock_space(factors, &base, &[Scalar::one()], 2).unwrap();
        assert_eq!(f.dim, 1 + 3 + 6);

        // Trivial complements collapse to the base.
        let z2 = presets::cyclic(2);
        let alg = StarAlgebra::group_algebra(&z2);
        let e = ConditionalExpectation::new(
            &alg,
            crate::algebra::SubalgebraSpan::new(&alg, &[
                alg.basis_vec(0),
                alg.basis_vec(1),
            ])
            .unwrap(),
            Mat::identity(2),
        )
        .unwrap();
        let base2 = {
            // The whole algebra as its own base.
            let iota = StarMorphism::new(&alg, &alg, vec![alg.basis_vec(0), alg.basis_vec(1)])
                .unwrap();
            gns(&alg, &e, &alg, &iota, &group_trace(&z2)).unwrap()
        };
        assert_eq!(base2.comp_dim(), 0);
        let b = base2.base.clone();
        let f = fock_space(vec![base2.to_factor()], &b, &group_trace(&z2), 2).unwrap();
        assert_eq!(f.dim, 2);
    }

    #[test]
    fn lambda_unit_is_identity_and_multiplicative() {
        let (f, _) = two_z2_fock(4);
        let alg = f.factors[0].algebra.clone();
        let (id, lossy) = f.lambda_matrix(0, alg.unit()).unwrap();
        assert!(!lossy);
        assert_eq!(id, Mat::identity(f.dim));

        // lambda_i(a) lambda_i(a') = lambda_i(a a') exactly on the interior.
        let g = alg.basis_vec(1);
        let (lg, _) = f.lambda_matrix(0, &g).unwrap();
        let gg = alg.mul_vec(&g, &g);
        let (lgg, _) = f.lambda_matrix(0, &gg).unwrap();
        let prod = lg.mul(&lg);
        // Restrict comparison to columns of interior words (length <= d-1):
        // the last block holds depth-4 words.
        let interior_end = f.offsets[f.spaces.len() - 2] + f.spaces[f.spaces.len() - 2].dim;
        for j in 0..interior_end {
            for r in 0..f.dim {
                assert_eq!(prod.at(r, j), lgg.at(r, j), "entry ({r},{j})");
            }
        }
        // Adjointness on the interior block: g is self-adjoint here.
        for j in 0..interior_end {
            for r in 0..interior_end {
                assert_eq!(lg.at(r, j), &lg.at(j, r).conj());
            }
        }
    }

    #[test]
    fn freeness_and_group_word_oracle() {
        // Alternating centered words of length <= 4 have vanishing
        // expectation; group words match the two-factor normal-form oracle.
        let (f, _) = two_z2_fock(4);
        let alg = f.factors[0].algebra.clone();
        let centered = alg.basis_vec(1); // the group generator, trace zero
        for len in 1..=4usize {
            for start in 0..2usize {
                let word: Vec<(usize, Vec<Scalar>)> =
                    (0..len).map(|k| ((start + k) % 2, centered.clone())).collect();
                let val = f.free_expectation(&word).unwrap();
                assert!(val.iter().all(|c| c.is_zero()), "length {len} start {start}");
            }
        }

        // All 30 group words of length 1..=4 over the two involutions.
        let z2 = presets::cyclic(2);
        let triv = crate::group::FiniteGroup::trivial();
        let am = crate::word::TwoFactorAmalgam::new(
            z2.clone(),
            z2.clone(),
            triv,
            vec![0],
            vec![0],
        )
        .unwrap();
        let mut checked = 0usize;
        for len in 1..=4usize {
            for pattern in 0..(1usize << len) {
                let letters: Vec<usize> = (0..len).map(|k| (pattern >> k) & 1).collect();
                let word: Vec<(usize, Vec<Scalar>)> =
                    letters.iter().map(|&i| (i, alg.basis_vec(1))).collect();
                let val = f.free_expectation(&word).unwrap();
                let nf = am
                    .reduce(&crate::word::AmalgamWord::new(
                        letters.iter().map(|&i| (i, 1usize)).collect(),
                    ))
                    .unwrap();
                let expected = if nf == am.identity() { Scalar::one() } else { Scalar::zero() };
                assert_eq!(val, vec![expected], "word {letters:?}");
                checked += 1;
            }
        }
        assert_eq!(checked, 30);
    }

    #[test]
    fn depth_guard() {
        let (f, _) = two_z2_fock(2);
        let alg = f.factors[0].algebra.clone();
        let word: Vec<(usize, Vec<Scalar>)> =
            (0..3).map(|k| (k % 2, alg.basis_vec(1))).collect();
        assert_eq!(
            f.free_expectation(&word).unwrap_err(),
            FockError::DepthExceeded { len: 3, depth: 2 }
        );
    }

    #[test]
    fn factor_expectation_properties() {
        let (f, data) = two_z2_fock(4);
        let alg = data.factors[0].algebra.clone();
        let g = alg.basis_vec(1);
        // Identity on the chosen factor.
        for b in 0..2usize {
            let word = vec![(0usize, alg.basis_vec(b))];
            assert_eq!(factor_expectation(&data, 0, &word, 4).unwrap(), alg.basis_vec(b));
        }
        // Factor expectation on the other factor: tau(g) = 0, tau(1) = 1.
        assert_eq!(
            factor_expectation(&data, 0, &[(1, g.clone())], 4).unwrap(),
            vec![Scalar::zero(); 2]
        );
        assert_eq!(
            factor_expectation(&data, 0, &[(1, alg.unit().to_vec())], 4).unwrap(),
            alg.unit().to_vec()
        );
        // Zero on alternating centered words of length 2 and 3.
        for word in [
            vec![(0usize, g.clone()), (1, g.clone())],
            vec![(1, g.clone()), (0, g.clone())],
            vec![(0, g.clone()), (1, g.clone()), (0, g.clone())],
            vec![(1, g.clone()), (0, g.clone()), (1, g.clone())],
        ] {
            let val = factor_expectation(&data, 0, &word, 4).unwrap();
            assert!(val.iter().all(|c| c.is_zero()), "word {:?}", word.len());
        }

        // Agreement with the Fock compression: psi_0(w) matches the
        // compression of lambda(w) xi onto the xi-and-factor-0 blocks.
        let m0 = z2_trace_module();
        for word in [
            vec![(0usize, g.clone())],
            vec![(1usize, g.clone())],
            vec![(0, g.clone()), (1, g.clone())],
            vec![(0, g.clone()), (1, g.clone()), (0, g.clone())],
            vec![(1, g.clone()), (1, g.clone())],
        ] {
            let via_words = factor_expectation(&data, 0, &word, 4).unwrap();
            let mut v = f.xi();
            for (i, a) in word.iter().rev() {
                let (nv, lossy) = f.apply_lambda(*i, a, &v).unwrap();
                assert!(!lossy);
                v = nv;
            }
            //

            let b_block = &v[..1];
            let t0 = f.tuple_index(&[0]).unwrap();
            let comp_block = f.block(&v, t0);
            // Map back into the factor algebra: xi b -> iota(b); complement
            // coordinates lift through the factor module.
            let mut via_fock = vec![Scalar::zero(); 2];
            for (q, c) in b_block.iter().enumerate() {
                for (o, x) in via_fock.iter_mut().zip(m0.iota[q].iter()) {
                    *o += &(c * x);
                }
            }
            // Module coordinate b_dim + 0 is the centered generator class.
            let mut module_vec = vec![Scalar::zero(); m0.dim];
            module_vec[m0.b_dim] = comp_block[0].clone();
            let rep = m0.lift.apply(&module_vec);
            for (o, x) in via_fock.iter_mut().zip(rep.iter()) {
                *o += x;
            }
            assert_eq!(via_words, via_fock);
        }
    }

    #[test]
    fn base_valued_form_sees_base_elements() {
        // (xi, lambda(b) xi) = b for base elements: over scalars this is the
        // unit scaling; checked through a factor with nontrivial base below
        // in the reduced-family tests.
        let (f, _) = two_z2_fock(2);
        let val = f.free_expectation(&[]).unwrap();
        assert_eq!(val, vec![Scalar::one()]);
    }


    /// The dihedral-over-Klein reduced family: three copies of the dihedral
    /// group algebra, each containing a Klein four subalgebra identified with
    /// a vertex of the Klein triangle, over the order-8 amalgam.
    fn dihedral_reduced_family(depth: usize) -> ReducedFamilyInput {
        let t = presets::klein_triangle();
        let out = crate::triangle::realize_triangle(&t, 12, 10_000).unwrap();
        let crate::triangle::Verdict::Realizable { group, embeddings, .. } = &out.verdict else {
            panic!("klein triangle enumerates");
        };
        let g = group.as_ref().unwrap();
        let embeddings = embeddings.as_ref().unwrap();
        let base = StarAlgebra::group_algebra(g);
        let tau_base = group_trace(g);
        let d4 = presets::dihedral_4();
        let a_alg = StarAlgebra::group_algebra(&d4);
        // Klein subgroup {e, r2, s, r2s} with the isomorphism e,a,b,ab ->
        // e, r2, s, r2s.
        let klein_in_d4 = [0usize, 2, 4, 6];
        let mut factors = Vec::new();
        for i in 0..3 {
            let vg = &t.vertices[i];
            let sub = StarAlgebra::group_algebra(vg);
            let iota_a = StarMorphism::new(&sub, &a_alg, klein_in_d4
                .iter()
                .map(|&x| a_alg.basis_vec(x))
                .collect())
            .unwrap();
            let iota_b = StarMorphism::new(&sub, &base, embeddings[i]
                .iter()
                .map(|&x| base.basis_vec(x))
                .collect())
            .unwrap();
            let phi = group_subalgebra_expectation(&a_alg, &klein_in_d4).unwrap();
            let mut image: Vec<usize> = embeddings[i].clone();
            image.sort_unstable();
            let psi = group_subalgebra_expectation(&base, &image).unwrap();
            factors.push(ReducedFactor {
                algebra: a_alg.clone(),
                base_sub: sub,
                iota_a,
                iota_b,
                phi,
                psi,
            });
        }
        ReducedFamilyInput { base, tau_base, factors, depth }
    }

    #[test]
    fn reduced_family_construction_and_audit() {
        let input = dihedral_reduced_family(2);
        let ga = generalized_reduced_amalgam(&input).unwrap();
        for m in &ga.inner {
            assert_eq!(m.sigma_rank, 8, "factor embeds at depth zero");
            // Patterns at depth 2: one factor slot, and amalgam-then-factor.
            assert_eq!(m.patterns, vec![vec![0], vec![1, 0]]);
            assert_eq!(m.fock.dim, 8 + 8 + 8);
        }
        // Independent dimension counts agree: 8 * (1 + 3*2 + 6*4) = 248.
        let audit = decomposition_audit(&ga).unwrap();
        assert!(audit.ok);
        assert_eq!(audit.nested_dim, 248);
        assert_eq!(audit.flat_dim, 248);
        assert_eq!(ga.outer.dim, 248);
    }

    #[test]
    fn reduced_family_moments_vanish_and_restrict() {
        let input = dihedral_reduced_family(2);
        let ga = generalized_reduced_amalgam(&input).unwrap();
        let a_alg = input.factors[0].algebra.clone();
        // Centered factor basis letters: dihedral elements off the Klein
        // subgroup.
        let centered = [1usize, 3, 5, 7];
        for i in 0..3usize {
            for &g in &centered {
                let val = ga.outer.free_expectation(&[(i, a_alg.basis_vec(g))]).unwrap();
                assert!(val.iter().all(|c| c.is_zero()), "centered singleton");
            }
        }
        for i in 0..3usize {
            for j in 0..3usize {
                if i == j {
                    continue;
                }
                for &g in &centered {
                    for &h in &centered {
                        let val = ga
                            .outer
                            .free_expectation(&[
                                (i, a_alg.basis_vec(g)),
                                (j, a_alg.basis_vec(h)),
                            ])
                            .unwrap();
                        assert!(
                            val.iter().all(|c| c.is_zero()),
                            "centered pair ({i},{j},{g},{h})"
                        );
                    }
                }
            }
        }
        // The restriction of the expectation to each factor is the factor
        // expectation transported into the amalgam.
        for (i, rf) in input.factors.iter().enumerate() {
            for g in 0..8usize {
                let val = ga.outer.free_expectation(&[(i, a_alg.basis_vec(g))]).unwrap();
                let phi_val = rf.phi.apply(&a_alg.basis_vec(g));
                // Express through the subalgebra, then through the amalgam.
                let mut iota_cols = Mat::zero(a_alg.dim(), rf.base_sub.dim());
                for q in 0..rf.base_sub.dim() {
                    for (r, c) in rf.iota_a.image_of_basis(q).into_iter().enumerate() {
                        iota_cols.set(r, q, c);
                    }
                }
                let coords = crate::linalg::solve(&iota_cols, &phi_val).unwrap();
                let expected = rf.iota_b.apply(&coords);
                assert_eq!(val, expected, "factor {i} element {g}");
            }
        }
        // The base-valued form sees amalgam elements through the inner
        // factor action: L(b) xi has base part b.
        let f0 = &ga.inner[0].fock;
        for q in 0..8usize {
            let mut xi = vec![Scalar::zero(); f0.dim];
            for (r, c) in input.base.unit().iter().enumerate() {
                xi[r] = c.clone();
            }
            let mut img = vec![Scalar::zero(); f0.dim];
            for (col, xc) in xi.iter().enumerate() {
                if xc.is_zero() {
                    continue;
                }
                for r in 0..f0.dim {
                    let m = f0.b_act[q].at(r, col);
                    if !m.is_zero() {
                        img[r] += &(m * xc);
                    }
                }
            }
            let mut expected = vec![Scalar::zero(); 8];
            expected[q] = Scalar::one();
            assert_eq!(&img[..8], expected.as_slice());
            assert!(img[8..].iter().all(|c| c.is_zero()));
        }
    }


    #[test]
    fn inner_module_expectation_matches_word_reduction() {
        // The amalgam-valued expectation computed by the inner module's
        // representation rules must agree with the independent canonical
        // word-reduction route for the pair (factor, amalgam) over the
        // common subalgebra.
        let input = dihedral_reduced_family(3);
        let rf = &input.factors[0];
        let m = reduced_pair_factor(&input.base, &input.tau_base, rf, 3).unwrap();
        let f = &m.fock;
        let a_alg = &rf.algebra;
        let b_alg = &input.base;

        // Independent route: the free product of (A, phi) and (B, psi) over
        // the subalgebra, with the canonical expectation onto the B factor.
        let data = FreeProductData::from_modules(
            &m.em_a.base.clone(),
            &[&m.em_a, &m.em_b],
        );

        let apply_word = |word: &[(usize, Vec<Scalar>)]| -> (Vec<Scalar>, bool) {
            // Apply through the inner module: factor letters via act,
            // amalgam letters via b_act; read off the B block.
            let mut v = vec![Scalar::zero(); f.dim];
            for (r, c) in b_alg.unit().iter().enumerate() {
                v[r] = c.clone();
            }
            let mut lossy = false;
            for (which, coords) in word.iter().rev() {
                let mut out = vec![Scalar::zero(); f.dim];
                for (col, vc) in v.iter().enumerate() {
                    if vc.is_zero() {
                        continue;
                    }
                    let mats: &Vec<Mat> = if *which == 0 { &f.act } else { &f.b_act };
                    let flags = if *which == 0 { &f.act_lossy } else { &f.b_act_lossy };
                    for (k, ck) in coords.iter().enumerate() {
                        if ck.is_zero() {
                            continue;
                        }
                        if flags[k][col] {
                            lossy = true;
                        }
                        for r in 0..f.dim {
                            let e = mats[k].at(r, col);
                            if !e.is_zero() {
                                out[r] += &(&(ck * vc) * e);
                            }
                        }
                    }
                }
                v = out;
            }
            (v[..b_alg.dim()].to_vec(), lossy)
        };

        // Sampled words mixing factor and amalgam letters.
        let r = a_alg.basis_vec(1); // off-subgroup dihedral element
        let s = a_alg.basis_vec(4);
        let in_sub = a_alg.basis_vec(2);
        let b1 = b_alg.basis_vec(1);
        let b5 = b_alg.basis_vec(5);
        let words: Vec<Vec<(usize, Vec<Scalar>)>> = vec![
            vec![(0, r.clone())],
            vec![(0, in_sub.clone())],
            vec![(1, b1.clone())],
            vec![(0, r.clone()), (0, s.clone())],
            vec![(0, r.clone()), (1, b1.clone())],
            vec![(1, b1.clone()), (0, r.clone())],
            vec![(1, b1.clone()), (1, b5.clone())],
            vec![(0, r.clone()), (1, b5.clone()), (0, s.clone())],
            vec![(1, b5.clone()), (0, r.clone()), (1, b1.clone())],
        ];
        for word in &words {
            let (via_module, lossy) = apply_word(word);
            assert!(!lossy, "word stays interior at depth 3");
            // Independent route: canonical reduction, expectation onto the
            // amalgam factor, in B coordinates.
            let via_words = factor_expectation(&data, 1, word, 8).unwrap();
            assert_eq!(via_module, via_words, "word of length {}", word.len());
        }
    }

    #[test]
    fn degenerate_reduced_family_collapses_to_base() {
        // Factors equal to their subalgebras: no complements anywhere, the
        // module is the amalgam itself.
        let t = presets::klein_triangle();
        let out = crate::triangle::realize_triangle(&t, 12, 10_000).unwrap();
        let crate::triangle::Verdict::Realizable { group, embeddings, .. } = &out.verdict else {
            panic!("klein triangle enumerates");
        };
        let g = group.as_ref().unwrap();
        let embeddings = embeddings.as_ref().unwrap();
        let base = StarAlgebra::group_algebra(g);
        let tau_base = group_trace(g);
        let mut factors = Vec::new();
        for i in 0..3 {
            let vg = &t.vertices[i];
            let sub = StarAlgebra::group_algebra(vg);
            let iota_a = StarMorphism::identity(&sub);
            let iota_b = StarMorphism::new(&sub, &base, embeddings[i]
                .iter()
                .map(|&x| base.basis_vec(x))
                .collect())
            .unwrap();
            let phi = ConditionalExpectation::new(
                &sub,
                crate::algebra::SubalgebraSpan::new(
                    &sub,
                    &(0..sub.dim()).map(|k| sub.basis_vec(k)).collect::<Vec<_>>(),
                )
                .unwrap(),
                Mat::identity(sub.dim()),
            )
            .unwrap();
            let mut image: Vec<usize> = embeddings[i].clone();
            image.sort_unstable();
            let psi = group_subalgebra_expectation(&base, &image).unwrap();
            factors.push(ReducedFactor { algebra: sub.clone(), base_sub: sub, iota_a, iota_b, phi, psi });
        }
        let input = ReducedFamilyInput { base, tau_base, factors, depth: 2 };
        let ga = generalized_reduced_amalgam(&input).unwrap();
        assert_eq!(ga.outer.dim, 8);
        let audit = decomposition_audit(&ga).unwrap();
        assert!(audit.ok);
        assert_eq!(audit.flat_dim, 8);
    }

    #[test]
    fn two_factor_reduced_family_matches_plain_product() {
        // |I| = 2 with scalar subalgebras and scalar amalgam: the
        // construction degenerates to the plain two-factor module.
        let z2 = presets::cyclic(2);
        let alg = StarAlgebra::group_algebra(&z2);
        let scalars = StarAlgebra::matrix_algebra(1);
        let iota_a = StarMorphism::new(&scalars, &alg, vec![alg.unit().to_vec()]).unwrap();
        let iota_b = StarMorphism::identity(&scalars);
        let phi = group_subalgebra_expectation(&alg, &[z2.identity()]).unwrap();
        let psi = ConditionalExpectation::new(
            &scalars,
            crate::algebra::SubalgebraSpan::new(&scalars, &[scalars.unit().to_vec()]).unwrap(),
            Mat::identity(1),
        )
        .unwrap();
        let rf = || ReducedFactor {
            algebra: alg.clone(),
            base_sub: scalars.clone(),
            iota_a: iota_a.clone(),
            iota_b: iota_b.clone(),
            phi: phi.clone(),
            psi: psi.clone(),
        };
        let input = ReducedFamilyInput {
            base: scalars.clone(),
            tau_base: vec![Scalar::one()],
            factors: vec![rf(), rf()],
            depth: 3,
        };
        let ga = generalized_reduced_amalgam(&input).unwrap();
        // Inner modules: B = scalars has no complement, so the patterns
        // reduce to powers of the factor complement; at depth 3 the inner
        // module is 1 + 1 (pattern [0]) and the longer patterns vanish.
        let (plain, _) = two_z2_fock(3);
        assert_eq!(ga.outer.dim, plain.dim);
        // Moments agree with the plain module on group words.
        let gvec = alg.basis_vec(1);
        for word in [
            vec![(0usize, gvec.clone())],
            vec![(0, gvec.clone()), (1, gvec.clone())],
            vec![(0, gvec.clone()), (1, gvec.clone()), (0, gvec.clone())],
            vec![(0, gvec.clone()), (0, gvec.clone())],
        ] {
            assert_eq!(
                ga.outer.free_expectation(&word).unwrap(),
                plain.free_expectation(&word).unwrap()
            );
        }
    }

    #[test]
    fn subfamily_embeds_isometrically_and_intertwines() {
        // Two dihedral factors over the central order-2 subalgebra, and the
        // Klein subfamily inside them: the small module embeds into the big
        // one compatibly with forms and representations.
        let d4 = presets::dihedral_4();
        let k4_in_d4 = [0usize, 2, 4, 6];
        let center = [0usize, 2];
        let big_alg = StarAlgebra::group_algebra(&d4);
        let sub_alg = {
            // Klein subgroup as its own group algebra via as_group.
            let sub = d4.subgroup_generated(&[2, 4]).unwrap();
            let (g, members) = sub.as_group();
            assert_eq!(members, k4_in_d4);
            StarAlgebra::group_algebra(&g)
        };
        let base = {
            let sub = d4.subgroup_generated(&[2]).unwrap();
            let (g, members) = sub.as_group();
            assert_eq!(members, center);
            StarAlgebra::group_algebra(&g)
        };
        let tau = vec![Scalar::one(), Scalar::zero()];
        // Expectations onto the central subalgebra.
        let e_big = group_subalgebra_expectation(&big_alg, &center).unwrap();
        let e_sub = group_subalgebra_expectation(&sub_alg, &[0, 1]).unwrap();
        let iota_big =
            StarMorphism::new(&base, &big_alg, center.iter().map(|&x| big_alg.basis_vec(x)).collect())
                .unwrap();
        let iota_sub =
            StarMorphism::new(&base, &sub_alg, vec![sub_alg.basis_vec(0), sub_alg.basis_vec(1)])
                .unwrap();
        let em_big = gns(&big_alg, &e_big, &base, &iota_big, &tau).unwrap();
        let em_sub = gns(&sub_alg, &e_sub, &base, &iota_sub, &tau).unwrap();
        let big = fock_space(
            vec![em_big.to_factor(), em_big.to_factor()],
            &base,
            &tau,
            2,
        )
        .unwrap();
        let small = fock_space(
            vec![em_sub.to_factor(), em_sub.to_factor()],
            &base,
            &tau,
            2,
        )
        .unwrap();

        // Algebra inclusion C[K4] -> C[D4] on basis elements.
        let include_alg = |v: &[Scalar]| -> Vec<Scalar> {
            let mut out = vec![Scalar::zero(); 8];
            for (k, c) in v.iter().enumerate() {
                out[k4_in_d4[k]] += c;
            }
            out
        };
        // Module-level inclusions per factor: sub module -> big module.
        let include_mod = |v: &[Scalar]| -> Vec<Scalar> {
            em_big.quot.apply(&include_alg(&em_sub.lift.apply(v)))
        };
        // Word-space inclusion: map block by block (tuples are shared).
        let include_fock = |v: &[Scalar]| -> Vec<Scalar> {
            let mut out = vec![Scalar::zero(); big.dim];
            for (s, space) in small.spaces.iter().enumerate() {
                let x = small.block(v, s);
                if x.iter().all(|c| c.is_zero()) {
                    continue;
                }
                if space.tuple.is_empty() {
                    out[..base.dim()].clone_from_slice(x);
                    continue;
                }
                // Lift to raw, include slotwise, project into the big space.
                let raw = space.lift.apply(x);
                let bs = big.tuple_index(&space.tuple).unwrap();
                let big_space = &big.spaces[bs];
                let mut big_raw = vec![Scalar::zero(); big_space.raw_dim];
                for (ri, c) in raw.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    // Decompose the small raw index into slot indices.
                    let mut idx = ri;
                    let n = space.tuple.len();
                    let mut slots = vec![0usize; n];
                    for k in (0..n).rev() {
                        slots[k] = idx % space.raw_dims[k];
                        idx /= space.raw_dims[k];
                    }
                    // Include each slot complement vector.
                    let mut pieces: Vec<Vec<Scalar>> = Vec::new();
                    for &sl in &slots {
                        let mut comp_small = vec![Scalar::zero(); em_sub.comp_dim()];
                        comp_small[sl] = Scalar::one();
                        let mut msmall = vec![Scalar::zero(); em_sub.dim];
                        msmall[em_sub.b_dim..].clone_from_slice(&comp_small);
                        let mbig = include_mod(&msmall);
                        assert!(mbig[..em_big.b_dim].iter().all(|c| c.is_zero()));
                        pieces.push(mbig[em_big.b_dim..].to_vec());
                    }
                    // Outer product of the included slots.
                    let mut acc: Vec<(usize, Scalar)> = vec![(0, c.clone())];
                    for (k, piece) in pieces.iter().enumerate() {
                        let d = big_space.raw_dims[k];
                        let mut next = Vec::new();
                        for (pos, coeff) in &acc {
                            for (pi, pc) in piece.iter().enumerate() {
                                if !pc.is_zero() {
                                    next.push((pos * d + pi, coeff * pc));
                                }
                            }
                        }
                        acc = next;
                    }
                    for (pos, coeff) in acc {
                        big_raw[pos] += &coeff;
                    }
                }
                let q = big_space.quot.apply(&big_raw);
                for (r, c) in q.into_iter().enumerate() {
                    out[big.offsets[bs] + r] += &c;
                }
            }
            out
        };

        // Intertwining: including then acting equals acting then including,
        // for every subfamily algebra element, exactly on the interior.
        for a in 0..4usize {
            let a_small = sub_alg.basis_vec(a);
            let a_big = include_alg(&a_small);
            for i in 0..2usize {
                for j in 0..small.dim {
                    let mut v = vec![Scalar::zero(); small.dim];
                    v[j] = Scalar::one();
                    let (sv, l1) = small.apply_lambda(i, &a_small, &v).unwrap();
                    let (bv, l2) = big.apply_lambda(i, &a_big, &include_fock(&v)).unwrap();
                    if l1 || l2 {
                        continue;
                    }
                    assert_eq!(include_fock(&sv), bv, "factor {i} element {a} column {j}");
                }
            }
        }
        // Isometric on the distinguished vector and moments agree.
        let g_small = sub_alg.basis_vec(1);
        let g_big = include_alg(&g_small);
        for word_small in [
            vec![(0usize, g_small.clone())],
            vec![(0, g_small.clone()), (1, g_small.clone())],
        ] {
            let word_big: Vec<(usize, Vec<Scalar>)> =
                word_small.iter().map(|(i, a)| (*i, include_alg(a))).collect();
            assert_eq!(
                small.free_expectation(&word_small).unwrap(),
                big.free_expectation(&word_big).unwrap()
            );
        }
        let _ = g_big;
    }

    #[test]
    fn matrix_factor_moments() {
        // Two copies of (M2, tau) over scalars: second moment of a matrix
        // unit word e(1,2) e(2,1) in one factor is tau = 1/2... computed via
        // the product inside the factor; freeness kills the mixed centered
        // pair.
        let m2 = StarAlgebra::matrix_algebra(2);
        let e = scalar_expectation(&m2).unwrap();
        let em1 = gns_over_scalars(&m2, &e).unwrap();
        let em2 = gns_over_scalars(&m2, &e).unwrap();
        let base = em1.base.clone();
        let f = fock_space(vec![em1.to_factor(), em2.to_factor()], &base, &[Scalar::one()], 2)
            .unwrap();
        let e12 = m2.basis_vec(1);
        let e21 = m2.basis_vec(2);
        let val = f.free_expectation(&[(0, e12.clone()), (0, e21.clone())]).unwrap();
        assert_eq!(val, vec![Scalar::from_ratio(1, 2)]);
        // Mixed factors: both letters centered, expectation zero.
        let val = f.free_expectation(&[(0, e12), (1, e21)]).unwrap();
        assert!(val.iter().all(|c| c.is_zero()));
    }
}
