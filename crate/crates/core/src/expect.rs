//! Conditional expectations on finite-dimensional *-algebras: trace slice
//! maps, unitary conjugates, commuting-square and non-degeneracy checks, and
//! biunitarity of elements of a matrix tensor algebra.
//!
//! Positivity is not certified here; the module certifies the algebraic
//! conditional-expectation laws and trace compatibility exactly.

use crate::algebra::{
    apply_functional, normalized_trace, sparse_to_dense, AlgebraError, SparseVec, StarAlgebra,
    SubalgebraSpan,
};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Which tensor factor a slice map traces out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Trace the left factor: `a (x) b  ->  tr(a) (I (x) b)`.
    Left,
    /// Trace the right factor: `a (x) b  ->  tr(b) (a (x) I)`.
    Right,
}

/// An idempotent, target-bimodule-linear, star-preserving projection onto a
/// unital *-subalgebra.
#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    pub matrix: Mat,
    pub target: SubalgebraSpan,
}

impl ConditionalExpectation {
    /// Validates all conditional-expectation laws exactly.
    pub fn new(
        alg: &StarAlgebra,
        target: SubalgebraSpan,
        matrix: Mat,
    ) -> Result<Self, AlgebraError> {
        let dim = alg.dim();
        if matrix.rows != dim || matrix.cols != dim || target.parent_dim() != dim {
            return Err(AlgebraError::DimensionMismatch { expected: dim, got: matrix.rows });
        }
        let e = ConditionalExpectation { matrix, target };
        e.check(alg)?;
        Ok(e)
    }

    pub fn check(&self, alg: &StarAlgebra) -> Result<(), AlgebraError> {
        let dim = alg.dim();
        // Idempotent with range in the target.
        if self.matrix.mul(&self.matrix) != self.matrix {
            return Err(AlgebraError::NotIdempotent);
        }
        for j in 0..dim {
            if !self.target.contains(&self.matrix.col_vec(j)) {
                return Err(AlgebraError::NotIdentityOnTarget);
            }
        }
        // Identity on the target.
        for b in self.target.basis() {
            if &self.apply(b) != b {
                return Err(AlgebraError::NotIdentityOnTarget);
            }
        }
        // Bimodule law over the target basis.
        for (bi, b1) in self.target.basis().iter().enumerate() {
            for (bj, b2) in self.target.basis().iter().enumerate() {
                for x in 0..dim {
                    let xv = alg.basis_vec(x);
                    let lhs = self.apply(&alg.mul_vec(&alg.mul_vec(b1, &xv), b2));
                    let rhs = alg.mul_vec(&alg.mul_vec(b1, &self.apply(&xv )), b2);
                    if lhs != rhs {
                        return Err(AlgebraError::BimoduleLawFails { b1: bi, x, b2: bj });
                    }
                }
            }
        }
        // Star-preserving.
        for x in 0..dim {
            let xv = alg.basis_vec(x);
            if self.apply(&alg.star_vec(&xv)) != alg.star_vec(&self.apply(&xv)) {
                return Err(AlgebraError::ExpectationNotStar(x));
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        self.matrix.apply(v)
    }

    /// Expectation values in target-basis coordinates.
    pub fn apply_coords(&self, v: &[Scalar]) -> Vec<Scalar> {
        self.target.express(&self.apply(v)).expect("range lies in the target")
    }
}

/// Slice map against the normalized trace on one tensor factor of
/// `M_n (x) M_k`.
pub fn trace_expectation(
    alg: &StarAlgebra,
    side: Side,
) -> Result<ConditionalExpectation, AlgebraError> {
    let (n, k) = alg.tensor_info().ok_or(AlgebraError::NoTensorStructure)?;
    let dim = alg.dim();
    let mut matrix = Mat::zero(dim, dim);
    let mut target_vecs: Vec<Vec<Scalar>> = Vec::new();
    match side {
        Side::Left => {
            // e_n(i,j) (x) e_k(a,b) -> delta_ij / n * (I_n (x) e_k(a,b))
            for a in 0..k {
                for b in 0..k {
                    let mut t = vec![Scalar::zero(); dim];
                    for p in 0..n {
                        t[((p * n + p) * k + a) * k + b] = Scalar::one();
                    }
                    target_vecs.push(t);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for a in 0..k {
                        for b in 0..k {
                            if i != j {
                                continue;
                            }
                            let src = ((i * n + j) * k + a) * k + b;
                            for p in 0..n {
                                let dst = ((p * n + p) * k + a) * k + b;
                                matrix.set(dst, src, Scalar::from_ratio(1, n as i64));
                            }
                        }
                    }
                }
            }
        }
        Side::Right => {
            for i in 0..n {
                for j in 0..n {
                    let mut t = vec![Scalar::zero(); dim];
                    for a in 0..k {
                        t[((i * n + j) * k + a) * k + a] = Scalar::one();
                    }
                    target_vecs.push(t);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for a in 0..k {
                        for b in 0..k {
                            if a != b {
                                continue;
                            }
                            let src = ((i * n + j) * k + a) * k + b;
                            for p in 0..k {
                                let dst = ((i * n + j) * k + p) * k + p;
                                matrix.set(dst, src, Scalar::from_ratio(1, k as i64));
                            }
                        }
                    }
                }
            }
        }
    }
    let target = SubalgebraSpan::new(alg, &target_vecs)?;
    ConditionalExpectation::new(alg, target, matrix)
}

/// Conjugates an expectation by a unitary: `x -> u E(u* x u) u*`, projecting
/// onto the conjugated subalgebra `u T u*`.
pub fn conjugate_expectation(
    alg: &StarAlgebra,
    e: &ConditionalExpectation,
    u: &[Scalar],
) -> Result<ConditionalExpectation, AlgebraError> {
    if !alg.is_unitary(u) {
        return Err(AlgebraError::NotUnitary);
    }
    let us = alg.star_vec(u);
    let dim = alg.dim();
    let mut matrix = Mat::zero(dim, dim);
    for j in 0..dim {
        let x = alg.basis_vec(j);
        let inner = alg.mul_vec(&alg.mul_vec(&us, &x), u);
        let out = alg.mul_vec(&alg.mul_vec(u, &e.apply(&inner)), &us);
        for (r, c) in out.into_iter().enumerate() {
            matrix.set(r, j, c);
        }
    }
    let conj_basis: Vec<Vec<Scalar>> = e
        .target
        .basis()
        .iter()
        .map(|t| alg.mul_vec(&alg.mul_vec(u, t), &us))
        .collect();
    let target = SubalgebraSpan::new(alg, &conj_basis)?;
    ConditionalExpectation::new(alg, target, matrix)
}

/// Conditional expectation of a group algebra onto the subalgebra of a
/// subgroup: group elements off the subgroup map to zero.
pub fn group_subalgebra_expectation(
    alg: &StarAlgebra,
    subgroup_members: &[usize],
) -> Result<ConditionalExpectation, AlgebraError> {
    let dim = alg.dim();
    let mut matrix = Mat::zero(dim, dim);
    let mut target_vecs = Vec::new();
    for &m in subgroup_members {
        matrix.set(m, m, Scalar::one());
        let mut v = vec![Scalar::zero(); dim];
        v[m] = Scalar::one();
        target_vecs.push(v);
    }
    let target = SubalgebraSpan::new(alg, &target_vecs)?;
    ConditionalExpectation::new(alg, target, matrix)
}

/// An expectation-like linear map onto a subalgebra span: unital,
/// star-preserving and trace-compatible, but not required to be idempotent.
///
/// Strict [`ConditionalExpectation`] values coerce into this; the twisted
/// slice maps of a biunitary (conjugation applied after slicing) live here
/// as well, since they fail idempotence while still driving the
/// commuting-square comparisons.
#[derive(Clone, Debug)]
pub struct ExpectationLike {
    pub matrix: Mat,
    pub target: SubalgebraSpan,
}

impl From<&ConditionalExpectation> for ExpectationLike {
    fn from(e: &ConditionalExpectation) -> Self {
        ExpectationLike { matrix: e.matrix.clone(), target: e.target.clone() }
    }
}

/// One-sided conjugated slice map `x -> w . E_side(x) . w*`.
///
/// The range is the conjugated subalgebra `w T w*`; the map is unital,
/// star-preserving and trace-compatible but generally not idempotent, so it
/// is exposed as [`ExpectationLike`] rather than as a strict conditional
/// expectation.
pub fn twisted_slice(
    alg: &StarAlgebra,
    w: &[Scalar],
    side: Side,
) -> Result<ExpectationLike, AlgebraError> {
    if !alg.is_unitary(w) {
        return Err(AlgebraError::NotUnitary);
    }
    let base = trace_expectation(alg, side)?;
    let ws = alg.star_vec(w);
    let dim = alg.dim();
    let mut matrix = Mat::zero(dim, dim);
    for j in 0..dim {
        let out = alg.mul_vec(&alg.mul_vec(w, &base.apply(&alg.basis_vec(j))), &ws);
        for (r, c) in out.into_iter().enumerate() {
            matrix.set(r, j, c);
        }
    }
    let conj_basis: Vec<Vec<Scalar>> =
        base.target.basis().iter().map(|t| alg.mul_vec(&alg.mul_vec(w, t), &ws)).collect();
    let target = SubalgebraSpan::new(alg, &conj_basis)?;
    Ok(ExpectationLike { matrix, target })
}

/// Result of a commuting-square check.
#[derive(Clone, Debug)]
pub struct CommutingSquareReport {
    pub commutes: bool,
    /// Dimension of the intersection of the two targets.
    pub corner_dim: usize,
    /// A basis element where the two composites differ, with both values
    /// (`E2 . E1` first, then `E1 . E2`).
    pub witness: Option<(usize, Vec<Scalar>, Vec<Scalar>)>,
}

/// Two expectation maps on the same algebra form a commuting square when
/// their composites agree and equal the expectation onto the target
/// intersection (identity there, range inside it).
pub fn commuting_square_check_maps(
    alg: &StarAlgebra,
    e1: &ExpectationLike,
    e2: &ExpectationLike,
) -> Result<CommutingSquareReport, AlgebraError> {
    let dim = alg.dim();
    if e1.matrix.rows != dim || e2.matrix.rows != dim {
        return Err(AlgebraError::SourceMismatch);
    }
    let corner = e1.target.intersect(&e2.target);
    let corner_ech = crate::linalg::rref(&corner);
    let corner_dim = corner.len();
    let c12 = e2.matrix.mul(&e1.matrix); // E1 then E2
    let c21 = e1.matrix.mul(&e2.matrix);
    if c12 != c21 {
        let j = (0..dim).find(|&j| c12.col_vec(j) != c21.col_vec(j)).unwrap();
        return Ok(CommutingSquareReport {
            commutes: false,
            corner_dim,
            witness: Some((j, c21.col_vec(j), c12.col_vec(j))),
        });
    }
    // Equal composites: range must stay inside the corner and restrict to
    // the identity there to be the corner expectation.
    for j in 0..dim {
        let col = c12.col_vec(j);
        if !corner_ech.contains(&col) {
            return Ok(CommutingSquareReport {
                commutes: false,
                corner_dim,
                witness: Some((j, col.clone(), col)),
            });
        }
    }
    for v in &corner {
        if &c12.apply(v) != v {
            return Ok(CommutingSquareReport {
                commutes: false,
                corner_dim,
                witness: None,
            });
        }
    }
    Ok(CommutingSquareReport { commutes: true, corner_dim, witness: None })
}

/// Strict-expectation form of [`commuting_square_check_maps`].
pub fn commuting_square_check(
    alg: &StarAlgebra,
    e1: &ConditionalExpectation,
    e2: &ConditionalExpectation,
) -> Result<CommutingSquareReport, AlgebraError> {
    commuting_square_check_maps(alg, &e1.into(), &e2.into())
}

/// Non-degeneracy of a pair of subalgebras: the products in both orders span
/// the whole algebra.
pub fn nondegeneracy_check(alg: &StarAlgebra, s1: &SubalgebraSpan, s2: &SubalgebraSpan) -> bool {
    let mut fwd: Vec<Vec<Scalar>> = Vec::new();
    let mut bwd: Vec<Vec<Scalar>> = Vec::new();
    for x in s1.basis() {
        for y in s2.basis() {
            fwd.push(alg.mul_vec(x, y));
            bwd.push(alg.mul_vec(y, x));
        }
    }
    crate::linalg::rank(&fwd) == alg.dim() && crate::linalg::rank(&bwd) == alg.dim()
}

/// An element of `M_n (x) M_k` is biunitary when both it and its block
/// transpose are unitary.
pub fn biunitary_check(alg: &StarAlgebra, w: &[Scalar]) -> Result<bool, AlgebraError> {
    let wt = alg.block_transpose(w)?;
    Ok(alg.is_unitary(w) && alg.is_unitary(&wt))
}

/// Enumerates all permutation matrices of `M_n (x) M_k` and reports which
/// are biunitary.
pub fn biunitary_permutations(alg: &StarAlgebra) -> Result<Vec<Vec<usize>>, AlgebraError> {
    let (n, k) = alg.tensor_info().ok_or(AlgebraError::NoTensorStructure)?;
    let size = n * k;
    let mut perm: Vec<usize> = (0..size).collect();
    let mut out = Vec::new();
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; size];
    let check = |p: &[usize], out: &mut Vec<Vec<usize>>| {
        let w = alg.permutation_matrix(p).unwrap();
        if biunitary_check(alg, &w).unwrap() {
            out.push(p.to_vec());
        }
    };
    check(&perm, &mut out);
    let mut i = 0;
    while i < size {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            check(&perm, &mut out);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out.sort();
    Ok(out)
}

/// The conjugated matrix-unit family `w (e(i,j) (x) I) w*` (side = Left) or
/// `w (I (x) e(i,j)) w*` (side = Right), flattened row-major over `(i,j)`.
pub fn conjugated_units(
    alg: &StarAlgebra,
    w: &[Scalar],
    side: Side,
) -> Result<Vec<Vec<Scalar>>, AlgebraError> {
    if !alg.is_unitary(w) {
        return Err(AlgebraError::NotUnitary);
    }
    let (n, k) = alg.tensor_info().ok_or(AlgebraError::NoTensorStructure)?;
    let ws = alg.star_vec(w);
    let mut out = Vec::new();
    let (outer, inner) = match side {
        Side::Left => (n, k),
        Side::Right => (k, n),
    };
    for i in 0..outer {
        for j in 0..outer {
            let mut unit = vec![Scalar::zero(); alg.dim()];
            for a in 0..inner {
                let idx = match side {
                    Side::Left => ((i * n + j) * k + a) * k + a,
                    Side::Right => ((a * n + a) * k + i) * k + j,
                };
                unit[idx] = Scalar::one();
            }
            out.push(alg.mul_vec(&alg.mul_vec(w, &unit), &ws));
        }
    }
    Ok(out)
}

/// Trace compatibility `tau . E = tau` checked exactly on the basis.
pub fn check_trace_compatible(
    alg: &StarAlgebra,
    e: &ConditionalExpectation,
    tau: &[Scalar],
) -> bool {
    (0..alg.dim()).all(|j| {
        let x = alg.basis_vec(j);
        apply_functional(tau, &e.apply(&x)) == apply_functional(tau, &x)
    })
}

/// Convenience: the coordinate vector of a sparse element.
pub fn sparse_elem(alg: &StarAlgebra, entries: &[(usize, Scalar)]) -> Vec<Scalar> {
    sparse_to_dense(&entries.to_vec() as &SparseVec, alg.dim())
}

/// Normalized-trace expectation onto the scalars.
pub fn scalar_expectation(alg: &StarAlgebra) -> Result<ConditionalExpectation, AlgebraError> {
    let tau = normalized_trace(alg)?;
    let dim = alg.dim();
    let mut matrix = Mat::zero(dim, dim);
    for j in 0..dim {
        let t = apply_functional(&tau, &alg.basis_vec(j));
        for (r, u) in alg.unit().iter().enumerate() {
            matrix.set(r, j, &t * u);
        }
    }
    let target = SubalgebraSpan::new(alg, &[alg.unit().to_vec()])?;
    ConditionalExpectation::new(alg, target, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2x2() -> StarAlgebra {
        let m2 = StarAlgebra::matrix_algebra(2);
        StarAlgebra::tensor(&m2, &m2)
    }

    fn unit_u(alg: &StarAlgebra) -> Vec<Scalar> {
        alg.permutation_matrix(&[0, 3, 2, 1]).unwrap()
    }

    fn unit_v(alg: &StarAlgebra) -> Vec<Scalar> {
        alg.permutation_matrix(&[0, 1, 3, 2]).unwrap()
    }

    #[test]
    fn left_slice_map_values() {
        let alg = m2x2();
        let e0 = trace_expectation(&alg, Side::Left).unwrap();
        // E0(e(1,2) (x) b) = 0 since tr(e(1,2)) = 0.
        let mut x = vec![Scalar::zero(); 16];
        x[alg.matrix_unit_index(0, 2).unwrap()] = Scalar::one(); // e(1,2)(x)e(1,1)
        assert!(e0.apply(&x).iter().all(|c| c.is_zero()));
        // E0 fixes I (x) b.
        let mut y = vec![Scalar::zero(); 16];
        for p in 0..2usize {
            y[((p * 2 + p) * 2) * 2 + 1] = Scalar::one(); // I (x) e(1,2)
        }
        assert_eq!(e0.apply(&y), y);
    }

    #[test]
    fn conjugated_slice_maps_are_expectations() {
        let alg = m2x2();
        let er = trace_expectation(&alg, Side::Right).unwrap();
        let u = unit_u(&alg);
        let eu = conjugate_expectation(&alg, &er, &u).unwrap();
        // E_u(I(x)b) = tau(b) 1: feed I (x) e(1,1).
        let mut y = vec![Scalar::zero(); 16];
        for p in 0..2usize {
            y[((p * 2 + p) * 2) * 2] = Scalar::one();
        }
        let img = eu.apply(&y);
        let mut expected = vec![Scalar::zero(); 16];
        for (r, c) in alg.unit().iter().enumerate() {
            expected[r] = &Scalar::from_ratio(1, 2) * c;
        }
        assert_eq!(img, expected);
        // Conjugating by the identity changes nothing.
        let eid = conjugate_expectation(&alg, &er, &alg.unit().to_vec()).unwrap();
        assert_eq!(eid.matrix, er.matrix);
        // A non-unitary conjugator is rejected.
        let bad = alg.basis_vec(1);
        assert!(matches!(
            conjugate_expectation(&alg, &er, &bad),
            Err(AlgebraError::NotUnitary)
        ));
    }

    #[test]
    fn trace_compatibility() {
        let alg = m2x2();
        let tau = normalized_trace(&alg).unwrap();
        for e in [
            trace_expectation(&alg, Side::Left).unwrap(),
            trace_expectation(&alg, Side::Right).unwrap(),
            conjugate_expectation(&alg, &trace_expectation(&alg, Side::Right).unwrap(), &unit_u(&alg))
                .unwrap(),
        ] {
            assert!(check_trace_compatible(&alg, &e, &tau));
        }
    }

    #[test]
    fn twisted_slice_squares_for_biunitary_pair() {
        // The twisted slice maps (conjugation applied after slicing) drive
        // the commuting-square comparisons of a biunitary pair: both squares
        // against the plain slice commute, the pair against each other does
        // not.
        let alg = m2x2();
        let e0: ExpectationLike = (&trace_expectation(&alg, Side::Left).unwrap()).into();
        let lu = twisted_slice(&alg, &unit_u(&alg), Side::Right).unwrap();
        let lv = twisted_slice(&alg, &unit_v(&alg), Side::Right).unwrap();
        assert!(commuting_square_check_maps(&alg, &lu, &e0).unwrap().commutes);
        assert!(commuting_square_check_maps(&alg, &lv, &e0).unwrap().commutes);
        let rep = commuting_square_check_maps(&alg, &lu, &lv).unwrap();
        assert!(!rep.commutes);
        assert_eq!(rep.corner_dim, 1);
        assert!(rep.witness.is_some());

        // The twisted maps are not idempotent, which is why they are not
        // ConditionalExpectation values.
        assert_ne!(lu.matrix.mul(&lu.matrix), lu.matrix);
    }

    #[test]
    fn twisted_slice_witness_formula() {
        // L_u(v (a (x) I) v) = a_11 e_u(1,1) + a_22 e_u(2,2), exactly, for
        // every matrix unit a.
        let alg = m2x2();
        let u = unit_u(&alg);
        let v = unit_v(&alg);
        let lu = twisted_slice(&alg, &u, Side::Right).unwrap();
        let units_u = conjugated_units(&alg, &u, Side::Left).unwrap();
        for i in 0..2usize {
            for j in 0..2usize {
                // a (x) I for a = e(i+1, j+1).
                let mut a_tensor_i = vec![Scalar::zero(); 16];
                for p in 0..2usize {
                    a_tensor_i[((i * 2 + j) * 2 + p) * 2 + p] = Scalar::one();
                }
                let x = alg.mul_vec(&alg.mul_vec(&v, &a_tensor_i), &v);
                let img = lu.matrix.apply(&x);
                let mut expected = vec![Scalar::zero(); 16];
                if i == j {
                    // a_11 = 1 picks e_u(1,1); a_22 = 1 picks e_u(2,2).
                    expected = units_u[i * 2 + i].clone();
                }
                assert_eq!(img, expected, "a = e({},{})", i + 1, j + 1);
            }
        }
    }

    #[test]
    fn strict_expectations_all_commute() {
        // With the canonical trace-preserving expectations (two-sided
        // conjugation) even the third pair forms a commuting square; the
        // failing behavior of the biunitary pair belongs to the twisted
        // slice maps above. Recorded as an exact fact.
        let alg = m2x2();
        let e0 = trace_expectation(&alg, Side::Left).unwrap();
        let er = trace_expectation(&alg, Side::Right).unwrap();
        let eu = conjugate_expectation(&alg, &er, &unit_u(&alg)).unwrap();
        let ev = conjugate_expectation(&alg, &er, &unit_v(&alg)).unwrap();
        assert!(commuting_square_check(&alg, &eu, &e0).unwrap().commutes);
        assert!(commuting_square_check(&alg, &ev, &e0).unwrap().commutes);
        assert!(commuting_square_check(&alg, &eu, &ev).unwrap().commutes);
    }

    #[test]
    fn nondegenerate_pairs() {
        let alg = m2x2();
        let e0 = trace_expectation(&alg, Side::Left).unwrap();
        let er = trace_expectation(&alg, Side::Right).unwrap();
        let eu = conjugate_expectation(&alg, &er, &unit_u(&alg)).unwrap();
        let ev = conjugate_expectation(&alg, &er, &unit_v(&alg)).unwrap();
        assert!(nondegeneracy_check(&alg, &eu.target, &e0.target));
        assert!(nondegeneracy_check(&alg, &ev.target, &e0.target));
        assert!(nondegeneracy_check(&alg, &eu.target, &ev.target));
        // Scalars against scalars degenerate whenever dim > 1.
        let scalars = SubalgebraSpan::new(&alg, &[alg.unit().to_vec()]).unwrap();
        assert!(!nondegeneracy_check(&alg, &scalars, &scalars));
    }

    #[test]
    fn biunitary_verdicts() {
        let alg = m2x2();
        assert!(biunitary_check(&alg, &unit_u(&alg)).unwrap());
        assert!(biunitary_check(&alg, &unit_v(&alg)).unwrap());
        assert!(biunitary_check(&alg, &alg.unit().to_vec()).unwrap());
        // A permutation that mixes tensor legs fails: the flip E(0,0)->...
        let flip = alg.permutation_matrix(&[0, 2, 1, 3]).unwrap();
        assert!(alg.is_unitary(&flip));
        assert!(!biunitary_check(&alg, &flip).unwrap());
    }

    #[test]
    fn biunitary_permutation_census() {
        // All 24 permutation matrices of M2 (x) M2, classified exactly.
        let alg = m2x2();
        let found = biunitary_permutations(&alg).unwrap();
        // The two nontrivial shuffles and the identity are all biunitary;
        // the census reports the exact subset rather than assuming a count.
        assert!(found.contains(&vec![0, 3, 2, 1]));
        assert!(found.contains(&vec![0, 1, 3, 2]));
        assert!(found.contains(&vec![0, 1, 2, 3]));
        for p in &found {
            let w = alg.permutation_matrix(p).unwrap();
            assert!(biunitary_check(&alg, &w).unwrap());
        }
    }

    #[test]
    fn group_subalgebra_expectation_laws() {
        let s3 = crate::presets::symmetric_3();
        let alg = StarAlgebra::group_algebra(&s3);
        let t01 = crate::presets::s3_transposition(&s3, 0, 1);
        let sub = s3.subgroup_generated(&[t01]).unwrap();
        let e = group_subalgebra_expectation(&alg, sub.members()).unwrap();
        // Identity on the subgroup, zero off it.
        assert_eq!(e.apply(&alg.basis_vec(t01)), alg.basis_vec(t01));
        let three_cycle = crate::presets::s3_three_cycle(&s3);
        assert!(e.apply(&alg.basis_vec(three_cycle)).iter().all(|c| c.is_zero()));
    }
}
