//! Ready-made groups, algebras, and triangles used by fixtures and tests.

use crate::group::FiniteGroup;
use crate::triangle::{GroupTriangle, TriangleCore, TriangleEdge};

/// Cyclic group of order `n`, identity 0.
pub fn cyclic(n: usize) -> FiniteGroup {
    let table: Vec<Vec<usize>> = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
    let labels = (0..n).map(|i| if i == 0 { "e".into() } else { format!("g{i}") }).collect();
    FiniteGroup::from_table(table).unwrap().with_labels(labels)
}

/// Klein four-group on indices 0..4 with xor multiplication: a=1, b=2, ab=3.
pub fn klein_four() -> FiniteGroup {
    let table: Vec<Vec<usize>> = (0..4).map(|i| (0..4).map(|j| i ^ j).collect()).collect();
    FiniteGroup::from_table(table)
        .unwrap()
        .with_labels(vec!["e".into(), "a".into(), "b".into(), "ab".into()])
}

/// Elementary abelian group of order 8 (xor on indices 0..8).
pub fn elementary_8() -> FiniteGroup {
    let table: Vec<Vec<usize>> = (0..8).map(|i| (0..8).map(|j| i ^ j).collect()).collect();
    FiniteGroup::from_table(table).unwrap()
}

/// Symmetric group on 3 points with a fixed element layout.
///
/// Index order: e, (01), (02), (12), (012), (021); composition applies the
/// right factor first.
pub fn symmetric_3() -> FiniteGroup {
    let perms: Vec<Vec<usize>> = vec![
        vec![0, 1, 2],
        vec![1, 0, 2],
        vec![2, 1, 0],
        vec![0, 2, 1],
        vec![1, 2, 0],
        vec![2, 0, 1],
    ];
    let idx = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
    let mut table = vec![vec![0usize; 6]; 6];
    for (i, p) in perms.iter().enumerate() {
        for (j, q) in perms.iter().enumerate() {
            let comp: Vec<usize> = (0..3).map(|x| p[q[x]]).collect();
            table[i][j] = idx(&comp);
        }
    }
    FiniteGroup::from_table(table).unwrap().with_labels(vec![
        "e".into(),
        "(01)".into(),
        "(02)".into(),
        "(12)".into(),
        "(012)".into(),
        "(021)".into(),
    ])
}

/// Index of the transposition swapping points `a` and `b` in [`symmetric_3`].
pub fn s3_transposition(s3: &FiniteGroup, a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    let want = format!("({a}{b})");
    s3.labels()
        .expect("symmetric_3 carries labels")
        .iter()
        .position(|l| *l == want)
        .expect("transposition label")
}

/// Index of the 3-cycle (012) in [`symmetric_3`].
pub fn s3_three_cycle(s3: &FiniteGroup) -> usize {
    s3.labels().unwrap().iter().position(|l| l == "(012)").unwrap()
}

/// Dihedral group of order 8: index `a + 4b` is `r^a s^b`.
pub fn dihedral_4() -> FiniteGroup {
    let n = 8;
    let mut table = vec![vec![0usize; n]; n];
    for a1 in 0..4usize {
        for b1 in 0..2usize {
            for a2 in 0..4usize {
                for b2 in 0..2usize {
                    // (r^a1 s^b1)(r^a2 s^b2) = r^(a1 + a2*(-1)^b1) s^(b1+b2)
                    let a = if b1 == 0 { (a1 + a2) % 4 } else { (a1 + 4 - a2 % 4) % 4 };
                    let b = (b1 + b2) % 2;
                    table[a1 + 4 * b1][a2 + 4 * b2] = a + 4 * b;
                }
            }
        }
    }
    FiniteGroup::from_table(table).unwrap().with_labels(vec![
        "e".into(),
        "r".into(),
        "r2".into(),
        "r3".into(),
        "s".into(),
        "rs".into(),
        "r2s".into(),
        "r3s".into(),
    ])
}

/// Quaternion group of order 8: indices 0..8 are 1, i, j, k, -1, -i, -j, -k.
pub fn quaternion_8() -> FiniteGroup {
    // Base products on {1,i,j,k} with a sign: (index, negate) pairs.
    let base: [[(usize, bool); 4]; 4] = [
        [(0, false), (1, false), (2, false), (3, false)],
        [(1, false), (0, true), (3, false), (2, true)],
        [(2, false), (3, true), (0, true), (1, false)],
        [(3, false), (2, false), (1, true), (0, true)],
    ];
    let n = 8;
    let mut table = vec![vec![0usize; n]; n];
    for x in 0..n {
        for y in 0..n {
            let (q, s) = base[x % 4][y % 4];
            let sign = (x / 4 + y / 4 + usize::from(s)) % 2;
            table[x][y] = q + 4 * sign;
        }
    }
    FiniteGroup::from_table(table).unwrap().with_labels(vec![
        "1".into(),
        "i".into(),
        "j".into(),
        "k".into(),
        "-1".into(),
        "-i".into(),
        "-j".into(),
        "-k".into(),
    ])
}

fn z2_edge(a_img: usize, b_img: usize) -> TriangleEdge {
    TriangleEdge { group: cyclic(2), into_a: vec![0, a_img], into_b: vec![0, b_img] }
}

fn trivial_core() -> TriangleCore {
    TriangleCore { group: FiniteGroup::trivial(), into_edges: [vec![0], vec![0], vec![0]] }
}

/// Three Klein four-groups glued pairwise along their two factors, trivial
/// core. The amalgam is elementary abelian of order 8.
pub fn klein_triangle() -> GroupTriangle {
    let k = klein_four();
    GroupTriangle::new(
        [k.clone(), k.clone(), k],
        [z2_edge(1, 1), z2_edge(2, 1), z2_edge(2, 2)],
        trivial_core(),
    )
    .unwrap()
}

/// The Klein triangle with each vertex padded by an extra direct factor the
/// edges never touch; reduction strips the padding.
pub fn padded_klein_triangle() -> GroupTriangle {
    let v = FiniteGroup::direct_product(&klein_four(), &cyclic(2));
    // Klein element k sits at index 2k in the product.
    GroupTriangle::new(
        [v.clone(), v.clone(), v],
        [z2_edge(2, 2), z2_edge(4, 2), z2_edge(4, 4)],
        trivial_core(),
    )
    .unwrap()
}

/// Three copies of S3 glued along pairwise-distinct transposition subgroups,
/// trivial core. All three angles are pi/3.
pub fn transposition_triangle() -> GroupTriangle {
    let s3 = symmetric_3();
    let t01 = s3_transposition(&s3, 0, 1);
    let t02 = s3_transposition(&s3, 0, 2);
    let t12 = s3_transposition(&s3, 1, 2);
    GroupTriangle::new(
        [s3.clone(), s3.clone(), s3],
        [z2_edge(t01, t01), z2_edge(t02, t02), z2_edge(t12, t12)],
        trivial_core(),
    )
    .unwrap()
}

/// The transposition triangle padded with a central cyclic factor of order 3.
pub fn padded_transposition_triangle() -> GroupTriangle {
    let s3 = symmetric_3();
    let v = FiniteGroup::direct_product(&s3, &cyclic(3));
    let t01 = 3 * s3_transposition(&s3, 0, 1);
    let t02 = 3 * s3_transposition(&s3, 0, 2);
    let t12 = 3 * s3_transposition(&s3, 1, 2);
    GroupTriangle::new(
        [v.clone(), v.clone(), v],
        [z2_edge(t01, t01), z2_edge(t02, t02), z2_edge(t12, t12)],
        trivial_core(),
    )
    .unwrap()
}

/// A triangle with one whole-group edge and otherwise trivial data: after
/// reduction one vertex is the degenerate amalgam of its edge images.
pub fn degenerate_triangle() -> GroupTriangle {
    let z2 = cyclic(2);
    let triv = FiniteGroup::trivial();
    GroupTriangle::new(
        [z2.clone(), z2.clone(), z2],
        [
            TriangleEdge { group: triv.clone(), into_a: vec![0], into_b: vec![0] },
            TriangleEdge { group: cyclic(2), into_a: vec![0, 1], into_b: vec![0, 1] },
            TriangleEdge { group: triv, into_a: vec![0], into_b: vec![0] },
        ],
        trivial_core(),
    )
    .unwrap()
}

use crate::algebra::{StarAlgebra, StarMorphism};
use crate::expect::{conjugated_units, Side};
use crate::rewrite::{AlgebraCore, AlgebraEdge, AlgebraTriangle};
use crate::scalar::Scalar;

/// The two self-adjoint biunitary permutation matrices of `M_2 (x) M_2`
/// beyond the identity, as coordinate vectors.
pub fn biunitary_u(alg: &StarAlgebra) -> Vec<Scalar> {
    alg.permutation_matrix(&[0, 3, 2, 1]).unwrap()
}

pub fn biunitary_v(alg: &StarAlgebra) -> Vec<Scalar> {
    alg.permutation_matrix(&[0, 1, 3, 2]).unwrap()
}

fn scalar_core(edges: &[AlgebraEdge; 3]) -> AlgebraCore {
    let c = StarAlgebra::matrix_algebra(1);
    let maps: Vec<StarMorphism> = edges
        .iter()
        .map(|e| StarMorphism::new(&c, &e.algebra, vec![e.algebra.unit().to_vec()]).unwrap())
        .collect();
    AlgebraCore { algebra: c, into_edges: [maps[0].clone(), maps[1].clone(), maps[2].clone()] }
}

/// Tensor-slot embedding of `M_2` into `M_2 (x) M_2`: slot 0 is
/// `e(i,j) -> e(i,j) (x) I`, slot 1 is `e(i,j) -> I (x) e(i,j)`.
fn slot_embedding(vertex: &StarAlgebra, slot: usize) -> StarMorphism {
    let m2 = StarAlgebra::matrix_algebra(2);
    let mut images = Vec::new();
    for i in 0..2usize {
        for j in 0..2usize {
            let mut v = vec![Scalar::zero(); vertex.dim()];
            for p in 0..2usize {
                let idx = match slot {
                    0 => ((i * 2 + j) * 2 + p) * 2 + p,
                    _ => ((p * 2 + p) * 2 + i) * 2 + j,
                };
                v[idx] = Scalar::one();
            }
            images.push(v);
        }
    }
    StarMorphism::new(&m2, vertex, images).unwrap()
}

/// Triangle of three copies of `M_2 (x) M_2` whose edges are the conjugated
/// matrix-unit families of the two nontrivial biunitary permutations and the
/// plain second tensor leg; scalar core. Its minimal amalgam is `M_8`.
pub fn biunitary_triangle() -> AlgebraTriangle {
    let m2 = StarAlgebra::matrix_algebra(2);
    let vertex = StarAlgebra::tensor(&m2, &m2);
    let u = biunitary_u(&vertex);
    let v = biunitary_v(&vertex);
    let edge_m2 = StarAlgebra::matrix_algebra(2);
    let conj_morphism = |w: &[Scalar]| {
        let images = conjugated_units(&vertex, w, Side::Left).unwrap();
        StarMorphism::new(&edge_m2, &vertex, images).unwrap()
    };
    let edges = [
        // E12: u-conjugated left units into vertices 1 and 2.
        AlgebraEdge { algebra: edge_m2.clone(), into_a: conj_morphism(&u), into_b: conj_morphism(&u) },
        // E13: plain second leg into vertices 1 and 3.
        AlgebraEdge {
            algebra: edge_m2.clone(),
            into_a: slot_embedding(&vertex, 1),
            into_b: slot_embedding(&vertex, 1),
        },
        // E23: v-conjugated left units into vertices 2 and 3.
        AlgebraEdge { algebra: edge_m2.clone(), into_a: conj_morphism(&v), into_b: conj_morphism(&v) },
    ];
    let core = scalar_core(&edges);
    AlgebraTriangle::new([vertex.clone(), vertex.clone(), vertex], edges, core).unwrap()
}

/// Family order reproducing the conjugated-units normal form
/// (E12-family, then E23-family, then the plain leg E13).
pub const BIUNITARY_ORDER: [usize; 3] = [0, 2, 1];

/// Triangle presenting `M_2 (x) M_2 (x) M_2` as a minimal amalgam: vertices
/// are the three partial tensor products, edges the shared single factors.
pub fn tensor_triangle() -> AlgebraTriangle {
    let m2 = StarAlgebra::matrix_algebra(2);
    let vertex = StarAlgebra::tensor(&m2, &m2);
    let edge_m2 = StarAlgebra::matrix_algebra(2);
    // Vertices: D1 = A2 (x) A3, D2 = A1 (x) A3, D3 = A1 (x) A2.
    // D12 = A3 (slot 1 in both), D13 = A2 (slot 0 in D1, slot 1 in D3),
    // D23 = A1 (slot 0 in both).
    let edges = [
        AlgebraEdge {
            algebra: edge_m2.clone(),
            into_a: slot_embedding(&vertex, 1),
            into_b: slot_embedding(&vertex, 1),
        },
        AlgebraEdge {
            algebra: edge_m2.clone(),
            into_a: slot_embedding(&vertex, 0),
            into_b: slot_embedding(&vertex, 1),
        },
        AlgebraEdge {
            algebra: edge_m2.clone(),
            into_a: slot_embedding(&vertex, 0),
            into_b: slot_embedding(&vertex, 0),
        },
    ];
    let core = scalar_core(&edges);
    AlgebraTriangle::new([vertex.clone(), vertex.clone(), vertex], edges, core).unwrap()
}

/// Degenerate triangle whose edge images are all diagonal: the span
/// condition fails in every vertex, so no rewrite rules exist.
pub fn span_deficient_triangle() -> AlgebraTriangle {
    let m2 = StarAlgebra::matrix_algebra(2);
    // Commutative 2-dimensional diagonal algebra on idempotents p, q.
    let diag = {
        use crate::algebra::SparseVec;
        let structure: Vec<SparseVec> = vec![
            vec![(0, Scalar::one())],
            vec![],
            vec![],
            vec![(1, Scalar::one())],
        ];
        let unit = vec![Scalar::one(), Scalar::one()];
        let star = vec![vec![(0, Scalar::one())], vec![(1, Scalar::one())]];
        StarAlgebra::new(vec!["p".into(), "q".into()], structure, unit, star, None).unwrap()
    };
    let embed = {
        let mut p = vec![Scalar::zero(); 4];
        p[0] = Scalar::one();
        let mut q = vec![Scalar::zero(); 4];
        q[3] = Scalar::one();
        StarMorphism::new(&diag, &m2, vec![p, q]).unwrap()
    };
    let edge = AlgebraEdge { algebra: diag.clone(), into_a: embed.clone(), into_b: embed.clone() };
    let edges = [edge.clone(), edge.clone(), edge];
    // Core equals the whole diagonal algebra, identity injections.
    let core_maps: Vec<StarMorphism> = (0..3)
        .map(|_| {
            StarMorphism::new(&diag, &diag, vec![
                vec![Scalar::one(), Scalar::zero()],
                vec![Scalar::zero(), Scalar::one()],
            ])
            .unwrap()
        })
        .collect();
    let core = AlgebraCore {
        algebra: diag,
        into_edges: [core_maps[0].clone(), core_maps[1].clone(), core_maps[2].clone()],
    };
    AlgebraTriangle::new([m2.clone(), m2.clone(), m2], edges, core).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_orders_and_structure() {
        assert_eq!(cyclic(5).order(), 5);
        assert!(cyclic(6).is_abelian());
        assert_eq!(klein_four().element_order(3), 2);
        let s3 = symmetric_3();
        assert_eq!(s3.element_order(s3_three_cycle(&s3)), 3);
        assert_eq!(s3.element_order(s3_transposition(&s3, 1, 2)), 2);
        let d4 = dihedral_4();
        assert!(!d4.is_abelian());
        assert_eq!(d4.element_order(1), 4);
        assert_eq!(d4.element_order(4), 2);
        let q8 = quaternion_8();
        assert!(!q8.is_abelian());
        // i * j = k, j * i = -k
        assert_eq!(q8.mul(1, 2), 3);
        assert_eq!(q8.mul(2, 1), 7);
        assert_eq!(q8.element_order(1), 4);
    }

    #[test]
    fn s3_composition_convention() {
        let s3 = symmetric_3();
        let t01 = s3_transposition(&s3, 0, 1);
        let t02 = s3_transposition(&s3, 0, 2);
        // (01)(02), applying (02) first, is the cycle 0->2,2->1,1->0 = (021).
        let prod = s3.mul(t01, t02);
        assert_eq!(s3.label(prod), "(021)");
        assert_eq!(s3.element_order(prod), 3);
    }
}
