//! Words over families of groups and canonical normal forms for two-factor
//! amalgamated free products.
//!
//! The normal form of an element of `G1 *_H G2` is an element of the edge
//! group followed by alternating non-trivial right-coset representatives,
//! with representatives chosen as the minimal element index in each coset.
//! Words over larger families carry no canonical form here; their equality
//! questions are delegated to coset enumeration.

use crate::group::{FiniteGroup, GroupError, GroupMorphism, Subgroup};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("letter references vertex {0}, which does not exist")]
    BadVertexIndex(usize),
    #[error("letter element {element} out of range for vertex {vertex}")]
    BadElement { vertex: usize, element: usize },
    #[error("edge injection into vertex {vertex} is not a valid injective homomorphism")]
    InvalidEdge { vertex: usize },
    #[error("edge ({i},{j}) is incompatible with the given maps at edge element {h}")]
    EdgeCompatibilityViolation { i: usize, j: usize, h: usize },
    #[error("map count or domains do not match the family")]
    MapMismatch,
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A word over the union of the vertex groups: letters are
/// `(vertex index, element index)` pairs.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AmalgamWord {
    pub letters: Vec<(usize, usize)>,
}

impl AmalgamWord {
    pub fn new(letters: Vec<(usize, usize)>) -> Self {
        AmalgamWord { letters }
    }

    pub fn empty() -> Self {
        AmalgamWord { letters: Vec::new() }
    }

    pub fn concat(&self, other: &AmalgamWord) -> AmalgamWord {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        AmalgamWord { letters }
    }
}

/// One edge of a family: an abstract edge group with injections into the two
/// incident vertices.
#[derive(Clone, Debug)]
pub struct AmalgamEdge {
    pub group: FiniteGroup,
    pub into_a: Vec<usize>,
    pub into_b: Vec<usize>,
}

/// A family of vertex groups with pairwise amalgamated edge groups.
#[derive(Clone, Debug)]
pub struct AmalgamFamily {
    pub vertices: Vec<FiniteGroup>,
    pub edges: BTreeMap<(usize, usize), AmalgamEdge>,
}

impl AmalgamFamily {
    pub fn new(
        vertices: Vec<FiniteGroup>,
        edges: BTreeMap<(usize, usize), AmalgamEdge>,
    ) -> Result<Self, WordError> {
        for (&(i, j), edge) in &edges {
            if i >= j || j >= vertices.len() {
                return Err(WordError::BadVertexIndex(j.max(i)));
            }
            for (vertex, map) in [(i, &edge.into_a), (j, &edge.into_b)] {
                let m = GroupMorphism::new(edge.group.clone(), vertices[vertex].clone(), map.clone())
                    .map_err(|_| WordError::InvalidEdge { vertex })?;
                if !m.is_injective() {
                    return Err(WordError::InvalidEdge { vertex });
                }
            }
        }
        Ok(AmalgamFamily { vertices, edges })
    }

    /// The image of the edge `(i, j)` inside vertex `v` (`v` must be `i` or `j`).
    pub fn edge_image(&self, i: usize, j: usize, v: usize) -> Subgroup {
        let edge = &self.edges[&(i, j)];
        let map = if v == i { &edge.into_a } else { &edge.into_b };
        Subgroup::new(&self.vertices[v], map.clone()).expect("edge image is a subgroup")
    }

    /// Per-vertex subgroup generated by all incident edge images.
    pub fn generated_vertex_subgroup(&self, v: usize) -> Subgroup {
        let mut gens: Vec<usize> = Vec::new();
        for (&(i, j), edge) in &self.edges {
            if i == v {
                gens.extend_from_slice(&edge.into_a);
            } else if j == v {
                gens.extend_from_slice(&edge.into_b);
            }
        }
        self.vertices[v].subgroup_generated(&gens).expect("edge images are in range")
    }
}

/// Right-coset transversal of a subgroup, minimal-index representatives.
#[derive(Clone, Debug)]
pub struct Transversal {
    pub coset_of: Vec<usize>,
    pub reps: Vec<usize>,
}

impl Transversal {
    /// Representatives of right cosets `H g`. The subgroup's own coset is
    /// represented by the identity; every other coset by its least element.
    pub fn right_cosets(sub: &Subgroup) -> Transversal {
        let g = sub.parent();
        let mut coset_of = vec![usize::MAX; g.order()];
        let mut reps = Vec::new();
        for x in g.elements() {
            if coset_of[x] != usize::MAX {
                continue;
            }
            let c = reps.len();
            // Sweeping in ascending index order, x is the least member.
            let rep = if sub.contains(x) { g.identity() } else { x };
            reps.push(rep);
            for &h in sub.members() {
                coset_of[g.mul(h, x)] = c;
            }
        }
        Transversal { coset_of, reps }
    }

    pub fn count(&self) -> usize {
        self.reps.len()
    }
}

/// Canonical form of an element of a two-factor amalgam: an edge-group
/// element followed by alternating non-trivial coset representatives.
#[derive(Clone, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub struct NormalForm {
    pub head: usize,
    pub tail: Vec<(usize, usize)>,
}

impl NormalForm {
    pub fn syllable_len(&self) -> usize {
        self.tail.len()
    }
}

/// A two-factor amalgamated free product `G1 *_H G2` with precomputed
/// transversals, supporting exact word reduction.
#[derive(Clone, Debug)]
pub struct TwoFactorAmalgam {
    pub groups: [FiniteGroup; 2],
    pub edge: FiniteGroup,
    pub into: [Vec<usize>; 2],
    rev: [Vec<Option<usize>>; 2],
    trans: [Transversal; 2],
}

impl TwoFactorAmalgam {
    pub fn new(
        g1: FiniteGroup,
        g2: FiniteGroup,
        edge: FiniteGroup,
        into1: Vec<usize>,
        into2: Vec<usize>,
    ) -> Result<Self, WordError> {
        let groups = [g1, g2];
        let into = [into1, into2];
        let mut rev = [vec![None; groups[0].order()], vec![None; groups[1].order()]];
        for side in 0..2 {
            let m =
                GroupMorphism::new(edge.clone(), groups[side].clone(), into[side].clone())
                    .map_err(|_| WordError::InvalidEdge { vertex: side })?;
            if !m.is_injective() {
                return Err(WordError::InvalidEdge { vertex: side });
            }
            for (h, &img) in into[side].iter().enumerate() {
                rev[side][img] = Some(h);
            }
        }
        let trans = [
            Transversal::right_cosets(&Subgroup::new(&groups[0], into[0].clone())?),
            Transversal::right_cosets(&Subgroup::new(&groups[1], into[1].clone())?),
        ];
        Ok(TwoFactorAmalgam { groups, edge, into, rev, trans })
    }

    pub fn identity(&self) -> NormalForm {
        NormalForm { head: self.edge.identity(), tail: Vec::new() }
    }

    /// Splits `g` in factor `side` as `(h, t)` with `g = into(h) * t` and `t`
    /// the representative of the right coset `H g`.
    fn decompose(&self, side: usize, g: usize) -> (usize, usize) {
        let grp = &self.groups[side];
        let t = self.trans[side].reps[self.trans[side].coset_of[g]];
        let h_img = grp.mul(g, grp.inv(t));
        let h = self.rev[side][h_img].expect("g * t^-1 lies in the edge image");
        (h, t)
    }

    /// Multiplies the normal form on the right by an edge-group element,
    /// carrying it leftwards through the representatives into the head.
    fn absorb(&self, nf: &mut NormalForm, mut h: usize) {
        for pos in (0..nf.tail.len()).rev() {
            if h == self.edge.identity() {
                return;
            }
            let (side, t) = nf.tail[pos];
            let u = self.groups[side].mul(t, self.into[side][h]);
            let (h2, t2) = self.decompose(side, u);
            debug_assert_ne!(t2, self.groups[side].identity(), "coset cannot collapse");
            nf.tail[pos] = (side, t2);
            h = h2;
        }
        nf.head = self.edge.mul(nf.head, h);
    }

    /// Multiplies the normal form on the right by one letter.
    pub fn append(&self, nf: &mut NormalForm, side: usize, mut g: usize) -> Result<(), WordError> {
        if side > 1 {
            return Err(WordError::BadVertexIndex(side));
        }
        if g >= self.groups[side].order() {
            return Err(WordError::BadElement { vertex: side, element: g });
        }
        if let Some(&(last_side, t)) = nf.tail.last() {
            if last_side == side {
                g = self.groups[side].mul(t, g);
                nf.tail.pop();
            }
        }
        let (h, t) = self.decompose(side, g);
        self.absorb(nf, h);
        if t != self.groups[side].identity() {
            nf.tail.push((side, t));
        }
        Ok(())
    }

    /// Canonical normal form of a word.
    pub fn reduce(&self, w: &AmalgamWord) -> Result<NormalForm, WordError> {
        let mut nf = self.identity();
        for &(side, g) in &w.letters {
            self.append(&mut nf, side, g)?;
        }
        Ok(nf)
    }

    /// Normal form back to a word: the head as a letter of `G1` (when
    /// non-trivial) followed by the representative letters.
    pub fn to_word(&self, nf: &NormalForm) -> AmalgamWord {
        let mut letters = Vec::new();
        if nf.head != self.edge.identity() {
            letters.push((0, self.into[0][nf.head]));
        }
        letters.extend_from_slice(&nf.tail);
        AmalgamWord { letters }
    }

    /// Product of two normal forms.
    pub fn mul(&self, a: &NormalForm, b: &NormalForm) -> NormalForm {
        let mut out = a.clone();
        self.absorb(&mut out, b.head);
        for &(side, t) in &b.tail {
            self.append(&mut out, side, t).expect("normal-form letters are valid");
        }
        out
    }

    fn nontrivial_reps(&self, side: usize) -> Vec<usize> {
        self.trans[side]
            .reps
            .iter()
            .copied()
            .filter(|&t| t != self.groups[side].identity())
            .collect()
    }

    /// Number of distinct normal forms of syllable length exactly `n`.
    pub fn count_normal_forms(&self, n: usize) -> u64 {
        let choices = [self.nontrivial_reps(0).len() as u64, self.nontrivial_reps(1).len() as u64];
        let h = self.edge.order() as u64;
        if n == 0 {
            return h;
        }
        // Tails of length n starting in a given factor alternate deterministically.
        let mut total = 0u64;
        for start in 0..2 {
            let mut prod = 1u64;
            for k in 0..n {
                prod *= choices[(start + k) % 2];
            }
            total += prod;
        }
        h * total
    }

    /// All normal forms of syllable length exactly `n`, lexicographic order.
    pub fn enumerate_normal_forms(&self, n: usize) -> Vec<NormalForm> {
        let reps = [self.nontrivial_reps(0), self.nontrivial_reps(1)];
        let mut tails: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        for _ in 0..n {
            let mut next = Vec::new();
            for tail in &tails {
                for side in 0..2 {
                    if let Some(&(last, _)) = tail.last() {
                        if last == side {
                            continue;
                        }
                    }
                    for &t in &reps[side] {
                        let mut nt = tail.clone();
                        nt.push((side, t));
                        next.push(nt);
                    }
                }
            }
            tails = next;
        }
        let mut out = Vec::new();
        for h in self.edge.elements() {
            for tail in &tails {
                out.push(NormalForm { head: h, tail: tail.clone() });
            }
        }
        out.sort();
        out
    }

    /// Evaluates a normal form inside a target group, given the two factor
    /// images as element maps.
    pub fn eval_normal_form(
        &self,
        nf: &NormalForm,
        target: &FiniteGroup,
        factor_maps: [&[usize]; 2],
    ) -> usize {
        let mut acc = factor_maps[0][self.into[0][nf.head]];
        for &(side, t) in &nf.tail {
            acc = target.mul(acc, factor_maps[side][t]);
        }
        acc
    }
}

/// Evaluates a word through per-vertex homomorphisms into a common target,
/// after checking the maps agree on all identified edge images.
pub fn evaluate_word(
    fam: &AmalgamFamily,
    w: &AmalgamWord,
    maps: &[GroupMorphism],
) -> Result<usize, WordError> {
    if maps.len() != fam.vertices.len() {
        return Err(WordError::MapMismatch);
    }
    let target = &maps[0].codomain;
    for (v, m) in maps.iter().enumerate() {
        if m.domain != fam.vertices[v] || &m.codomain != target {
            return Err(WordError::MapMismatch);
        }
    }
    for (&(i, j), edge) in &fam.edges {
        for h in edge.group.elements() {
            if maps[i].apply(edge.into_a[h]) != maps[j].apply(edge.into_b[h]) {
                return Err(WordError::EdgeCompatibilityViolation { i, j, h });
            }
        }
    }
    let mut acc = target.identity();
    for &(v, g) in &w.letters {
        if v >= fam.vertices.len() {
            return Err(WordError::BadVertexIndex(v));
        }
        if g >= fam.vertices[v].order() {
            return Err(WordError::BadElement { vertex: v, element: g });
        }
        acc = target.mul(acc, maps[v].apply(g));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn z2_pair_trivial_edge() -> TwoFactorAmalgam {
        let z2 = presets::cyclic(2);
        let triv = FiniteGroup::trivial();
        TwoFactorAmalgam::new(z2.clone(), z2, triv, vec![0], vec![0]).unwrap()
    }

    fn s3_pair_glued_on_transposition() -> TwoFactorAmalgam {
        let s3 = presets::symmetric_3();
        let t = presets::s3_transposition(&s3, 0, 1);
        let z2 = presets::cyclic(2);
        TwoFactorAmalgam::new(s3.clone(), s3.clone(), z2, vec![s3.identity(), t], vec![
            s3.identity(),
            t,
        ])
        .unwrap()
    }

    #[test]
    fn involution_squares_cancel() {
        let am = z2_pair_trivial_edge();
        let nf = am.reduce(&AmalgamWord::new(vec![(0, 1), (0, 1)])).unwrap();
        assert_eq!(nf, am.identity());
        assert!(am.to_word(&nf).letters.is_empty());
    }

    #[test]
    fn alternating_word_is_already_normal() {
        let am = z2_pair_trivial_edge();
        let w = AmalgamWord::new(vec![(0, 1), (1, 1), (0, 1), (1, 1)]);
        let nf = am.reduce(&w).unwrap();
        assert_eq!(am.to_word(&nf), w);
        assert_eq!(nf.syllable_len(), 4);
    }

    #[test]
    fn identified_involutions_cancel_across_factors() {
        let am = s3_pair_glued_on_transposition();
        let s3 = presets::symmetric_3();
        let t = presets::s3_transposition(&s3, 0, 1);
        let nf = am.reduce(&AmalgamWord::new(vec![(0, t), (1, t)])).unwrap();
        assert_eq!(nf, am.identity());
    }

    #[test]
    fn normal_form_counts() {
        let am = z2_pair_trivial_edge();
        assert_eq!(am.count_normal_forms(0), 1);
        assert_eq!(am.count_normal_forms(3), 2);

        let glued = s3_pair_glued_on_transposition();
        // |H| = 2 at length 0; 2 * |H| * ([G:H] - 1) = 8 at length 1.
        assert_eq!(glued.count_normal_forms(0), 2);
        assert_eq!(glued.count_normal_forms(1), 8);
    }

    #[test]
    fn counts_match_exhaustive_reduction() {
        // Independent oracle: enumerate raw words and deduplicate reductions.
        for am in [z2_pair_trivial_edge(), s3_pair_glued_on_transposition()] {
            let mut letters = Vec::new();
            for side in 0..2usize {
                for g in am.groups[side].elements() {
                    letters.push((side, g));
                }
            }
            let mut seen: std::collections::BTreeSet<NormalForm> = Default::default();
            let mut words: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
            for _ in 0..=4 {
                for w in &words {
                    seen.insert(am.reduce(&AmalgamWord::new(w.clone())).unwrap());
                }
                let mut next = Vec::new();
                for w in &words {
                    for &l in &letters {
                        let mut nw = w.clone();
                        nw.push(l);
                        next.push(nw);
                    }
                }
                words = next;
            }
            for n in 0..=4usize {
                // Words of letter length <= 4 reach every element of syllable
                // length <= 4; compare counts length by length.
                let enumerated = am.enumerate_normal_forms(n);
                assert_eq!(enumerated.len() as u64, am.count_normal_forms(n));
                let reduced_count = seen.iter().filter(|nf| nf.syllable_len() == n).count();
                assert_eq!(reduced_count as u64, am.count_normal_forms(n), "length {n}");
            }
        }
    }

    #[test]
    fn reduce_is_idempotent_and_congruent() {
        let am = s3_pair_glued_on_transposition();
        let mut words = vec![AmalgamWord::empty()];
        let mut letters = Vec::new();
        for side in 0..2usize {
            for g in am.groups[side].elements() {
                letters.push((side, g));
            }
        }
        // Sampled short words: all of length <= 2, deterministic.
        for &a in &letters {
            words.push(AmalgamWord::new(vec![a]));
            for &b in &letters {
                words.push(AmalgamWord::new(vec![a, b]));
            }
        }
        for w in &words {
            let nf = am.reduce(w).unwrap();
            let again = am.reduce(&am.to_word(&nf)).unwrap();
            assert_eq!(nf, again, "idempotence");
        }
        for w1 in words.iter().take(40) {
            for w2 in words.iter().take(40) {
                let direct = am.reduce(&w1.concat(w2)).unwrap();
                let via_nf = am.mul(&am.reduce(w1).unwrap(), &am.reduce(w2).unwrap());
                assert_eq!(direct, via_nf, "congruence");
            }
        }
    }

    #[test]
    fn evaluate_word_into_target() {
        let z2 = presets::cyclic(2);
        let fam = AmalgamFamily::new(
            vec![z2.clone(), z2.clone()],
            BTreeMap::from([(
                (0, 1),
                AmalgamEdge { group: FiniteGroup::trivial(), into_a: vec![0], into_b: vec![0] },
            )]),
        )
        .unwrap();
        let s3 = presets::symmetric_3();
        let t12 = presets::s3_transposition(&s3, 0, 1);
        let t13 = presets::s3_transposition(&s3, 0, 2);
        let maps = vec![
            GroupMorphism::new(z2.clone(), s3.clone(), vec![s3.identity(), t12]).unwrap(),
            GroupMorphism::new(z2.clone(), s3.clone(), vec![s3.identity(), t13]).unwrap(),
        ];
        // a b a evaluates to (01)(02)(01) = (12).
        let w = AmalgamWord::new(vec![(0, 1), (1, 1), (0, 1)]);
        let img = evaluate_word(&fam, &w, &maps).unwrap();
        assert_eq!(s3.label(img), "(12)");
        assert_eq!(evaluate_word(&fam, &AmalgamWord::empty(), &maps).unwrap(), s3.identity());

        // Multiplicativity on concatenation.
        let w2 = AmalgamWord::new(vec![(1, 1), (0, 1)]);
        let lhs = evaluate_word(&fam, &w.concat(&w2), &maps).unwrap();
        let rhs = s3.mul(
            evaluate_word(&fam, &w, &maps).unwrap(),
            evaluate_word(&fam, &w2, &maps).unwrap(),
        );
        assert_eq!(lhs, rhs);

        // Into the trivial group everything is the identity.
        let triv = FiniteGroup::trivial();
        let tmaps = vec![
            GroupMorphism::new(z2.clone(), triv.clone(), vec![0, 0]).unwrap(),
            GroupMorphism::new(z2, triv, vec![0, 0]).unwrap(),
        ];
        assert_eq!(evaluate_word(&fam, &w, &tmaps).unwrap(), 0);
    }

    #[test]
    fn incompatible_edge_maps_rejected() {
        let z2 = presets::cyclic(2);
        let fam = AmalgamFamily::new(
            vec![z2.clone(), z2.clone()],
            BTreeMap::from([(
                (0, 1),
                AmalgamEdge { group: z2.clone(), into_a: vec![0, 1], into_b: vec![0, 1] },
            )]),
        )
        .unwrap();
        let k4 = presets::klein_four();
        // Send the identified copies of Z2 to different elements of K4.
        let maps = vec![
            GroupMorphism::new(z2.clone(), k4.clone(), vec![0, 1]).unwrap(),
            GroupMorphism::new(z2, k4, vec![0, 2]).unwrap(),
        ];
        let err = evaluate_word(&fam, &AmalgamWord::empty(), &maps).unwrap_err();
        assert_eq!(err, WordError::EdgeCompatibilityViolation { i: 0, j: 1, h: 1 });
    }
}
