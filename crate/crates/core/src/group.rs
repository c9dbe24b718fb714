//! Finite groups as explicit multiplication tables.
//!
//! Groups are validated exhaustively at construction: closure, a two-sided
//! identity, inverses, and associativity on all triples. Element `0` need not
//! be the identity; the identity is discovered. All values are immutable after
//! validation and every operation is pure.

use thiserror::Error;

/// Hard cap keeping tables in memory and law checks tractable.
pub const MAX_ORDER: usize = 1 << 14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("empty multiplication table")]
    Empty,
    #[error("group order {0} exceeds the supported bound {MAX_ORDER}")]
    TooLarge(usize),
    #[error("table is not square: row {row} has length {len}, expected {order}")]
    NotSquare { row: usize, len: usize, order: usize },
    #[error("table entry out of range at ({row},{col}): {value}")]
    OutOfRange { row: usize, col: usize, value: usize },
    #[error("no two-sided identity element exists")]
    NoIdentity,
    #[error("element {element} has no inverse")]
    NoInverse { element: usize },
    #[error("associativity fails at ({a},{b},{c}): ({a}{b}){c} != {a}({b}{c})")]
    NotAssociative { a: usize, b: usize, c: usize },
    #[error("element index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("subgroups have different parent groups")]
    ParentMismatch,
    #[error("homomorphism law fails at ({x},{y})")]
    NotHomomorphism { x: usize, y: usize },
    #[error("morphism map has length {len}, expected {expected}")]
    BadMapLength { len: usize, expected: usize },
    #[error("permutation generator is not a bijection: {0:?}")]
    BadPermutation(Vec<usize>),
}

/// A finite group given by its full multiplication table.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    mul: Vec<usize>,
    identity: usize,
    inv: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl std::fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FiniteGroup(order={})", self.order)
    }
}

impl FiniteGroup {
    /// Validates a multiplication table and derives identity and inverses.
    pub fn from_table(mul: Vec<Vec<usize>>) -> Result<Self, GroupError> {
        let order = mul.len();
        if order == 0 {
            return Err(GroupError::Empty);
        }
        if order > MAX_ORDER {
            return Err(GroupError::TooLarge(order));
        }
        let mut flat = Vec::with_capacity(order * order);
        for (r, row) in mul.iter().enumerate() {
            if row.len() != order {
                return Err(GroupError::NotSquare { row: r, len: row.len(), order });
            }
            for (c, &v) in row.iter().enumerate() {
                if v >= order {
                    return Err(GroupError::OutOfRange { row: r, col: c, value: v });
                }
                flat.push(v);
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|x| flat[e * order + x] == x && flat[x * order + e] == x))
            .ok_or(GroupError::NoIdentity)?;
        let mut inv = vec![usize::MAX; order];
        for x in 0..order {
            let found = (0..order)
                .find(|&y| flat[x * order + y] == identity && flat[y * order + x] == identity);
            match found {
                Some(y) => inv[x] = y,
                None => return Err(GroupError::NoInverse { element: x }),
            }
        }
        for a in 0..order {
            for b in 0..order {
                let ab = flat[a * order + b];
                for c in 0..order {
                    if flat[ab * order + c] != flat[a * order + flat[b * order + c]] {
                        return Err(GroupError::NotAssociative { a, b, c });
                    }
                }
            }
        }
        Ok(FiniteGroup { order, mul: flat, identity, inv, labels: None })
    }

    /// Builds the group generated by permutations (images of `0..n`).
    pub fn from_permutation_generators(gens: &[Vec<usize>]) -> Result<Self, GroupError> {
        let n = gens.first().map_or(1, |g| g.len());
        for g in gens {
            let mut seen = vec![false; n];
            if g.len() != n {
                return Err(GroupError::BadPermutation(g.clone()));
            }
            for &img in g {
                if img >= n || seen[img] {
                    return Err(GroupError::BadPermutation(g.clone()));
                }
                seen[img] = true;
            }
        }
        // Close under composition; identity first so element 0 is the identity.
        let id: Vec<usize> = (0..n).collect();
        let mut elements: Vec<Vec<usize>> = vec![id];
        let mut index = std::collections::HashMap::new();
        index.insert(elements[0].clone(), 0usize);
        let mut frontier = 0;
        while frontier < elements.len() {
            let cur = elements[frontier].clone();
            for g in gens {
                // (cur * g)(x) = cur(g(x))
                let comp: Vec<usize> = (0..n).map(|x| cur[g[x]]).collect();
                if !index.contains_key(&comp) {
                    if elements.len() >= MAX_ORDER {
                        return Err(GroupError::TooLarge(elements.len() + 1));
                    }
                    index.insert(comp.clone(), elements.len());
                    elements.push(comp);
                }
            }
            frontier += 1;
        }
        let order = elements.len();
        let mut table = vec![vec![0usize; order]; order];
        for (i, p) in elements.iter().enumerate() {
            for (j, q) in elements.iter().enumerate() {
                let comp: Vec<usize> = (0..n).map(|x| p[q[x]]).collect();
                table[i][j] = index[&comp];
            }
        }
        FiniteGroup::from_table(table)
    }

    pub fn trivial() -> Self {
        FiniteGroup::from_table(vec![vec![0]]).unwrap()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> {
        0..self.order
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.order);
        self.labels = Some(labels);
        self
    }

    pub fn label(&self, x: usize) -> String {
        match &self.labels {
            Some(ls) => ls[x].clone(),
            None => x.to_string(),
        }
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (a..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Product of a word of elements, left to right.
    pub fn product(&self, word: &[usize]) -> usize {
        word.iter().fold(self.identity, |acc, &x| self.mul(acc, x))
    }

    pub fn element_order(&self, x: usize) -> usize {
        let mut cur = x;
        let mut n = 1;
        while cur != self.identity {
            cur = self.mul(cur, x);
            n += 1;
        }
        n
    }

    /// Direct product with row-major element indexing `(a, b) -> a*|B| + b`.
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> FiniteGroup {
        let n = a.order * b.order;
        let mut table = vec![vec![0usize; n]; n];
        for a1 in 0..a.order {
            for b1 in 0..b.order {
                for a2 in 0..a.order {
                    for b2 in 0..b.order {
                        table[a1 * b.order + b1][a2 * b.order + b2] =
                            a.mul(a1, a2) * b.order + b.mul(b1, b2);
                    }
                }
            }
        }
        FiniteGroup::from_table(table).expect("direct product of groups is a group")
    }

    /// Smallest subgroup containing `gens`.
    pub fn subgroup_generated(&self, gens: &[usize]) -> Result<Subgroup, GroupError> {
        for &g in gens {
            if g >= self.order {
                return Err(GroupError::IndexOutOfRange(g));
            }
        }
        let mut in_set = vec![false; self.order];
        in_set[self.identity] = true;
        let mut members = vec![self.identity];
        let mut frontier = 0;
        // Seed with generators and inverses, then close under multiplication.
        for &g in gens {
            if !in_set[g] {
                in_set[g] = true;
                members.push(g);
            }
            let gi = self.inv(g);
            if !in_set[gi] {
                in_set[gi] = true;
                members.push(gi);
            }
        }
        while frontier < members.len() {
            let x = members[frontier];
            frontier += 1;
            for i in 0..members.len() {
                let y = members[i];
                for z in [self.mul(x, y), self.mul(y, x)] {
                    if !in_set[z] {
                        in_set[z] = true;
                        members.push(z);
                    }
                }
            }
        }
        members.sort_unstable();
        Ok(Subgroup { parent: self.clone(), members })
    }

    pub fn full_subgroup(&self) -> Subgroup {
        Subgroup { parent: self.clone(), members: (0..self.order).collect() }
    }

    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup { parent: self.clone(), members: vec![self.identity] }
    }
}

/// A subgroup as a sorted member set tied to its parent group.
#[derive(Clone, PartialEq, Eq)]
pub struct Subgroup {
    parent: FiniteGroup,
    members: Vec<usize>,
}

impl std::fmt::Debug for Subgroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Subgroup{:?}", self.members)
    }
}

impl Subgroup {
    /// Validates closure of a raw member set.
    pub fn new(parent: &FiniteGroup, mut members: Vec<usize>) -> Result<Self, GroupError> {
        members.sort_unstable();
        members.dedup();
        for &m in &members {
            if m >= parent.order() {
                return Err(GroupError::IndexOutOfRange(m));
            }
        }
        let in_set: std::collections::BTreeSet<usize> = members.iter().copied().collect();
        if !in_set.contains(&parent.identity()) {
            return Err(GroupError::NoIdentity);
        }
        for &a in &members {
            if !in_set.contains(&parent.inv(a)) {
                return Err(GroupError::NoInverse { element: a });
            }
            for &b in &members {
                if !in_set.contains(&parent.mul(a, b)) {
                    return Err(GroupError::OutOfRange { row: a, col: b, value: parent.mul(a, b) });
                }
            }
        }
        Ok(Subgroup { parent: parent.clone(), members })
    }

    pub fn parent(&self) -> &FiniteGroup {
        &self.parent
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn is_subset_of(&self, other: &Subgroup) -> bool {
        self.members.iter().all(|&m| other.contains(m))
    }

    /// Intersection of two subgroups of the same parent.
    pub fn intersect(&self, other: &Subgroup) -> Result<Subgroup, GroupError> {
        if self.parent != other.parent {
            return Err(GroupError::ParentMismatch);
        }
        let members: Vec<usize> =
            self.members.iter().copied().filter(|&m| other.contains(m)).collect();
        Ok(Subgroup { parent: self.parent.clone(), members })
    }

    /// Re-indexes the subgroup as a standalone group.
    ///
    /// Returns the abstract group and the member list mapping new indices to
    /// parent elements (the inverse of the relabeling).
    pub fn as_group(&self) -> (FiniteGroup, Vec<usize>) {
        let pos: std::collections::HashMap<usize, usize> =
            self.members.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let n = self.members.len();
        let mut table = vec![vec![0usize; n]; n];
        for (i, &a) in self.members.iter().enumerate() {
            for (j, &b) in self.members.iter().enumerate() {
                table[i][j] = pos[&self.parent.mul(a, b)];
            }
        }
        let g = FiniteGroup::from_table(table).expect("subgroup closure was validated");
        (g, self.members.clone())
    }
}

/// A homomorphism given by its per-element image table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupMorphism {
    pub domain: FiniteGroup,
    pub codomain: FiniteGroup,
    pub map: Vec<usize>,
}

/// Result of an exhaustive homomorphism check.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MorphismReport {
    pub injective: bool,
    pub surjective: bool,
}

impl GroupMorphism {
    pub fn new(
        domain: FiniteGroup,
        codomain: FiniteGroup,
        map: Vec<usize>,
    ) -> Result<Self, GroupError> {
        if map.len() != domain.order() {
            return Err(GroupError::BadMapLength { len: map.len(), expected: domain.order() });
        }
        for &img in &map {
            if img >= codomain.order() {
                return Err(GroupError::IndexOutOfRange(img));
            }
        }
        let m = GroupMorphism { domain, codomain, map };
        m.check()?;
        Ok(m)
    }

    pub fn identity(g: &FiniteGroup) -> Self {
        GroupMorphism {
            domain: g.clone(),
            codomain: g.clone(),
            map: (0..g.order()).collect(),
        }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    /// Verifies the homomorphism law on all pairs and reports flags.
    pub fn check(&self) -> Result<MorphismReport, GroupError> {
        for x in 0..self.domain.order() {
            for y in 0..self.domain.order() {
                if self.map[self.domain.mul(x, y)]
                    != self.codomain.mul(self.map[x], self.map[y])
                {
                    return Err(GroupError::NotHomomorphism { x, y });
                }
            }
        }
        let mut seen = vec![false; self.codomain.order()];
        let mut injective = true;
        for &img in &self.map {
            if seen[img] {
                injective = false;
            }
            seen[img] = true;
        }
        let surjective = seen.iter().all(|&b| b);
        Ok(MorphismReport { injective, surjective })
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.codomain.order()];
        for &img in &self.map {
            if seen[img] {
                return false;
            }
            seen[img] = true;
        }
        true
    }

    pub fn image(&self) -> Subgroup {
        let mut members: Vec<usize> = self.map.clone();
        members.sort_unstable();
        members.dedup();
        Subgroup { parent: self.codomain.clone(), members }
    }

    pub fn compose(&self, then: &GroupMorphism) -> GroupMorphism {
        assert_eq!(self.codomain, then.domain, "composition domain mismatch");
        GroupMorphism {
            domain: self.domain.clone(),
            codomain: then.codomain.clone(),
            map: self.map.iter().map(|&x| then.map[x]).collect(),
        }
    }
}

/// Enumerates every subgroup of a small group by cyclic extension.
///
/// Intended for tests and small-order verification, not large groups.
pub fn all_subgroups(g: &FiniteGroup) -> Vec<Subgroup> {
    let mut found: Vec<Vec<usize>> = vec![vec![g.identity()]];
    let mut seen: std::collections::BTreeSet<Vec<usize>> = found.iter().cloned().collect();
    let mut frontier = 0;
    while frontier < found.len() {
        let base = found[frontier].clone();
        frontier += 1;
        for x in g.elements() {
            if base.binary_search(&x).is_ok() {
                continue;
            }
            let mut gens = base.clone();
            gens.push(x);
            let sub = g.subgroup_generated(&gens).unwrap();
            if seen.insert(sub.members().to_vec()) {
                found.push(sub.members().to_vec());
            }
        }
    }
    found
        .into_iter()
        .map(|members| Subgroup { parent: g.clone(), members })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn z2_from_table() {
        let g = FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.identity(), 0);
        assert_eq!(g.inv(1), 1);
    }

    #[test]
    fn no_identity_rejected() {
        // Row 1 fixes nothing, so no two-sided identity exists.
        let err = FiniteGroup::from_table(vec![vec![0, 1], vec![0, 1]]).unwrap_err();
        assert_eq!(err, GroupError::NoIdentity);
    }

    #[test]
    fn broken_associativity_rejected() {
        // A quasigroup table that fails associativity.
        let err = FiniteGroup::from_table(vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ])
        .unwrap_err();
        assert!(matches!(err, GroupError::NotAssociative { .. }));
    }

    #[test]
    fn s3_from_composition_table() {
        // Independent oracle: build the table by composing permutations of 3
        // points, then validate it through from_table.
        let perms: Vec<Vec<usize>> = vec![
            vec![0, 1, 2],
            vec![1, 0, 2],
            vec![0, 2, 1],
            vec![2, 1, 0],
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
        let g = FiniteGroup::from_table(table).unwrap();
        assert_eq!(g.order(), 6);
        assert!(!g.is_abelian());
        let s3 = presets::symmetric_3();
        assert_eq!(s3.order(), 6);
        assert!(!s3.is_abelian());
    }

    #[test]
    fn subgroup_generation() {
        let s3 = presets::symmetric_3();
        let t12 = presets::s3_transposition(&s3, 0, 1);
        let t13 = presets::s3_transposition(&s3, 0, 2);
        let h = s3.subgroup_generated(&[t12]).unwrap();
        assert_eq!(h.order(), 2);
        let whole = s3.subgroup_generated(&[t12, t13]).unwrap();
        assert_eq!(whole.order(), 6);
        let triv = s3.subgroup_generated(&[]).unwrap();
        assert_eq!(triv.members(), &[s3.identity()]);
        assert!(s3.subgroup_generated(&[99]).is_err());
    }

    #[test]
    fn generated_subgroup_is_smallest() {
        // Against the exhaustive subgroup lattice of small groups.
        for g in [presets::symmetric_3(), presets::klein_four(), presets::dihedral_4()] {
            let subs = all_subgroups(&g);
            for x in g.elements() {
                for y in g.elements() {
                    let gen = g.subgroup_generated(&[x, y]).unwrap();
                    for s in &subs {
                        if s.contains(x) && s.contains(y) {
                            assert!(gen.is_subset_of(s));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn subgroup_intersection() {
        let s3 = presets::symmetric_3();
        let a = s3.subgroup_generated(&[presets::s3_transposition(&s3, 0, 1)]).unwrap();
        let b = s3.subgroup_generated(&[presets::s3_transposition(&s3, 0, 2)]).unwrap();
        let i = a.intersect(&b).unwrap();
        assert_eq!(i.members(), &[s3.identity()]);
        assert_eq!(a.intersect(&a).unwrap(), a);
        let c3 = s3.subgroup_generated(&[presets::s3_three_cycle(&s3)]).unwrap();
        assert_eq!(c3.intersect(&s3.full_subgroup()).unwrap(), c3);
        let other = presets::klein_four().trivial_subgroup();
        assert_eq!(a.intersect(&other).unwrap_err(), GroupError::ParentMismatch);
    }

    #[test]
    fn morphism_checks() {
        let s3 = presets::symmetric_3();
        let id = GroupMorphism::identity(&s3);
        let rep = id.check().unwrap();
        assert!(rep.injective && rep.surjective);

        let z2 = presets::cyclic(2);
        let constant = GroupMorphism::new(z2.clone(), z2.clone(), vec![0, 0]).unwrap();
        let rep = constant.check().unwrap();
        assert!(!rep.injective && !rep.surjective);

        // Sign map S3 -> Z2: transpositions to 1, rotations to 0.
        let sign: Vec<usize> =
            s3.elements().map(|x| if s3.element_order(x) == 2 { 1 } else { 0 }).collect();
        let sgn = GroupMorphism::new(s3.clone(), z2.clone(), sign).unwrap();
        let rep = sgn.check().unwrap();
        assert!(!rep.injective && rep.surjective);

        // A non-homomorphism is rejected.
        let bad = GroupMorphism::new(z2.clone(), z2, vec![1, 1]);
        assert!(matches!(bad, Err(GroupError::NotHomomorphism { .. })));
    }

    #[test]
    fn permutation_generator_input() {
        let s3 = FiniteGroup::from_permutation_generators(&[vec![1, 0, 2], vec![0, 2, 1]])
            .unwrap();
        assert_eq!(s3.order(), 6);
        assert!(FiniteGroup::from_permutation_generators(&[vec![0, 0]]).is_err());
    }

    #[test]
    fn subgroup_closure_validation() {
        let s3 = presets::symmetric_3();
        let t = presets::s3_transposition(&s3, 0, 1);
        assert!(Subgroup::new(&s3, vec![s3.identity(), t]).is_ok());
        // Two distinct transpositions alone are not closed.
        let t2 = presets::s3_transposition(&s3, 0, 2);
        assert!(Subgroup::new(&s3, vec![s3.identity(), t, t2]).is_err());
    }
}
