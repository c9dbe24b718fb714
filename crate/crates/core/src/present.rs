//! Group presentations and the table presentation of a generalized free
//! product: one generator per non-identity vertex element, all multiplication
//! relations, and one identification relator per edge element.

use crate::word::AmalgamFamily;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PresentError {
    #[error("relator references undeclared generator {0:?}")]
    UnknownGenerator(String),
    #[error("malformed presentation line {0:?}")]
    BadLine(String),
    #[error("duplicate generator {0:?}")]
    DuplicateGenerator(String),
}

/// A letter of a relator: generator index plus inversion flag.
pub type Letter = (usize, bool);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    pub generators: Vec<String>,
    pub relators: Vec<Vec<Letter>>,
}

impl Presentation {
    pub fn new(generators: Vec<String>, relators: Vec<Vec<Letter>>) -> Self {
        for r in &relators {
            for &(g, _) in r {
                assert!(g < generators.len(), "relator letter out of range");
            }
        }
        Presentation { generators, relators }
    }

    /// Parses the line format:
    ///
    /// ```text
    /// gens: a b c
    /// rel: a a
    /// rel: a b a' b'
    /// ```
    ///
    /// A trailing apostrophe inverts a generator. Blank lines and `#`
    /// comments are ignored.
    pub fn parse(text: &str) -> Result<Presentation, PresentError> {
        let mut generators: Vec<String> = Vec::new();
        let mut relators = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("gens:") {
                for name in rest.split_whitespace() {
                    if generators.iter().any(|g| g == name) {
                        return Err(PresentError::DuplicateGenerator(name.to_string()));
                    }
                    generators.push(name.to_string());
                }
            } else if let Some(rest) = line.strip_prefix("rel:") {
                let mut word = Vec::new();
                for tok in rest.split_whitespace() {
                    let (name, inverted) = match tok.strip_suffix('\'') {
                        Some(base) => (base, true),
                        None => (tok, false),
                    };
                    let idx = generators
                        .iter()
                        .position(|g| g == name)
                        .ok_or_else(|| PresentError::UnknownGenerator(name.to_string()))?;
                    word.push((idx, inverted));
                }
                relators.push(word);
            } else {
                return Err(PresentError::BadLine(line.to_string()));
            }
        }
        Ok(Presentation { generators, relators })
    }

    pub fn render(&self) -> String {
        let mut out = format!("gens: {}\n", self.generators.join(" "));
        for r in &self.relators {
            let word: Vec<String> = r
                .iter()
                .map(|&(g, inv)| {
                    if inv {
                        format!("{}'", self.generators[g])
                    } else {
                        self.generators[g].clone()
                    }
                })
                .collect();
            out.push_str(&format!("rel: {}\n", word.join(" ")));
        }
        out
    }
}

/// Map from non-identity vertex elements to presentation generators.
pub struct FamilyGenerators {
    /// `index[v][x]` is the generator of element `x` of vertex `v`.
    pub index: Vec<Vec<Option<usize>>>,
}

/// Table presentation of the generalized free product of a family.
///
/// Generators are the non-identity elements of every vertex group; relators
/// are all vertex multiplication relations `x y = z` plus, for each edge
/// element `h`, the identification `into_a(h) into_b(h)^-1`.
pub fn presentation_of_family(fam: &AmalgamFamily) -> (Presentation, FamilyGenerators) {
    let mut generators = Vec::new();
    let mut index: Vec<Vec<Option<usize>>> = Vec::new();
    for (v, g) in fam.vertices.iter().enumerate() {
        let mut row = vec![None; g.order()];
        for x in g.elements() {
            if x != g.identity() {
                row[x] = Some(generators.len());
                generators.push(format!("g{}_{}", v + 1, x));
            }
        }
        index.push(row);
    }
    let mut relators = Vec::new();
    for (v, g) in fam.vertices.iter().enumerate() {
        for x in g.elements().filter(|&x| x != g.identity()) {
            for y in g.elements().filter(|&y| y != g.identity()) {
                let z = g.mul(x, y);
                let mut word = vec![(index[v][x].unwrap(), false), (index[v][y].unwrap(), false)];
                if z != g.identity() {
                    word.push((index[v][z].unwrap(), true));
                }
                relators.push(word);
            }
        }
    }
    for (&(i, j), edge) in &fam.edges {
        for h in edge.group.elements().filter(|&h| h != edge.group.identity()) {
            let a = edge.into_a[h];
            let b = edge.into_b[h];
            relators.push(vec![(index[i][a].unwrap(), false), (index[j][b].unwrap(), true)]);
        }
    }
    (Presentation { generators, relators }, FamilyGenerators { index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;
    use crate::presets;
    use crate::word::AmalgamEdge;
    use std::collections::BTreeMap;

    #[test]
    fn single_vertex_z2() {
        let fam = AmalgamFamily::new(vec![presets::cyclic(2)], BTreeMap::new()).unwrap();
        let (p, _) = presentation_of_family(&fam);
        assert_eq!(p.generators, vec!["g1_1"]);
        assert_eq!(p.relators, vec![vec![(0, false), (0, false)]]);
    }

    #[test]
    fn shared_whole_group_identifies_generators() {
        let z2 = presets::cyclic(2);
        let fam = AmalgamFamily::new(
            vec![z2.clone(), z2.clone()],
            BTreeMap::from([(
                (0, 1),
                AmalgamEdge { group: z2, into_a: vec![0, 1], into_b: vec![0, 1] },
            )]),
        )
        .unwrap();
        let (p, gens) = presentation_of_family(&fam);
        assert_eq!(p.generators.len(), 2);
        // Last relator identifies the two copies elementwise.
        let last = p.relators.last().unwrap();
        assert_eq!(
            last,
            &vec![(gens.index[0][1].unwrap(), false), (gens.index[1][1].unwrap(), true)]
        );
    }

    #[test]
    fn parse_round_trip() {
        let text = "gens: a b\nrel: a a\nrel: a b a' b'\n";
        let p = Presentation::parse(text).unwrap();
        assert_eq!(p.generators.len(), 2);
        assert_eq!(p.relators[1], vec![(0, false), (1, false), (0, true), (1, true)]);
        assert_eq!(Presentation::parse(&p.render()).unwrap(), p);
        assert!(Presentation::parse("rel: x").is_err());
        assert!(Presentation::parse("nonsense").is_err());
    }

    #[test]
    fn trivial_groups_contribute_nothing() {
        let fam = AmalgamFamily::new(
            vec![FiniteGroup::trivial(), presets::cyclic(3)],
            BTreeMap::new(),
        )
        .unwrap();
        let (p, _) = presentation_of_family(&fam);
        assert_eq!(p.generators.len(), 2);
        assert_eq!(p.relators.len(), 4);
    }
}
