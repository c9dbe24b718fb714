//! Todd-Coxeter coset enumeration, HLT strategy.
//!
//! Relators are scanned at every live coset in definition order, gaps are
//! filled by defining new cosets, and coincidences are merged through a
//! union-find table. The enumeration either completes, yielding the full
//! coset action (and, over the trivial subgroup, the presented group as a
//! multiplication table), or reports an overflow of the live-coset bound.
//! An overflow is an UNKNOWN verdict, never a wrong answer.

use crate::group::FiniteGroup;
use crate::present::{Letter, Presentation};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CosetError {
    #[error("live coset bound {max_cosets} reached: enumeration unknown")]
    Overflow { max_cosets: usize },
    #[error("max_cosets must be at least 1")]
    BadBound,
}

/// A completed enumeration over the trivial subgroup.
#[derive(Debug)]
pub struct CompleteTable {
    /// Number of cosets = order of the presented group.
    pub order: usize,
    /// Action of each generator column on cosets; column `2g` is generator
    /// `g`, column `2g+1` its inverse.
    pub action: Vec<Vec<usize>>,
    /// The presented group reconstructed from the regular action; coset 0 is
    /// the identity.
    pub group: FiniteGroup,
    /// Image of each generator in `group`.
    pub gen_images: Vec<usize>,
}

struct Table {
    ncols: usize,
    rows: Vec<Vec<Option<usize>>>,
    parent: Vec<usize>,
    live: usize,
    max_live: usize,
    total_cap: usize,
}

fn inv_col(c: usize) -> usize {
    c ^ 1
}

fn word_cols(w: &[Letter]) -> Vec<usize> {
    w.iter().map(|&(g, inv)| 2 * g + usize::from(inv)).collect()
}

impl Table {
    fn new(ngens: usize, max_live: usize) -> Self {
        let mut t = Table {
            ncols: 2 * ngens,
            rows: Vec::new(),
            parent: Vec::new(),
            live: 0,
            max_live,
            total_cap: max_live.saturating_mul(64).saturating_add(4096),
        };
        t.new_coset().expect("bound is at least 1");
        t
    }

    fn new_coset(&mut self) -> Result<usize, CosetError> {
        if self.live + 1 > self.max_live || self.rows.len() + 1 > self.total_cap {
            return Err(CosetError::Overflow { max_cosets: self.max_live });
        }
        let n = self.rows.len();
        self.rows.push(vec![None; self.ncols]);
        self.parent.push(n);
        self.live += 1;
        Ok(n)
    }

    fn rep(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let up = self.parent[self.parent[x]];
            self.parent[x] = up;
            x = up;
        }
        x
    }

    fn is_live(&mut self, x: usize) -> bool {
        self.rep(x) == x
    }

    fn get(&mut self, a: usize, c: usize) -> Option<usize> {
        self.rows[a][c].map(|t| self.rep(t))
    }

    fn set(&mut self, a: usize, c: usize, b: usize) {
        self.rows[a][c] = Some(b);
        self.rows[b][inv_col(c)] = Some(a);
    }

    fn define(&mut self, a: usize, c: usize) -> Result<usize, CosetError> {
        let n = self.new_coset()?;
        self.set(a, c, n);
        Ok(n)
    }

    /// Merges two cosets and reinstalls the dead coset's edges, queueing any
    /// further coincidences this uncovers.
    fn coincidence(&mut self, a: usize, b: usize) {
        let mut queue: Vec<(usize, usize)> = vec![(a, b)];
        while let Some((x, y)) = queue.pop() {
            let x = self.rep(x);
            let y = self.rep(y);
            if x == y {
                continue;
            }
            let (keep, dead) = if x < y { (x, y) } else { (y, x) };
            self.parent[dead] = keep;
            self.live -= 1;
            for c in 0..self.ncols {
                let Some(delta) = self.rows[dead][c] else {
                    continue;
                };
                self.rows[dead][c] = None;
                if self.rows[delta][inv_col(c)] == Some(dead) {
                    self.rows[delta][inv_col(c)] = None;
                }
                let mu = self.rep(dead);
                let nu = self.rep(delta);
                match self.rows[mu][c] {
                    Some(existing) => queue.push((existing, nu)),
                    None => match self.rows[nu][inv_col(c)] {
                        Some(existing) => queue.push((existing, mu)),
                        None => self.set(mu, c, nu),
                    },
                }
            }
        }
    }

    /// Scans a relator word at a coset, filling undefined entries with new
    /// cosets; scans from both ends and closes with a deduction or
    /// coincidence.
    fn scan_and_fill(&mut self, alpha: usize, w: &[usize]) -> Result<(), CosetError> {
        if w.is_empty() {
            return Ok(());
        }
        let mut f = self.rep(alpha);
        let mut b = f;
        let mut i = 0usize;
        let mut j = w.len();
        loop {
            while i < j {
                match self.get(f, w[i]) {
                    Some(t) => {
                        f = t;
                        i += 1;
                    }
                    None => break,
                }
            }
            if i == j {
                if f != b {
                    self.coincidence(f, b);
                }
                return Ok(());
            }
            while j > i {
                match self.get(b, inv_col(w[j - 1])) {
                    Some(t) => {
                        b = t;
                        j -= 1;
                    }
                    None => break,
                }
            }
            if i == j {
                if f != b {
                    self.coincidence(f, b);
                }
                return Ok(());
            }
            if j == i + 1 {
                self.set(f, w[i], b);
                return Ok(());
            }
            let n = self.define(f, w[i])?;
            f = n;
            i += 1;
        }
    }
}

/// Runs the enumeration for the subgroup generated by the given words.
///
/// On completion over the trivial subgroup the presented group itself is
/// reconstructed from the regular action; for a non-trivial subgroup only
/// the action table is meaningful and `group` describes the coset action
/// image only when it happens to be regular.
pub fn coset_enumeration(
    p: &Presentation,
    subgroup_gens: &[Vec<Letter>],
    max_cosets: usize,
) -> Result<CompleteTable, CosetError> {
    if max_cosets == 0 {
        return Err(CosetError::BadBound);
    }
    let relators: Vec<Vec<usize>> = p.relators.iter().map(|r| word_cols(r)).collect();
    let mut t = Table::new(p.generators.len(), max_cosets);
    for w in subgroup_gens {
        t.scan_and_fill(0, &word_cols(w))?;
    }
    let mut alpha = 0usize;
    while alpha < t.rows.len() {
        if !t.is_live(alpha) {
            alpha += 1;
            continue;
        }
        for r in &relators {
            t.scan_and_fill(alpha, r)?;
            if !t.is_live(alpha) {
                break;
            }
        }
        if t.is_live(alpha) {
            for c in 0..t.ncols {
                if t.get(alpha, c).is_none() {
                    t.define(alpha, c)?;
                }
            }
        }
        alpha += 1;
    }
    // Final audit: with the table closed, rescan everything until no
    // coincidence remains. Each pass that changes anything lowers the live
    // count, so this terminates.
    loop {
        let before = t.live;
        let cosets: Vec<usize> = (0..t.rows.len()).collect();
        for a in cosets {
            if !t.is_live(a) {
                continue;
            }
            for r in &relators {
                t.scan_and_fill(a, r)?;
            }
        }
        if t.live == before {
            break;
        }
    }

    // Compress live cosets to 0..n.
    let mut number = vec![usize::MAX; t.rows.len()];
    let mut n = 0usize;
    for x in 0..t.rows.len() {
        if t.rep(x) == x {
            number[x] = n;
            n += 1;
        }
    }
    let mut action = vec![vec![0usize; n]; t.ncols];
    for x in 0..t.rows.len() {
        if t.rep(x) != x {
            continue;
        }
        for c in 0..t.ncols {
            let y = t.get(x, c).expect("closed table");
            action[c][number[x]] = number[y];
        }
    }

    // Words labeling each coset via a breadth-first spanning tree from 0.
    let mut word_to: Vec<Option<Vec<usize>>> = vec![None; n];
    word_to[0] = Some(Vec::new());
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        for c in 0..t.ncols {
            let y = action[c][x];
            if word_to[y].is_none() {
                let mut w = word_to[x].clone().unwrap();
                w.push(c);
                word_to[y] = Some(w);
                queue.push_back(y);
            }
        }
    }

    // Regular action gives the group: mul(a, b) applies b's defining word to a.
    let mut table = vec![vec![0usize; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut cur = a;
            for &c in word_to[b].as_ref().unwrap() {
                cur = action[c][cur];
            }
            table[a][b] = cur;
        }
    }
    let group = FiniteGroup::from_table(table)
        .expect("completed enumeration over the trivial subgroup yields a group");
    let gen_images: Vec<usize> = (0..p.generators.len()).map(|g| action[2 * g][0]).collect();
    Ok(CompleteTable { order: n, action, group, gen_images })
}

impl CompleteTable {
    /// Image of a presentation word in the reconstructed group.
    pub fn word_image(&self, w: &[Letter]) -> usize {
        let mut cur = 0usize;
        for &c in &word_cols(w) {
            cur = self.action[c][cur];
        }
        cur
    }
}
