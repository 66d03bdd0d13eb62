//! Dictionary-encoded, immutable triple store with SPO/POS/OSP indexes.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::term::Term;

/// Dense dictionary id, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub u32);

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub s: TermId,
    pub p: TermId,
    pub o: TermId,
}

/// Bidirectional term <-> id map.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    terms: Vec<Term>,
    ids: BTreeMap<Term, TermId>,
}

impl Dictionary {
    fn intern(&mut self, term: &Term) -> TermId {
        if let Some(id) = self.ids.get(term) {
            return *id;
        }
        let id = TermId(self.terms.len() as u32);
        self.terms.push(term.clone());
        self.ids.insert(term.clone(), id);
        id
    }

    pub fn get(&self, id: TermId) -> Option<&Term> {
        self.terms.get(id.0 as usize)
    }

    pub fn id_of(&self, term: &Term) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, &Term)> {
        self.terms.iter().enumerate().map(|(i, t)| (TermId(i as u32), t))
    }
}

/// Checks the `(I ∪ B) × I × (I ∪ B ∪ L)` triple signature.
pub fn check_signature(s: &Term, p: &Term, o: &Term) -> Result<()> {
    if s.is_literal() {
        return Err(Error::InvalidTriple(format!("literal subject {s}")));
    }
    if !p.is_iri() {
        return Err(Error::InvalidTriple(format!("predicate {p} is not an IRI")));
    }
    let _ = o;
    Ok(())
}

/// Accumulates triples; the only way to construct a [`Graph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    dict: Dictionary,
    triples: BTreeSet<[u32; 3]>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a triple, returning `false` when it was already present.
    pub fn insert(&mut self, s: &Term, p: &Term, o: &Term) -> Result<bool> {
        check_signature(s, p, o)?;
        let s = self.dict.intern(s);
        let p = self.dict.intern(p);
        let o = self.dict.intern(o);
        Ok(self.triples.insert([s.0, p.0, o.0]))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn build(self) -> Graph {
        let spo = self.triples;
        let pos: BTreeSet<[u32; 3]> = spo.iter().map(|[s, p, o]| [*p, *o, *s]).collect();
        let osp: BTreeSet<[u32; 3]> = spo.iter().map(|[s, p, o]| [*o, *s, *p]).collect();
        let stats = compute_stats(&self.dict, &spo, &pos);
        Graph {
            dict: self.dict,
            spo,
            pos,
            osp,
            stats,
        }
    }
}

/// Per-predicate counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct PredicateStats {
    pub triples: usize,
    pub distinct_subjects: usize,
    pub distinct_objects: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct GraphStats {
    pub total_triples: usize,
    pub distinct_terms: usize,
    /// Keyed by predicate IRI.
    pub predicates: BTreeMap<String, PredicateStats>,
}

fn compute_stats(dict: &Dictionary, spo: &BTreeSet<[u32; 3]>, pos: &BTreeSet<[u32; 3]>) -> GraphStats {
    let mut predicates = BTreeMap::new();
    let mut iter = pos.iter().peekable();
    while let Some(first) = iter.next() {
        let p = first[0];
        let mut triples = 1;
        let mut objects = 1;
        let mut last_o = first[1];
        let mut subjects = BTreeSet::new();
        subjects.insert(first[2]);
        while let Some(next) = iter.peek() {
            if next[0] != p {
                break;
            }
            let next = iter.next().unwrap();
            triples += 1;
            if next[1] != last_o {
                objects += 1;
                last_o = next[1];
            }
            subjects.insert(next[2]);
        }
        let iri = dict
            .get(TermId(p))
            .map(|t| String::from(t.lexical()))
            .unwrap_or_default();
        predicates.insert(
            iri,
            PredicateStats {
                triples,
                distinct_subjects: subjects.len(),
                distinct_objects: objects,
            },
        );
    }
    GraphStats {
        total_triples: spo.len(),
        distinct_terms: dict.len(),
        predicates,
    }
}

/// Immutable graph. Construct with [`GraphBuilder`].
#[derive(Debug, Clone, Default)]
pub struct Graph {
    dict: Dictionary,
    spo: BTreeSet<[u32; 3]>,
    pos: BTreeSet<[u32; 3]>,
    osp: BTreeSet<[u32; 3]>,
    stats: GraphStats,
}

const MAX: u32 = u32::MAX;

impl Graph {
    pub fn empty() -> Self {
        GraphBuilder::new().build()
    }

    pub fn from_triples<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Term, &'a Term, &'a Term)>,
    {
        let mut builder = GraphBuilder::new();
        for (s, p, o) in triples {
            builder.insert(s, p, o)?;
        }
        Ok(builder.build())
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn term(&self, id: TermId) -> &Term {
        self.dict.get(id).expect("term id from this graph")
    }

    pub fn id_of(&self, term: &Term) -> Option<TermId> {
        self.dict.id_of(term)
    }

    pub fn stats(&self) -> &GraphStats {
        &self.stats
    }

    pub fn predicate_stats(&self, predicate: &Term) -> PredicateStats {
        match predicate {
            Term::Iri(iri) => self.stats.predicates.get(iri).copied().unwrap_or_default(),
            _ => PredicateStats::default(),
        }
    }

    /// All triples in SPO order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|&[s, p, o]| Triple {
            s: TermId(s),
            p: TermId(p),
            o: TermId(o),
        })
    }

    pub fn resolve(&self, t: Triple) -> (&Term, &Term, &Term) {
        (self.term(t.s), self.term(t.p), self.term(t.o))
    }

    pub fn contains(&self, s: TermId, p: TermId, o: TermId) -> bool {
        self.spo.contains(&[s.0, p.0, o.0])
    }

    /// Pattern match on terms; unknown bound terms yield nothing.
    pub fn match_terms<'a>(
        &'a self,
        s: Option<&Term>,
        p: Option<&Term>,
        o: Option<&Term>,
    ) -> Box<dyn Iterator<Item = Triple> + 'a> {
        let lookup = |t: Option<&Term>| match t {
            None => Some(None),
            Some(t) => self.id_of(t).map(Some),
        };
        match (lookup(s), lookup(p), lookup(o)) {
            (Some(s), Some(p), Some(o)) => self.match_ids(s, p, o),
            _ => Box::new(core::iter::empty()),
        }
    }

    /// Pattern match on ids. The index is picked from the bound positions.
    pub fn match_ids<'a>(
        &'a self,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Box<dyn Iterator<Item = Triple> + 'a> {
        let spo = |[s, p, o]: [u32; 3]| Triple {
            s: TermId(s),
            p: TermId(p),
            o: TermId(o),
        };
        let pos = move |[p, o, s]: [u32; 3]| spo([s, p, o]);
        let osp = move |[o, s, p]: [u32; 3]| spo([s, p, o]);
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                let hit = self.spo.contains(&[s.0, p.0, o.0]);
                Box::new(hit.then(|| spo([s.0, p.0, o.0])).into_iter())
            }
            (Some(s), Some(p), None) => Box::new(self.spo.range([s.0, p.0, 0]..=[s.0, p.0, MAX]).map(move |k| spo(*k))),
            (Some(s), None, None) => Box::new(self.spo.range([s.0, 0, 0]..=[s.0, MAX, MAX]).map(move |k| spo(*k))),
            (None, Some(p), Some(o)) => Box::new(self.pos.range([p.0, o.0, 0]..=[p.0, o.0, MAX]).map(move |k| pos(*k))),
            (None, Some(p), None) => Box::new(self.pos.range([p.0, 0, 0]..=[p.0, MAX, MAX]).map(move |k| pos(*k))),
            (Some(s), None, Some(o)) => Box::new(self.osp.range([o.0, s.0, 0]..=[o.0, s.0, MAX]).map(move |k| osp(*k))),
            (None, None, Some(o)) => Box::new(self.osp.range([o.0, 0, 0]..=[o.0, MAX, MAX]).map(move |k| osp(*k))),
            (None, None, None) => Box::new(self.spo.iter().map(move |k| spo(*k))),
        }
    }

    /// The triple set as resolved terms, for id-independent comparison.
    pub fn term_triples(&self) -> BTreeSet<(Term, Term, Term)> {
        self.triples()
            .map(|t| {
                let (s, p, o) = self.resolve(t);
                (s.clone(), p.clone(), o.clone())
            })
            .collect()
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.term_triples() == other.term_triples()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn iri(s: &str) -> Term {
        Term::iri(s).unwrap()
    }

    #[test]
    fn empty_graph() {
        let g = Graph::empty();
        assert_eq!(g.len(), 0);
        assert_eq!(g.dictionary().len(), 0);
        assert_eq!(g.stats().total_triples, 0);
        assert_eq!(g.stats().distinct_terms, 0);
        assert!(g.stats().predicates.is_empty());
    }

    #[test]
    fn duplicates_are_collapsed() {
        let mut b = GraphBuilder::new();
        assert!(b.insert(&iri("ex:a"), &iri("ex:p"), &iri("ex:b")).unwrap());
        assert!(!b.insert(&iri("ex:a"), &iri("ex:p"), &iri("ex:b")).unwrap());
        assert_eq!(b.build().len(), 1);
    }

    #[test]
    fn signature_enforced() {
        let mut b = GraphBuilder::new();
        let lit = Term::plain("x");
        assert!(b.insert(&lit, &iri("ex:p"), &iri("ex:b")).is_err());
        assert!(b.insert(&iri("ex:a"), &lit, &iri("ex:b")).is_err());
        let bn = Term::blank("b0").unwrap();
        assert!(b.insert(&iri("ex:a"), &bn, &iri("ex:b")).is_err());
        assert!(b.insert(&bn, &iri("ex:p"), &lit).is_ok());
    }

    #[test]
    fn fixture_matches() {
        let g = fixture::fix_pop_graph();
        assert_eq!(g.len(), 16);
        let dutch: Vec<_> = g
            .match_terms(None, Some(&iri("ex:lang")), Some(&iri("ex:Dutch")))
            .collect();
        assert_eq!(dutch.len(), 1);
        assert_eq!(g.term(dutch[0].s), &iri("ex:o4"));
        assert_eq!(g.match_terms(None, None, None).count(), 16);
        assert_eq!(g.match_terms(Some(&iri("ex:FR")), None, None).count(), 0);
        assert_eq!(g.match_terms(Some(&iri("ex:nope")), None, None).count(), 0);
    }

    #[test]
    fn fixture_stats() {
        let g = fixture::fix_pop_graph();
        let stats = g.stats();
        let lang = stats.predicates["ex:lang"];
        assert_eq!(lang.triples, 4);
        assert_eq!(lang.distinct_objects, 2);
        assert_eq!(lang.distinct_subjects, 4);
        assert_eq!(stats.total_triples, 16);
        // 4 observations + 4 predicates + 10 distinct objects.
        assert_eq!(stats.distinct_terms, 18);
        assert_eq!(stats.predicates.len(), 4);
    }
}
