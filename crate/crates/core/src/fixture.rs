//! The small population dataset used throughout the docs and tests:
//! four observations of population by country, language and year.

use alloc::vec::Vec;

use crate::graph::{Graph, GraphBuilder};
use crate::term::Term;

/// `SUM(?u)` grouped by country, language and year.
pub const FIX_POP_FACET: &str = "SELECT ?c ?l ?y (SUM(?u) AS ?total) WHERE { \
    ?o <ex:country> ?c . ?o <ex:lang> ?l . ?o <ex:year> ?y . ?o <ex:pop> ?u \
    } GROUP BY ?c ?l ?y";

/// (observation, country, language, year, population)
pub const FIX_POP_ROWS: [(&str, &str, &str, i64, i64); 4] = [
    ("o1", "FR", "French", 2020, 10),
    ("o2", "FR", "French", 2021, 12),
    ("o3", "BE", "French", 2020, 4),
    ("o4", "BE", "Dutch", 2020, 6),
];

fn ex(local: &str) -> Term {
    Term::Iri(alloc::format!("ex:{local}"))
}

/// The fixture as `(s, p, o)` terms, in observation order.
pub fn fix_pop_triples() -> Vec<(Term, Term, Term)> {
    let mut out = Vec::with_capacity(16);
    for (obs, country, lang, year, pop) in FIX_POP_ROWS {
        let s = ex(obs);
        out.push((s.clone(), ex("country"), ex(country)));
        out.push((s.clone(), ex("lang"), ex(lang)));
        out.push((s.clone(), ex("year"), Term::integer(year)));
        out.push((s, ex("pop"), Term::integer(pop)));
    }
    out
}

pub fn fix_pop_graph() -> Graph {
    let mut b = GraphBuilder::new();
    for (s, p, o) in fix_pop_triples() {
        b.insert(&s, &p, &o).expect("fixture triples are well-formed");
    }
    b.build()
}
