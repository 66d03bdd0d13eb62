#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sofos_core::graph::{Graph, GraphBuilder};
use sofos_core::query::{AggOp, AnalyticalQuery, Comparator, FilterExpr, PatternTerm, TriplePattern, Variable};
use sofos_core::term::{Number, Term, XSD_INTEGER};

pub type Triple = (Term, Term, Term);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn iri(s: &str) -> Term {
    Term::iri(s).unwrap()
}

pub fn var(name: &str) -> Variable {
    Variable::new(name).unwrap()
}

/// Small graph over a handful of subjects, predicates and objects so that
/// random patterns actually match.
pub fn random_triples(r: &mut ChaCha8Rng, max: usize) -> Vec<Triple> {
    let n = r.random_range(0..=max);
    let subject = |r: &mut ChaCha8Rng| match r.random_range(0..8) {
        0 => Term::blank(format!("b{}", r.random_range(0..2))).unwrap(),
        i => iri(&format!("s{}", i % 6)),
    };
    (0..n)
        .map(|_| {
            let s = subject(r);
            let p = iri(&format!("p{}", r.random_range(0..4)));
            let o = match r.random_range(0..3) {
                0 => subject(r),
                1 => Term::integer(r.random_range(-3..6)),
                _ => iri(&format!("v{}", r.random_range(0..4))),
            };
            (s, p, o)
        })
        .collect()
}

pub fn build(triples: &[Triple]) -> Graph {
    let mut b = GraphBuilder::new();
    for (s, p, o) in triples {
        b.insert(s, p, o).unwrap();
    }
    b.build()
}

/// Random connected pattern of 1..=3 triples over variables a..d.
pub fn random_pattern(r: &mut ChaCha8Rng) -> Vec<TriplePattern> {
    let names = ["a", "b", "c", "d"];
    let len = r.random_range(1..=3);
    let mut used: Vec<&str> = Vec::new();
    let mut out = Vec::new();
    for i in 0..len {
        let fresh = |r: &mut ChaCha8Rng| names[r.random_range(0..names.len())];
        let s = if i == 0 {
            fresh(r)
        } else {
            used[r.random_range(0..used.len())]
        };
        let p = if r.random_range(0..6) == 0 {
            PatternTerm::Var(var("p"))
        } else {
            PatternTerm::Const(iri(&format!("p{}", r.random_range(0..4))))
        };
        let o = match r.random_range(0..6) {
            0 => PatternTerm::Const(Term::integer(r.random_range(-3..6))),
            1 => PatternTerm::Const(iri(&format!("v{}", r.random_range(0..4)))),
            _ => PatternTerm::Var(var(fresh(r))),
        };
        let (s, o) = if i > 0 && r.random_bool(0.3) {
            // Join through the object position instead.
            let joined = used[r.random_range(0..used.len())];
            (PatternTerm::Var(var(fresh(r))), PatternTerm::Var(var(joined)))
        } else {
            (PatternTerm::Var(var(s)), o)
        };
        for t in [&s, &o] {
            if let PatternTerm::Var(v) = t {
                let name = names.iter().find(|n| **n == v.name()).copied();
                if let Some(n) = name {
                    if !used.contains(&n) {
                        used.push(n);
                    }
                }
            }
        }
        out.push(TriplePattern::new(s, p, o).unwrap());
    }
    out
}

pub fn random_filter(r: &mut ChaCha8Rng, v: Variable) -> FilterExpr {
    let cmp = [
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ][r.random_range(0..6)];
    let constant = if cmp.is_ordering() || r.random_bool(0.5) {
        Term::integer(r.random_range(-3..6))
    } else {
        iri(&format!("v{}", r.random_range(0..4)))
    };
    FilterExpr::new(v, cmp, constant).unwrap()
}

/// Random query over `random_pattern`, or `None` when the draw violates a
/// query invariant.
pub fn random_query(r: &mut ChaCha8Rng) -> Option<AnalyticalQuery> {
    let pattern = random_pattern(r);
    let mut vars: Vec<Variable> = Vec::new();
    for tp in &pattern {
        for v in tp.variables() {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
    }
    let agg_var = vars[r.random_range(0..vars.len())].clone();
    let group_vars: Vec<Variable> = vars
        .iter()
        .filter(|v| **v != agg_var && r.random_bool(0.5))
        .cloned()
        .collect();
    let mut filters = Vec::new();
    for _ in 0..r.random_range(0..=2) {
        let v = vars[r.random_range(0..vars.len())].clone();
        filters.push(random_filter(r, v));
    }
    let op = AggOp::ALL[r.random_range(0..5)];
    AnalyticalQuery::new(group_vars, pattern, filters, op, agg_var, var("res")).ok()
}

// ---------------------------------------------------------------------------
// Brute-force evaluation: nested loops over every triple for every pattern,
// no indexes, no join ordering, its own numeric handling.

pub type Binding = BTreeMap<String, Term>;

fn unify(b: &mut Binding, pt: &PatternTerm, t: &Term) -> bool {
    match pt {
        PatternTerm::Const(c) => c == t,
        PatternTerm::Var(v) => match b.get(v.name()) {
            Some(x) => x == t,
            None => {
                b.insert(v.name().to_string(), t.clone());
                true
            }
        },
    }
}

fn brute_rec(triples: &[Triple], pattern: &[TriplePattern], b: &Binding, out: &mut Vec<Binding>) {
    let Some((tp, rest)) = pattern.split_first() else {
        out.push(b.clone());
        return;
    };
    for (s, p, o) in triples {
        let mut nb = b.clone();
        if unify(&mut nb, &tp.s, s) && unify(&mut nb, &tp.p, p) && unify(&mut nb, &tp.o, o) {
            brute_rec(triples, rest, &nb, out);
        }
    }
}

/// Integer value of a literal, the only numeric kind the generators emit.
pub fn int_of(t: &Term) -> Option<i64> {
    match t {
        Term::Literal {
            lexical,
            datatype: Some(dt),
            language: None,
        } if dt == XSD_INTEGER => lexical.parse().ok(),
        _ => None,
    }
}

fn oracle_accepts(f: &FilterExpr, value: &Term) -> bool {
    let pair = int_of(value).zip(int_of(&f.constant));
    match f.comparator {
        Comparator::Eq => pair.map_or(value == &f.constant, |(a, b)| a == b),
        Comparator::Ne => pair.map_or(value != &f.constant, |(a, b)| a != b),
        Comparator::Lt => pair.is_some_and(|(a, b)| a < b),
        Comparator::Le => pair.is_some_and(|(a, b)| a <= b),
        Comparator::Gt => pair.is_some_and(|(a, b)| a > b),
        Comparator::Ge => pair.is_some_and(|(a, b)| a >= b),
    }
}

pub fn brute_bindings(triples: &[Triple], pattern: &[TriplePattern], filters: &[FilterExpr]) -> Vec<Binding> {
    // Deduplicate the input the way a graph would.
    let mut set: Vec<Triple> = triples.to_vec();
    set.sort();
    set.dedup();
    let mut out = Vec::new();
    brute_rec(&set, pattern, &Binding::new(), &mut out);
    out.retain(|b| filters.iter().all(|f| oracle_accepts(f, &b[f.variable.name()])));
    out.sort();
    out.dedup();
    out
}

/// `Err(())` when a numeric aggregate meets a non-integer measure.
pub fn brute_evaluate(triples: &[Triple], q: &AnalyticalQuery) -> Result<BTreeMap<Vec<Term>, Number>, ()> {
    let mut groups: BTreeMap<Vec<Term>, Vec<Term>> = BTreeMap::new();
    for b in brute_bindings(triples, q.pattern(), q.filters()) {
        let key = q.group_vars().iter().map(|v| b[v.name()].clone()).collect();
        groups.entry(key).or_default().push(b[q.agg_var().name()].clone());
    }
    let mut out = BTreeMap::new();
    for (key, values) in groups {
        let value = if q.agg_op() == AggOp::Count {
            Number::Int(values.len() as i64)
        } else {
            let ints: Vec<i64> = values.iter().map(int_of).collect::<Option<_>>().ok_or(())?;
            let sum: i128 = ints.iter().map(|&i| i as i128).sum();
            match q.agg_op() {
                AggOp::Sum => Number::Int(sum as i64),
                AggOp::Avg => Number::Float(sum as f64 / ints.len() as f64),
                AggOp::Min => Number::Int(*ints.iter().min().unwrap()),
                AggOp::Max => Number::Int(*ints.iter().max().unwrap()),
                AggOp::Count => unreachable!(),
            }
        };
        out.insert(key, value);
    }
    Ok(out)
}

/// Exact for integers, 1e-9 relative for floats.
pub fn same_rows(a: &BTreeMap<Vec<Term>, Number>, b: &BTreeMap<Vec<Term>, Number>) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|((ka, va), (kb, vb))| {
            ka == kb
                && match (va, vb) {
                    (Number::Int(x), Number::Int(y)) => x == y,
                    (x, y) => {
                        let (x, y) = (x.as_f64(), y.as_f64());
                        x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs())
                    }
                }
        })
}

// ---------------------------------------------------------------------------
// Star graphs written out directly, independent of `synthesize_star`.

pub struct Star {
    pub triples: Vec<Triple>,
    pub dims: Vec<String>,
    pub facet_text: String,
}

/// `n` observations over `dims` dimensions with the given cardinalities;
/// some observations skip a dimension so patterns filter bindings.
pub fn random_star(r: &mut ChaCha8Rng, n: usize, cards: &[usize], agg: AggOp) -> Star {
    let dims: Vec<String> = (0..cards.len()).map(|i| format!("x{i}")).collect();
    let mut triples = Vec::new();
    for i in 0..n {
        let obs = iri(&format!("o{i}"));
        for (d, card) in cards.iter().enumerate() {
            if r.random_range(0..20) == 0 {
                continue;
            }
            let value = if d % 2 == 0 {
                iri(&format!("d{d}v{}", r.random_range(0..*card)))
            } else {
                Term::integer(r.random_range(0..*card as i64))
            };
            triples.push((obs.clone(), iri(&format!("dim{d}")), value));
        }
        triples.push((obs, iri("m"), Term::integer(r.random_range(-50..100))));
    }
    let select: Vec<String> = dims.iter().map(|d| format!("?{d}")).collect();
    let mut body: Vec<String> = dims
        .iter()
        .enumerate()
        .map(|(d, v)| format!("?o <dim{d}> ?{v}"))
        .collect();
    body.push("?o <m> ?u".into());
    let facet_text = format!(
        "SELECT {} ({}(?u) AS ?r) WHERE {{ {} }} GROUP BY {}",
        select.join(" "),
        agg.keyword(),
        body.join(" . "),
        select.join(" ")
    );
    Star {
        triples,
        dims,
        facet_text,
    }
}
