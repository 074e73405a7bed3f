//! The two isomorphic twelve-person family trees, written out as
//! `relation(person1,person2)` lines where person1 is the relation of person2.

#[derive(Clone, Copy, PartialEq)]
enum Sex {
    M,
    F,
}

struct Tree {
    people: Vec<(&'static str, Sex)>,
    couples: Vec<(usize, usize)>,
    /// (child, father, mother)
    children: Vec<(usize, usize, usize)>,
}

fn english() -> Tree {
    use Sex::*;
    Tree {
        people: vec![
            ("Christopher", M),
            ("Penelope", F),
            ("Andrew", M),
            ("Christine", F),
            ("Margaret", F),
            ("Arthur", M),
            ("Victoria", F),
            ("James", M),
            ("Jennifer", F),
            ("Charles", M),
            ("Colin", M),
            ("Charlotte", F),
        ],
        couples: vec![(0, 1), (2, 3), (5, 4), (7, 6), (9, 8)],
        children: vec![(5, 0, 1), (6, 0, 1), (7, 2, 3), (8, 2, 3), (10, 7, 6), (11, 7, 6)],
    }
}

const ITALIAN: [&str; 12] = [
    "Roberto", "Maria", "Pierro", "Francesca", "Gina", "Emilio", "Lucia", "Marco", "Angela", "Tomaso",
    "Alfonso", "Sophia",
];

fn triples(t: &Tree) -> Vec<(&'static str, usize, usize)> {
    let sex = |p: usize| t.people[p].1;
    let pick = |p: usize, m: &'static str, f: &'static str| if sex(p) == Sex::M { m } else { f };
    let mut out = Vec::new();
    let spouse = |p: usize| {
        t.couples
            .iter()
            .find_map(|&(h, w)| if h == p { Some(w) } else if w == p { Some(h) } else { None })
    };
    for &(h, w) in &t.couples {
        out.push(("husband", h, w));
        out.push(("wife", w, h));
    }
    let parents = |c: usize| t.children.iter().find(|r| r.0 == c).map(|r| (r.1, r.2));
    for &(c, f, m) in &t.children {
        out.push(("father", f, c));
        out.push(("mother", m, c));
        out.push((pick(c, "son", "daughter"), c, f));
        out.push((pick(c, "son", "daughter"), c, m));
    }
    let siblings = |p: usize| -> Vec<usize> {
        match parents(p) {
            Some(pp) => t
                .children
                .iter()
                .filter(|r| r.0 != p && (r.1, r.2) == pp)
                .map(|r| r.0)
                .collect(),
            None => vec![],
        }
    };
    for p in 0..t.people.len() {
        for s in siblings(p) {
            out.push((pick(s, "brother", "sister"), s, p));
        }
    }
    for &(c, f, m) in &t.children {
        for parent in [f, m] {
            for s in siblings(parent) {
                let mut relatives = vec![s];
                relatives.extend(spouse(s));
                for r in relatives {
                    out.push((pick(r, "uncle", "aunt"), r, c));
                    out.push((pick(c, "nephew", "niece"), c, r));
                }
            }
        }
    }
    out
}

/// 112 lines: 56 per family.
pub fn family_text() -> String {
    let t = english();
    let mut lines = Vec::new();
    for (rel, a, b) in triples(&t) {
        lines.push(format!("{rel}({},{})", t.people[a].0, t.people[b].0));
    }
    for (rel, a, b) in triples(&t) {
        lines.push(format!("{rel}({},{})", ITALIAN[a], ITALIAN[b]));
    }
    lines.join("\n") + "\n"
}
