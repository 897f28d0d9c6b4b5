//! Shared inputs for the checker benchmarks.

use locpa_core::alphabet::Alphabet;
use locpa_core::syntax::parse_term;
use locpa_core::term::{Env, Term};

/// The environment the law suites use.
pub fn env() -> Env {
    Env::new(Alphabet::law_suite())
}

/// Parses a benchmark input; inputs are fixed and known to parse.
pub fn term(src: &str) -> Term {
    parse_term(src).expect("benchmark term parses")
}

/// `n` located components in parallel, each a short choice of sequences.
pub fn wide_parallel(n: usize) -> Term {
    let parts: Vec<String> = (1..=n).map(|i| format!("l{i} :: (a ; b + c ; e)")).collect();
    term(&parts.join(" // "))
}

/// Pairs `(lhs, rhs)` from the hp/hhp separation argument.
pub fn separation_pairs() -> Vec<(Term, Term)> {
    vec![
        (term("(a + b) // c"), term("(a // c) + (b // c)")),
        (term("a // (b + c)"), term("(a // b) + (a // c)")),
    ]
}
