//! The example programs, embedded so the binary runs without the source tree.

macro_rules! entries {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../corpus/", $name, ".hprog")))),*]
    };
}

pub const CORPUS: &[(&str, &str)] = entries![
    "P2",
    "P4",
    "encryption_lemma",
    "guesswork_I",
    "guesswork_S",
    "three_judges_fig2",
    "three_judges_fig3",
    "three_judges_spec",
    "threebox_I1",
    "threebox_I2",
    "threebox_S",
    "two_party_conj",
    "two_party_conj_spec",
];

/// Source text by name, with or without the `.hprog` suffix.
pub fn get(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".hprog").unwrap_or(name);
    let stem = stem.rsplit(['/', '\\']).next().unwrap_or(stem);
    CORPUS.iter().find(|(n, _)| *n == stem).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    CORPUS.iter().map(|(n, _)| *n)
}
