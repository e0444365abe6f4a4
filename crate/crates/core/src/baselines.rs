//! Reference classifiers for pairwise bias comparison.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::tokenize;
use crate::train::RevisionPair;

/// Which member of a pair a classifier names as more biased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Before,
    After,
}

impl Preference {
    pub fn flipped(self) -> Self {
        match self {
            Preference::Before => Preference::After,
            Preference::After => Preference::Before,
        }
    }
}

/// Uniform coin flip.
pub fn random_compare<R: Rng + ?Sized>(_pair: &RevisionPair, rng: &mut R) -> Preference {
    coin(rng)
}

fn coin<R: Rng + ?Sized>(rng: &mut R) -> Preference {
    if rng.random_bool(0.5) {
        Preference::Before
    } else {
        Preference::After
    }
}

/// A set of words flagged as potentially biased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub name: String,
    words: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(name: impl Into<String>, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::InvalidConfig("lexicon is empty".into()));
        }
        Ok(Self {
            name: name.into(),
            words,
        })
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        Self::new(name, words)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().map_or_else(|| "lexicon".into(), |s| s.to_string_lossy().into_owned());
        Self::parse(name, &text)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Number of tokens of `text` that are lexicon words.
    pub fn count_in(&self, text: &str) -> usize {
        tokenize(text).iter().filter(|t| self.contains(t)).count()
    }
}

/// Picks the text with more lexicon-word tokens; ties are a coin flip.
pub fn lexicon_compare<R: Rng + ?Sized>(pair: &RevisionPair, lexicon: &Lexicon, rng: &mut R) -> Preference {
    lexicon_compare_texts(&pair.before_text, &pair.after_text, lexicon, rng)
}

pub fn lexicon_compare_texts<R: Rng + ?Sized>(before: &str, after: &str, lexicon: &Lexicon, rng: &mut R) -> Preference {
    let (nb, na) = (lexicon.count_in(before), lexicon.count_in(after));
    match nb.cmp(&na) {
        std::cmp::Ordering::Greater => Preference::Before,
        std::cmp::Ordering::Less => Preference::After,
        std::cmp::Ordering::Equal => coin(rng),
    }
}

/// A small stand-in lexicon of common puffery, weasel and editorializing
/// words, in the spirit of Wikipedia's "Words to watch" guideline.
pub const DEFAULT_LEXICON: &str = include_str!("../data/words_to_watch.txt");

pub fn default_lexicon() -> Lexicon {
    Lexicon::parse("words_to_watch", DEFAULT_LEXICON).expect("bundled lexicon is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn amazing() -> Lexicon {
        Lexicon::new("t", ["amazing"]).unwrap()
    }

    #[test]
    fn count_rule() {
        let pair = RevisionPair::new("1", "a", "An amazing, amazing film", "An amazing film");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(lexicon_compare(&pair, &amazing(), &mut rng), Preference::Before);
        assert_eq!(lexicon_compare(&pair.swapped(), &amazing(), &mut rng), Preference::After);
    }

    #[test]
    fn ties_are_seeded() {
        let pair = RevisionPair::new("1", "a", "plain text", "other text");
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| lexicon_compare(&pair, &amazing(), &mut rng)).collect::<Vec<_>>()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        assert!(a.contains(&Preference::Before) && a.contains(&Preference::After));
    }

    #[test]
    fn random_is_fair_and_reproducible() {
        let pair = RevisionPair::new("1", "a", "x", "y");
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let hits = (0..10_000)
            .filter(|_| random_compare(&pair, &mut rng) == Preference::Before)
            .count();
        let acc = hits as f64 / 10_000.0;
        assert!((acc - 0.5).abs() <= 0.02, "{acc}");

        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| random_compare(&pair, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(seq(5), seq(5));
    }

    #[test]
    fn lexicon_file_format() {
        let lex = Lexicon::parse("t", "# comment\nLegendary\n\n  iconic  # trailing\n").unwrap();
        assert_eq!(lex.words().collect::<Vec<_>>(), ["iconic", "legendary"]);
        assert!(Lexicon::parse("t", "# nothing\n").is_err());
        assert!(default_lexicon().len() > 50);
        assert!(default_lexicon().words().all(|w| w == w.to_lowercase()));
    }

    proptest! {
        #[test]
        fn non_lexicon_words_do_not_change_decisions(
            nb in 0usize..5, na in 0usize..5,
            filler_b in proptest::collection::vec("[b-z]{3,6}", 0..6),
            filler_a in proptest::collection::vec("[b-z]{3,6}", 0..6),
        ) {
            prop_assume!(nb != na);
            let before = vec!["amazing"; nb].join(" ");
            let after = vec!["amazing"; na].join(" ");
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let base = lexicon_compare_texts(&before, &after, &amazing(), &mut rng);
            let padded = lexicon_compare_texts(
                &format!("{before} {}", filler_b.join(" ")),
                &format!("{} {after}", filler_a.join(" ")),
                &amazing(),
                &mut rng,
            );
            prop_assert_eq!(base, padded);
            let swapped = lexicon_compare_texts(&after, &before, &amazing(), &mut rng);
            prop_assert_eq!(swapped, base.flipped());
        }
    }
}
