//! Seeded synthetic corpora for tests, demos and benchmarks when the real
//! labeled data is unavailable.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::dataset::{LabeledName, Source};
use crate::error::{Error, Result};
use crate::pseudo_label::{leaf_index, Crosswalk, LeafVector, LEAF_COUNT};
use crate::taxonomy::Taxonomy;

/// Surname endings that define the four synthetic origins.
pub const SUFFIXES: [&str; 4] = ["ov", "son", "oglu", "elli"];

/// Taxonomy whose classes are named after [`SUFFIXES`].
pub fn suffix_taxonomy() -> Taxonomy {
    Taxonomy::new(&SUFFIXES).expect("suffixes are distinct")
}

const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

fn syllables<R: Rng>(rng: &mut R, count: usize) -> String {
    (0..count)
        .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
        .collect()
}

/// `n` names "<given> <stem><suffix>" with labels cycling through the four
/// suffix origins. Given names and stems come from one shared syllable
/// pool, so only the ending carries the origin.
pub fn suffix_corpus(n: usize, seed: u64) -> Vec<LabeledName> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % SUFFIXES.len();
            let given_len = rng.random_range(2..=3);
            let stem_len = rng.random_range(1..=3);
            let given = syllables(&mut rng, given_len);
            let stem = syllables(&mut rng, stem_len);
            LabeledName {
                name: format!("{given} {stem}{}", SUFFIXES[label]),
                label,
                source: Source::Synthetic,
            }
        })
        .collect()
}

/// Knobs of [`leaf_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeafCorpusConfig {
    /// share of labels replaced by a different, uniformly drawn origin
    pub label_noise: f64,
    /// share of samples of origins with a diaspora leaf that peak on it
    pub diaspora_rate: f64,
    /// Dirichlet concentration added on the peak leaf
    pub peak: f64,
    /// Dirichlet concentration on every leaf
    pub background: f64,
}

impl Default for LeafCorpusConfig {
    fn default() -> Self {
        LeafCorpusConfig {
            label_noise: 0.15,
            diaspora_rate: 0.3,
            peak: 6.0,
            background: 0.15,
        }
    }
}

/// Leaves without a crosswalk entry that names of one origin often land
/// on in practice; the crosswalk cannot use them but a learned mapper can.
const DIASPORA_LEAVES: [(&str, &str); 8] = [
    ("Greek", "Balkans"),
    ("Jewish", "East-Europe"),
    ("Muslim, Nubian", "Arabic"),
    ("Muslim, Turkic, CentralAsian", "Turkish"),
    ("Hispanic, Philippines", "Hispanic-Iberian"),
    ("African, EastAfrican", "India"),
    ("African, WestAfrican", "French"),
    ("African, SouthAfrican", "Anglo-Saxon"),
];

/// `n` labeled leaf vectors following the crosswalk's group structure.
///
/// Labels cycle through the origins. Each vector is a Dirichlet draw
/// peaked on one leaf: a random crosswalk leaf of its origin, or for
/// origins with a diaspora leaf, that unmapped leaf with probability
/// `diaspora_rate`. Finally `label_noise` of the labels are moved to a
/// different origin. Requires the default 17-class taxonomy.
pub fn leaf_corpus(n: usize, taxonomy: &Taxonomy, config: &LeafCorpusConfig, seed: u64) -> Result<Vec<LeafVector>> {
    let crosswalk = Crosswalk::published(taxonomy)?;
    let classes = taxonomy.len();
    let mut diaspora = vec![None; classes];
    for (leaf, origin) in DIASPORA_LEAVES {
        let k = taxonomy
            .index_of(origin)
            .ok_or_else(|| Error::UnknownOrigin(origin.into()))?;
        diaspora[k] = leaf_index(leaf);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let origin = i % classes;
        let peak_leaf = match diaspora[origin] {
            Some(l) if rng.random_bool(config.diaspora_rate) => l,
            _ => *crosswalk.leaves_of(origin).choose(&mut rng).expect("origin has a leaf"),
        };
        let mut alpha = [config.background; LEAF_COUNT];
        alpha[peak_leaf] += config.peak;
        let dirichlet = Dirichlet::new(alpha).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut probs: Vec<f64> = dirichlet.sample(&mut rng).to_vec();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        let label = if rng.random_bool(config.label_noise) {
            let other = rng.random_range(0..classes - 1);
            if other >= origin {
                other + 1
            } else {
                other
            }
        } else {
            origin
        };
        out.push(LeafVector::new(format!("synthetic-{i}"), Some(label), probs)?);
    }
    Ok(out)
}
