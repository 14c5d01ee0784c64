//! Pseudo-word vocabulary, concept names and the topic lexicon.

use std::collections::BTreeMap;

use rand::Rng;

use crate::features::CategoryLexicon;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Concept names for the eight trait poles, in pole order E I S N T F J P.
const PLANTED: [&str; 8] = [
    "crowded_party",
    "quiet_library",
    "fresh_harvest",
    "starry_sky",
    "sharp_suit",
    "warm_hug",
    "tidy_desk",
    "wild_festival",
];

const ADJECTIVES: [&str; 12] = [
    "bright", "calm", "dark", "empty", "golden", "happy", "misty", "old", "rainy", "shiny",
    "sunny", "tiny",
];

const NOUNS: [&str; 12] = [
    "beach", "bridge", "car", "city", "coffee", "dog", "flower", "house", "mountain", "road",
    "street", "tree",
];

/// Word `i` of the vocabulary: three consonant-vowel syllables, all distinct.
pub fn word(i: usize) -> String {
    let syllables = CONSONANTS.len() * VOWELS.len();
    let mut n = i;
    let mut out = String::with_capacity(6);
    for _ in 0..3 {
        let s = n % syllables;
        n /= syllables;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
    }
    assert_eq!(n, 0, "vocabulary larger than the pseudo-word space");
    out
}

pub const MAX_VOCAB: usize = 70 * 70 * 70;

pub fn concept_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|c| match PLANTED.get(c) {
            Some(name) => name.to_string(),
            None => {
                let k = c - PLANTED.len();
                let adj = ADJECTIVES[k % ADJECTIVES.len()];
                let noun = NOUNS[(k / ADJECTIVES.len()) % NOUNS.len()];
                let round = k / (ADJECTIVES.len() * NOUNS.len());
                if round == 0 {
                    format!("{adj}_{noun}")
                } else {
                    format!("{adj}_{noun}_{round}")
                }
            }
        })
        .collect()
}

/// The vocabulary split into one word group per topic plus background
/// words (the remainder, at least one word).
#[derive(Clone, Debug)]
pub struct Vocabulary {
    pub topics: Vec<Vec<String>>,
    pub background: Vec<String>,
}

/// Share of a document's words drawn from its topics.
const TOPICAL: f64 = 0.85;

impl Vocabulary {
    pub fn new(size: usize, n_topics: usize) -> Self {
        let per_topic = ((size as f64 * 0.8) as usize / n_topics).max(1);
        let words: Vec<String> = (0..size).map(word).collect();
        let topics = words
            .chunks(per_topic)
            .take(n_topics)
            .map(<[String]>::to_vec)
            .collect();
        let background = words[per_topic * n_topics..].to_vec();
        Vocabulary { topics, background }
    }

    /// `len` words; each is topical with a fixed probability, its topic
    /// drawn from `mix`.
    pub fn document<R: Rng>(&self, mix: &[f64], len: usize, rng: &mut R) -> String {
        let total: f64 = mix.iter().sum();
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let group = if rng.gen::<f64>() < TOPICAL {
                let mut x = rng.gen::<f64>() * total;
                let mut k = 0;
                while k + 1 < mix.len() && x >= mix[k] {
                    x -= mix[k];
                    k += 1;
                }
                &self.topics[k]
            } else {
                &self.background
            };
            words.push(group[rng.gen_range(0..group.len())].as_str());
        }
        words.join(" ")
    }

    /// One lexicon category per topic.
    pub fn lexicon(&self) -> CategoryLexicon {
        let map: BTreeMap<String, Vec<String>> = self
            .topics
            .iter()
            .enumerate()
            .map(|(k, w)| (format!("topic_{k:02}"), w.clone()))
            .collect();
        map.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_distinct() {
        let words: std::collections::HashSet<String> = (0..5000).map(word).collect();
        assert_eq!(words.len(), 5000);
        assert_eq!(word(0), "bababa");
    }

    #[test]
    fn concept_names_are_distinct() {
        let names: std::collections::HashSet<String> = concept_names(400).into_iter().collect();
        assert_eq!(names.len(), 400);
    }

    #[test]
    fn vocabulary_partitions_words() {
        let v = Vocabulary::new(100, 8);
        assert_eq!(v.topics.len(), 8);
        assert!(v.topics.iter().all(|t| t.len() == 10));
        assert_eq!(v.background.len(), 20);
    }
}
