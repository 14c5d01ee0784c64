use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The four Myers–Briggs dichotomies, in the conventional E-I / S-N / T-F / J-P order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraitPair {
    ExtraversionIntroversion,
    SensingIntuition,
    ThinkingFeeling,
    JudgingPerceiving,
}

impl TraitPair {
    pub const ALL: [TraitPair; 4] = [
        TraitPair::ExtraversionIntroversion,
        TraitPair::SensingIntuition,
        TraitPair::ThinkingFeeling,
        TraitPair::JudgingPerceiving,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn letters(self) -> (char, char) {
        match self {
            TraitPair::ExtraversionIntroversion => ('E', 'I'),
            TraitPair::SensingIntuition => ('S', 'N'),
            TraitPair::ThinkingFeeling => ('T', 'F'),
            TraitPair::JudgingPerceiving => ('J', 'P'),
        }
    }
}

/// One side of a trait pair. `first` selects E, S, T or J.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraitPole {
    pub pair: TraitPair,
    pub first: bool,
}

impl TraitPole {
    /// All eight poles: E, I, S, N, T, F, J, P.
    pub fn all() -> Vec<TraitPole> {
        TraitPair::ALL
            .iter()
            .flat_map(|&pair| {
                [
                    TraitPole { pair, first: true },
                    TraitPole { pair, first: false },
                ]
            })
            .collect()
    }

    /// Position in `TraitPole::all()`.
    pub fn index(self) -> usize {
        2 * self.pair.index() + usize::from(!self.first)
    }

    pub fn letter(self) -> char {
        let (a, b) = self.pair.letters();
        if self.first {
            a
        } else {
            b
        }
    }

    pub fn name(self) -> &'static str {
        match (self.pair, self.first) {
            (TraitPair::ExtraversionIntroversion, true) => "Extravert",
            (TraitPair::ExtraversionIntroversion, false) => "Introvert",
            (TraitPair::SensingIntuition, true) => "Sensing",
            (TraitPair::SensingIntuition, false) => "Intuition",
            (TraitPair::ThinkingFeeling, true) => "Thinking",
            (TraitPair::ThinkingFeeling, false) => "Feeling",
            (TraitPair::JudgingPerceiving, true) => "Judging",
            (TraitPair::JudgingPerceiving, false) => "Perceiving",
        }
    }
}

/// A four-letter MBTI type such as `ENTJ`; stored as one flag per trait pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mbti(pub [bool; 4]);

impl Mbti {
    pub fn has(&self, pole: TraitPole) -> bool {
        self.0[pole.pair.index()] == pole.first
    }

    pub fn pole(&self, pair: TraitPair) -> TraitPole {
        TraitPole {
            pair,
            first: self.0[pair.index()],
        }
    }
}

impl fmt::Display for Mbti {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for pair in TraitPair::ALL {
            write!(f, "{}", self.pole(pair).letter())?;
        }
        Ok(())
    }
}

impl FromStr for Mbti {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.trim().chars().map(|c| c.to_ascii_uppercase()).collect();
        if chars.len() != 4 {
            return Err(format!("MBTI type must have 4 letters, got `{s}`"));
        }
        let mut flags = [false; 4];
        for (pair, c) in TraitPair::ALL.iter().zip(chars) {
            let (a, b) = pair.letters();
            flags[pair.index()] = if c == a {
                true
            } else if c == b {
                false
            } else {
                return Err(format!("`{c}` is not a valid letter for {a}/{b} in `{s}`"));
            };
        }
        Ok(Mbti(flags))
    }
}

impl Serialize for Mbti {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mbti {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let t: Mbti = "entj".parse().unwrap();
        assert_eq!(t.to_string(), "ENTJ");
        assert!(t.has(TraitPole {
            pair: TraitPair::ExtraversionIntroversion,
            first: true
        }));
        assert!(t.has(TraitPole {
            pair: TraitPair::SensingIntuition,
            first: false
        }));
        assert!("EXTJ".parse::<Mbti>().is_err());
        assert!("ENT".parse::<Mbti>().is_err());
    }

    #[test]
    fn pole_indices_cover_all() {
        let poles = TraitPole::all();
        assert_eq!(poles.len(), 8);
        for (i, p) in poles.iter().enumerate() {
            assert_eq!(p.index(), i);
        }
        let letters: String = poles.iter().map(|p| p.letter()).collect();
        assert_eq!(letters, "EISNTFJP");
    }
}
