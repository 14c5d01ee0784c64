use serde::{Deserialize, Serialize};

/// Splits raw post text into lowercase alphanumeric tokens.
///
/// Whitespace-delimited chunks that look like URLs or @mentions are removed
/// before the remaining text is split on every non-alphanumeric character.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_mentions: bool,
    pub min_token_len: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            lowercase: true,
            strip_urls: true,
            strip_mentions: true,
            min_token_len: 1,
        }
    }
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            if self.strip_urls && is_url(chunk) {
                continue;
            }
            if self.strip_mentions && chunk.starts_with('@') {
                continue;
            }
            for tok in chunk.split(|c: char| !c.is_alphanumeric()) {
                if tok.chars().count() < self.min_token_len.max(1) {
                    continue;
                }
                out.push(if self.lowercase {
                    tok.to_lowercase()
                } else {
                    tok.to_string()
                });
            }
        }
        out
    }

    /// Tokens of several documents treated as one concatenated document.
    pub fn tokenize_all<S: AsRef<str>>(&self, docs: &[S]) -> Vec<String> {
        docs.iter()
            .flat_map(|d| self.tokenize(d.as_ref()))
            .collect()
    }
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}
