/// Lowercase, split on Unicode whitespace, and trim non-alphanumeric
/// characters from both ends of each token. Tokens that trim to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}
