//! Text normalization for utterances and question strings.

const STRIP: &[char] = &['.', ',', '?', '!', ';', ':'];

/// Lowercase, drop the punctuation strip set, split on whitespace.
/// Empty tokens disappear, so `""` and `"..."` both yield an empty list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(STRIP, "")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Question templates are already normalized; they split on whitespace only,
/// keeping the trailing "?" as a token so task files reproduce the template
/// text exactly.
pub fn question_tokens(question: &str) -> Vec<String> {
    question.split_whitespace().map(str::to_string).collect()
}
