use unicode_normalization::UnicodeNormalization;

/// Normalise one raw sentence.
///
/// Text is NFC-composed and lowercased, every codepoint that is neither a
/// letter nor whitespace is dropped (digits, punctuation, apostrophes,
/// hyphens, symbols), and whitespace runs collapse to a single space.
pub fn preprocess(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for ch in lowered.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else if ch.is_alphabetic() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    // Dropping a codepoint can leave a base letter adjacent to an
    // alphabetic combining mark, so recompose once more.
    out.nfc().collect()
}
