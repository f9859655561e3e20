/// Lowercases, splits punctuation into standalone tokens, and splits on whitespace.
pub fn tokenize(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in raw.chars() {
        if c.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if is_punct(c) {
            flush(&mut current, &mut tokens);
            tokens.push(c.to_lowercase().collect());
        } else {
            current.extend(c.to_lowercase());
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("Great toy!"), vec!["great", "toy", "!"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b"), vec!["a", "b"]);
        assert_eq!(tokenize("  Don't\tstop... "), vec!["don", "'", "t", "stop", ".", ".", "."]);
    }

    #[test]
    fn tokenize_is_idempotent_on_joined_output() {
        let t = tokenize("It's GREAT, really (5/5)!");
        assert_eq!(tokenize(&detokenize(&t)), t);
    }
}
