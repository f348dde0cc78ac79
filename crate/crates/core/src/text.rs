//! Tokenization shared by the keyword matcher and the Naive Bayes featurizer.

/// Lowercased tokens: maximal runs of Unicode alphanumeric characters.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_non_alphanumeric_runs() {
        assert_eq!(tokens("Global-warming, CO2!"), vec!["global", "warming", "co2"]);
        assert_eq!(tokens("  "), Vec::<String>::new());
        assert_eq!(tokens("Ökosystem café"), vec!["ökosystem", "café"]);
    }
}
