use std::collections::BTreeSet;
use std::path::Path;

use crate::diversity::DiversityError;

const BUILTIN_V1: &str = include_str!("../data/function_words_v1.txt");

/// Closed-class words used by the function-word diversity signal.
///
/// The on-disk format is plain UTF-8, one word per line. Blank lines and
/// lines starting with `#` are ignored; entries are lowercased on load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionWordLexicon {
    words: BTreeSet<String>,
    version: String,
}

impl FunctionWordLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_V1, "builtin-v1").expect("builtin lexicon is non-empty")
    }

    pub fn parse(contents: &str, version: impl Into<String>) -> Result<Self, DiversityError> {
        let words: BTreeSet<String> = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Err(DiversityError::EmptyLexicon);
        }
        Ok(Self {
            words,
            version: version.into(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, DiversityError> {
        let contents = std::fs::read_to_string(path)
            .map_err(|e| DiversityError::Io(format!("{}: {e}", path.display())))?;
        let version = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".to_string());
        Self::parse(&contents, version)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn version(&self) -> &str {
        &self.version
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
}

impl Default for FunctionWordLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_is_lowercase_and_sized() {
        let lex = FunctionWordLexicon::builtin();
        assert!(lex.len() >= 140, "got {}", lex.len());
        assert!(lex.words().all(|w| w == w.to_lowercase()));
        assert!(lex.contains("the") && lex.contains("because") && lex.contains("should"));
        assert!(!lex.contains("cat"));
    }

    #[test]
    fn parse_skips_comments_and_lowercases() {
        let lex = FunctionWordLexicon::parse("# c\nThe\n\n  AND \n", "t").unwrap();
        assert_eq!(lex.words().collect::<Vec<_>>(), vec!["and", "the"]);
        assert_eq!(lex.version(), "t");
    }

    #[test]
    fn empty_lexicon_rejected() {
        assert!(matches!(
            FunctionWordLexicon::parse("# nothing\n", "x"),
            Err(DiversityError::EmptyLexicon)
        ));
    }
}
