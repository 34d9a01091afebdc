use std::path::{Path, PathBuf};

use thiserror::Error;
use tokenizers::Tokenizer;

#[derive(Debug, Error)]
#[error("cannot load tokenizer {path}: {message}")]
pub struct TokenizerError {
    pub path: PathBuf,
    pub message: String,
}

/// Token counter: whitespace runs, or a `tokenizer.json` vocabulary file.
#[derive(Clone)]
pub enum TokenizerAdapter {
    Whitespace,
    Vocabulary { id: String, tokenizer: Box<Tokenizer> },
}

impl std::fmt::Debug for TokenizerAdapter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

impl TokenizerAdapter {
    /// `"whitespace"` or a path to a `tokenizer.json`.
    pub fn load(spec: &str) -> Result<Self, TokenizerError> {
        if spec == "whitespace" {
            Ok(TokenizerAdapter::Whitespace)
        } else {
            Self::from_file(Path::new(spec))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, TokenizerError> {
        let tokenizer = Tokenizer::from_file(path).map_err(|e| TokenizerError {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(TokenizerAdapter::Vocabulary {
            id: path.display().to_string(),
            tokenizer: Box::new(tokenizer),
        })
    }

    pub fn id(&self) -> String {
        match self {
            TokenizerAdapter::Whitespace => "whitespace".into(),
            TokenizerAdapter::Vocabulary { id, .. } => id.clone(),
        }
    }

    /// Number of tokens, without special tokens.
    pub fn count_tokens(&self, text: &str) -> usize {
        match self {
            TokenizerAdapter::Whitespace => text.split_whitespace().count(),
            TokenizerAdapter::Vocabulary { tokenizer, id } => match tokenizer.encode(text, false) {
                Ok(enc) => enc.len(),
                Err(e) => {
                    log::warn!("tokenizer {id} failed on input, counting whitespace runs: {e}");
                    text.split_whitespace().count()
                }
            },
        }
    }
}
