use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusRecord;

/// Chat markup expected by a model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatFamily {
    /// `User:<image>…<end_of_utterance>` / `Assistant:…<end_of_utterance>`
    IdeficsStyle,
    /// `<|user|>` / `<|image_1|>` / `<|assistant|>` with `<|end|>` terminators
    Phi3Style,
}

impl ChatFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ChatFamily::IdeficsStyle => "idefics_style",
            ChatFamily::Phi3Style => "phi3_style",
        }
    }
}

impl fmt::Display for ChatFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChatFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "idefics_style" => Ok(ChatFamily::IdeficsStyle),
            "phi3_style" => Ok(ChatFamily::Phi3Style),
            other => Err(format!("unsupported chat family {other:?} (expected idefics_style or phi3_style)")),
        }
    }
}

const MARKER_STARTS: [&str; 3] = ["<image>", "<end_of_utterance>", "<|"];

/// Make payload text marker-free: `&` becomes `&amp;` and a `<` opening any template
/// marker becomes `&lt;`. Text without markers or ampersands is unchanged.
pub fn escape_payload(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, c) in text.char_indices() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' if MARKER_STARTS.iter().any(|m| text[i..].starts_with(m)) => out.push_str("&lt;"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_payload(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(t) = tail.strip_prefix("&amp;") {
            out.push('&');
            rest = t;
        } else if let Some(t) = tail.strip_prefix("&lt;") {
            out.push('<');
            rest = t;
        } else {
            out.push('&');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

/// One training string. The image marker appears in the first user turn only.
pub fn render_record(record: &CorpusRecord, family: ChatFamily) -> String {
    let has_image = record.image_ref.is_some();
    let mut out = String::new();
    for (i, (q, a)) in record.turns().enumerate() {
        let (q, a) = (escape_payload(q), escape_payload(a));
        let image = i == 0 && has_image;
        if i > 0 {
            out.push('\n');
        }
        match family {
            ChatFamily::IdeficsStyle => {
                out.push_str("User:");
                if image {
                    out.push_str("<image>");
                }
                out.push_str(&format!("{q}<end_of_utterance>\nAssistant:{a}<end_of_utterance>"));
            }
            ChatFamily::Phi3Style => {
                out.push_str("<|user|>\n");
                if image {
                    out.push_str("<|image_1|>\n");
                }
                out.push_str(&format!("{q}<|end|>\n<|assistant|>\n{a}<|end|>"));
            }
        }
    }
    out
}

pub fn render_chat(records: &[CorpusRecord], family: ChatFamily) -> Vec<String> {
    records.iter().map(|r| render_record(r, family)).collect()
}

/// Inverse of [`render_record`]: `(has_image, turns)`.
pub fn parse_chat(text: &str, family: ChatFamily) -> Result<(bool, Vec<(String, String)>), String> {
    let (user, image, assistant, end) = match family {
        ChatFamily::IdeficsStyle => ("User:", "<image>", "Assistant:", "<end_of_utterance>"),
        ChatFamily::Phi3Style => ("<|user|>\n", "<|image_1|>\n", "<|assistant|>\n", "<|end|>"),
    };
    let mut turns = Vec::new();
    let mut has_image = false;
    let mut rest = text;
    while !rest.is_empty() {
        if !turns.is_empty() {
            rest = rest.strip_prefix('\n').ok_or("missing newline between turns")?;
        }
        rest = rest.strip_prefix(user).ok_or("expected user marker")?;
        if turns.is_empty() {
            if let Some(r) = rest.strip_prefix(image) {
                has_image = true;
                rest = r;
            }
        }
        let q_end = rest.find(end).ok_or("unterminated user turn")?;
        let q = unescape_payload(&rest[..q_end]);
        rest = rest[q_end + end.len()..].strip_prefix('\n').ok_or("missing newline before assistant")?;
        rest = rest.strip_prefix(assistant).ok_or("expected assistant marker")?;
        let a_end = rest.find(end).ok_or("unterminated assistant turn")?;
        let a = unescape_payload(&rest[..a_end]);
        rest = &rest[a_end + end.len()..];
        turns.push((q, a));
    }
    if turns.is_empty() {
        return Err("no turns".into());
    }
    Ok((has_image, turns))
}
