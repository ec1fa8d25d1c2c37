//! Tab-separated utterance lists: `id<TAB>wav_path<TAB>text`, one per line.
//! Relative WAV paths are resolved against the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRef {
    pub id: String,
    pub wav_path: PathBuf,
    pub text: String,
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<UtteranceRef>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, wav, text] = fields[..] else {
            return Err(Error::Manifest(format!("line {}: expected 3 tab-separated fields, got {}", n + 1, fields.len())));
        };
        if id.is_empty() {
            return Err(Error::Manifest(format!("line {}: empty utterance id", n + 1)));
        }
        if !seen.insert(id.to_owned()) {
            return Err(Error::Manifest(format!("line {}: duplicate utterance id `{id}`", n + 1)));
        }
        let path = PathBuf::from(wav);
        let wav_path = if path.is_absolute() { path } else { base_dir.join(path) };
        out.push(UtteranceRef { id: id.to_owned(), wav_path, text: text.to_owned() });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRef>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Writes records with WAV paths relative to the manifest's directory when possible.
pub fn write_manifest(path: impl AsRef<Path>, utts: &[UtteranceRef]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut text = String::new();
    for u in utts {
        if u.id.contains(['\t', '\n']) || u.text.contains(['\t', '\n']) {
            return Err(Error::Manifest(format!("utterance `{}` contains a tab or newline", u.id)));
        }
        let wav = u.wav_path.strip_prefix(base).unwrap_or(&u.wav_path);
        text.push_str(&format!("{}\t{}\t{}\n", u.id, wav.display(), u.text));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let m = parse_manifest("u1\twavs/u1.wav\tabc\n\nu2\t/abs/u2.wav\tb a\n", Path::new("/d")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].wav_path, PathBuf::from("/d/wavs/u1.wav"));
        assert_eq!(m[1].wav_path, PathBuf::from("/abs/u2.wav"));
        assert_eq!(m[1].text, "b a");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_manifest("u1\tx.wav\n", Path::new(".")).is_err());
        assert!(parse_manifest("u1\tx.wav\ta\nu1\ty.wav\tb\n", Path::new(".")).is_err());
    }
}
