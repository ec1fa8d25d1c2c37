//! Minimal RIFF/WAVE reader and writer for 16-bit little-endian mono PCM.

use std::fs;
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::WavHeader("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::WavHeader(format!("chunk `{}` overruns file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::WavHeader("fmt chunk shorter than 16 bytes".into()));
                }
                let u16_at = |o: usize| u16::from_le_bytes([body[o], body[o + 1]]);
                let mut tag = u16_at(0);
                let channels = u16_at(2);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16_at(14);
                if tag == FORMAT_EXTENSIBLE && body.len() >= 26 {
                    tag = u16_at(24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    fmt.ok_or_else(|| Error::WavHeader("data chunk before fmt chunk".into()))?;
                if tag != FORMAT_PCM || bits != 16 {
                    return Err(Error::WavEncoding { format_tag: tag, bits });
                }
                if channels != 1 {
                    return Err(Error::WavChannels(channels));
                }
                if rate == 0 {
                    return Err(Error::WavHeader("sample rate is zero".into()));
                }
                if !body.len().is_multiple_of(2) {
                    return Err(Error::WavHeader("data chunk has odd byte count".into()));
                }
                let samples = body
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }
    Err(Error::WavHeader("no data chunk".into()))
}

/// Encodes samples as 16-bit PCM, clamping to the representable range.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(w)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(tag: u16, channels: u16, bits: u16) -> Vec<u8> {
        let w = Waveform::new(vec![0.0; 4], 16000).unwrap();
        let mut b = encode_wav(&w);
        b[20..22].copy_from_slice(&tag.to_le_bytes());
        b[22..24].copy_from_slice(&channels.to_le_bytes());
        b[34..36].copy_from_slice(&bits.to_le_bytes());
        b
    }

    #[test]
    fn distinct_diagnostics() {
        assert!(matches!(parse_wav(b"RIFX0000WAVE"), Err(Error::WavHeader(_))));
        assert!(matches!(parse_wav(&header(3, 1, 32)), Err(Error::WavEncoding { format_tag: 3, bits: 32 })));
        assert!(matches!(parse_wav(&header(1, 1, 8)), Err(Error::WavEncoding { format_tag: 1, bits: 8 })));
        assert!(matches!(parse_wav(&header(1, 2, 16)), Err(Error::WavChannels(2))));
        let mut truncated = header(1, 1, 16);
        truncated.truncate(46);
        assert!(matches!(parse_wav(&truncated), Err(Error::WavHeader(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let w = Waveform::new(vec![0.5, -0.25], 8000).unwrap();
        let plain = encode_wav(&w);
        let mut b = plain[..36].to_vec();
        b.extend_from_slice(b"LIST");
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(&[1, 2, 3, 0]);
        b.extend_from_slice(&plain[36..]);
        let back = parse_wav(&b).unwrap();
        assert_eq!(back.samples, vec![0.5, -0.25]);
        assert_eq!(back.sample_rate_hz, 8000);
    }
}
