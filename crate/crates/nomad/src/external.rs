//! Real codecs run as a subprocess.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use nomad_core::degrade::ExternalEncoder;
use nomad_core::{Error as CoreError, Waveform};

use crate::wav;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Runs a command template such as
/// `sh -c "ffmpeg -y -i {in} -b:a {kbps}k t.mp3 && ffmpeg -y -i t.mp3 {out}"`.
/// The template is split on whitespace (double quotes group words) and the
/// placeholders `{in}`, `{out}` and `{kbps}` are substituted per word.
#[derive(Debug, Clone)]
pub struct CommandEncoder {
    words: Vec<String>,
    scratch: PathBuf,
}

impl CommandEncoder {
    pub fn new(template: &str) -> Result<Self, CoreError> {
        let words = split_words(template);
        if words.is_empty() {
            return Err(CoreError::MissingEncoder);
        }
        Ok(Self { words, scratch: std::env::temp_dir() })
    }

    fn scratch_path(&self, tag: &str) -> PathBuf {
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        self.scratch.join(format!("nomad-{}-{id}-{tag}.wav", std::process::id()))
    }
}

fn split_words(s: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut any = false;
    for ch in s.chars() {
        match ch {
            '"' => {
                quoted = !quoted;
                any = true;
            }
            c if c.is_whitespace() && !quoted => {
                if any {
                    words.push(std::mem::take(&mut cur));
                    any = false;
                }
            }
            c => {
                cur.push(c);
                any = true;
            }
        }
    }
    if any {
        words.push(cur);
    }
    words
}

impl ExternalEncoder for CommandEncoder {
    fn encode(&self, w: &Waveform, kbps: f64) -> Result<Waveform, CoreError> {
        let input = self.scratch_path("in");
        let output = self.scratch_path("out");
        let cleanup = || {
            let _ = std::fs::remove_file(&input);
            let _ = std::fs::remove_file(&output);
        };
        wav::write_wav(&input, w).map_err(|e| CoreError::EncoderFailed(e.to_string()))?;
        let kbps_s = format!("{kbps}");
        let args: Vec<String> = self
            .words
            .iter()
            .map(|a| {
                a.replace("{in}", &input.to_string_lossy())
                    .replace("{out}", &output.to_string_lossy())
                    .replace("{kbps}", &kbps_s)
            })
            .collect();
        let status = Command::new(&args[0]).args(&args[1..]).output();
        let result = match status {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CoreError::MissingEncoder),
            Err(e) => Err(CoreError::EncoderFailed(e.to_string())),
            Ok(out) if !out.status.success() => Err(CoreError::EncoderFailed(format!(
                "`{}` exited with {}: {}",
                args[0],
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            ))),
            Ok(_) => wav::load_wav(&output).map_err(|e| CoreError::EncoderFailed(e.to_string())),
        };
        cleanup();
        result
    }
}
