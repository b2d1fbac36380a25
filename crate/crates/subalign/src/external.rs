//! Runs a third-party aligner through a shell command template.
//!
//! The corpus is written as `source ||| target` lines, one file per
//! direction. The template may use `{input}`, `{output}` and `{seed}`; the
//! command must write Pharaoh links for the given direction to `{output}`.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use subalign_core::aligner::{Aligner, BidirectionalAlignment};
use subalign_core::bpe::SegmentedCorpus;
use subalign_core::corpus::AlignmentSet;

use crate::formats::{open, read_pharaoh};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalAligner {
    pub template: String,
    pub seed: u64,
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn backend(msg: impl Into<String>) -> subalign_core::Error {
    subalign_core::Error::Backend(msg.into())
}

impl ExternalAligner {
    pub fn new(template: impl Into<String>, seed: u64) -> crate::Result<Self> {
        let template = template.into();
        for p in ["{input}", "{output}"] {
            if !template.contains(p) {
                return Err(crate::Error::Usage(format!("aligner command must contain {p}: {template:?}")));
            }
        }
        Ok(Self { template, seed })
    }

    /// The shell command for one run.
    pub fn command_line(&self, input: &Path, output: &Path) -> String {
        self.template
            .replace("{input}", &shell_quote(&input.to_string_lossy()))
            .replace("{output}", &shell_quote(&output.to_string_lossy()))
            .replace("{seed}", &self.seed.to_string())
    }

    /// Aligns `pairs` in one direction, returning links as (left, right) of each pair.
    fn run(&self, dir: &Path, name: &str, pairs: &[(&[String], &[String])]) -> subalign_core::Result<AlignmentSet> {
        let input = dir.join(format!("{name}.txt"));
        let output = dir.join(format!("{name}.align"));
        let io = |e: std::io::Error| backend(format!("{}: {e}", input.display()));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&input).map_err(io)?);
        for (s, t) in pairs {
            writeln!(w, "{} ||| {}", s.join(" "), t.join(" ")).map_err(io)?;
        }
        w.flush().map_err(io)?;
        drop(w);

        let cmd = self.command_line(&input, &output);
        log::debug!("running {cmd}");
        let out =
            Command::new("sh").arg("-c").arg(&cmd).output().map_err(|e| backend(format!("cannot run sh: {e}")))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(backend(format!("`{cmd}` failed with {}: {}", out.status, stderr.trim())));
        }
        let file = open(&output).map_err(|e| backend(format!("`{cmd}` produced no output: {e}")))?;
        let parsed = read_pharaoh(file).map_err(|e| backend(format!("`{cmd}` wrote malformed output: {e}")))?;
        if parsed.sentences != pairs.len() {
            return Err(backend(format!(
                "`{cmd}` wrote {} lines for {} sentence pairs",
                parsed.sentences,
                pairs.len()
            )));
        }
        for l in parsed.alignment.iter() {
            let (s, t) = pairs[l.sentence];
            if l.source >= s.len() || l.target >= t.len() {
                return Err(backend(format!(
                    "`{cmd}` linked {}-{} on line {} beyond the sentence lengths {}x{}",
                    l.source,
                    l.target,
                    l.sentence + 1,
                    s.len(),
                    t.len()
                )));
            }
        }
        Ok(parsed.alignment)
    }
}

impl Aligner for ExternalAligner {
    fn align(&self, corpus: &SegmentedCorpus) -> subalign_core::Result<BidirectionalAlignment> {
        let dir = tempfile::tempdir().map_err(|e| backend(format!("cannot create a scratch directory: {e}")))?;
        let forward_pairs: Vec<_> = corpus.token_pairs().collect();
        let reverse_pairs: Vec<_> = forward_pairs.iter().map(|&(s, t)| (t, s)).collect();
        let forward = self.run(dir.path(), "forward", &forward_pairs)?;
        let reverse = self.run(dir.path(), "reverse", &reverse_pairs)?.transposed();
        Ok(BidirectionalAlignment { forward, reverse })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_survives_odd_paths() {
        let a = ExternalAligner::new("cat {input} > {output} # {seed}", 3).unwrap();
        let line = a.command_line(Path::new("/tmp/it's here"), Path::new("/o"));
        assert_eq!(line, r"cat '/tmp/it'\''s here' > '/o' # 3");
    }

    #[test]
    fn template_needs_placeholders() {
        assert!(ExternalAligner::new("fast_align -i x", 0).is_err());
    }
}
