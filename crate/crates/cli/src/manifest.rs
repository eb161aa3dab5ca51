//! `key=value` run manifests and config files.
//!
//! A manifest lists every resolved flag of a run as `flag=value`, followed by
//! `meta.*` entries (command, input hashes, artifacts, wall time). Passing a
//! manifest back through `--config` replays the run: `meta.*` keys are
//! skipped and every other key becomes a flag.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

pub const META_PREFIX: &str = "meta.";

/// Parses `key=value` lines. Blank lines and `#` comments are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got `{line}`", i + 1);
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Expands `--config <file>` (or `--config=<file>`) into flags placed right
/// after the subcommand, so flags given on the command line come later and
/// take precedence.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut files = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            match it.next() {
                Some(path) => files.push(path),
                None => bail!("--config needs a file argument"),
            }
        } else if let Some(path) = arg.strip_prefix("--config=") {
            files.push(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    if files.is_empty() {
        return Ok(rest);
    }
    // binary name, then subcommand, then injected flags
    let split = rest.iter().skip(1).position(|a| !a.starts_with('-')).map_or(rest.len(), |p| p + 2);
    let mut injected = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
        for (k, v) in parse_pairs(&text).with_context(|| format!("in config {path}"))? {
            if k.starts_with(META_PREFIX) {
                continue;
            }
            injected.push(format!("--{}", k.replace('_', "-")));
            injected.push(v);
        }
    }
    let tail = rest.split_off(split.min(rest.len()));
    rest.extend(injected);
    rest.extend(tail);
    Ok(rest)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha256_str(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Resolved flags of one run plus its provenance.
#[derive(Debug, Default)]
pub struct Manifest {
    command: String,
    flags: Vec<(String, String)>,
    inputs: Vec<(String, PathBuf)>,
    artifacts: Vec<(String, PathBuf)>,
    notes: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn flag(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.flags.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(&mut self, name: &str, path: &Path) -> &mut Self {
        self.inputs.push((name.to_string(), path.to_path_buf()));
        self
    }

    pub fn artifact(&mut self, name: &str, path: &Path) -> &mut Self {
        self.artifacts.push((name.to_string(), path.to_path_buf()));
        self
    }

    pub fn note(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.notes.push((key.to_string(), value.to_string()));
        self
    }

    /// The resolved flags alone, one `key=value` per line.
    pub fn flags_text(&self) -> String {
        self.flags.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path, wall_seconds: f64) -> Result<()> {
        let mut out = String::from("# tgc run manifest; replay with `tgc <command> --config <this file>`\n");
        out.push_str(&self.flags_text());
        out.push_str(&format!("{META_PREFIX}command={}\n", self.command));
        out.push_str(&format!("{META_PREFIX}version={}\n", env!("CARGO_PKG_VERSION")));
        for (name, p) in &self.inputs {
            out.push_str(&format!("{META_PREFIX}input.{name}.sha256={}\n", sha256_file(p)?));
        }
        for (name, p) in &self.artifacts {
            out.push_str(&format!("{META_PREFIX}artifact.{name}={}\n", p.display()));
        }
        for (k, v) in &self.notes {
            out.push_str(&format!("{META_PREFIX}{k}={v}\n"));
        }
        out.push_str(&format!("{META_PREFIX}wall_seconds={wall_seconds:.3}\n"));
        fs::write(path, out).with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `<path>.<suffix>`, keeping the full original file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_pairs_and_skips_comments() {
        let pairs = parse_pairs("# c\n\nepochs = 3\nw-node=0\n").unwrap();
        assert_eq!(pairs, vec![("epochs".into(), "3".into()), ("w-node".into(), "0".into())]);
        assert!(parse_pairs("oops").is_err());
    }

    #[test]
    fn config_flags_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "epochs=3\nbatch_size=7\nmeta.command=train\n").unwrap();
        let args = strings(&["tgc", "train", "--config", cfg.to_str().unwrap(), "--epochs", "5"]);
        let out = expand_config(args).unwrap();
        assert_eq!(out, strings(&["tgc", "train", "--epochs", "3", "--batch-size", "7", "--epochs", "5"]));
    }

    #[test]
    fn no_config_is_identity() {
        let args = strings(&["tgc", "eval", "--k", "3"]);
        assert_eq!(expand_config(args.clone()).unwrap(), args);
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar(Path::new("out/z.txt"), "manifest"), PathBuf::from("out/z.txt.manifest"));
    }
}
