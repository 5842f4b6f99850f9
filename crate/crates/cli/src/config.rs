//! Flat `key = value` configuration with optional `[section]` headers. A
//! key inside a section applies only to the subcommand of the same name;
//! bare keys apply everywhere. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Result};

#[derive(Clone, Debug, Default)]
pub struct FileSettings {
    map: BTreeMap<String, String>,
}

impl FileSettings {
    pub fn empty() -> Self {
        FileSettings::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow!("reading config {}: {}", path.display(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("config line {}: unterminated section", lineno + 1))?
                    .trim();
                if name.is_empty() {
                    return Err(anyhow!("config line {}: empty section name", lineno + 1));
                }
                section = format!("{}.", name);
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", lineno + 1))?;
            let key = format!("{}{}", section, k.trim());
            map.insert(key, v.trim().to_string());
        }
        Ok(FileSettings { map })
    }

    /// Value for `key` in `section` scope, falling back to the bare key.
    pub fn lookup(&self, section: &str, key: &str) -> Option<&str> {
        self.map
            .get(&format!("{}.{}", section, key))
            .or_else(|| self.map.get(key))
            .map(|s| s.as_str())
    }
}

/// CLI value if given, else config value (section scope first).
pub fn resolve(
    cli: Option<&String>,
    cfg: &FileSettings,
    section: &str,
    key: &str,
) -> Option<String> {
    cli.cloned().or_else(|| cfg.lookup(section, key).map(String::from))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_scope_keys_and_bare_keys_apply_everywhere() {
        let cfg = FileSettings::parse(
            "# defaults\nsystem = ho2d\ntol = 1e-8\n\n[verify]\ntol = 1e-10\nmode = standard\n",
        )
        .unwrap();
        assert_eq!(cfg.lookup("verify", "tol"), Some("1e-10"));
        assert_eq!(cfg.lookup("integrate", "tol"), Some("1e-8"));
        assert_eq!(cfg.lookup("integrate", "system"), Some("ho2d"));
        assert_eq!(cfg.lookup("verify", "mode"), Some("standard"));
        assert_eq!(cfg.lookup("integrate", "mode"), None);
    }

    #[test]
    fn cli_wins_over_file() {
        let cfg = FileSettings::parse("tol = 1e-8\n").unwrap();
        let cli = Some("1e-4".to_string());
        assert_eq!(resolve(cli.as_ref(), &cfg, "verify", "tol").unwrap(), "1e-4");
        assert_eq!(resolve(None, &cfg, "verify", "tol").unwrap(), "1e-8");
        assert_eq!(resolve(None, &cfg, "verify", "mode"), None);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(FileSettings::parse("just words\n").is_err());
        assert!(FileSettings::parse("[open\n").is_err());
    }
}
