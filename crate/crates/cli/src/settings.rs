//! Option resolution: command-line flags, then `RAMP_*` environment
//! variables, then the TOML config file, then built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Deserialize;

use ramp_core::llm::LiveConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderChoice {
    Live,
    Scripted,
}

/// Options shared by every subcommand. Clap fills each from its flag or,
/// failing that, its environment variable.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with defaults for any option below.
    #[arg(long, env = "RAMP_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "RAMP_TABLE", global = true)]
    pub table: Option<PathBuf>,
    /// JSON schema sidecar for the table.
    #[arg(long, env = "RAMP_SCHEMA", global = true)]
    pub schema: Option<PathBuf>,
    /// Directory holding `memory.jsonl`.
    #[arg(long, env = "RAMP_MEMORY_DIR", global = true)]
    pub memory_dir: Option<PathBuf>,
    #[arg(long, value_enum, env = "RAMP_PROVIDER", global = true)]
    pub provider: Option<ProviderChoice>,
    /// Scripted responses (JSONL) for `--provider scripted`.
    #[arg(long, env = "RAMP_TRANSCRIPT", global = true)]
    pub transcript: Option<PathBuf>,
    /// Chat-completions endpoint for `--provider live`.
    #[arg(long, env = "RAMP_LLM_ENDPOINT", global = true)]
    pub endpoint: Option<String>,
    #[arg(long, env = "RAMP_MODEL", global = true)]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long, env = "RAMP_API_KEY_ENV", global = true)]
    pub api_key_env: Option<String>,
    #[arg(long, env = "RAMP_LLM_TIMEOUT_SECS", global = true)]
    pub timeout_secs: Option<u64>,
    #[arg(long, env = "RAMP_LLM_MAX_RETRIES", global = true)]
    pub max_retries: Option<usize>,
}

/// Server options, same precedence as [`CommonArgs`].
#[derive(Debug, Clone, Default, Args)]
pub struct ServeArgs {
    #[arg(long, env = "RAMP_HOST")]
    pub host: Option<String>,
    #[arg(long, env = "RAMP_PORT")]
    pub port: Option<u16>,
    /// Idle sessions are dropped after this many seconds.
    #[arg(long, env = "RAMP_SESSION_TTL_SECS")]
    pub session_ttl_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub table: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub memory_dir: Option<PathBuf>,
    pub provider: Option<ProviderChoice>,
    pub transcript: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<usize>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub session_ttl_secs: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub table: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub memory_dir: Option<PathBuf>,
    pub provider: ProviderChoice,
    pub transcript: Option<PathBuf>,
    pub live: LiveConfig,
    pub host: String,
    pub port: u16,
    pub session_ttl: Duration,
}

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_TTL_SECS: u64 = 3600;

impl Settings {
    /// Merge flags/env with the config file named by `--config`, if any.
    pub fn resolve(common: &CommonArgs, serve: &ServeArgs) -> anyhow::Result<Self> {
        let file = match &common.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Self::merge(common, serve, file))
    }

    pub fn merge(common: &CommonArgs, serve: &ServeArgs, file: FileConfig) -> Self {
        let c = common.clone();
        let defaults = LiveConfig::default();
        let transcript = c.transcript.or(file.transcript);
        // A transcript alone implies replay.
        let provider = c.provider.or(file.provider).unwrap_or(if transcript.is_some() {
            ProviderChoice::Scripted
        } else {
            ProviderChoice::Live
        });
        Settings {
            table: c.table.or(file.table),
            schema: c.schema.or(file.schema),
            memory_dir: c.memory_dir.or(file.memory_dir),
            provider,
            transcript,
            live: LiveConfig {
                endpoint: c.endpoint.or(file.endpoint).unwrap_or(defaults.endpoint),
                api_key_env: c.api_key_env.or(file.api_key_env).unwrap_or(defaults.api_key_env),
                model_id: c.model.or(file.model).unwrap_or(defaults.model_id),
                timeout_secs: c.timeout_secs.or(file.timeout_secs).unwrap_or(defaults.timeout_secs),
                max_retries: c.max_retries.or(file.max_retries).unwrap_or(defaults.max_retries),
                ..defaults
            },
            host: serve.host.clone().or(file.host).unwrap_or_else(|| "127.0.0.1".into()),
            port: serve.port.or(file.port).unwrap_or(DEFAULT_PORT),
            session_ttl: Duration::from_secs(serve.session_ttl_secs.or(file.session_ttl_secs).unwrap_or(DEFAULT_TTL_SECS)),
        }
    }

    pub fn memory_file(&self) -> Option<PathBuf> {
        self.memory_dir.as_ref().map(|d| d.join("memory.jsonl"))
    }

    pub fn model_id(&self) -> &str {
        match self.provider {
            ProviderChoice::Live => &self.live.model_id,
            ProviderChoice::Scripted => "scripted",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file() -> FileConfig {
        toml::from_str(
            r#"
            table = "file.csv"
            schema = "file.json"
            model = "file-model"
            port = 9000
            session_ttl_secs = 60
            "#,
        )
        .unwrap()
    }

    #[test]
    fn flags_beat_file_and_file_beats_defaults() {
        let common = CommonArgs {
            table: Some("flag.csv".into()),
            ..Default::default()
        };
        let serve = ServeArgs {
            port: Some(7000),
            ..Default::default()
        };
        let s = Settings::merge(&common, &serve, file());
        assert_eq!(s.table.unwrap(), PathBuf::from("flag.csv"));
        assert_eq!(s.schema.unwrap(), PathBuf::from("file.json"));
        assert_eq!(s.live.model_id, "file-model");
        assert_eq!(s.port, 7000);
        assert_eq!(s.session_ttl, Duration::from_secs(60));
        assert_eq!(s.host, "127.0.0.1");
        assert_eq!(s.provider, ProviderChoice::Live);
    }

    #[test]
    fn transcript_implies_scripted() {
        let common = CommonArgs {
            transcript: Some("t.jsonl".into()),
            ..Default::default()
        };
        let s = Settings::merge(&common, &ServeArgs::default(), FileConfig::default());
        assert_eq!(s.provider, ProviderChoice::Scripted);
        assert_eq!(s.session_ttl, Duration::from_secs(DEFAULT_TTL_SECS));
        let explicit = CommonArgs {
            provider: Some(ProviderChoice::Live),
            ..common
        };
        let s = Settings::merge(&explicit, &ServeArgs::default(), FileConfig::default());
        assert_eq!(s.provider, ProviderChoice::Live);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("tabel = \"x\"").is_err());
    }
}
