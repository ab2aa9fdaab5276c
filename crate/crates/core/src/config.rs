//! Backend configuration, layered as: command-line flags over a JSON config
//! file over `QUOTE_*` environment variables over built-in defaults.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    offline_embedder_from_identity, EmbedderBackend, HttpEmbedder, MockEmbedder, TokenHashEmbedder,
};
use crate::error::{Error, Result};
use crate::http::HttpEndpoint;
use crate::question_gen::{ChatCompletionsGenerator, GeneratorBackend, MockGenerator, RetryPolicy};
use crate::store::IndexManifest;

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_TIMEOUT_SECONDS: u64 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Mock {
        #[serde(default = "default_mock_count")]
        default_count: usize,
        #[serde(default)]
        delay_ms: u64,
    },
    Http {
        base_url: String,
        model: String,
        /// Name of the environment variable holding the API key.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_seconds: u64,
        #[serde(default)]
        temperature: f64,
    },
}

fn default_mock_count() -> usize {
    5
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECONDS
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::Mock {
            default_count: default_mock_count(),
            delay_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Mock {
        dim: usize,
        #[serde(default)]
        salt: u64,
    },
    TokenHash {
        dim: usize,
        #[serde(default)]
        salt: u64,
    },
    Http {
        base_url: String,
        model: String,
        dimension: usize,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_seconds: u64,
    },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::TokenHash {
            dim: DEFAULT_DIM,
            salt: 0,
        }
    }
}

/// One configuration source; unset fields fall through to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub embedder: Option<EmbedderConfig>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub retries: Option<u32>,
    #[serde(default)]
    pub retry_base_ms: Option<u64>,
}

impl ConfigLayer {
    /// Fields set in `upper` win.
    pub fn under(self, upper: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            generator: upper.generator.or(self.generator),
            embedder: upper.embedder.or(self.embedder),
            workers: upper.workers.or(self.workers),
            batch_size: upper.batch_size.or(self.batch_size),
            retries: upper.retries.or(self.retries),
            retry_base_ms: upper.retry_base_ms.or(self.retry_base_ms),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::load(path, format!("bad config: {e}")))
    }

    /// Read `QUOTE_*` variables from `vars`.
    ///
    /// `QUOTE_GENERATOR` is `mock` or `http` (with `QUOTE_GENERATOR_BASE_URL`,
    /// `QUOTE_GENERATOR_MODEL`); `QUOTE_EMBEDDER` is `mock`, `token-hash` or
    /// `http` (with `QUOTE_EMBEDDER_BASE_URL`, `QUOTE_EMBEDDER_MODEL`).
    /// `QUOTE_EMBEDDER_DIM`, `QUOTE_API_KEY_ENV`, `QUOTE_WORKERS`,
    /// `QUOTE_BATCH_SIZE` and `QUOTE_RETRIES` are also read.
    pub fn from_env_map(vars: &HashMap<String, String>) -> Result<Self> {
        let get = |k: &str| vars.get(k).map(String::as_str).filter(|v| !v.is_empty());
        let need = |k: &str| {
            get(k)
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidInput(format!("{k} must be set")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: Option<&str>) -> Result<Option<T>> {
            v.map(|v| {
                v.parse()
                    .map_err(|_| Error::InvalidInput(format!("{k}={v:?} is not a number")))
            })
            .transpose()
        }
        let api_key_env = get("QUOTE_API_KEY_ENV").map(str::to_string);

        let generator = match get("QUOTE_GENERATOR") {
            None => None,
            Some("mock") => Some(GeneratorConfig::default()),
            Some("http") => Some(GeneratorConfig::Http {
                base_url: need("QUOTE_GENERATOR_BASE_URL")?,
                model: need("QUOTE_GENERATOR_MODEL")?,
                api_key_env: api_key_env.clone(),
                timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
                temperature: 0.0,
            }),
            Some(other) => {
                return Err(Error::InvalidInput(format!("QUOTE_GENERATOR={other:?} is unknown")))
            }
        };
        let dim = num::<usize>("QUOTE_EMBEDDER_DIM", get("QUOTE_EMBEDDER_DIM"))?;
        let embedder = match get("QUOTE_EMBEDDER") {
            None => None,
            Some("mock") => Some(EmbedderConfig::Mock {
                dim: dim.unwrap_or(DEFAULT_DIM),
                salt: 0,
            }),
            Some("token-hash") => Some(EmbedderConfig::TokenHash {
                dim: dim.unwrap_or(DEFAULT_DIM),
                salt: 0,
            }),
            Some("http") => Some(EmbedderConfig::Http {
                base_url: need("QUOTE_EMBEDDER_BASE_URL")?,
                model: need("QUOTE_EMBEDDER_MODEL")?,
                dimension: dim.ok_or_else(|| {
                    Error::InvalidInput("QUOTE_EMBEDDER_DIM must be set for http".into())
                })?,
                api_key_env,
                timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            }),
            Some(other) => {
                return Err(Error::InvalidInput(format!("QUOTE_EMBEDDER={other:?} is unknown")))
            }
        };
        Ok(ConfigLayer {
            generator,
            embedder,
            workers: num("QUOTE_WORKERS", get("QUOTE_WORKERS"))?,
            batch_size: num("QUOTE_BATCH_SIZE", get("QUOTE_BATCH_SIZE"))?,
            retries: num("QUOTE_RETRIES", get("QUOTE_RETRIES"))?,
            retry_base_ms: None,
        })
    }

    pub fn from_env() -> Result<Self> {
        Self::from_env_map(&std::env::vars().collect())
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub generator: GeneratorConfig,
    pub embedder: EmbedderConfig,
    pub workers: usize,
    pub batch_size: usize,
    pub retries: u32,
    pub retry_base_ms: u64,
}

impl Settings {
    /// Resolve `flags` over `file` over `env` over defaults.
    pub fn resolve(flags: ConfigLayer, file: Option<ConfigLayer>, env: ConfigLayer) -> Result<Self> {
        let merged = env.under(file.unwrap_or_default()).under(flags);
        let defaults = RetryPolicy::default();
        let s = Settings {
            generator: merged.generator.unwrap_or_default(),
            embedder: merged.embedder.unwrap_or_default(),
            workers: merged.workers.unwrap_or_else(default_workers),
            batch_size: merged.batch_size.unwrap_or(crate::embedding::DEFAULT_BATCH_SIZE),
            retries: merged.retries.unwrap_or(defaults.retries),
            retry_base_ms: merged
                .retry_base_ms
                .unwrap_or(defaults.base_delay.as_millis() as u64),
        };
        if s.workers == 0 || s.batch_size == 0 {
            return Err(Error::InvalidInput("workers and batch_size must be at least 1".into()));
        }
        Ok(s)
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            retries: self.retries,
            base_delay: Duration::from_millis(self.retry_base_ms),
        }
    }
}

/// Logical CPU count, or 1 when unknown.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn api_key(var: &Option<String>) -> Result<Option<String>> {
    match var {
        None => Ok(None),
        Some(name) => std::env::var(name)
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("environment variable {name} is not set"))),
    }
}

pub fn build_generator(config: &GeneratorConfig) -> Result<Arc<dyn GeneratorBackend>> {
    Ok(match config {
        GeneratorConfig::Mock {
            default_count,
            delay_ms,
        } => Arc::new(
            MockGenerator::new(*default_count).with_delay(Duration::from_millis(*delay_ms)),
        ),
        GeneratorConfig::Http {
            base_url,
            model,
            api_key_env,
            timeout_seconds,
            temperature,
        } => Arc::new(ChatCompletionsGenerator::new(
            HttpEndpoint::new(
                base_url.clone(),
                model.clone(),
                api_key(api_key_env)?,
                Duration::from_secs(*timeout_seconds),
            ),
            *temperature,
        )),
    })
}

pub fn build_embedder(config: &EmbedderConfig) -> Result<Box<dyn EmbedderBackend>> {
    Ok(match config {
        EmbedderConfig::Mock { dim, salt } => {
            if *dim == 0 {
                return Err(Error::InvalidInput("embedding dimension must be positive".into()));
            }
            Box::new(MockEmbedder::new(*dim, *salt))
        }
        EmbedderConfig::TokenHash { dim, salt } => {
            if *dim == 0 {
                return Err(Error::InvalidInput("embedding dimension must be positive".into()));
            }
            Box::new(TokenHashEmbedder::new(*dim, *salt))
        }
        EmbedderConfig::Http {
            base_url,
            model,
            dimension,
            api_key_env,
            timeout_seconds,
        } => Box::new(HttpEmbedder::new(
            HttpEndpoint::new(
                base_url.clone(),
                model.clone(),
                api_key(api_key_env)?,
                Duration::from_secs(*timeout_seconds),
            ),
            *dimension,
        )),
    })
}

/// The embedder to query an index with: offline embedders are rebuilt from
/// the manifest, remote ones come from `configured` and must match it.
pub fn embedder_for_index(
    manifest: &IndexManifest,
    configured: Option<&EmbedderConfig>,
) -> Result<Box<dyn EmbedderBackend>> {
    if let Some(e) = offline_embedder_from_identity(&manifest.embedder_id) {
        return Ok(e);
    }
    let config = configured.ok_or_else(|| {
        Error::ManifestMismatch(format!(
            "index was built with {:?}; configure a matching embedder",
            manifest.embedder_id
        ))
    })?;
    let e = build_embedder(config)?;
    if e.identity() != manifest.embedder_id {
        return Err(Error::ManifestMismatch(format!(
            "index embedder {:?} differs from configured {:?}",
            manifest.embedder_id,
            e.identity()
        )));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> HashMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn precedence_flags_file_env_default() {
        let e = ConfigLayer::from_env_map(&env(&[("QUOTE_WORKERS", "2"), ("QUOTE_RETRIES", "7")]))
            .unwrap();
        let file = ConfigLayer {
            workers: Some(3),
            batch_size: Some(10),
            ..Default::default()
        };
        let flags = ConfigLayer {
            workers: Some(4),
            ..Default::default()
        };
        let s = Settings::resolve(flags, Some(file), e).unwrap();
        assert_eq!((s.workers, s.batch_size, s.retries), (4, 10, 7));
        assert_eq!(s.embedder, EmbedderConfig::default());
    }

    #[test]
    fn env_http_requires_url() {
        assert!(ConfigLayer::from_env_map(&env(&[("QUOTE_GENERATOR", "http")])).is_err());
        assert!(ConfigLayer::from_env_map(&env(&[("QUOTE_WORKERS", "x")])).is_err());
    }

    #[test]
    fn config_file_json() {
        let layer: ConfigLayer = serde_json::from_str(
            r#"{"embedder": {"provider": "mock", "dim": 32, "salt": 4}, "workers": 2}"#,
        )
        .unwrap();
        assert_eq!(layer.embedder, Some(EmbedderConfig::Mock { dim: 32, salt: 4 }));
        assert!(serde_json::from_str::<ConfigLayer>(r#"{"wrokers": 2}"#).is_err());
    }

    #[test]
    fn offline_embedder_rebuilt_from_manifest() {
        let m = IndexManifest::new("mock-hash:dim=16:salt=3", 16);
        let e = embedder_for_index(&m, None).unwrap();
        assert_eq!(e.identity(), "mock-hash:dim=16:salt=3");
        let m = IndexManifest::new("remote-model", 16);
        assert!(matches!(embedder_for_index(&m, None), Err(Error::ManifestMismatch(_))));
    }
}
