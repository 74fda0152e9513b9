use std::sync::Arc;

use anyhow::Context;

use ramp_core::eval::ScriptBook;
use ramp_core::llm::{LiveProvider, LlmProvider};

use crate::settings::{ProviderChoice, Settings};

/// Hands each session its model. Live sessions share one client (and its
/// in-flight cap); scripted sessions each get a fresh replay.
#[derive(Clone)]
pub enum ProviderSource {
    Live(Arc<LiveProvider>),
    Scripted(Arc<ScriptBook>),
}

impl ProviderSource {
    /// Must be called outside an async runtime: the live client owns a
    /// blocking HTTP runtime of its own.
    pub fn from_settings(s: &Settings) -> anyhow::Result<Self> {
        match s.provider {
            ProviderChoice::Live => Ok(ProviderSource::Live(Arc::new(
                LiveProvider::new(s.live.clone()).context("configuring live provider")?,
            ))),
            ProviderChoice::Scripted => {
                let path = s
                    .transcript
                    .as_ref()
                    .context("--provider scripted needs --transcript")?;
                let book = ScriptBook::load(path).with_context(|| format!("loading {}", path.display()))?;
                Ok(ProviderSource::Scripted(Arc::new(book)))
            }
        }
    }

    /// `script_id` selects entries by `query_id`; entries without one are
    /// under the empty id.
    pub fn for_session(&self, script_id: Option<&str>) -> Result<Arc<dyn LlmProvider>, String> {
        match self {
            ProviderSource::Live(p) => Ok(p.clone()),
            ProviderSource::Scripted(book) => {
                let id = script_id.unwrap_or("");
                if !book.contains(id) {
                    return Err(if id.is_empty() {
                        "transcript has no unscoped entries; pass script_id".into()
                    } else {
                        format!("transcript has no entries for `{id}`")
                    });
                }
                Ok(Arc::new(book.provider(id)))
            }
        }
    }
}
