//! Classify sentences against any chat-completions endpoint, with
//! bounded concurrency, retries, and a response cache for offline
//! replay.
//!
//! Point it at an endpoint first:
//!
//! ```bash
//! export SDOHKIT_BASE_URL=http://localhost:8000/v1
//! export SDOHKIT_MODEL=my-model
//! export SDOHKIT_API_KEY=...   # optional
//! cargo run --example remote_classification
//! ```

use std::time::Duration;

use sdohkit::classify::{classify_remote, RemoteBackendConfig, ResponseCache, SentenceInput};
use sdohkit::schema::{Category, Task};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Ok(base_url) = std::env::var("SDOHKIT_BASE_URL") else {
        println!("SDOHKIT_BASE_URL is not set; nothing to call.");
        println!("Set SDOHKIT_BASE_URL and SDOHKIT_MODEL to run this example.");
        return Ok(());
    };
    let model = std::env::var("SDOHKIT_MODEL").unwrap_or_else(|_| "gpt-3.5-turbo".to_string());

    let mut config = RemoteBackendConfig::new(base_url, model);
    config.max_concurrency = 4;
    config.timeout = Duration::from_secs(60);

    let cache_dir = std::env::temp_dir().join("sdohkit-example-cache");
    let cache = ResponseCache::open(&cache_dir)?;
    println!("response cache at {} ({} entries)", cache_dir.display(), cache.len());

    let sentences = vec![
        SentenceInput { id: "s1".into(), text: "Pt lives alone.".into() },
        SentenceInput { id: "s2".into(), text: "He is a retired teacher.".into() },
        SentenceInput { id: "s3".into(), text: "Recently evicted and staying with friends.".into() },
    ];

    let records = classify_remote(
        &config,
        &sentences,
        &Category::ALL,
        None,
        Task::Any,
        true, // corpus run: offer the NO_SDOH token
        Some(&cache),
    )?;
    for record in &records {
        println!(
            "{}: {:?} (status {:?}, retries {})",
            record.sentence_id, record.labels, record.parse_status, record.retries
        );
    }
    println!("re-running now replays from the cache without network calls");
    Ok(())
}
