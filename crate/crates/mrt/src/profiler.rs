//! Column descriptor stage: statistics, LLM descriptions, per-table cache.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use mrt_core::stats::{apply_descriptions, compute_table_stats, parse_descriptions, stats_block};
use mrt_core::table::serialize_subset;
use mrt_core::{ColumnProfile, StageName, StatsOptions, Table, TableProfile};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gateway::{ChatRequest, Gateway};
use crate::prompts::{vars, PromptSet};
use crate::table_io::LoadedTable;

pub const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileSettings {
    pub max_rows: usize,
    pub max_cell_chars: usize,
    pub stats: StatsOptions,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        ProfileSettings { max_rows: 10, max_cell_chars: 60, stats: StatsOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Computed,
    Cached,
}

/// Tag under which descriptor calls for `table` are logged and replayed.
pub fn descriptor_tag(table: &Table) -> String {
    format!("table:{}", table.name)
}

/// Fill in descriptions with one descriptor call, re-asking once when the
/// reply cannot be parsed. Returns the profiles and whether every column
/// fell back to the generic description.
pub fn describe_columns(
    table: &Table,
    mut profiles: Vec<ColumnProfile>,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ProfileSettings,
) -> Result<(Vec<ColumnProfile>, bool)> {
    let prompt = prompts.render_prompt(
        "descriptor",
        &vars([
            ("table_name", table.name.clone()),
            ("table_subset", serialize_subset(table, settings.max_rows, settings.max_cell_chars)),
            ("column_stats", stats_block(&profiles)),
        ]),
    )?;
    let names: Vec<&str> = table.column_names().collect();
    let tag = descriptor_tag(table);
    let request = ChatRequest::new(StageName::Descriptor, &tag, prompts.system(StageName::Descriptor), prompt);
    let mut parsed = None;
    for attempt in 0..2 {
        let reply = gateway.complete(&request)?;
        parsed = parse_descriptions(&reply.content, &names);
        if parsed.is_some() {
            break;
        }
        if attempt == 0 {
            log::warn!("descriptor reply for `{}` could not be parsed; asking again", table.name);
        }
    }
    let fallback = parsed.is_none();
    if fallback {
        log::warn!("using fallback descriptions for `{}`", table.name);
    }
    apply_descriptions(&mut profiles, parsed.as_ref());
    Ok((profiles, fallback))
}

#[derive(Serialize, Deserialize)]
struct CacheDocument {
    schema_version: u32,
    #[serde(flatten)]
    profile: TableProfile,
}

/// Profiles keyed by table fingerprint: in memory, and as one JSON file per
/// table when a directory is configured. Misses on the same fingerprint are
/// serialized so concurrent questions trigger a single descriptor call.
#[derive(Debug, Default)]
pub struct ProfileCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, TableProfile>>,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ProfileCache {
    pub fn new(dir: Option<PathBuf>) -> ProfileCache {
        ProfileCache { dir, ..ProfileCache::default() }
    }

    pub fn file_path(&self, fingerprint: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{fingerprint}.json")))
    }

    pub fn get(&self, fingerprint: &str) -> Option<TableProfile> {
        if let Some(p) = self.memory.lock().unwrap().get(fingerprint) {
            return Some(p.clone());
        }
        let path = self.file_path(fingerprint)?;
        let text = fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<CacheDocument>(&text) {
            Ok(doc) if doc.schema_version == CACHE_SCHEMA_VERSION && doc.profile.table_fingerprint == fingerprint => {
                self.memory.lock().unwrap().insert(fingerprint.to_string(), doc.profile.clone());
                Some(doc.profile)
            }
            Ok(_) => {
                log::warn!("ignoring stale cache file {}", path.display());
                None
            }
            Err(e) => {
                log::warn!("ignoring unreadable cache file {}: {e}", path.display());
                None
            }
        }
    }

    /// Store in memory and, if possible, on disk. Disk failures only warn.
    pub fn put(&self, profile: &TableProfile) {
        self.memory.lock().unwrap().insert(profile.table_fingerprint.clone(), profile.clone());
        if let Some(path) = self.file_path(&profile.table_fingerprint) {
            if let Err(e) = write_cache_file(&path, profile) {
                log::warn!("cannot write profile cache {}: {e}", path.display());
            }
        }
    }

    fn lock_for(&self, fingerprint: &str) -> Arc<Mutex<()>> {
        let mut map = self.inflight.lock().unwrap();
        Arc::clone(map.entry(fingerprint.to_string()).or_default())
    }
}

fn write_cache_file(path: &Path, profile: &TableProfile) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let doc = CacheDocument { schema_version: CACHE_SCHEMA_VERSION, profile: profile.clone() };
    let text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    fs::write(tmp.path(), text + "\n")?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Profile a loaded table, from the cache when its fingerprint is known.
pub fn profile_table(
    loaded: &LoadedTable,
    cache: &ProfileCache,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ProfileSettings,
) -> Result<(TableProfile, ProfileSource)> {
    let fp = &loaded.fingerprint;
    if let Some(p) = cache.get(fp) {
        return Ok((p, ProfileSource::Cached));
    }
    let lock = cache.lock_for(fp);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = cache.get(fp) {
        return Ok((p, ProfileSource::Cached));
    }
    let stats = compute_table_stats(&loaded.table, settings.stats);
    let (column_profiles, fallback_descriptions) =
        describe_columns(&loaded.table, stats, gateway, prompts, settings)?;
    let profile = TableProfile {
        table_name: loaded.table.name.clone(),
        table_fingerprint: fp.clone(),
        column_profiles,
        fallback_descriptions,
    };
    cache.put(&profile);
    Ok((profile, ProfileSource::Computed))
}

/// The profile as printed by `mrt profile`: one object per column with
/// `type`, the statistics, the most frequent values and the description
/// nested as `{name, description}`.
pub fn profile_view(profile: &TableProfile) -> serde_json::Value {
    use serde_json::json;
    let columns: Vec<serde_json::Value> = profile
        .column_profiles
        .iter()
        .map(|c| {
            let freq = c.freq_values.as_ref().map(|f| f.iter().map(|(v, _)| v.as_str()).collect::<Vec<_>>());
            json!({
                "name": c.name,
                "type": c.type_label,
                "missing_values": c.missing_values,
                "unique": c.unique,
                "flag_binary": c.flag_binary,
                "mean": c.mean,
                "std": c.std,
                "min": c.min,
                "max": c.max,
                "freq_values": freq,
                "description": { "name": c.name, "description": c.description },
            })
        })
        .collect();
    json!({
        "table": profile.table_name,
        "fingerprint": profile.table_fingerprint,
        "fallback_descriptions": profile.fallback_descriptions,
        "columns": columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayConfig, Replay, ReplayEntry};
    use crate::table_io::load_table;

    fn gateway(replies: &[&str]) -> Gateway {
        Gateway::with_replay(
            GatewayConfig::scripted(),
            Replay::from_entries(replies.iter().map(|c| ReplayEntry {
                stage: StageName::Descriptor,
                content: c.to_string(),
                tag: None,
                prompt_sha256: None,
            })),
        )
    }

    fn table(dir: &Path, name: &str, body: &str) -> LoadedTable {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        load_table(&p).unwrap()
    }

    #[test]
    fn descriptions_with_fallback_for_omitted_columns() {
        let dir = tempfile::tempdir().unwrap();
        let t = table(dir.path(), "taxi.csv", "trip_distance,b\n1.5,x\n2.5,y\n");
        let gw = gateway(&[
            "trip_distance ::: Distance of the taxi trip, typically measured in miles or kilometers.",
        ]);
        let cache = ProfileCache::new(None);
        let (p, src) = profile_table(&t, &cache, &gw, &PromptSet::builtin(), &ProfileSettings::default()).unwrap();
        assert_eq!(src, ProfileSource::Computed);
        assert_eq!(
            p.column_profiles[0].description,
            "Distance of the taxi trip, typically measured in miles or kilometers."
        );
        assert_eq!(p.column_profiles[1].description, "column `b` of type `category`");
        assert!(!p.fallback_descriptions);
        let prompt = &gw.interactions()[0].messages[1].content;
        assert!(prompt.contains("trip_distance | b"), "{prompt}");
        assert!(prompt.contains("missing_values=0"), "{prompt}");
    }

    #[test]
    fn unparseable_twice_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let t = table(dir.path(), "t.csv", "a,b\n1,2\n");
        let gw = gateway(&["no idea", "still no idea"]);
        let (p, _) =
            profile_table(&t, &ProfileCache::new(None), &gw, &PromptSet::builtin(), &ProfileSettings::default())
                .unwrap();
        assert!(p.fallback_descriptions);
        assert_eq!(gw.call_count(), 2);
        assert!(p.column_profiles.iter().all(|c| c.description.starts_with("column `")));
    }

    #[test]
    fn cache_hit_makes_no_call_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let cache_dir = dir.path().join("cache");
        let t = table(dir.path(), "t.csv", "a\n1\n2\n");
        let gw = gateway(&["a ::: A number."]);
        let s = ProfileSettings::default();
        let prompts = PromptSet::builtin();
        let (first, _) = profile_table(&t, &ProfileCache::new(Some(cache_dir.clone())), &gw, &prompts, &s).unwrap();
        let file = cache_dir.join(format!("{}.json", t.fingerprint));
        assert!(file.exists());
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert!(doc["column_profiles"][0].get("freq_values").is_none());

        // A fresh cache object reads the file back.
        let (second, src) = profile_table(&t, &ProfileCache::new(Some(cache_dir)), &gw, &prompts, &s).unwrap();
        assert_eq!(src, ProfileSource::Cached);
        assert_eq!(first, second);
        assert_eq!(gw.call_count(), 1);
    }

    #[test]
    fn same_name_different_bytes_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ProfileCache::new(None);
        let gw = gateway(&["a ::: one", "a ::: two"]);
        let s = ProfileSettings::default();
        let prompts = PromptSet::builtin();
        let t1 = table(dir.path(), "t.csv", "a\n1\n");
        profile_table(&t1, &cache, &gw, &prompts, &s).unwrap();
        let t2 = table(dir.path(), "t.csv", "a\n2\n");
        let (_, src) = profile_table(&t2, &cache, &gw, &prompts, &s).unwrap();
        assert_eq!(src, ProfileSource::Computed);
        assert_eq!(gw.call_count(), 2);
    }

    #[test]
    fn unwritable_cache_dir_only_warns() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let t = table(dir.path(), "t.csv", "a\n1\n");
        let gw = gateway(&["a ::: one"]);
        let cache = ProfileCache::new(Some(blocker.join("sub")));
        let prompts = PromptSet::builtin();
        profile_table(&t, &cache, &gw, &prompts, &ProfileSettings::default()).unwrap();
        let (_, src) = profile_table(&t, &cache, &gw, &prompts, &ProfileSettings::default()).unwrap();
        assert_eq!(src, ProfileSource::Cached);
    }

    #[test]
    fn concurrent_misses_share_one_call() {
        let dir = tempfile::tempdir().unwrap();
        let t = table(dir.path(), "t.csv", "a\n1\n");
        let gw = gateway(&["a ::: one"]);
        let cache = ProfileCache::new(None);
        let prompts = PromptSet::builtin();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| profile_table(&t, &cache, &gw, &prompts, &ProfileSettings::default()).unwrap());
            }
        });
        assert_eq!(gw.call_count(), 1);
    }
}
