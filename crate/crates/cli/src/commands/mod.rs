pub mod compare;
pub mod eval;
pub mod gen_data;
pub mod inspect;
pub mod report;
pub mod train;

use std::path::PathBuf;

use framestack_core::config::FileConfig;
use framestack_core::{Error, Result};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "FRAMESTACK_CONFIG";

/// Load the configuration: the explicit flag wins, then `$FRAMESTACK_CONFIG`,
/// then built-in defaults.
pub fn load_config(flag: Option<PathBuf>) -> Result<FileConfig> {
    let path = flag.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(path) => FileConfig::load(&path),
        None => Ok(FileConfig::default()),
    }
}

/// Apply repeated `--set key=value` overrides.
pub fn apply_sets(config: &mut FileConfig, sets: &[String]) -> Result<()> {
    for entry in sets {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {entry:?}")))?;
        config.set_key(key.trim(), value.trim())?;
    }
    Ok(())
}
