//! JSON config files with `key=value` overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, detail: String },
    UnknownKey { key: String },
    Invalid { key: String, detail: String },
    MalformedOverride { text: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Parse { path, detail } => write!(f, "{}: {detail}", path.display()),
            Self::UnknownKey { key } => write!(f, "unknown config key `{key}`"),
            Self::Invalid { key, detail } => write!(f, "invalid value for `{key}`: {detail}"),
            Self::MalformedOverride { text } => write!(f, "override {text:?} is not of the form key=value"),
        }
    }
}

impl std::error::Error for ConfigError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Read a JSON config. Missing keys take their defaults.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Split `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String), ConfigError> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::MalformedOverride { text: text.to_string() }),
    }
}

/// Apply overrides in order. Each value is read as JSON when it parses
/// (`3`, `true`, `[1,2]`, `null`) and as a plain string otherwise.
pub fn apply_overrides<T>(base: &T, overrides: &[(String, String)]) -> Result<T, ConfigError>
where
    T: Serialize + DeserializeOwned,
{
    let mut tree = serde_json::to_value(base).expect("config serialises to JSON");
    let Value::Object(map) = &mut tree else {
        unreachable!("configs are JSON objects")
    };
    for (key, raw) in overrides {
        let slot = map
            .get_mut(key)
            .ok_or_else(|| ConfigError::UnknownKey { key: key.clone() })?;
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        // Type-check each override on its own so the error names its key.
        serde_json::from_value::<T>(Value::Object(map.clone())).map_err(|e| ConfigError::Invalid {
            key: key.clone(),
            detail: e.to_string(),
        })?;
    }
    Ok(serde_json::from_value(tree).expect("checked above"))
}

/// Pretty JSON, newline-terminated.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("config serialises to JSON");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Demo {
        count: usize,
        name: String,
        path: Option<String>,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self {
                count: 3,
                name: "a".into(),
                path: None,
            }
        }
    }

    fn ov(k: &str, v: &str) -> (String, String) {
        (k.into(), v.into())
    }

    #[test]
    fn overrides_apply_in_order() {
        let d = apply_overrides(
            &Demo::default(),
            &[ov("count", "5"), ov("count", "7"), ov("name", "xyz")],
        )
        .unwrap();
        assert_eq!(d.count, 7);
        assert_eq!(d.name, "xyz");
        let d = apply_overrides(&d, &[ov("path", "runs/a")]).unwrap();
        assert_eq!(d.path.as_deref(), Some("runs/a"));
    }

    #[test]
    fn bad_overrides_name_the_key() {
        let err = apply_overrides(&Demo::default(), &[ov("nope", "1")]).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { ref key } if key == "nope"));
        let err = apply_overrides(&Demo::default(), &[ov("count", "-2")]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "count"));
        assert!(parse_override("count").is_err());
        assert_eq!(parse_override("a=b=c").unwrap(), ("a".into(), "b=c".into()));
    }
}
