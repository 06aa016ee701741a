//! `key=value` log lines on stderr.

use std::io::Write;

/// Log messages are expected to already be `key=value` pairs; this adds
/// `level` and `target` in front. `RUST_LOG` overrides the default level.
pub fn init(default_level: &str) {
    let env = env_logger::Env::default().default_filter_or(default_level);
    let _ = env_logger::Builder::from_env(env)
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} {}",
                record.level().as_str().to_ascii_lowercase(),
                record.target(),
                record.args()
            )
        })
        .try_init();
}

/// Quotes a value when it would break `key=value` parsing.
pub fn quote(v: impl std::fmt::Display) -> String {
    let s = v.to_string();
    if !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || c == '"' || c == '=') {
        s
    } else {
        format!("{s:?}")
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn quoting() {
        assert_eq!(super::quote("abc"), "abc");
        assert_eq!(super::quote("a b"), "\"a b\"");
        assert_eq!(super::quote(""), "\"\"");
    }
}
