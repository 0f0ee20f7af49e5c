use std::fmt::Display;
use std::io::IsTerminal;

/// Exit status 2: bad invocation. Nothing has been written.
pub const EXIT_USAGE: i32 = 2;
/// Exit status 1: the inputs were read but the computation failed.
pub const EXIT_DOMAIN: i32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub exit: i32,
    pub code: &'static str,
    pub message: String,
    pub context: Vec<(&'static str, String)>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_USAGE,
            code: "usage",
            message: message.into(),
            context: Vec::new(),
        }
    }

    pub fn domain(code: &'static str, err: impl Display) -> Self {
        Self {
            exit: EXIT_DOMAIN,
            code,
            message: err.to_string(),
            context: Vec::new(),
        }
    }

    pub fn with(mut self, key: &'static str, value: impl Display) -> Self {
        self.context.push((key, value.to_string()));
        self
    }

    /// `error[code]: message` followed by one indented `key: value` line per context field.
    pub fn render(&self, color: bool) -> String {
        let label = if color { "\x1b[1;31merror\x1b[0m" } else { "error" };
        let mut out = format!("{label}[{}]: {}\n", self.code, self.message);
        for (k, v) in &self.context {
            out.push_str(&format!("  {k}: {v}\n"));
        }
        out
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn color_enabled(stream_is_terminal: bool) -> bool {
    std::env::var_os("MTCAL_NO_COLOR").is_none() && stream_is_terminal
}

pub fn stderr_color() -> bool {
    color_enabled(std::io::stderr().is_terminal())
}
