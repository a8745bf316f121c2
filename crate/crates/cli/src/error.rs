use std::fmt;
use std::path::Path;

/// Failure class; each has its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io,
    Format,
    Validation,
    Domain,
    Manifest,
    Config,
    Leaderboard,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Format => "format",
            Category::Validation => "validation",
            Category::Domain => "domain",
            Category::Manifest => "manifest",
            Category::Config => "config",
            Category::Leaderboard => "leaderboard",
        }
    }

    /// 1 is left for panics, 2 is clap's usage error.
    pub fn exit_code(self) -> u8 {
        match self {
            Category::Io => 3,
            Category::Format => 4,
            Category::Validation => 5,
            Category::Domain => 6,
            Category::Manifest => 7,
            Category::Config => 8,
            Category::Leaderboard => 9,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(Category::Io, format!("{}: {err}", path.display()))
    }

    pub fn context(mut self, prefix: impl fmt::Display) -> Self {
        self.message = format!("{prefix}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category.name(), self.message)
    }
}

impl From<brats_core::Error> for CliError {
    fn from(e: brats_core::Error) -> Self {
        let category = match e.category() {
            "io" => Category::Io,
            "format" => Category::Format,
            "domain" => Category::Domain,
            _ => Category::Validation,
        };
        Self::new(category, e.to_string())
    }
}

pub trait Context<T> {
    fn context(self, prefix: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, prefix: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| e.into().context(prefix))
    }
}
