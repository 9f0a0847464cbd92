//! Run configuration and machine-readable reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bubbles::BubbleParams;
use crate::error::{Error, Result};
use crate::minimizer::MinimizerConfig;
use crate::nonlocal::PvQuadratureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyKernel,
    VerifyBubble,
    VerifyOperators,
    Minimize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyKernel => "verify-kernel",
            Command::VerifyBubble => "verify-bubble",
            Command::VerifyOperators => "verify-operators",
            Command::Minimize => "minimize",
        }
    }

    /// Band limit used when none is given.
    pub fn default_modes(&self) -> usize {
        match self {
            Command::VerifyKernel => 8,
            Command::VerifyBubble => 256,
            Command::VerifyOperators => 8,
            Command::Minimize => 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// `.csv` selects CSV; anything else is JSON.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGridConfig {
    pub nodes: usize,
    pub radius: f64,
}

impl Default for LineGridConfig {
    fn default() -> Self {
        Self {
            nodes: 2001,
            radius: 1000.0,
        }
    }
}

/// Everything a run depends on. Serializing it and running it again
/// reproduces the report body exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    /// Band limit `N`: kernel system size, spectral energy band, or minimizer band.
    pub modes: usize,
    pub zero_threshold: f64,
    pub degree: i64,
    pub seed: u64,
    /// Explicit bubble; drawn from the seed when absent.
    pub bubble: Option<BubbleParams>,
    pub line: LineGridConfig,
    pub quadrature: PvQuadratureConfig,
    pub minimizer: MinimizerConfig,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        let modes = command.default_modes();
        Self {
            command,
            modes,
            zero_threshold: crate::linearization::DEFAULT_ZERO_THRESHOLD,
            degree: 1,
            seed: 0,
            bubble: None,
            line: LineGridConfig::default(),
            quadrature: PvQuadratureConfig::default(),
            minimizer: MinimizerConfig {
                band: modes,
                eta: 1.0 / modes as f64,
                ..MinimizerConfig::default()
            },
            output: None,
            trace: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.command {
            Command::VerifyKernel if self.modes < 3 => {
                return Err(Error::BandTooSmall { band: self.modes, min: 3 });
            }
            Command::VerifyBubble if self.degree == 0 && self.bubble.is_none() => {
                return bad("verify-bubble needs a nonzero degree".into());
            }
            _ if self.modes < 1 => return Err(Error::BandTooSmall { band: self.modes, min: 1 }),
            _ => {}
        }
        if !(self.zero_threshold > 0.0 && self.zero_threshold < 1.0) {
            return bad(format!("zero threshold must lie in (0, 1), got {}", self.zero_threshold));
        }
        if let Some(p) = &self.bubble {
            p.validate()?;
        }
        self.quadrature.validate()?;
        if self.quadrature.usable_window(self.line.radius) <= 0.0 {
            return bad(format!(
                "truncation {} leaves no usable window on a grid of radius {}",
                self.quadrature.truncation, self.line.radius
            ));
        }
        crate::line::LineGrid::graded(self.line.nodes, self.line.radius)?;
        self.minimizer.validate()?;
        if self.command == Command::Minimize && self.minimizer.band != self.modes {
            return bad("minimizer band must equal modes".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("run config: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// measured ≤ tolerance
    AtMost,
    /// measured ≥ tolerance
    AtLeast,
    /// measured = tolerance exactly
    Equals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    /// Distance to failure; non-negative iff the check passes.
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, comparison: Comparison, tolerance: f64) -> Self {
        let margin = match comparison {
            Comparison::AtMost => tolerance - measured,
            Comparison::AtLeast => measured - tolerance,
            Comparison::Equals => 0.0 - (measured - tolerance).abs(),
        };
        let pass = margin >= 0.0 && !margin.is_nan();
        Self {
            name: name.into(),
            measured,
            tolerance,
            comparison,
            margin,
            pass,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured, Comparison::AtMost, tolerance)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured, Comparison::AtLeast, tolerance)
    }

    pub fn equals(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Self::new(name, measured, Comparison::Equals, expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub passed: bool,
    /// Sorted by name.
    pub checks: Vec<Check>,
    /// Command-specific measurements (spectra, angles, fitted parameters).
    pub data: serde_json::Value,
    pub wall_time_s: f64,
}

impl Report {
    pub fn new(config: RunConfig, mut checks: Vec<Check>, data: serde_json::Value, wall_time_s: f64) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let passed = checks.iter().all(|c| c.pass);
        Self {
            config,
            passed,
            checks,
            data,
            wall_time_s,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }

    /// The JSON report with the wall time zeroed.
    pub fn body_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        copy.to_json()
    }

    /// Flat checks table.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.checks {
            w.serialize(c).map_err(|e| Error::Output(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.render(Format::from_path(path))?;
        fs::write(path, text).map_err(|e| Error::Output(format!("{}: {e}", path.display())))
    }
}

/// Writes `iteration,energy,gradient_norm` rows.
pub fn write_trace(path: &Path, energies: &[f64], gradients: &[f64]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        energy: f64,
        gradient_norm: f64,
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Output(format!("{}: {e}", path.display())))?;
    for (iteration, (&energy, &gradient_norm)) in energies.iter().zip(gradients).enumerate() {
        w.serialize(Row {
            iteration,
            energy,
            gradient_norm,
        })
        .map_err(|e| Error::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_margins() {
        let c = Check::at_most("a", 1e-5, 1e-4);
        assert!(c.pass && c.margin > 0.0);
        let c = Check::at_least("b", 5.0, 10.0);
        assert!(!c.pass && c.margin == -5.0);
        assert!(Check::equals("c", 3.0, 3.0).pass);
        assert!(!Check::equals("d", 2.0, 3.0).pass);
        assert!(!Check::at_most("e", f64::NAN, 1.0).pass);
    }

    #[test]
    fn checks_are_sorted_and_aggregated() {
        let r = Report::new(
            RunConfig::new(Command::VerifyKernel),
            vec![Check::at_most("z", 0.0, 1.0), Check::at_most("a", 2.0, 1.0)],
            serde_json::Value::Null,
            0.5,
        );
        assert_eq!(r.checks[0].name, "a");
        assert!(!r.passed);
        assert_eq!(r.failures().count(), 1);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("name,measured,tolerance,comparison,margin,pass\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = RunConfig::new(Command::Minimize);
        cfg.seed = 42;
        cfg.output = Some(PathBuf::from("out.csv"));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::new(Command::VerifyKernel);
        cfg.modes = 2;
        assert_eq!(cfg.validate().unwrap_err(), Error::BandTooSmall { band: 2, min: 3 });
        let mut cfg = RunConfig::new(Command::VerifyOperators);
        cfg.quadrature.truncation = 2000.0;
        assert!(cfg.validate().is_err());
        assert_eq!(Format::from_path(Path::new("r.CSV")), Format::Csv);
        assert_eq!(Format::from_path(Path::new("r.json")), Format::Json);
    }
}
