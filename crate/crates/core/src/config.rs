//! Flat `key = value` config files and the solver problem description built
//! from them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::catalog::{GlobalSolution, SolutionKind};
use crate::error::{FbError, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::solver::{BoundaryData, ProblemSpec};

/// Parsed config: every key records its line for diagnostics, and reads are
/// tracked so unknown keys can be reported by name and line.
#[derive(Debug)]
pub struct Config {
    path: String,
    entries: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str, path: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(FbError::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    message: format!("expected `key = value`, got `{raw}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(FbError::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    message: "empty key or value".into(),
                });
            }
            if entries.insert(key.clone(), (lineno + 1, value)).is_some() {
                return Err(FbError::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Config {
            path: path.into(),
            entries,
            used: Default::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| FbError::io(path.display().to_string(), e))?;
        Config::parse(&text, &path.display().to_string())
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        let entry = self.entries.get(key);
        if entry.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        entry
    }

    fn value_err(&self, key: &str, line: usize, what: &str) -> FbError {
        FbError::Parse {
            path: self.path.clone(),
            line,
            message: format!("key `{key}`: {what}"),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<String> {
        self.raw(key).map(|(_, v)| v.clone())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.value_err(key, *line, "not a number")),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| self.value_err(key, *line, "not a nonnegative integer")),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" | "1" | "yes" => Ok(Some(true)),
                "false" | "0" | "no" => Ok(Some(false)),
                _ => Err(self.value_err(key, *line, "not a boolean")),
            },
        }
    }

    /// Comma-separated list of reals.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => {
                let mut out = Vec::new();
                for tok in v.split(',') {
                    out.push(
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|_| self.value_err(key, *line, "not a list of numbers"))?,
                    );
                }
                Ok(Some(out))
            }
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| FbError::Config(format!("{}: missing required key `{key}`", self.path)))
    }

    pub fn require_str(&self, key: &str) -> Result<String> {
        self.get_str(key)
            .ok_or_else(|| FbError::Config(format!("{}: missing required key `{key}`", self.path)))
    }

    /// Error if any key was never read (catches typos by name and line).
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for (key, (line, _)) in &self.entries {
            if !used.contains(key) {
                return Err(FbError::Parse {
                    path: self.path.clone(),
                    line: *line,
                    message: format!("unknown key `{key}`"),
                });
            }
        }
        Ok(())
    }
}

/// Solver run description: the problem spec plus the class bound used for
/// membership verification.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub spec: ProblemSpec,
    pub m: f64,
    pub require_origin: bool,
}

impl SolveConfig {
    pub fn from_config(cfg: &Config) -> Result<SolveConfig> {
        let h = cfg.require_f64("h")?;
        let grid = Grid::from_spacing(2, h, crate::grid::DomainKind::HalfBall)?;
        let kind = cfg.require_str("boundary.kind")?;
        let boundary = match kind.as_str() {
            "wedge" => BoundaryData::Wedge {
                c: cfg.get_f64("boundary.c")?.unwrap_or(0.0),
                b: cfg.get_f64("boundary.b")?.unwrap_or(0.0),
            },
            "contact_poly" => BoundaryData::ContactPoly {
                a: cfg.get_f64("boundary.a")?.unwrap_or(0.0),
                alpha: cfg.get_f64("boundary.alpha")?.unwrap_or(0.0),
                c: cfg.get_f64("boundary.c")?.unwrap_or(0.0),
            },
            "file" => {
                let path = cfg.require_str("boundary.file")?;
                let field = ScalarField::load(&path)?;
                field.check_same_grid(&ScalarField::zeros(grid.clone()))?;
                BoundaryData::Field(field)
            }
            other => {
                let kind = SolutionKind::parse(other).ok_or_else(|| {
                    FbError::Config(format!("unknown boundary kind `{other}`"))
                })?;
                let a = cfg.get_f64("boundary.a")?.unwrap_or(0.0);
                let alpha = cfg.get_f64("boundary.alpha")?.unwrap_or(0.0);
                let b = cfg.get_f64("boundary.b")?.unwrap_or(0.0);
                let member = match kind {
                    SolutionKind::HalfSpacePoly => GlobalSolution::half_space_poly(a, alpha),
                    SolutionKind::OneSidedPositive => GlobalSolution::one_sided_positive(b)?,
                    SolutionKind::OneSidedNegative => GlobalSolution::one_sided_negative(a)?,
                    SolutionKind::TwoSided => GlobalSolution::two_sided(a, b)?,
                };
                BoundaryData::Catalog(member)
            }
        };

        let mut spec = ProblemSpec::new(grid.clone(), boundary);
        if let Some(eps) = cfg.get_f64("eps_g")? {
            spec.eps_g = eps;
        }
        if let Some(theta) = cfg.get_f64("theta")? {
            spec.theta = theta;
        }
        if let Some(tol) = cfg.get_f64("tol")? {
            spec.tol = tol;
        }
        if let Some(mo) = cfg.get_usize("max_outer")? {
            spec.max_outer = mo;
        }
        if let Some(mi) = cfg.get_usize("max_inner")? {
            spec.max_inner = mi;
        }

        // class bound: configured, or the sup of the boundary data
        let m = match cfg.get_f64("M")? {
            Some(m) => m,
            None => {
                let mut worst = 0.0f64;
                for idx in grid.active_nodes() {
                    if grid.is_interior(idx) || grid.on_pi(idx) {
                        continue;
                    }
                    let x = grid.coords(idx);
                    worst = worst.max(spec.boundary.value(&x[..2], &grid, idx).abs());
                }
                worst.max(f64::MIN_POSITIVE)
            }
        };
        let require_origin = cfg.get_bool("require_origin")?.unwrap_or(false);
        Ok(SolveConfig {
            spec,
            m,
            require_origin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_and_flags_unknown() {
        let text = "h = 0.015625\n# comment\nboundary.kind = wedge\nboundary.c = 0.3\n";
        let cfg = Config::parse(text, "mem").unwrap();
        let sc = SolveConfig::from_config(&cfg).unwrap();
        assert_eq!(sc.spec.grid.subdiv(), 64);
        cfg.finish().unwrap();

        let cfg = Config::parse("h = 0.015625\nbogus = 1\n", "mem").unwrap();
        let _ = cfg.get_f64("h");
        let err = cfg.finish().unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn malformed_line_names_the_line() {
        let err = Config::parse("h = 1\nthis is not a pair\n", "cfg").unwrap_err();
        match err {
            FbError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn default_class_bound_is_boundary_sup() {
        let text = "h = 0.03125\nboundary.kind = one_sided_positive\nboundary.b = 0.25\n";
        let cfg = Config::parse(text, "mem").unwrap();
        let sc = SolveConfig::from_config(&cfg).unwrap();
        // sup over the rim of (x1 - 0.25)_+^2/2 is at x1 = 1
        assert!((sc.m - 0.28125).abs() < 1e-12, "M = {}", sc.m);
    }
}
