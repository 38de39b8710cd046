use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, Complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ph2,
    Irka,
    Tfirka,
    Quadvf,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ph2 => "ph2",
            Algorithm::Irka => "irka",
            Algorithm::Tfirka => "tfirka",
            Algorithm::Quadvf => "quadvf",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ph2" => Ok(Algorithm::Ph2),
            "irka" => Ok(Algorithm::Irka),
            "tfirka" | "tf-irka" => Ok(Algorithm::Tfirka),
            "quadvf" => Ok(Algorithm::Quadvf),
            other => Err(CliError::Config(format!(
                "unknown algorithm `{other}` (expected ph2, irka, tfirka or quadvf)"
            ))),
        }
    }
}

/// How to build the full-order model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelDescriptor {
    /// Matrix Market files; relative paths are resolved against the file
    /// that contains the descriptor.
    MatrixMarket {
        a: PathBuf,
        b: PathBuf,
        c: PathBuf,
        #[serde(default)]
        e: Option<PathBuf>,
        #[serde(default)]
        input: usize,
        #[serde(default)]
        output: usize,
    },
    Delay {
        n: usize,
        #[serde(default = "one")]
        tau: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    /// Partial-fraction coefficients of a rational transfer function.
    Rational { a: Vec<f64>, b: Vec<f64> },
    Tabulated {
        points: Vec<Complex>,
        values: Vec<Complex>,
        #[serde(default)]
        moment: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_rho() -> f64 {
    0.1
}

fn default_epsilon() -> f64 {
    0.01
}

/// Inline descriptor or path to a JSON descriptor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelDescriptor),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Initial samples or shifts: one list for every `r`, or a list per `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialPoints {
    All(Vec<Complex>),
    PerDegree(BTreeMap<String, Vec<Complex>>),
}

impl InitialPoints {
    pub fn for_degree(&self, r: usize) -> Option<Vec<Complex>> {
        match self {
            InitialPoints::All(v) => Some(v.clone()),
            InitialPoints::PerDegree(m) => m.get(&r.to_string()).cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmParams {
    pub tol_term: f64,
    pub max_iters: usize,
    /// PH2 initial samples; also the IRKA/TF-IRKA shifts unless
    /// `initial_shifts` is given.
    pub initial_points: Option<InitialPoints>,
    /// IRKA/TF-IRKA initial shifts, exactly `r` per degree.
    pub initial_shifts: Option<InitialPoints>,
    /// PH2 stagnation tolerance on the largest tangent-space angle.
    pub angle_tol: Option<f64>,
    /// PH2 smallest admissible kernel sine of a new sample.
    pub kernel_tol: Option<f64>,
    /// QuadVF number of quadrature nodes.
    pub quad_nodes: usize,
    /// QuadVF quadrature scale.
    pub scale_l: f64,
    /// Record the true H2 error of every iterate in the history.
    pub track_error: bool,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            tol_term: 1e-9,
            max_iters: 100,
            initial_points: None,
            initial_shifts: None,
            angle_tol: None,
            kernel_tol: None,
            quad_nodes: 200,
            scale_l: 10.0,
            track_error: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodeGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for BodeGrid {
    fn default() -> Self {
        BodeGrid {
            omega_min: 1e-1,
            omega_max: 1e3,
            points: 200,
        }
    }
}

impl BodeGrid {
    /// Logarithmically spaced frequencies.
    pub fn frequencies(&self) -> Result<Vec<f64>, CliError> {
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min && self.points >= 2) {
            return Err(CliError::Config(
                "bode grid needs 0 < omega_min < omega_max and at least 2 points".into(),
            ));
        }
        let (lo, hi) = (self.omega_min.log10(), self.omega_max.log10());
        let step = (hi - lo) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|k| 10f64.powf(lo + step * k as f64))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(alias = "algorithms")]
    pub algorithm: OneOrMany<Algorithm>,
    #[serde(default)]
    pub params: AlgorithmParams,
    pub rom_dims: Vec<usize>,
    pub output_dir: PathBuf,
    #[serde(default = "default_quad_points")]
    pub h2_error_quad_points: usize,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub bode: BodeGrid,
    /// Directory against which relative paths are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_quad_points() -> usize {
    10_000
}

/// Command-line overrides of top-level fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<PathBuf>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub r: Option<usize>,
    pub out: Option<PathBuf>,
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_file(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Command-line paths are taken relative to the working directory.
    pub fn apply(&mut self, o: Overrides) {
        if let Some(m) = o.model {
            self.model = ModelSource::Path(absolute(&m));
        }
        if let Some(a) = o.algorithms {
            self.algorithm = OneOrMany::Many(a);
        }
        if let Some(r) = o.r {
            self.rom_dims = vec![r];
        }
        if let Some(out) = o.out {
            self.output_dir = absolute(&out);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.rom_dims.is_empty() || self.rom_dims.contains(&0) {
            return Err(CliError::Config(
                "rom_dims must be a nonempty list of positive degrees".into(),
            ));
        }
        if self.algorithm.to_vec().is_empty() {
            return Err(CliError::Config("no algorithm selected".into()));
        }
        if self.params.tol_term.is_nan() || self.params.tol_term <= 0.0 {
            return Err(CliError::Config("tol_term must be positive".into()));
        }
        if self.h2_error_quad_points < 2 {
            return Err(CliError::Config(
                "h2_error_quad_points must be at least 2".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    std::env::current_dir()
        .map(|d| d.join(p))
        .unwrap_or_else(|_| p.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_and_path_models() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model": {"kind": "delay", "n": 50}, "algorithms": ["ph2", "tfirka"], "rom_dims": [2, 4], "output_dir": "out"}"#,
            Path::new("/tmp"),
        )
        .unwrap();
        assert_eq!(
            cfg.model,
            ModelSource::Inline(ModelDescriptor::Delay {
                n: 50,
                tau: 1.0,
                rho: 0.1,
                epsilon: 0.01
            })
        );
        assert_eq!(
            cfg.algorithm.to_vec(),
            vec![Algorithm::Ph2, Algorithm::Tfirka]
        );
        assert_eq!(cfg.h2_error_quad_points, 10_000);
        assert_eq!(cfg.params.tol_term, 1e-9);
        assert_eq!(cfg.output_path(), Path::new("/tmp/out"));

        let cfg = ExperimentConfig::from_json(
            r#"{"model": "m.json", "algorithm": "irka", "rom_dims": [2], "output_dir": "/o"}"#,
            Path::new("/d"),
        )
        .unwrap();
        assert_eq!(cfg.model, ModelSource::Path("m.json".into()));
        assert_eq!(cfg.output_path(), Path::new("/o"));
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        assert!(ExperimentConfig::from_json(
            r#"{"model": "m", "algorithm": "newton", "rom_dims": [2], "output_dir": "o"}"#,
            base
        )
        .is_err());
        let cfg = ExperimentConfig::from_json(
            r#"{"model": "m", "algorithm": "ph2", "rom_dims": [], "output_dir": "o"}"#,
            base,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_replace_top_level_fields() {
        let mut cfg = ExperimentConfig::from_json(
            r#"{"model": "m", "algorithm": "ph2", "rom_dims": [2, 4], "output_dir": "o"}"#,
            Path::new("/d"),
        )
        .unwrap();
        cfg.apply(Overrides {
            model: Some("/x.json".into()),
            algorithms: Some(vec![Algorithm::Quadvf]),
            r: Some(6),
            out: Some("/out".into()),
        });
        assert_eq!(cfg.model, ModelSource::Path("/x.json".into()));
        assert_eq!(cfg.algorithm.to_vec(), vec![Algorithm::Quadvf]);
        assert_eq!(cfg.rom_dims, vec![6]);
        assert_eq!(cfg.output_path(), Path::new("/out"));
    }

    #[test]
    fn initial_points_per_degree() {
        let p: InitialPoints = serde_json::from_str(r#"{"2": [[1, 1], [1, -1]]}"#).unwrap();
        assert_eq!(p.for_degree(2).unwrap().len(), 2);
        assert!(p.for_degree(4).is_none());
    }

    #[test]
    fn log_grid() {
        let f = BodeGrid {
            omega_min: 0.1,
            omega_max: 1000.0,
            points: 5,
        }
        .frequencies()
        .unwrap();
        for (x, y) in f.iter().zip([0.1, 1.0, 10.0, 100.0, 1000.0]) {
            assert!((x - y).abs() <= 1e-12 * y);
        }
        assert!(BodeGrid {
            omega_min: 1.0,
            omega_max: 0.5,
            points: 5
        }
        .frequencies()
        .is_err());
    }
}
