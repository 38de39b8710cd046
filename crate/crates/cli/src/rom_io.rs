use std::path::Path;

use h2mor::systems::RationalRom;
use serde::{Deserialize, Serialize};

use crate::config::read_file;
use crate::{write_atomic, CliError, Complex};

/// On-disk ROM. `a` and `b` are the partial-fraction coefficients; poles and
/// residues are informational and recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomFile {
    pub degree: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub poles: Vec<Complex>,
    pub residues: Vec<Complex>,
}

impl From<&RationalRom> for RomFile {
    fn from(rom: &RationalRom) -> Self {
        RomFile {
            degree: rom.degree(),
            a: rom.a().to_vec(),
            b: rom.b().to_vec(),
            poles: rom.poles().iter().map(|&p| p.into()).collect(),
            residues: rom.residues().iter().map(|&p| p.into()).collect(),
        }
    }
}

impl RomFile {
    pub fn to_rom(&self) -> Result<RationalRom, CliError> {
        if self.degree != self.a.len() {
            return Err(CliError::Config(format!(
                "ROM degree {} does not match {} coefficients",
                self.degree,
                self.a.len()
            )));
        }
        RationalRom::new(self.a.clone(), self.b.clone()).map_err(CliError::Model)
    }

    pub fn load(path: &Path) -> Result<RationalRom, CliError> {
        let text = read_file(path)?;
        let f: RomFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: invalid ROM file: {e}", path.display())))?;
        f.to_rom()
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }
}
