use std::path::Path;

use h2mor::systems::{RationalRom, TransferFunctionModel};
use h2mor::Complex64;

use crate::{write_atomic, CliError};

pub const BODE_HEADER: &str = "frequency,h_mag,err_mag";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodeRow {
    pub frequency: f64,
    pub h_mag: f64,
    pub err_mag: f64,
}

/// `|H(i w)|` and `|H(i w) - H_r(i w)|` on a positive increasing grid.
/// Model evaluations here are not counted.
pub fn emit_bode(
    model: &TransferFunctionModel,
    rom: &RationalRom,
    freqs: &[f64],
) -> Result<Vec<BodeRow>, CliError> {
    if freqs.iter().any(|w| !(w.is_finite() && *w > 0.0)) || freqs.windows(2).any(|p| p[1] <= p[0])
    {
        return Err(CliError::Config(
            "frequency grid must be positive and increasing".into(),
        ));
    }
    freqs
        .iter()
        .map(|&w| {
            let z = Complex64::new(0.0, w);
            let h = model.evaluate_uncounted(z).map_err(CliError::Model)?;
            Ok(BodeRow {
                frequency: w,
                h_mag: h.norm(),
                err_mag: (h - rom.eval(z)).norm(),
            })
        })
        .collect()
}

pub fn bode_csv(rows: &[BodeRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(BODE_HEADER.split(',')).map_err(err)?;
    for r in rows {
        w.write_record([
            r.frequency.to_string(),
            r.h_mag.to_string(),
            r.err_mag.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_bode(path: &Path, rows: &[BodeRow]) -> Result<(), CliError> {
    write_atomic(path, &bode_csv(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rom() -> RationalRom {
        RationalRom::new(vec![1.0, 0.0], vec![2.0, 2.0]).unwrap()
    }

    #[test]
    fn identical_rom_has_zero_error() {
        let model = TransferFunctionModel::rational(rom());
        let rows = emit_bode(&model, &rom(), &[0.1, 1.0, 10.0]).unwrap();
        assert!(rows.iter().all(|r| r.err_mag <= 1e-12));
        // |1/(z^2 + 2z + 2)| at z = i is 1/|1 + 2i|.
        assert!((rows[1].h_mag - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(model.fom_evals(), 0);
    }

    #[test]
    fn zero_rom_error_is_the_magnitude() {
        let model = TransferFunctionModel::rational(rom());
        let zero = RationalRom::new(vec![0.0], vec![1.0]).unwrap();
        for r in emit_bode(&model, &zero, &[0.5, 2.0]).unwrap() {
            assert_eq!(r.err_mag, r.h_mag);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let model = TransferFunctionModel::rational(rom());
        assert!(emit_bode(&model, &rom(), &[1.0, 0.5]).is_err());
        assert!(emit_bode(&model, &rom(), &[0.0, 1.0]).is_err());
    }
}
