use std::path::{Path, PathBuf};

use h2mor::systems::{
    load_state_space, DelaySystem, RationalRom, Tabulated, TransferFunctionModel,
};

use crate::config::{read_file, ExperimentConfig, ModelDescriptor, ModelSource};
use crate::CliError;

fn model_error(what: &str) -> impl Fn(h2mor::Error) -> CliError + '_ {
    move |e| match e {
        h2mor::Error::Io(m) => CliError::Io(m),
        other => CliError::Config(format!("{what}: {other}")),
    }
}

/// Reads a JSON model descriptor; the error names the path when it is missing.
pub fn read_descriptor(path: &Path) -> Result<ModelDescriptor, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!(
            "model file not found: {}",
            path.display()
        )));
    }
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: invalid model descriptor: {e}", path.display())))
}

/// Builds a model; relative file names are resolved against `base`.
pub fn build_model(d: &ModelDescriptor, base: &Path) -> Result<TransferFunctionModel, CliError> {
    let resolve = |p: &PathBuf| -> Result<PathBuf, CliError> {
        let full = if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        };
        if full.exists() {
            Ok(full)
        } else {
            Err(CliError::Io(format!(
                "model file not found: {}",
                full.display()
            )))
        }
    };
    Ok(match d {
        ModelDescriptor::MatrixMarket {
            a,
            b,
            c,
            e,
            input,
            output,
        } => {
            let (a, b, c) = (resolve(a)?, resolve(b)?, resolve(c)?);
            let e = e.as_ref().map(resolve).transpose()?;
            let ss = load_state_space(&a, &b, &c, e.as_deref(), *input, *output)
                .map_err(model_error("matrix market model"))?;
            TransferFunctionModel::state_space(ss)
        }
        ModelDescriptor::Delay {
            n,
            tau,
            rho,
            epsilon,
        } => TransferFunctionModel::delay(
            DelaySystem::new(*n, *tau, *rho, *epsilon).map_err(model_error("delay model"))?,
        ),
        ModelDescriptor::Rational { a, b } => TransferFunctionModel::rational(
            RationalRom::new(a.clone(), b.clone()).map_err(model_error("rational model"))?,
        ),
        ModelDescriptor::Tabulated {
            points,
            values,
            moment,
        } => {
            let t = Tabulated::new(
                points.iter().map(|&p| p.into()).collect(),
                values.iter().map(|&v| v.into()).collect(),
            )
            .map_err(model_error("tabulated model"))?;
            let m = TransferFunctionModel::tabulated(t);
            match moment {
                Some(x) => m.with_moment(*x),
                None => m,
            }
        }
    })
}

pub fn load_model(cfg: &ExperimentConfig) -> Result<TransferFunctionModel, CliError> {
    match &cfg.model {
        ModelSource::Inline(d) => build_model(d, &cfg.base_dir),
        ModelSource::Path(p) => {
            let path = cfg.resolve(p);
            let d = read_descriptor(&path)?;
            build_model(&d, path.parent().unwrap_or(Path::new(".")))
        }
    }
}
