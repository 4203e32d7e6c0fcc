//! Plain-text parameter checkpoints.
//!
//! ```text
//! ACPKAN v1
//! embed.weight 16x2 1.2345678901234567e-1 ...
//! ```

use super::TrainError;
use crate::model::{AcPkanConfig, AcPkanModel, MlpPinn, Model, Network};
use crate::output::write_atomic;
use std::fmt::Write as _;
use std::path::Path;

pub const CHECKPOINT_HEADER: &str = "ACPKAN v1";

pub fn checkpoint_to_string(model: &Model) -> String {
    let mut out = String::from(CHECKPOINT_HEADER);
    out.push('\n');
    let store = model.params();
    for spec in store.tensors() {
        let shape: Vec<String> = spec.shape.iter().map(usize::to_string).collect();
        let _ = write!(out, "{} {}", spec.name, shape.join("x"));
        for v in &store.values()[spec.offset..spec.offset + spec.len()] {
            let _ = write!(out, " {v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn checkpoint_save(model: &Model, path: &Path) -> Result<(), TrainError> {
    write_atomic(path, checkpoint_to_string(model).as_bytes()).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
}

pub fn checkpoint_load(path: &Path) -> Result<Model, TrainError> {
    let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    checkpoint_from_str(&text)
}

struct Entry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> TrainError {
    TrainError::Checkpoint(msg.into())
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, TrainError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CHECKPOINT_HEADER) {
        return Err(bad(format!("missing `{CHECKPOINT_HEADER}` header")));
    }
    let mut entries = Vec::new();
    for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut fields = line.split_whitespace();
        let name = fields.next().unwrap_or_default().to_string();
        let shape = fields
            .next()
            .ok_or_else(|| bad(format!("line {}: missing shape", no + 2)))?
            .split('x')
            .map(|s| s.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: bad shape: {e}", no + 2)))?;
        let values = fields
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: bad value: {e}", no + 2)))?;
        if values.len() != shape.iter().product::<usize>() {
            return Err(bad(format!("line {}: {} values for shape {shape:?}", no + 2, values.len())));
        }
        entries.push(Entry { name, shape, values });
    }
    Ok(entries)
}

fn shape_of<'a>(entries: &'a [Entry], name: &str) -> Result<&'a [usize], TrainError> {
    entries
        .iter()
        .find(|e| e.name == name)
        .map(|e| e.shape.as_slice())
        .ok_or_else(|| bad(format!("missing tensor `{name}`")))
}

fn infer_model(entries: &[Entry]) -> Result<Model, TrainError> {
    let first = entries.first().ok_or_else(|| bad("no tensors"))?;
    if first.name.starts_with("mlp.") {
        let mut sizes = Vec::new();
        for i in 0.. {
            match entries.iter().find(|e| e.name == format!("mlp.{i}.weight")) {
                Some(e) if e.shape.len() == 2 => {
                    if i == 0 {
                        sizes.push(e.shape[1]);
                    }
                    sizes.push(e.shape[0]);
                }
                Some(_) => return Err(bad(format!("mlp.{i}.weight must be two-dimensional"))),
                None => break,
            }
        }
        return Ok(Model::Mlp(MlpPinn::new(&sizes)?));
    }
    let dim = |name: &str, axis: usize| -> Result<usize, TrainError> {
        shape_of(entries, name)?.get(axis).copied().ok_or_else(|| bad(format!("`{name}` has too few axes")))
    };
    let depth = entries.iter().filter(|e| e.name.starts_with("cheby.")).count();
    let config = AcPkanConfig {
        d_in: dim("embed.weight", 1)?,
        d_model: dim("embed.weight", 0)?,
        d_hidden: dim("enc_u.weight", 0)?,
        d_out: dim("head.weight", 0)?,
        depth,
        degree: dim("cheby.0.coeffs", 2)?.saturating_sub(1),
    };
    Ok(Model::AcPkan(AcPkanModel::new(config)?))
}

pub fn checkpoint_from_str(text: &str) -> Result<Model, TrainError> {
    let entries = parse_entries(text)?;
    let mut model = infer_model(&entries)?;
    let specs = model.params().tensors().to_vec();
    if specs.len() != entries.len() {
        return Err(bad(format!("expected {} tensors, found {}", specs.len(), entries.len())));
    }
    let values = model.params_mut().values_mut();
    for (spec, entry) in specs.iter().zip(&entries) {
        if spec.name != entry.name || spec.shape != entry.shape {
            return Err(bad(format!(
                "tensor `{}` {:?} does not match expected `{}` {:?}",
                entry.name, entry.shape, spec.name, spec.shape
            )));
        }
        values[spec.offset..spec.offset + spec.len()].copy_from_slice(&entry.values);
    }
    Ok(model)
}
