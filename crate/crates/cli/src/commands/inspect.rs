use std::fmt::Write;
use std::path::Path;

use anyhow::{Context, Result};
use autodip::calibration::{load_store, CalibrationStore};
use autodip::metrics::MetricKind;

pub fn render_store(store: &CalibrationStore) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version {}", store.format_version);
    let _ = writeln!(out, "group optima ({}):", store.group_best.len());
    for (key, config) in &store.group_best {
        let _ = writeln!(out, "  {key:<40} {config}");
    }
    let _ = writeln!(out, "entries ({}):", store.entries.len());
    for e in &store.entries {
        let _ = writeln!(
            out,
            "  {} [{} / {}] combined {}",
            e.image_id, e.meta.microscope, e.meta.specimen, e.best_combined
        );
        for kind in MetricKind::ALL {
            if let Some(c) = e.best_by_measure.get(&kind) {
                let _ = writeln!(out, "    {:<20} {c}", kind.as_str());
            }
        }
    }
    match &store.embedding_model {
        Some(m) => {
            let _ = writeln!(out, "embedding: {} dims", m.dims());
        }
        None => out.push_str("embedding: none\n"),
    }
    out
}

pub fn cmd_inspect_store(path: &Path) -> Result<String> {
    let store = load_store(path).with_context(|| format!("loading store {}", path.display()))?;
    Ok(render_store(&store))
}
