use anyhow::Context;
use mudsim::codes::{
    assign_phase_rotations, build_factor_graph, build_mother_constellation, build_scma_codebook, load_code_set,
    save_code_set, select_musa_sequences, write_code_set_csv, CodeSet,
};
use mudsim::linalg::{inner, norm, CMatrix};

use super::Run;
use crate::config::{config_err, ExperimentConfig, SchemeKind};
use crate::output::{ensure_dir, open_with_hash, write_records};

fn build_code_set(cfg: &ExperimentConfig) -> anyhow::Result<CodeSet> {
    let s = &cfg.scheme;
    Ok(match s.kind {
        SchemeKind::Musa => CodeSet::Musa(
            select_musa_sequences(s.resources, s.devices, s.rho, s.seed).context("selecting MUSA sequences")?,
        ),
        SchemeKind::Scma => {
            let graph = build_factor_graph(s.resources, s.devices, s.dims).context("building the factor graph")?;
            let rotated = assign_phase_rotations(&graph, s.points).context("assigning phase rotations")?;
            let mother = build_mother_constellation(s.points, s.dims).context("building the mother constellation")?;
            CodeSet::Scma(build_scma_codebook(&rotated, &mother)?)
        }
    })
}

/// Pairwise correlation magnitudes of the normalised columns.
fn correlation(phi: &CMatrix<f64>) -> Vec<Vec<f64>> {
    let n = phi.cols();
    let norms: Vec<f64> = (0..n).map(|j| norm(phi.column(j))).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| inner(phi.column(i), phi.column(j)).norm() / (norms[i] * norms[j]))
                .collect()
        })
        .collect()
}

/// The pilot sensing matrix. An existing code file in the output
/// directory is reused; otherwise the codes are built and saved.
pub fn sensing_matrix(run: &Run) -> anyhow::Result<CMatrix<f64>> {
    let path = run.art.codes();
    let s = &run.cfg.scheme;
    if path.exists() {
        let file = load_code_set(&path).with_context(|| format!("loading {}", path.display()))?;
        let musa = s.kind == SchemeKind::Musa;
        if (file.k, file.n, file.is_musa()) != (s.resources, s.devices, musa) {
            return Err(config_err(format!(
                "{} holds K={} N={} ({}), but the config asks for K={} N={} ({:?}); run gen-codes or pick another output",
                path.display(),
                file.k,
                file.n,
                if file.is_musa() { "MUSA" } else { "SCMA" },
                s.resources,
                s.devices,
                s.kind
            )));
        }
        return Ok(file.signatures(s.pilot_symbol));
    }
    let set = build_code_set(&run.cfg)?;
    ensure_dir(&run.art.dir)?;
    save_code_set(&path, &set)?;
    Ok(set.signatures(s.pilot_symbol))
}

pub fn cmd_gen_codes(run: &Run) -> anyhow::Result<()> {
    let set = build_code_set(&run.cfg)?;
    ensure_dir(&run.art.dir)?;
    save_code_set(run.art.codes(), &set)?;
    let hash = run.cfg.hash("gen-codes");

    let mut w = open_with_hash(&run.art.code_entries(), &hash)?;
    write_code_set_csv(&mut w, &set)?;

    let phi = set.signatures::<f64>(run.cfg.scheme.pilot_symbol);
    let corr = correlation(&phi);
    let names: Vec<String> = (0..phi.cols()).map(|j| format!("d{j}")).collect();
    let mut header = vec!["device"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = corr
        .iter()
        .enumerate()
        .map(|(i, row)| std::iter::once(i.to_string()).chain(row.iter().map(|v| format!("{v:.9}"))).collect())
        .collect();
    write_records(&run.art.correlation(), &hash, &header, &rows)?;

    let max_off = corr
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, &v)| v))
        .fold(0.0, f64::max);
    println!(
        "codes: K={} N={} written to {}; max off-diagonal correlation {max_off:.4}",
        set.resources(),
        set.devices(),
        run.art.codes().display()
    );
    Ok(())
}
