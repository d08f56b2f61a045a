use mudsim::analysis::{coverage_bound_with, coverage_mc_curve, flops_dnn, S2Form};
use mudsim::channel::ChannelModel;

use super::Run;
use crate::config::config_err;
use crate::output::{ensure_dir, write_records};

pub fn cmd_flops(run: &Run) -> anyhow::Result<()> {
    let c = &run.cfg;
    if c.network.layout != "uniform" {
        log::warn!("the FLOPs count assumes equal widths; using network.width = {}", c.network.width);
    }
    let f = flops_dnn(
        c.network.blocks as u64,
        c.network.width as u64,
        c.scheme.resources as u64,
        c.scheme.devices as u64,
        c.scheme.antennas as u64,
    )
    .map_err(|e| config_err(format!("flops: {e}")))?;
    let parts = [
        ("input_dense", f.c1),
        ("input_norm", f.c2),
        ("input_relu", f.c3),
        ("residual_blocks", f.c4),
        ("output_dense", f.c5),
        ("output_sigmoid", f.c6),
        ("component_sum", f.component_sum()),
        ("closed_form", f.closed_form),
    ];
    let rows: Vec<Vec<String>> = parts.iter().map(|(n, v)| vec![n.to_string(), v.to_string()]).collect();
    ensure_dir(&run.art.dir)?;
    write_records(&run.art.flops(), &c.hash("flops"), &["component", "flops"], &rows)?;
    println!(
        "flops: L={} width={} K={} N={} X={}: {} (component sum {})",
        c.network.blocks,
        c.network.width,
        c.scheme.resources,
        c.scheme.devices,
        c.scheme.antennas,
        f.closed_form,
        f.component_sum()
    );
    Ok(())
}

pub struct CoverageArgs {
    pub devices: Option<u64>,
    pub active: u64,
    pub alpha_max: u64,
    pub trials: u64,
    pub seed: u64,
}

pub fn cmd_coverage(run: &Run, a: &CoverageArgs) -> anyhow::Result<()> {
    let devices = a.devices.unwrap_or(run.cfg.scheme.devices as u64);
    if a.active < 2 || a.active >= devices {
        return Err(config_err(format!("coverage needs 2 <= n < N, got n={} N={devices}", a.active)));
    }
    if a.alpha_max == 0 {
        return Err(config_err("--alpha-max must be at least 1"));
    }
    if a.trials < 10_000 {
        return Err(config_err("--trials must be at least 10000"));
    }
    let mc = coverage_mc_curve(devices, a.active, a.alpha_max, a.trials, a.seed)?;
    let mut rows = Vec::with_capacity(mc.len());
    for (alpha, est) in (1..=a.alpha_max).zip(&mc) {
        let b = coverage_bound_with(devices, a.active, alpha, S2Form::Expanded)?;
        let compact = coverage_bound_with(devices, a.active, alpha, S2Form::Compact)?;
        rows.push(vec![
            alpha.to_string(),
            format!("{:e}", b.s1),
            format!("{:e}", b.s2),
            b.delta.to_string(),
            format!("{:.9}", b.raw),
            format!("{:.9}", b.bound),
            format!("{:.9}", compact.bound),
            format!("{:.6}", est.estimate()),
            format!("{:.6}", est.adjusted_stderr()),
        ]);
    }
    ensure_dir(&run.art.dir)?;
    let hash = run.cfg.hash(&format!("coverage {devices} {} {} {} {}", a.active, a.alpha_max, a.trials, a.seed));
    write_records(
        &run.art.coverage(),
        &hash,
        &["alpha", "s1", "s2", "delta", "raw", "bound", "bound_compact", "mc", "mc_stderr"],
        &rows,
    )?;
    println!("coverage: N={devices} n={} alpha 1..={} written to {}", a.active, a.alpha_max, run.art.coverage().display());
    Ok(())
}

pub fn cmd_channel_probe(run: &Run, points: usize) -> anyhow::Result<()> {
    let ChannelModel::Inf(c) = run.cfg.channel_model()? else {
        return Err(config_err("channel-probe needs an indoor-factory channel.model (inf-sl, inf-dl, inf-sh or inf-dh)"));
    };
    if points < 2 {
        return Err(config_err("--points must be at least 2"));
    }
    let s = &c.scenario;
    let step = (s.r2d_max - s.r2d_min) / (points - 1) as f64;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let r2d = s.r2d_min + step * i as f64;
        let r3d = s.r3d(r2d);
        rows.push(vec![
            format!("{r2d:.4}"),
            format!("{r3d:.4}"),
            format!("{:e}", s.los_probability(r2d)?),
            format!("{:.6}", s.pathloss_los_db(r3d)?),
            format!("{:.6}", s.pathloss_nlos_db(r3d)?),
        ]);
    }
    ensure_dir(&run.art.dir)?;
    write_records(
        &run.art.channel_probe(),
        &run.cfg.hash(&format!("channel-probe {points}")),
        &["r2d", "r3d", "pr_los", "pl_los", "pl_nlos"],
        &rows,
    )?;
    println!("channel-probe: {} rows for {} written to {}", points, s.kind.name(), run.art.channel_probe().display());
    Ok(())
}
