use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nonsplit::analysis::{linspace, port_power, s11 as reflection, stability_diagnostics};
use nonsplit::interpolation::{accuracy_report, build_interpolation_pair};
use nonsplit::operators::{assemble_outer_2d, build_embedded_2d, verify_sbp_2d};
use nonsplit::scenario::{build_system, parse_scenario, presets, LineCsv};
use nonsplit::topology::{build_indicator_masks, build_layout, Ratio};

const SKEW_TOL: f64 = 1e-10;
const SBP_TOL: f64 = 1e-12;
const COMPAT_TOL: f64 = 1e-12;

pub fn check_sbp(path: &Path, samples: usize) -> Result<()> {
    let parsed = parse_scenario(path).with_context(|| format!("reading {}", path.display()))?;
    let sc = &parsed.scenario;
    let layout = build_layout(&sc.grid)?;
    let masks = build_indicator_masks(&layout, &sc.regions)?;
    let mut ok = true;

    let outer = verify_sbp_2d(&assemble_outer_2d(&masks)?, Some(&masks));
    let worst = outer.x_residual.max(outer.y_residual);
    ok &= worst <= SBP_TOL;
    println!("outer operators: interior SBP residual {worst:.3e}");
    for (k, hole) in masks.holes().iter().enumerate() {
        let r = verify_sbp_2d(&build_embedded_2d(&hole.fine)?, None);
        let w = r.x_residual.max(r.y_residual);
        ok &= w <= SBP_TOL;
        println!("region {k} operators: interior SBP residual {w:.3e}");
    }

    let built = build_system(sc)?;
    for (k, pairs) in built.system.pairs.iter().enumerate() {
        let c = pairs.iter().map(|p| p.compatibility_residual()).fold(0.0, f64::max);
        ok &= c <= COMPAT_TOL;
        println!("region {k} interpolation: compatibility residual {c:.3e}");
    }
    let rep = stability_diagnostics(&built.system, samples, 1);
    ok &= rep.skew_residual <= SKEW_TOL && rep.passed();
    println!("{rep}");
    if !ok {
        bail!("diagnostics above tolerance");
    }
    Ok(())
}

fn fresh_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() && !force {
        bail!("{} already exists and is not empty; pass --force to overwrite", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn gen_interp(ratio: &str, nodes: usize, spacing: f64, out: &Path, force: bool) -> Result<()> {
    let ratio: Ratio = ratio.parse()?;
    let pair = build_interpolation_pair(nodes, ratio, spacing)?;
    fresh_dir(out, force)?;
    let mats = [
        ("T_c2f.txt", &pair.t_c2f),
        ("T_f2c.txt", &pair.t_f2c),
        ("T_W.txt", &pair.t_w),
        ("T_hat_W.txt", &pair.t_hat_w),
    ];
    for (name, m) in mats {
        let p = out.join(name);
        let mut w = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        m.write_triplets(&mut w)?;
        w.flush()?;
    }
    let acc = accuracy_report(&pair);
    let compat = pair.compatibility_residual();
    println!("ratio {ratio}: {} coarse -> {} fine nodes, support {}", pair.n_h, pair.n_hat, pair.support);
    println!("compatibility_residual={compat:e}");
    println!("aligned_residual={:e}", pair.aligned_residual());
    println!("linear_interior_error={:e}", acc.linear.interior);
    println!("quadratic_interior_error={:e}", acc.quadratic.interior);
    if compat > COMPAT_TOL {
        bail!("compatibility residual {compat:e} exceeds {COMPAT_TOL:e}");
    }
    Ok(())
}

pub fn s11(
    total: &Path,
    reference: &Path,
    f_min: f64,
    f_max: f64,
    points: usize,
    cutoff: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let t = LineCsv::read(total)?;
    let r = LineCsv::read(reference)?;
    if t.s != r.s || t.ez.len() != r.ez.len() {
        bail!("total and reference lines differ in nodes or record count");
    }
    if (t.dt - r.dt).abs() > 1e-9 * r.dt.abs() {
        bail!("total and reference were recorded with different time steps");
    }
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect()
    };
    let freqs = linspace(f_min, f_max, points);
    let p_r = port_power(&diff(&t.ez, &r.ez), &diff(&t.h, &r.h), r.ds(), r.dt, &freqs)?;
    let p_i = port_power(&r.ez, &r.h, r.ds(), r.dt, &freqs)?;
    let res = reflection(&freqs, &p_r, &p_i, cutoff)?;
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            res.write_csv(&mut w)?;
            w.flush()?;
        }
        None => res.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

pub fn preset(name: Option<&str>, full_scale: bool, list: bool, out: Option<&Path>) -> Result<()> {
    let reg = presets();
    if list || name.is_none() {
        for n in reg.names() {
            println!("{n:22} {}", reg.get(n).expect("listed").summary());
        }
        return Ok(());
    }
    let name = name.expect("checked");
    let Some(p) = reg.get(name) else {
        bail!("unknown preset `{name}`; available: {}", reg.names().join(", "));
    };
    let text = p.scenario(full_scale).to_toml()?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
