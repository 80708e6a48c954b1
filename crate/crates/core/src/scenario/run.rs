use super::Scenario;
use crate::analysis::{linspace, port_power, s11, ReflectionResult};
use crate::coupling::{assemble_global_system, GlobalSystem, SystemInputs};
use crate::error::{Error, Result};
use crate::operators::MaterialField;
use crate::solver::{cfl_time_step, RecordSet, Simulation};
use crate::topology::{build_indicator_masks, build_layout};

pub struct BuiltScenario {
    pub system: GlobalSystem,
    /// Outer block first, then one per region.
    pub materials: Vec<MaterialField>,
    /// CFL-derived (or configured) step.
    pub dt: f64,
}

pub fn build_system(sc: &Scenario) -> Result<BuiltScenario> {
    let layout = build_layout(&sc.grid)?;
    let masks = build_indicator_masks(&layout, &sc.regions)?;
    let outer = sc.materials.sample(&layout);
    outer.validate(&layout)?;
    let regions: Vec<MaterialField> = masks.holes().iter().map(|h| sc.materials.sample(&h.fine)).collect();
    let system = assemble_global_system(&SystemInputs {
        masks: &masks,
        outer_materials: &outer,
        region_materials: &regions,
        sat: &sc.sat,
    })?;
    let mut materials = vec![outer];
    materials.extend(regions);
    let refs: Vec<&MaterialField> = materials.iter().collect();
    let dt = match sc.time.dt {
        Some(dt) => dt,
        None => cfl_time_step(&system.layout, &refs, sc.time.cfl)?,
    };
    Ok(BuiltScenario { system, materials, dt })
}

pub struct RunOutput {
    pub records: RecordSet,
    pub reference: Option<RecordSet>,
    pub reflection: Option<ReflectionResult>,
}

fn simulate(sc: &Scenario, built: &BuiltScenario, dt: f64) -> Result<RecordSet> {
    let mut sim = Simulation::new(&built.system, dt, &sc.sources, &sc.probes)?;
    sim.run(sc.time.steps, sc.time.record_stride)
}

/// Runs the scenario; with a reflection spec also runs the region-free
/// reference at the same step and compares the two on the port line.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput> {
    let built = build_system(sc)?;
    let records = simulate(sc, &built, built.dt)?;
    let Some(spec) = &sc.output.reflection else {
        return Ok(RunOutput {
            records,
            reference: None,
            reflection: None,
        });
    };
    let ref_sc = sc.reference();
    let ref_built = build_system(&ref_sc)?;
    let reference = simulate(&ref_sc, &ref_built, built.dt)?;
    let total = records.line(&spec.port);
    let inc = reference.line(&spec.port);
    let (Some(total), Some(inc)) = (total, inc) else {
        return Err(Error::config("output.reflection.port", "line probe not recorded"));
    };
    if total.s != inc.s {
        return Err(Error::Geometry("port line differs between total and reference runs".into()));
    }
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect()
    };
    let rec_dt = built.dt * sc.time.record_stride as f64;
    let freqs = linspace(spec.f_min, spec.f_max, spec.points);
    let p_r = port_power(&diff(&total.ez, &inc.ez), &diff(&total.h, &inc.h), total.ds, rec_dt, &freqs)?;
    let p_i = port_power(&inc.ez, &inc.h, inc.ds, rec_dt, &freqs)?;
    let reflection = s11(&freqs, &p_r, &p_i, sc.source_cutoff())?;
    Ok(RunOutput {
        records,
        reference: Some(reference),
        reflection: Some(reflection),
    })
}
