use super::*;
use crate::coupling::{assemble_global_system, default_penalties, GlobalSystem, SystemInputs};
use crate::operators::MaterialField;
use crate::topology::{build_indicator_masks, EmbeddedRegionSpec, Rect, StaggeredLayout};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cavity(ratio: &str, eps_fine: f64, sigma: f64) -> GlobalSystem {
    let l = StaggeredLayout::new(12, 12, 0.1, 0.1, 0.0, 0.0);
    let r = EmbeddedRegionSpec {
        bounds: Rect {
            x0: 0.4,
            x1: 0.8,
            y0: 0.4,
            y1: 0.8,
        },
        ratio: ratio.parse().unwrap(),
    };
    let m = build_indicator_masks(&l, &[r]).unwrap();
    let mut outer = MaterialField::vacuum(&l);
    outer.sigma.iter_mut().for_each(|s| *s = sigma);
    let mut fine = MaterialField::vacuum(&m.holes()[0].fine);
    fine.eps_rel.iter_mut().for_each(|e| *e = eps_fine);
    assemble_global_system(&SystemInputs {
        masks: &m,
        outer_materials: &outer,
        region_materials: &[fine],
        sat: &default_penalties(),
    })
    .unwrap()
}

fn dt_of(sys: &GlobalSystem, cfl: f64) -> f64 {
    let mats: Vec<MaterialField> = std::iter::once(&sys.layout.outer)
        .chain(&sys.layout.regions)
        .map(MaterialField::vacuum)
        .collect();
    let refs: Vec<&MaterialField> = mats.iter().collect();
    cfl_time_step(&sys.layout, &refs, cfl).unwrap()
}

fn random_state(sys: &GlobalSystem, seed: u64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FieldState::zeros(sys);
    for (v, a) in s.e.iter_mut().zip(&sys.e_active) {
        if *a {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    for (v, a) in s.h.iter_mut().zip(&sys.h_active) {
        if *a {
            *v = rng.random_range(-1.0..1.0) / 377.0;
        }
    }
    s
}

fn pulse(at: [f64; 2]) -> SourceSpec {
    SourceSpec {
        kind: "gaussian".into(),
        tau: 1e-9,
        t0: 3e-9,
        carrier_hz: None,
        amplitude: 1.0,
        at: Some(at),
        line: None,
    }
}

fn point(name: &str, at: [f64; 2]) -> ProbeSpec {
    ProbeSpec {
        name: name.into(),
        at: Some(at),
        line: None,
    }
}

#[test]
fn zero_state_is_a_fixed_point() {
    let sys = cavity("1:3", 1.0, 0.0);
    let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[], &[point("p", [0.6, 0.6])]).unwrap();
    let rec = sim.run(200, 10).unwrap();
    assert!(sim.state.e.iter().chain(&sim.state.h).all(|v| *v == 0.0));
    assert!(rec.energy.iter().all(|q| *q == 0.0));
    assert_eq!(rec.steps.len(), 20);
}

#[test]
fn interleaved_energy_is_conserved() {
    let sys = cavity("1:3", 1.0, 0.0);
    let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[], &[]).unwrap();
    sim.state = random_state(&sys, 7);
    let rec = sim.run(10_000, 100).unwrap();
    let q0 = rec.energy[0];
    assert!(q0 > 0.0);
    let drift = rec.energy.iter().map(|q| (q - q0).abs() / q0).fold(0.0, f64::max);
    assert!(drift < 1e-8, "relative drift {drift:e}");
}

#[test]
fn masked_values_stay_zero() {
    let sys = cavity("2:3", 1.0, 0.0);
    let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[pulse([0.2, 0.3])], &[]).unwrap();
    sim.run(300, 50).unwrap();
    for (v, a) in sim.state.e.iter().zip(&sys.e_active) {
        if !a {
            assert_eq!(*v, 0.0);
        }
    }
    for (v, a) in sim.state.h.iter().zip(&sys.h_active) {
        if !a {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn first_step_at_source_is_the_injected_value() {
    let sys = cavity("1:3", 1.0, 0.0);
    let dt = dt_of(&sys, 0.9);
    let src = pulse([0.6, 0.6]);
    let mut sim = Simulation::new(&sys, dt, std::slice::from_ref(&src), &[point("s", [0.6, 0.6])]).unwrap();
    sim.step(false).unwrap();
    let (k, _) = sim.sources()[0].nodes[0];
    let want = src.waveform().unwrap().value(0.5 * dt);
    assert_eq!(sim.state.e[k], want);
    let nonzero = sim.state.e.iter().filter(|v| **v != 0.0).count();
    assert_eq!(nonzero, 1);
}

#[test]
fn loss_dissipates_energy() {
    let sys = cavity("1:3", 1.0, 0.05);
    let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[], &[]).unwrap();
    // Curl-free H is a static mode that loss on E cannot reach.
    sim.state = random_state(&sys, 3);
    sim.state.h.iter_mut().for_each(|v| *v = 0.0);
    let rec = sim.run(2000, 50).unwrap();
    assert!(rec.energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(rec.energy.last().unwrap() < &(0.5 * rec.energy[0]));
}

#[test]
fn runs_are_bitwise_reproducible() {
    let sys = cavity("1:2", 1.0, 0.0);
    let run = || {
        let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[pulse([0.3, 0.7])], &[point("a", [0.65, 0.55])]).unwrap();
        sim.run(500, 5).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn permittivity_in_finest_block_doubles_the_step() {
    let sys = cavity("1:5", 1.0, 0.0);
    let l = &sys.layout;
    let outer = MaterialField::vacuum(&l.outer);
    let mut fine = MaterialField::vacuum(&l.regions[0]);
    let base = cfl_time_step(l, &[&outer, &fine], 1.0).unwrap();
    fine.eps_rel.iter_mut().for_each(|e| *e = 4.0);
    let slow = cfl_time_step(l, &[&outer, &fine], 1.0).unwrap();
    assert!((slow / base - 2.0).abs() < 1e-12);
}

#[test]
fn snapping_reports_distance() {
    let sys = cavity("1:3", 1.0, 0.0);
    let sim = Simulation::new(&sys, 1e-12, &[pulse([0.23, 0.3])], &[point("p", [0.6, 0.6]), point("q", [0.0, 0.0])]).unwrap();
    assert!((sim.sources()[0].snap_distance - 0.03).abs() < 1e-12);
    assert!(sim.probes()[0].snap_distance < 1e-12);
    // Wall nodes are inactive; the nearest active one is a diagonal step in.
    assert!((sim.probes()[1].snap_distance - 0.1 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn line_probe_averages_normal_field() {
    let sys = cavity("1:3", 1.0, 0.0);
    let line = LineSpec {
        from: [0.2, 0.0],
        to: [0.2, 1.2],
        profile: Profile::HalfSine,
    };
    let p = ProbeSpec {
        name: "port".into(),
        at: None,
        line: Some(line),
    };
    let s = SourceSpec {
        at: None,
        line: Some(line),
        ..pulse([0.0, 0.0])
    };
    let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[s], &[p]).unwrap();
    assert_eq!(sim.sources()[0].nodes.len(), 11);
    let rec = sim.run(40, 1).unwrap();
    let lr = rec.line("port").unwrap();
    assert_eq!(lr.s.len(), 11);
    assert_eq!(lr.ez.len(), 40);
    assert!(lr.ez[39].iter().any(|v| *v != 0.0));
    assert!(rec.probe_names.is_empty());
}

#[test]
fn csv_has_full_precision() {
    let sys = cavity("1:3", 1.0, 0.0);
    let mut sim = Simulation::new(&sys, dt_of(&sys, 0.9), &[pulse([0.6, 0.6])], &[point("mid", [0.6, 0.6])]).unwrap();
    let rec = sim.run(10, 5).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,time_s,mid_Ez,energy_J");
    let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "5");
    let v: f64 = row[2].parse().unwrap();
    assert_eq!(v, rec.probes[1][0]);
}

#[test]
fn bad_inputs_are_rejected() {
    let sys = cavity("1:3", 1.0, 0.0);
    assert!(Simulation::new(&sys, 0.0, &[], &[]).is_err());
    let dup = [point("a", [0.3, 0.3]), point("a", [0.5, 0.5])];
    assert!(Simulation::new(&sys, 1e-12, &[], &dup).is_err());
    let mut both = pulse([0.3, 0.3]);
    both.line = Some(LineSpec {
        from: [0.1, 0.1],
        to: [0.3, 0.1],
        profile: Profile::Uniform,
    });
    assert!(Simulation::new(&sys, 1e-12, &[both], &[]).is_err());
}
