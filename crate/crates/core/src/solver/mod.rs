//! Leapfrog time stepping, sources and probes.

mod sites;
mod stepper;
mod waveform;

pub use sites::{
    resolve_probe, resolve_source, snap_point, LineSpec, ProbeSites, ProbeSpec, Profile, ResolvedProbe, ResolvedSource,
    SourceSpec,
};
pub use stepper::{cfl_time_step, discrete_energy, FieldState, LineRecord, RecordSet, RunInfo, Simulation, TimeConfig};
pub use waveform::{waveforms, Gaussian, ModulatedGaussian, Waveform, WaveformParams, WaveformRegistry};

#[cfg(test)]
mod tests;
