//! Fixtures shared by the criterion benchmarks in `benches/`.

use megaheat::pipeline::{synth_generate, RunConfig, SynthSpec, SynthWorld};

/// One UC/non-UC pair over the default 1956-2015 window.
pub fn world(stations_per_group: usize, seed: u64) -> (RunConfig, SynthWorld) {
    let spec = SynthSpec {
        pairs: 1,
        uc_stations: stations_per_group,
        nonuc_stations: stations_per_group,
        ..SynthSpec::default()
    };
    let world = synth_generate(seed, &spec);
    let cfg = RunConfig {
        seed,
        synth: Some(spec),
        ..RunConfig::default()
    };
    (cfg, world)
}

/// The world's daily records as one GHCN-D file.
pub fn ghcnd_bytes(world: &SynthWorld) -> Vec<u8> {
    let mut buf = Vec::new();
    for s in &world.daily {
        megaheat::geo::write_ghcnd(s, &mut buf).expect("write to memory");
    }
    buf
}
