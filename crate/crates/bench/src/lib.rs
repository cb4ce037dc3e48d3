//! Fixtures shared by the benchmarks in `benches/`.

use structinfo::pipeline::Study;
use structinfo::presets::preset;

/// The three-layer model with its record cut to `levels` levels.
pub fn fig2_truncated(levels: usize) -> Study {
    let mut cfg = preset("fig2").expect("fig2 preset parses");
    cfg.grid.n_steps = Some(levels);
    cfg.grid.end_time = None;
    cfg.recording.snapshot_times_us = Some(Vec::new());
    cfg.analysis.window_us = [0.0, 6.0];
    cfg.analysis.interaction_windows_us.clear();
    Study::new(&cfg).expect("truncated fig2 is valid")
}
