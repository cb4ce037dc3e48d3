#![allow(dead_code)]

use structinfo::config::{parse_config, RunConfig};

/// A 12 mm bar with a 2.4 mm layer, small enough to record every level.
pub fn small_config(end_us: f64) -> String {
    format!(
        r#"
name = "small"

[grid]
n_cells = 240
dx = 50.0e-6
dt = 1.08e-8
end_time = {end}

[matrix]
rho = 2400.0
c_p = 4000.0

[[layers]]
x_start = 0.0048
x_end = 0.0072
rho = 2600.0
c_p = 4500.0

[excitation]
center_frequency = 2.0e6
n_cycles = 2
peak_velocity = 1.0

[[variations]]
name = "position"
kind = "layer_position"
reference_value = 0.006
delta_cells = 1

[[variations]]
name = "thickness"
kind = "layer_thickness"
reference_value = 0.0024
delta_cells = 2

[[variations]]
name = "sound_speed"
kind = "sound_speed_const_rho"
reference_value = 4499.0
delta = 1.0

[[variations]]
name = "density"
kind = "density_const_cp"
reference_value = 2600.0
delta = 1.0

[[variations]]
name = "density_k"
kind = "density_const_stiffness"
reference_value = 2600.0
delta = 1.0

[[variations]]
name = "stiffness"
kind = "stiffness_const_rho"
reference_value = 5.265e10
delta = 1.0e7

[recording]
snapshot_times_us = {snaps}

[analysis]
window_us = [0.0, {end_us}]
interaction_windows_us = []
residual_margin = 3
"#,
        end = end_us * 1e-6,
        end_us = end_us,
        snaps = if end_us > 3.0 {
            "[2.0, 3.0]"
        } else if end_us > 2.0 {
            "[2.0]"
        } else {
            "[]"
        }
    )
}

pub fn small(end_us: f64) -> RunConfig {
    parse_config(&small_config(end_us)).expect("small config is valid")
}
