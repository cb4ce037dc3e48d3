//! Property tests over random small layered models.

mod common;

use proptest::prelude::*;
use structinfo::config::{parse_config, RunConfig};
use structinfo::model::ParameterKind;
use structinfo::pipeline::Study;
use structinfo::solver::RecordingPlan;

fn with_layer(rho: f64, c_p: f64, end_us: f64) -> RunConfig {
    let mut cfg = common::small(end_us);
    cfg.layers[0].rho = rho;
    cfg.layers[0].c_p = c_p;
    for v in cfg.variations.iter_mut() {
        v.reference_value = match v.kind {
            ParameterKind::LayerPosition | ParameterKind::LayerThickness => v.reference_value,
            ParameterKind::SoundSpeedConstRho => Some(c_p),
            ParameterKind::DensityConstCp | ParameterKind::DensityConstStiffness => Some(rho),
            ParameterKind::StiffnessConstRho => Some(rho * c_p * c_p),
        };
        if v.kind == ParameterKind::StiffnessConstRho {
            v.delta = Some(1e-5 * rho * c_p * c_p);
        }
    }
    cfg
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn response_is_linear_in_the_excitation(rho in 1500.0..4000.0f64, c in 3000.0..4400.0f64, k in 0.1..10.0f64) {
        let mut cfg = with_layer(rho, c, 4.0);
        let a = Study::new(&cfg).unwrap().run_base().unwrap();
        cfg.excitation.peak_velocity = Some(k);
        let b = Study::new(&cfg).unwrap().run_base().unwrap();
        let peak = a.sensor_left.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.sensor_left.iter().chain(&a.sensor_right).zip(b.sensor_left.iter().chain(&b.sensor_right)) {
            prop_assert!((k * x - y).abs() <= 1e-12 * k * peak);
        }
    }

    #[test]
    fn variations_change_only_their_parameter(rho in 1500.0..4000.0f64, c in 3000.0..4400.0f64) {
        let cfg = with_layer(rho, c, 1.0);
        let study = Study::new(&cfg).unwrap();
        let matrix = (cfg.matrix.rho, cfg.matrix.rho * cfg.matrix.c_p * cfg.matrix.c_p);
        for p in study.prepare_all().unwrap() {
            let r = &p.reference.field;
            for f in [&p.pair.plus.field, &p.pair.minus.field] {
                for j in 0..r.len() {
                    match p.spec.kind {
                        ParameterKind::LayerPosition | ParameterKind::LayerThickness => {
                            let layer = (rho, rho * c * c);
                            let cell = (f.rho[j], f.stiffness[j]);
                            prop_assert!(cell == matrix || (rel(cell.0, layer.0) < 1e-12 && rel(cell.1, layer.1) < 1e-12));
                        }
                        ParameterKind::SoundSpeedConstRho | ParameterKind::StiffnessConstRho => {
                            prop_assert_eq!(f.rho[j], r.rho[j]);
                        }
                        ParameterKind::DensityConstCp => prop_assert!(rel(f.c_p(j), r.c_p(j)) < 1e-12),
                        ParameterKind::DensityConstStiffness => prop_assert_eq!(f.stiffness[j], r.stiffness[j]),
                    }
                }
            }
            let touched = p.pair.touched_cells();
            prop_assert!(!touched.is_empty());
            if p.spec.kind == ParameterKind::LayerPosition {
                let count = |f: &structinfo::model::MaterialField| (0..f.len()).filter(|&j| f.rho[j] != matrix.0).count();
                prop_assert_eq!(count(&p.pair.plus.field), count(&p.pair.minus.field));
            }
        }
    }

    #[test]
    fn information_is_nonnegative_and_amplitude_free(
        rho in 1500.0..4000.0f64,
        c in 3000.0..4400.0f64,
        which in 0usize..6,
        k in 0.2..5.0f64,
    ) {
        let mut cfg = with_layer(rho, c, 3.0);
        let v = cfg.variations[which].clone();
        cfg.variations = vec![v];
        let study = Study::new(&cfg).unwrap();
        let p = &study.prepare_all().unwrap()[0];
        let a = study.analyze_variation(p).unwrap().output;
        prop_assert!(a.density_max > 0.0);
        prop_assert!(a.density_min >= -1e-12 * a.density_max);

        cfg.excitation.peak_velocity = Some(k);
        let scaled = Study::new(&cfg).unwrap();
        let b = scaled.analyze_variation(&scaled.prepare_all().unwrap()[0]).unwrap().output;
        prop_assert!(rel(a.density_max, b.density_max) < 1e-9);
        let last = a.trace.i_total.len() - 1;
        prop_assert!(rel(a.trace.i_total[last], b.trace.i_total[last]) < 1e-9);
    }

    #[test]
    fn difference_field_is_zero_before_the_wave_arrives(rho in 1500.0..4000.0f64, c in 3000.0..4400.0f64) {
        let cfg = with_layer(rho, c, 3.0);
        let study = Study::new(&cfg).unwrap();
        for p in study.prepare_all().unwrap() {
            let first = p.pair.touched_cells()[0];
            let probe = p.reference_solver.run(&RecordingPlan { probe_cells: vec![first.saturating_sub(2)], ..RecordingPlan::default() }).unwrap();
            let arrival = probe.probes[0].v.iter().position(|v| *v != 0.0).unwrap();
            let o = study.analyze_variation(&p).unwrap().output;
            prop_assert!(o.max_difference[..arrival].iter().all(|&d| d == 0.0), "{}", p.name);
        }
    }

    #[test]
    fn config_round_trips(n in 100usize..400, rho in 1500.0..4000.0f64, c in 3000.0..4400.0f64, start in 0.1..0.4f64, width in 0.1..0.4f64) {
        let mut cfg = with_layer(rho, c, 1.0);
        cfg.grid.n_cells = n;
        let length = n as f64 * cfg.grid.dx;
        cfg.layers[0].x_start = (start * length / cfg.grid.dx).round() * cfg.grid.dx;
        cfg.layers[0].x_end = ((start + width) * length / cfg.grid.dx).round() * cfg.grid.dx;
        cfg.variations.retain(|v| !v.kind.is_geometric());
        let resolved = cfg.resolved().unwrap();
        let again = parse_config(&resolved.to_toml().unwrap()).unwrap();
        prop_assert_eq!(again, resolved);
    }
}
