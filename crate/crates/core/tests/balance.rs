//! The streaming analysis against the stored-array path, and invariants of
//! the information balance on a small grid.

mod common;

use structinfo::balance::{balance_residual, info_fields};
use structinfo::difffield::{difference_field, differential_field};
use structinfo::model::ValidityCase;
use structinfo::pipeline::{Study, VariationAnalysis};
use structinfo::solver::RecordingPlan;

fn every_level(study: &Study) -> Study {
    let mut cfg = study.config.clone();
    cfg.recording.snapshot_stride = Some(1);
    Study::new(&cfg).unwrap()
}

fn analysed(end_us: f64) -> (Study, Vec<VariationAnalysis>) {
    let study = Study::new(&common::small(end_us)).unwrap();
    let a = study.analyze().unwrap();
    (study, a.variations)
}

#[test]
fn stream_matches_stored_fields() {
    let study = every_level(&Study::new(&common::small(3.0)).unwrap());
    let plan = RecordingPlan::every_level();
    for p in study.prepare_all().unwrap() {
        let va = study.analyze_variation(&p).unwrap();
        let plus = p.plus_solver.run(&plan).unwrap();
        let minus = p.minus_solver.run(&plan).unwrap();
        let base = p.reference_solver.run(&plan).unwrap();
        let dfield = differential_field(&difference_field(&plus, &minus, &p.spec).unwrap()).unwrap();
        let exc = study.excitation;
        let fields = info_fields(&va.context, &dfield, &base, &|t| exc.signal(t) / exc.amplitude).unwrap();

        let stream = &va.output.info_snapshots;
        assert_eq!(stream.len(), fields.levels.len(), "{}", p.name);
        let scale = fields.i_density.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        for (row, (level, info)) in stream.iter().enumerate() {
            assert_eq!(*level, fields.levels[row]);
            for j in 0..info.i_kin.len() {
                let d = info.i_kin[j] + info.i_pot[j];
                assert!((d - fields.i_density[[row, j]]).abs() <= 1e-12 * scale, "{} level {level} cell {j}", p.name);
                assert!((info.net_source[j] - fields.net_source[[row, j]]).abs() <= 1e-12 * scale.max(1.0));
            }
        }

        let plan = study.stream_plan(&p, &va.context).unwrap();
        let (_, report) = balance_residual(&fields, study.grid().dx, study.grid().dt, &plan.mask).unwrap();
        let s = &va.output.residual;
        assert!(
            (report.max_residual - s.max_residual).abs() <= 1e-9 * s.max_residual.max(1e-300),
            "{}: array {} vs stream {}",
            p.name,
            report.max_residual,
            s.max_residual
        );
        assert!((report.max_term - s.max_term).abs() <= 1e-9 * s.max_term);
    }
}

#[test]
fn force_source_vanishes_when_injection_is_outside_the_variation() {
    let (_, vars) = analysed(4.0);
    for v in &vars {
        let o = &v.output;
        assert!(o.max_abs_active > 0.0, "{} has no active source", v.prepared.name);
        assert!(
            o.max_abs_q_f < 1e-9 * o.max_abs_active,
            "{}: q_f {} vs active {}",
            v.prepared.name,
            o.max_abs_q_f,
            o.max_abs_active
        );
    }
}

#[test]
fn density_nonnegative_and_balance_closes() {
    let (_, vars) = analysed(4.0);
    for v in &vars {
        let o = &v.output;
        assert!(o.density_max > 0.0);
        assert!(o.density_min >= -1e-12 * o.density_max, "{}", v.prepared.name);
        assert!(o.residual.normalized() < 0.05, "{}: {}", v.prepared.name, o.residual.normalized());
    }
}

#[test]
fn validity_cases_follow_the_kind() {
    let (_, vars) = analysed(3.0);
    let case = |name: &str| vars.iter().find(|v| v.prepared.name == name).unwrap().context.case();
    assert_eq!(case("position"), ValidityCase::Case0);
    assert_eq!(case("thickness"), ValidityCase::Case0);
    assert_eq!(case("sound_speed"), ValidityCase::Case1);
    assert_eq!(case("density"), ValidityCase::Case2);
    assert_eq!(case("density_k"), ValidityCase::Case3);
}

#[test]
fn no_scatterer_no_information() {
    let mut cfg = common::small(4.0);
    cfg.layers[0].rho = cfg.matrix.rho;
    cfg.layers[0].c_p = cfg.matrix.c_p;
    cfg.variations.retain(|v| v.kind.is_geometric());
    let study = Study::new(&cfg).unwrap();
    let a = study.analyze().unwrap();
    for v in &a.variations {
        let o = &v.output;
        assert_eq!(o.density_max, 0.0);
        assert_eq!(o.density_min, 0.0);
        assert!(o.max_difference.iter().all(|&d| d == 0.0));
        assert!(o.trace.i_total.iter().all(|&d| d == 0.0));
        assert!(o.sensors.diff_left.iter().all(|&d| d == 0.0));
    }
}
