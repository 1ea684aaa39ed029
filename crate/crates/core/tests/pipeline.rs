use ellpar::config::Config;
use ellpar::harness::{
    make_jump_scenario, run_acceptance, AcceptanceOptions, Fault, REPORT_SCHEMA,
};
use ellpar::io::{read_field_csv, write_run};
use ellpar::regularize::{essential_envelopes, inf_convolve, sup_convolve, FieldSamples};
use ellpar::solver::{run, SolverPolicy};

#[test]
fn envelopes_separate_only_at_the_extinction_jump() {
    let s = make_jump_scenario(401, 32).unwrap();
    let p = s.problem().unwrap();
    let f = run(&p, &SolverPolicy::default()).unwrap();
    let jumps: Vec<f64> = f
        .values
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let k = (0..jumps.len())
        .max_by(|&a, &b| jumps[a].total_cmp(&jumps[b]))
        .unwrap();
    assert!(jumps[k] > 0.9, "{}", jumps[k]);
    assert_eq!(Some(f.times[k + 1]), f.extinction_time);
    // 1.5 dt reaches the neighbouring level without depending on rounding of t
    let e = essential_envelopes(&FieldSamples::from(&f), &[1.5 * p.spec.dt]).unwrap();
    let wide: Vec<usize> = (0..f.times.len())
        .filter(|&l| {
            e.upper.values[l]
                .iter()
                .zip(&e.lower.values[l])
                .any(|(a, b)| a - b > 0.5)
        })
        .collect();
    assert_eq!(wide, vec![k, k + 1]);
}

#[test]
fn solve_outputs_are_bit_identical() {
    let cfg = Config::from_toml_str("grid.nodes = 201\ntime.horizon = 0.2").unwrap();
    let p = cfg.problem().unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_run(d.path(), &run(&p, &cfg.policy).unwrap()).unwrap();
    }
    for name in ["field.csv", "front.csv", "summary.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    // the envelope path reads back exactly what was solved
    let f = read_field_csv(&dirs[0].path().join("field.csv")).unwrap();
    let z = sup_convolve(&f, 0.04).unwrap();
    let w = inf_convolve(&f, 0.04).unwrap();
    assert!(z
        .field
        .values
        .iter()
        .flatten()
        .zip(w.field.values.iter().flatten())
        .all(|(a, b)| a >= b));
}

#[test]
fn acceptance_details_are_deterministic() {
    let opts = AcceptanceOptions {
        only: vec![1, 2, 3, 4, 5],
        ..Default::default()
    };
    let a = run_acceptance(&opts).unwrap();
    let b = run_acceptance(&opts).unwrap();
    for (x, y) in a.criteria.iter().zip(&b.criteria) {
        assert_eq!(x.details, y.details);
        assert_eq!(x.margin.to_bits(), y.margin.to_bits());
    }
}

#[test]
fn injected_fault_fails_the_named_criterion() {
    let r = run_acceptance(&AcceptanceOptions {
        fault: Some(Fault::FlipPucciMinus),
        ..Default::default()
    })
    .unwrap();
    let failed: Vec<&str> = r.failed().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(failed, vec!["pucci"]);
    assert_eq!(r.exit_code(), 1);
    let schema = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    assert!(compiled.is_valid(&serde_json::to_value(&r).unwrap()));
}
