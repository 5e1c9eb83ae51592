use nilsteer::systems::{
    builtin, chained4, constant_plane, heisenberg, linear, load_system, parse_system,
    save_system, scalar_saturated, system_to_file, unicycle_nilpotent, FieldsSpec,
};
use nilsteer::vfield::ControlSystem;
use nilsteer::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fields_agree(a: &ControlSystem, b: &ControlSystem, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        let x: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.2..1.2)).collect();
        for (f, g) in a.fields().iter().zip(b.fields()) {
            let (fx, gx) = (f.evaluate(&x).unwrap(), g.evaluate(&x).unwrap());
            for (u, v) in fx.iter().zip(&gx) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{}: {fx:?} vs {gx:?}", a.name);
            }
        }
        match (a.drift(), b.drift()) {
            (Some(f), Some(g)) => assert_eq!(f.evaluate(&x).unwrap(), g.evaluate(&x).unwrap()),
            (None, None) => {}
            _ => panic!("drift lost in round trip"),
        }
    }
}

#[test]
fn save_then_load_preserves_systems() {
    let double_integrator =
        linear(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![0.0], vec![1.0]]).unwrap();
    let systems = [
        heisenberg(),
        chained4(),
        constant_plane(),
        scalar_saturated(1.5),
        unicycle_nilpotent(),
        double_integrator,
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, sys) in systems.iter().enumerate() {
        let path = dir.path().join(format!("{}.json", sys.name));
        save_system(sys, &path).unwrap();
        let back = load_system(&path).unwrap();
        assert_eq!((back.n(), back.m()), (sys.n(), sys.m()));
        assert_eq!(back.name, sys.name);
        assert_eq!(back.declared_order, sys.declared_order);
        assert_eq!(back.input_bounds, sys.input_bounds);
        assert_eq!(back.angular, sys.angular);
        assert_eq!(back.leaf, sys.leaf);
        fields_agree(sys, &back, i as u64);
        // a second trip is a fixed point of the file format
        assert_eq!(system_to_file(&back).unwrap(), system_to_file(sys).unwrap());
    }
}

#[test]
fn non_polynomial_builtins_are_saved_by_name() {
    let file = system_to_file(&unicycle_nilpotent()).unwrap();
    assert!(matches!(file.fields, FieldsSpec::Builtin { ref builtin } if builtin == "unicycle_nilpotent"));
    assert!(system_to_file(&builtin("unicycle").unwrap()).is_ok());
}

#[test]
fn fixtures_load() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/systems");
    for name in ["heisenberg", "chained4", "unicycle_nilpotent", "constant_plane"] {
        let sys = load_system(format!("{dir}/{name}.json")).unwrap();
        let reference = builtin(name).unwrap();
        fields_agree(&reference, &sys, 7);
    }
}

fn schema_err(json: &str) -> bool {
    matches!(parse_system(json), Err(Error::Schema(_)))
}

#[test]
fn malformed_files_are_schema_errors() {
    let good = r#"{"name":"s","n":2,"m":1,"fields":[[[{"coeff":1.0,"exponents":[0,0]}],[]]]}"#;
    assert!(parse_system(good).is_ok());
    // unknown top-level key
    assert!(schema_err(
        r#"{"name":"s","n":2,"m":1,"colour":"red","fields":[[[{"coeff":1.0,"exponents":[0,0]}],[]]]}"#
    ));
    // exponent above the cap
    assert!(schema_err(r#"{"name":"s","n":2,"m":1,"fields":[[[{"coeff":1.0,"exponents":[17,0]}],[]]]}"#));
    // wrong component count
    assert!(schema_err(r#"{"name":"s","n":2,"m":1,"fields":[[[{"coeff":1.0,"exponents":[0,0]}]]]}"#));
    // wrong number of fields
    assert!(schema_err(r#"{"name":"s","n":2,"m":2,"fields":[[[{"coeff":1.0,"exponents":[0,0]}],[]]]}"#));
    // exponent vector length
    assert!(schema_err(r#"{"name":"s","n":2,"m":1,"fields":[[[{"coeff":1.0,"exponents":[0]}],[]]]}"#));
    // builtin dimension mismatch
    assert!(schema_err(r#"{"name":"h","n":4,"m":2,"fields":{"builtin":"heisenberg"}}"#));
    // index out of range
    assert!(schema_err(
        r#"{"name":"s","n":2,"m":1,"angular":[5],"fields":[[[{"coeff":1.0,"exponents":[0,0]}],[]]]}"#
    ));
    assert!(schema_err("not json"));
    assert!(parse_system(r#"{"name":"h","n":3,"m":2,"fields":{"builtin":"no_such_system"}}"#).is_err());
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_system("/nonexistent/system.json"), Err(Error::Io(_))));
}

#[test]
fn unknown_builtin_is_rejected() {
    assert!(builtin("no_such_system").is_err());
}
