use std::path::Path;

use obstacle_homog::config::{load_config, parse_config, ConfigError};
use obstacle_homog::geometry::BoundaryMode;
use obstacle_homog::harness::Reduction;

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let config = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!config.eps.is_empty());
        count += 1;
    }
    assert!(count >= 4);
}

#[test]
fn slab_config_enables_the_cell_reduction() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/slab.toml");
    let config = load_config(&path).unwrap();
    assert_eq!(config.domain.mode(), BoundaryMode::PeriodicSlab);
    assert_eq!(config.reduction, Reduction::PeriodicCell);
    assert_eq!(config.eps, vec![0.25, 0.125, 0.0625]);
    assert_eq!(config.lemmas.lift, vec![0.002, 0.001, 0.0005]);
    let setup = config.study_setup(1.0);
    assert_eq!(setup.ordering.unwrap().eps, vec![0.25, 0.125]);
}

#[test]
fn rejects_unknown_and_invalid_values() {
    let base = "[domain]\nn = 3\n[patch]\neps = [0.25]\n[problem]\npsi = \"0\"\nphi = \"1\"\n";
    assert!(parse_config(base).is_ok());
    let cases = [
        ("[output]\nformat = \"xml\"\n", "output.format"),
        ("[lemmas]\nv_max = 2\n", "lemmas.v_max"),
    ];
    for (extra, path) in cases {
        assert_eq!(
            parse_config(&format!("{base}{extra}")).unwrap_err(),
            ConfigError::UnknownKey { path: path.into() }
        );
    }
    let invalid = [
        (base.replace("[0.25]", "[1.5]"), "patch.eps"),
        (format!("{base}[coefficient]\ngamma_diag = [0.0, 1.0, 1.0]\n"), "coefficient.gamma_diag"),
        (base.replace("phi = \"1\"", "phi = \"x4\""), "problem.phi"),
    ];
    for (doc, want) in invalid {
        match parse_config(&doc) {
            Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, want),
            other => panic!("{want}: {other:?}"),
        }
    }
}
