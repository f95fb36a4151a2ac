mod common;

use std::path::Path;

use common::{five_node_mesh, path_graph};
use lmafield::error::Error;
use lmafield::io::{build_spec, parse_config_str, parse_dataset, read_samples, write_samples, Command, DataConfig, LocationColumns};
use lmafield::mcmc::ChainConfig;
use lmafield::models::{fit, Dataset, Family, Locations, ModelSpec, SpatialSupport};
use lmafield::PriorKind;

#[test]
fn samples_reload_exactly() {
    let spec = ModelSpec::new(Family::Gaussian, SpatialSupport::Graph { graph: path_graph(3), k: 0 }, PriorKind::Lma);
    let data = Dataset {
        y: vec![0.1, -2.0 / 3.0, 1e-17],
        x: vec![vec![1.0]; 3],
        covariates: vec!["intercept".into()],
        locations: Locations::Nodes(vec![0, 1, 2]),
        offset: None,
    };
    let cfg = ChainConfig { burn_in: 10, n_store: 40, ..ChainConfig::default() };
    let (s, _) = fit(&spec, &data, &cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_samples(dir.path(), "test", &[s.clone()]).unwrap();
    let (names, rows) = read_samples(&path).unwrap();
    assert_eq!(names[0], "chain");
    assert_eq!(names[1..1 + s.names.len()], s.names[..]);
    assert_eq!(rows.len(), 40);
    for (t, r) in rows.iter().enumerate() {
        for (k, d) in s.draws.iter().enumerate() {
            assert_eq!(r[1 + k].to_bits(), d[t].to_bits());
        }
        assert_eq!(r.last().unwrap().to_bits(), s.log_lik[t].to_bits());
    }
}

fn poisson_data_cfg() -> DataConfig {
    DataConfig {
        path: "counts.csv".into(),
        response: "y".into(),
        covariates: vec![],
        intercept: true,
        locations: LocationColumns::Node { column: "node".into(), base: 0 },
        offset: Some("expected".into()),
        group: None,
    }
}

#[test]
fn poisson_offsets_must_be_positive() {
    let support = SpatialSupport::Graph { graph: path_graph(2), k: 0 };
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.txt"), "0 1\n").unwrap();
    std::fs::write(dir.path().join("counts.csv"), "").unwrap();
    let text = "[support]\nkind = graph\nadjacency = e.txt\n[data]\npath = counts.csv\nresponse = y\nnode = node\noffset = expected\n[model]\nfamily = poisson\n";
    let cfg = parse_config_str(text, dir.path(), Command::Fit).unwrap();
    let spec = build_spec(&cfg, support, true).unwrap();

    let ok = parse_dataset("node,y,expected\n0,3,1.5\n1,0,2\n", &poisson_data_cfg(), Path::new("c.csv")).unwrap();
    assert_eq!(ok.data.offset, Some(vec![1.5, 2.0]));
    ok.data.validate(&spec).unwrap();
    let bad = parse_dataset("node,y,expected\n0,3,1.5\n1,0,0\n", &poisson_data_cfg(), Path::new("c.csv")).unwrap();
    assert!(matches!(bad.data.validate(&spec), Err(Error::NonPositiveOffset(2))));
    let neg = parse_dataset("node,y,expected\n0,-3,1.5\n", &poisson_data_cfg(), Path::new("c.csv")).unwrap();
    assert!(matches!(neg.data.validate(&spec), Err(Error::NegativeCount(1))));
}

#[test]
fn coordinates_outside_the_mesh_report_their_record() {
    let spec = ModelSpec::new(
        Family::Gaussian,
        SpatialSupport::Mesh { mesh: five_node_mesh(), alpha: 2 },
        PriorKind::Grf,
    );
    let cfg = DataConfig {
        path: "pts.csv".into(),
        response: "y".into(),
        covariates: vec![],
        intercept: true,
        locations: LocationColumns::Coordinates { x: "lon".into(), y: "lat".into() },
        offset: None,
        group: None,
    };
    let d = parse_dataset("lon,lat,y\n0.5,0.5,1\n0.2,0.1,2\n1.5,0.5,3\n", &cfg, Path::new("pts.csv")).unwrap();
    let err = d.data.validate(&spec).unwrap_err();
    assert!(matches!(err, Error::LocationOutsideMesh { index: 2, .. }), "{err}");
    assert!(err.is_validation());
}
