//! File format contracts.

use nheavy::model::{simulate_nheavy, EquationParams, InnovationSpec, NheavyParams, PanelSeries};
use nheavy::network::{normalize, read_edge_csv, write_edge_csv, NetworkKind};
use nheavy::Error;

#[test]
fn edge_list_round_trip() {
    let a = NetworkKind::Powerlaw { alpha: 2.0 }.generate(30, 4).unwrap();
    let mut buf = Vec::new();
    write_edge_csv(&a, &mut buf).unwrap();
    assert!(buf.starts_with(b"src,dst\n"));
    let back = read_edge_csv(buf.as_slice(), Some(30), "net.csv").unwrap();
    assert_eq!(back.edges().collect::<Vec<_>>(), a.edges().collect::<Vec<_>>());
}

#[test]
fn edge_list_errors_carry_line_numbers() {
    let text = "src,dst\n0,1\n2,x\n";
    match read_edge_csv(text.as_bytes(), Some(3), "bad.csv") {
        Err(Error::Parse { path, line, .. }) => {
            assert_eq!(path, "bad.csv");
            assert_eq!(line, 3);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(read_edge_csv("src,dst\n0,5\n".as_bytes(), Some(3), "b.csv"), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn panel_round_trip_is_bit_exact() {
    let w = normalize(&NetworkKind::Sbm { k: 2 }.generate(6, 1).unwrap());
    let p = NheavyParams::new(EquationParams::new(0.1, 0.3, 0.2, 0.4), EquationParams::new(0.1, 0.3, 0.2, 0.3));
    let sim = simulate_nheavy(&p, &w, 50, &InnovationSpec::default(), 10, 3).unwrap();
    let mut buf = Vec::new();
    sim.panel.write_csv(&mut buf).unwrap();
    let back = PanelSeries::read_csv(buf.as_slice(), "p.csv").unwrap();
    assert_eq!(back.r2, sim.panel.r2);
    assert_eq!(back.rm, sim.panel.rm);
    let mut again = Vec::new();
    back.write_csv(&mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn fit_result_json_round_trip() {
    let w = normalize(&NetworkKind::Sbm { k: 2 }.generate(6, 1).unwrap());
    let p = NheavyParams::new(EquationParams::new(0.1, 0.3, 0.2, 0.4), EquationParams::new(0.1, 0.3, 0.2, 0.3));
    let sim = simulate_nheavy(&p, &w, 200, &InnovationSpec::default(), 10, 3).unwrap();
    let fit = nheavy::estimation::fit_two_step(&sim.panel, &w, None, &Default::default()).unwrap();
    let text = serde_json::to_string(&fit).unwrap();
    let back: nheavy::estimation::FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit);
}
