use std::path::PathBuf;

use num_complex::Complex64;
use tasknet::circuits::{basis_offset, statevector_oracle, GbsConfig};
use tasknet::fixtures::example_circuit;
use tasknet::network::full_sum;
use tasknet::Precision;
use tasknet_cli::{
    cmd_contract, cmd_generate, cmd_slice, example_file, CircuitFile, ContractOptions,
    GenerateSpec, NetworkFile, SliceSpec,
};

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name]
        .iter()
        .collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn gbs_small() -> GenerateSpec {
    GenerateSpec::Gbs(GbsConfig::new(1, 3, 1, 0.5, 3, 7))
}

fn contract(f: &NetworkFile, share: bool) -> Complex64 {
    let opts = ContractOptions {
        workers: 2,
        precision: None,
        delete: true,
        share,
        memory_limit: None,
    };
    cmd_contract(f, &opts).unwrap().amplitude
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

#[test]
fn example_files_regenerate_byte_for_byte() {
    let d2 = example_file(2, [0, 0], Precision::Double).unwrap();
    assert_eq!(d2.to_text().unwrap(), fixture("example_d2.tn"));
    let d3 = example_file(3, [1, 2], Precision::Double).unwrap();
    assert_eq!(d3.to_text().unwrap(), fixture("example_d3.tn"));
    let (sliced, _) = cmd_slice(&d2, &SliceSpec::Labels(vec!["e".into()])).unwrap();
    assert_eq!(sliced.to_text().unwrap(), fixture("example_d2_sliced_e.tn"));
}

#[test]
fn gbs_files_regenerate_byte_for_byte() {
    let g = cmd_generate(&gbs_small(), Some("0,1,1"), Precision::Single).unwrap();
    assert_eq!(g.circuit.to_text(), fixture("gbs_small.circuit"));
    assert_eq!(
        g.network.unwrap().to_text().unwrap(),
        fixture("gbs_small.tn")
    );
}

#[test]
fn fixtures_parse_and_print_back() {
    for name in [
        "example_d2.tn",
        "example_d3.tn",
        "example_d2_sliced_e.tn",
        "gbs_small.tn",
    ] {
        let text = fixture(name);
        let f = NetworkFile::parse(&text).unwrap();
        assert_eq!(f.to_text().unwrap(), text, "{name}");
    }
    let text = fixture("gbs_small.circuit");
    assert_eq!(CircuitFile::parse(&text).unwrap().to_text(), text);
}

#[test]
fn example_amplitudes_match_oracles() {
    let d2 = NetworkFile::parse(&fixture("example_d2.tn")).unwrap();
    let a = contract(&d2, true);
    assert!(close(a, Complex64::new(0.5, 0.0), 1e-12), "{a}");
    assert!(close(a, full_sum(&d2.network).unwrap(), 1e-12));

    let sliced = NetworkFile::parse(&fixture("example_d2_sliced_e.tn")).unwrap();
    assert!(close(contract(&sliced, true), a, 1e-12));
    assert!(close(contract(&sliced, false), a, 1e-12));

    let d3 = NetworkFile::parse(&fixture("example_d3.tn")).unwrap();
    let psi = statevector_oracle(&example_circuit(3)).unwrap();
    let want = psi[basis_offset(3, &[1, 2])];
    let got = contract(&d3, true);
    assert!(close(got, want, 1e-12), "{got} vs {want}");
    assert!(close(got, full_sum(&d3.network).unwrap(), 1e-12));
}

#[test]
fn gbs_amplitude_matches_statevector() {
    let c = CircuitFile::parse(&fixture("gbs_small.circuit"))
        .unwrap()
        .circuit;
    let f = NetworkFile::parse(&fixture("gbs_small.tn")).unwrap();
    assert_eq!(f.precision, Precision::Single);
    let psi = statevector_oracle(&c).unwrap();
    let want = psi[basis_offset(c.dim, &[0, 1, 1])];
    let got = contract(&f, true);
    assert!(close(got, want, 1e-5), "{got} vs {want}");
}
