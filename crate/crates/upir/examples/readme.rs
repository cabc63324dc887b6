use upir::adversaries::measure_anonymity;
use upir::fixtures::fixture;
use upir::protocols::{run_workload, ProtocolKind, ProtocolSpec, Workload};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let design = fixture("fano").expect("built-in");
    let spec = ProtocolSpec::new(ProtocolKind::PdBibdV2).with_hop(0.5);
    let trace = run_workload(&design, &spec, &Workload::independent(10_000), 42)?;
    assert_eq!(trace.records.len(), 10_000);

    let report = measure_anonymity(&design, ProtocolKind::PdBibdV2, 2, 1, 1_000_000)?;
    assert_eq!(report.kappa, 2);
    Ok(())
}
