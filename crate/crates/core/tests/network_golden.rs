use steane_ft::circuit::{build_recovery, RecoverySchedule};

#[test]
fn shipped_network_dump_matches() {
    let net = build_recovery(RecoverySchedule::default()).unwrap();
    let text = format!("{}[fingerprint]\n{}\n", net.dump(), net.fingerprint());
    let golden = include_str!("../../../docs/recovery_network.txt");
    assert!(
        text == golden,
        "docs/recovery_network.txt is stale; regenerate it with `steane-ft dump-network`"
    );
}
