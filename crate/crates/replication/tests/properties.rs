use ngproxy_replication::property_checks;

#[test]
fn every_property_check_passes() {
    let checks = property_checks();
    assert_eq!(checks.len(), 9);
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.line()).collect();
    assert!(failed.is_empty(), "{failed:#?}");
}
