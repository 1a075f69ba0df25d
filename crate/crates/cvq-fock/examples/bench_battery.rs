use std::time::Instant;
fn main() {
    let cfg = cvq_fock::verify::VerifyConfig::default();
    // margin probe: gaussian member delta_chi
    let rho = cvq_fock::realize(&cvq_fock::parse_state_spec("loss(0.7, tmsv:1.5)").unwrap(), 28).unwrap();
    let rep = cvq_fock::verify::holevo_gap_check(&rho, None, 1e-4).unwrap();
    println!("gaussian member: chi_g={:.6} chi_f={:.6} delta={:.2e} defect={:.2e}",
        rep.chi_gaussian, rep.chi_fock, rep.delta_chi, rep.completeness_defect);
    let mi = cvq_fock::verify::mutual_information_check(&rho).unwrap();
    println!("gaussian member MI: fock={:.6} gauss={:.6} diff={:.2e} defect={:.2e}",
        mi.i_fock, mi.i_gaussian, mi.i_fock - mi.i_gaussian, mi.mass_defect);

    let t0 = Instant::now();
    let recs = cvq_fock::verify::extremality_battery(7, 200, &cfg);
    let dt = t0.elapsed();
    let fails: Vec<_> = recs.iter().filter(|r| !r.pass).collect();
    println!("extremality battery: {} records in {:.1}s, {} failures", recs.len(), dt.as_secs_f64(), fails.len());
    for f in fails.iter().take(8) {
        println!("  FAIL {} {} {} = {:.3e}", f.case_id, f.spec, f.quantity, f.value);
    }
    let t1 = Instant::now();
    let recs = cvq_fock::verify::contraction_battery(7, 50, &cfg);
    println!("contraction battery: {} in {:.1}s, {} failures", recs.len(), t1.elapsed().as_secs_f64(),
        recs.iter().filter(|r| !r.pass).count());
    let t2 = Instant::now();
    let recs = cvq_fock::verify::classical_battery(7, 30, &cfg);
    println!("classical battery: {} in {:.1}s, {} failures", recs.len(), t2.elapsed().as_secs_f64(),
        recs.iter().filter(|r| !r.pass).count());
    for f in recs.iter().filter(|r| !r.pass).take(5) {
        println!("  FAIL {} {} {} = {:.3e}", f.case_id, f.spec, f.quantity, f.value);
    }
}
