//! Acceptance suite: one test per verification criterion, each printing
//! its pass/fail line. Run with `--nocapture` to see the lines for
//! passing criteria too.

use torus_coulomb::verify;

fn check(result: torus_coulomb::Result<verify::CriterionResult>) {
    let r = result.expect("criterion runner failed");
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_1_green_identities() {
    check(verify::criterion_green_identities());
}

#[test]
fn criterion_2_duality() {
    check(verify::criterion_duality());
}

#[test]
fn criterion_3_cross_identity() {
    check(verify::criterion_cross_identity());
}

#[test]
fn criterion_4_contour_exactness() {
    check(verify::criterion_contour_exactness());
}

#[test]
fn criterion_5_counting_bound() {
    check(verify::criterion_counting_bound());
}

#[test]
fn criterion_6_height_bounds_mc() {
    check(verify::criterion_height_bounds_mc());
}

#[test]
fn criterion_7_variance_sandwich_mc() {
    check(verify::criterion_variance_sandwich_mc());
}

#[test]
fn criterion_8_mc_vs_exact() {
    check(verify::criterion_mc_vs_exact());
}

#[test]
fn note_asymptotic_ratio() {
    check(verify::note_asymptotics());
}
