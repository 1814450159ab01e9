mod common;

use common::*;

#[test]
fn cspm_reproduces_constants() {
    assert!(cspm_constant_defect(&seeded_sets()) <= 1e-10);
}

#[test]
fn fpm_reproduces_linear_fields_including_boundary() {
    assert!(fpm_linear_defect(&seeded_sets()) <= 1e-10);
}

#[test]
fn msph_reproduces_quadratics_in_the_interior() {
    let (worst, checked) = msph_quadratic_interior_defect(&seeded_sets());
    assert!(checked > 1000, "{checked}");
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn translation_identity() {
    let d = translation_defect(&seeded_sets());
    assert!(d <= 1e-12, "{d:e}");
}

#[test]
fn rotation_identity() {
    let d = rotation_defect(&seeded_sets());
    assert!(d <= 1e-12, "{d:e}");
}
