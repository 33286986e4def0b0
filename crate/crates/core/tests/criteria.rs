use pcx_testkit::criteria;

fn check(outcome: criteria::Outcome) {
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn lrp_conservation() {
    check(criteria::lrp_conservation());
}

#[test]
fn lrp_epsilon_matches_input_x_gradient() {
    check(criteria::attribution_equivalence());
}

#[test]
fn gradients_match_finite_differences() {
    check(criteria::gradient_oracle());
}

#[test]
fn concept_heatmaps_sum_to_full_heatmap() {
    check(criteria::crp_completeness());
}

#[test]
fn em_is_monotone_and_k1_is_closed_form() {
    check(criteria::em_monotonicity());
}

#[test]
fn mixture_densities_integrate_to_one() {
    check(criteria::density_normalization());
}

#[test]
fn hungarian_matches_brute_force() {
    check(criteria::hungarian_oracle());
}

#[test]
fn auc_matches_pair_counting() {
    check(criteria::auc_oracle());
}

#[test]
fn coverage_tracks_separation() {
    check(criteria::coverage_separation());
}

#[test]
fn planted_outliers_are_detected() {
    check(criteria::outlier_detection_planted());
}

#[test]
fn covariance_aware_assignment_wins_on_anisotropic_data() {
    check(criteria::clustering_ordering());
}

#[test]
fn relevance_prototypes_beat_activation_prototypes() {
    check(criteria::relevance_beats_activation());
}

#[test]
fn prototype_likelihood_beats_msp_on_overlapping_logits() {
    check(criteria::pcx_beats_msp());
}
