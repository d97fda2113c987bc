mod support;

#[test]
fn build_mmps_matches_brute_force_oracle() {
    let summary = support::oracle::check_corpus().unwrap();
    println!("{summary}");
}
