mod oracle;

#[test]
fn profiler_matches_brute_force_loops() {
    let columns = oracle::run_profiler_oracle(7, 50, 1000, 1e-9).unwrap();
    assert!(columns >= 100, "only {columns} columns checked");
}

#[test]
fn profiler_matches_on_small_tables() {
    // Tiny tables hit the single-row and all-missing-but-one edges.
    oracle::run_profiler_oracle(11, 200, 4, 1e-9).unwrap();
}

#[test]
fn majority_vote_matches_enumeration() {
    let cases = oracle::run_vote_oracle().unwrap();
    // 34 multisets over sizes 1..=4, each with 4^k ranks and 2^k spellings.
    assert_eq!(cases, 3 * 4 * 2 + 6 * 16 * 4 + 10 * 64 * 8 + 15 * 256 * 16);
}

#[test]
fn rank_one_breaks_three_way_ties() {
    assert_eq!(oracle::check_rank_one_tie_rule().unwrap(), 36);
}
