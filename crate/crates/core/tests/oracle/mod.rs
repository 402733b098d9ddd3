//! Independent oracles shared by the core property tests and the acceptance
//! suite of the `mrt` crate.
//!
//! Nothing here calls the code under test to compute an expectation: tables
//! are generated from typed values whose statistics are computed by straight
//! loops, and votes are decided by counting labels.

#![allow(dead_code)]

use mrt_core::eval::{majority_vote, CompareOptions};
use mrt_core::stats::{compute_table_stats, StatsOptions};
use mrt_core::{AnswerType, AnswerValue, ColumnProfile, Number, Table, TypedAnswer};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

// ---------------------------------------------------------------- profiler

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Integer,
    Real,
    Boolean,
    Categorical,
    Text,
    Date,
}

impl GenKind {
    fn label(self) -> &'static str {
        match self {
            GenKind::Integer => "int64",
            GenKind::Real => "float64",
            GenKind::Boolean => "bool",
            GenKind::Categorical => "category",
            GenKind::Text => "object",
            GenKind::Date => "datetime64",
        }
    }
}

/// One generated column: the CSV spelling of each cell (`None` = missing),
/// the numeric value for numeric kinds, and the display form expected in
/// frequency tables.
#[derive(Debug, Clone)]
pub struct GenColumn {
    pub name: String,
    pub kind: GenKind,
    pub spelled: Vec<Option<String>>,
    pub numbers: Vec<Option<f64>>,
    pub shown: Vec<Option<String>>,
}

#[derive(Debug, Clone)]
pub struct GenTable {
    pub csv: String,
    pub columns: Vec<GenColumn>,
}

const WORDS: [&str; 10] =
    ["red", "green", "blue", "North Face", "o'clock", "x, y", "say \"hi\"", "alpha", "beta-2", "Zeta"];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn gen_column(rng: &mut StdRng, index: usize, rows: usize, missing_rate: f64) -> GenColumn {
    let mut kinds = vec![GenKind::Integer, GenKind::Real, GenKind::Boolean, GenKind::Categorical, GenKind::Date];
    // Free text needs more than 20 distinct values to stay out of `category`.
    if rows > 40 {
        kinds.push(GenKind::Text);
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    let name = format!("c{index}_{}", kind.label());
    let missing_rate = if index == 0 { 0.0 } else { missing_rate };
    let mut spelled = Vec::with_capacity(rows);
    let mut numbers = Vec::with_capacity(rows);
    let mut shown = Vec::with_capacity(rows);
    // A 1/0 flag needs both values, so it needs two rows.
    let pairs = if rows >= 2 { 3 } else { 2 };
    let bool_pair = [("True", "False"), ("yes", "no"), ("1", "0")][rng.random_range(0..pairs)];
    let pool: Vec<&str> = WORDS[..rng.random_range(1..=WORDS.len())].to_vec();
    let real_decimals = rng.random_range(1..=6);
    for row in 0..rows {
        // The first row is never missing so every column has a value.
        if row > 0 && rng.random_bool(missing_rate) {
            spelled.push(None);
            numbers.push(None);
            shown.push(None);
            continue;
        }
        let (text, number, display) = match kind {
            GenKind::Integer => {
                let v: i64 = rng.random_range(-500..5000);
                (v.to_string(), Some(v as f64), v.to_string())
            }
            GenKind::Real => {
                if rng.random_bool(0.1) {
                    // Integer spellings are read as reals in a real column.
                    let v: i64 = rng.random_range(-50..50);
                    (v.to_string(), Some(v as f64), format!("{:?}", v as f64))
                } else {
                    let scale = 10f64.powi(real_decimals);
                    let v = (rng.random_range(-1.0e4..1.0e4) * scale).round() / scale;
                    (format!("{v:?}"), Some(v), format!("{v:?}"))
                }
            }
            GenKind::Boolean => {
                let s = if rng.random_bool(0.5) { bool_pair.0 } else { bool_pair.1 };
                (s.to_string(), None, s.to_string())
            }
            GenKind::Categorical => {
                let s = pool[rng.random_range(0..pool.len())];
                (s.to_string(), None, s.to_string())
            }
            GenKind::Text => {
                let s = format!("note {row}: {}", WORDS[rng.random_range(0..WORDS.len())]);
                (s.clone(), None, s)
            }
            GenKind::Date => {
                let s = format!("20{:02}-{:02}-{:02}", rng.random_range(0..30), rng.random_range(1..13), rng.random_range(1..29));
                (s.clone(), None, s)
            }
        };
        spelled.push(Some(text));
        numbers.push(number);
        shown.push(Some(display));
    }
    // Keep generated kinds unambiguous: an integer column holding exactly
    // {0, 1} is a flag, a real column needs one real spelling, and a 1/0
    // boolean column needs both values.
    let present: std::collections::BTreeSet<&str> = spelled.iter().flatten().map(String::as_str).collect();
    match kind {
        GenKind::Integer if present.iter().all(|s| *s == "0" || *s == "1") && present.len() == 2 => {
            spelled[0] = Some("2".into());
            numbers[0] = Some(2.0);
            shown[0] = Some("2".into());
        }
        GenKind::Real if present.iter().all(|s| !s.contains(['.', 'e'])) => {
            spelled[0] = Some("0.5".into());
            numbers[0] = Some(0.5);
            shown[0] = Some("0.5".into());
        }
        GenKind::Boolean if bool_pair.0 == "1" && present.len() == 1 => {
            for (row, v) in [(0, "1"), (1, "0")] {
                spelled[row] = Some(v.into());
                shown[row] = Some(v.into());
            }
        }
        _ => {}
    }
    GenColumn { name, kind, spelled, numbers, shown }
}

/// A random table of up to `max_rows` rows and two to six columns, rendered
/// as CSV.
pub fn gen_table(rng: &mut StdRng, max_rows: usize) -> GenTable {
    let rows = rng.random_range(1..=max_rows);
    let ncols = rng.random_range(2..=6);
    let missing_rate = [0.0, 0.05, 0.3][rng.random_range(0..3)];
    let columns: Vec<GenColumn> = (0..ncols).map(|i| gen_column(rng, i, rows, missing_rate)).collect();
    let mut csv = columns.iter().map(|c| csv_field(&c.name)).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for r in 0..rows {
        let line: Vec<String> =
            columns.iter().map(|c| c.spelled[r].as_deref().map(csv_field).unwrap_or_default()).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    GenTable { csv, columns }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedStats {
    pub type_label: &'static str,
    pub missing: usize,
    pub unique: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub freq: Option<Vec<(String, usize)>>,
    pub distinct: Option<Vec<String>>,
}

/// Brute-force statistics of a generated column.
pub fn expected_stats(col: &GenColumn, opts: StatsOptions) -> ExpectedStats {
    let mut missing = 0;
    let mut counts: Vec<(String, usize)> = Vec::new();
    for cell in &col.shown {
        match cell {
            None => missing += 1,
            Some(s) => match counts.iter_mut().find(|(v, _)| v == s) {
                Some(slot) => slot.1 += 1,
                None => counts.push((s.clone(), 1)),
            },
        }
    }
    let unique = counts.len();
    let (mut mean, mut std, mut min, mut max) = (None, None, None, None);
    if matches!(col.kind, GenKind::Integer | GenKind::Real) {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in col.numbers.iter().flatten() {
            n += 1;
            sum += v;
            if *v < lo {
                lo = *v;
            }
            if *v > hi {
                hi = *v;
            }
        }
        let m = sum / n as f64;
        let mut ss = 0.0;
        for v in col.numbers.iter().flatten() {
            ss += (v - m) * (v - m);
        }
        mean = Some(m);
        std = Some(if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 });
        min = Some(lo);
        max = Some(hi);
    }
    let listed = matches!(col.kind, GenKind::Boolean | GenKind::Categorical | GenKind::Text);
    // Most frequent first; equal counts in ascending value order.
    let mut ranked = counts;
    for i in 0..ranked.len() {
        for j in i + 1..ranked.len() {
            let swap = ranked[j].1 > ranked[i].1 || (ranked[j].1 == ranked[i].1 && ranked[j].0 < ranked[i].0);
            if swap {
                ranked.swap(i, j);
            }
        }
    }
    let distinct = (listed && unique < opts.listing_threshold).then(|| ranked.iter().map(|(v, _)| v.clone()).collect());
    let freq = listed.then(|| ranked.iter().take(opts.top_k).cloned().collect());
    ExpectedStats { type_label: col.kind.label(), missing, unique, mean, std, min, max, freq, distinct }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn close_opt(a: Option<f64>, b: Option<f64>, rel: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x, y, rel),
        (None, None) => true,
        _ => false,
    }
}

/// Compare a computed profile against the oracle; the error names the first
/// mismatch.
pub fn check_column(got: &ColumnProfile, want: &ExpectedStats, rel: f64) -> Result<(), String> {
    let mismatch = |what: &str, g: String, w: String| Err(format!("{}: {what} is {g}, expected {w}", got.name));
    if got.type_label != want.type_label {
        return mismatch("type", got.type_label.clone(), want.type_label.into());
    }
    if got.missing_values != want.missing {
        return mismatch("missing", got.missing_values.to_string(), want.missing.to_string());
    }
    if got.unique != want.unique {
        return mismatch("unique", got.unique.to_string(), want.unique.to_string());
    }
    if got.flag_binary != (want.type_label == "bool") {
        return mismatch("flag_binary", got.flag_binary.to_string(), (!got.flag_binary).to_string());
    }
    for (what, g, w) in [("mean", got.mean, want.mean), ("std", got.std, want.std), ("min", got.min, want.min), ("max", got.max, want.max)] {
        if !close_opt(g, w, rel) {
            return mismatch(what, format!("{g:?}"), format!("{w:?}"));
        }
    }
    if got.freq_values != want.freq {
        return mismatch("freq_values", format!("{:?}", got.freq_values), format!("{:?}", want.freq));
    }
    if got.distinct_values != want.distinct {
        return mismatch("distinct_values", format!("{:?}", got.distinct_values), format!("{:?}", want.distinct));
    }
    Ok(())
}

/// Generate `tables` random tables from `seed`, profile each through the CSV
/// reader and compare with the oracle. Returns the number of columns checked.
pub fn run_profiler_oracle(seed: u64, tables: usize, max_rows: usize, rel: f64) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let opts = StatsOptions::default();
    let mut checked = 0;
    for t in 0..tables {
        let gen = gen_table(&mut rng, max_rows);
        let table = Table::from_csv("gen", &gen.csv).map_err(|e| format!("table {t}: {e:?}"))?;
        let profiles = compute_table_stats(&table, opts);
        if profiles.len() != gen.columns.len() {
            return Err(format!("table {t}: {} columns profiled, {} generated", profiles.len(), gen.columns.len()));
        }
        for (got, col) in profiles.iter().zip(&gen.columns) {
            if got.name != col.name {
                return Err(format!("table {t}: column {} read as {}", col.name, got.name));
            }
            check_column(got, &expected_stats(col, opts), rel).map_err(|e| format!("table {t}: {e}"))?;
            checked += 1;
        }
    }
    Ok(checked)
}

// ---------------------------------------------------------------- voting

/// Three answers that no comparison confuses, each with two spellings the
/// comparison treats as equal.
pub fn vote_answers() -> [[TypedAnswer; 2]; 3] {
    [
        [TypedAnswer::number(Number::Int(38)), TypedAnswer::number(Number::Real(38.0))],
        [TypedAnswer::category("Fire"), TypedAnswer::category(" fire ")],
        [TypedAnswer::list_category(vec!["a", "b"]), TypedAnswer::list_category(vec!["B", "a"])],
    ]
}

/// Expected vote outcome: the labels that may win and, for each, the
/// spellings that may be returned. Counting decides; among equally large
/// labels the best (lowest) rank decides; when ranks also tie, every tied
/// label is acceptable.
pub fn vote_oracle(votes: &[(usize, usize, u32)]) -> Vec<(usize, Vec<usize>)> {
    let mut count = [0usize; 3];
    let mut best = [u32::MAX; 3];
    for &(label, _, rank) in votes {
        count[label] += 1;
        best[label] = best[label].min(rank);
    }
    let top = *count.iter().max().unwrap();
    let top_rank = (0..3).filter(|&l| count[l] == top).map(|l| best[l]).min().unwrap();
    (0..3)
        .filter(|&l| count[l] == top && best[l] == top_rank)
        .map(|l| {
            let spellings = votes.iter().filter(|v| v.0 == l && v.2 == top_rank).map(|v| v.1).collect();
            (l, spellings)
        })
        .collect()
}

fn multisets(k: usize, min_label: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == k {
        out.push(prefix.clone());
        return;
    }
    for l in min_label..3 {
        prefix.push(l);
        multisets(k, l, prefix, out);
        prefix.pop();
    }
}

/// Every multiset of one to four votes over the three answers, every rank
/// assignment from 1..=4 per vote and every spelling choice, checked against
/// [`vote_oracle`]. Returns the number of cases.
pub fn run_vote_oracle() -> Result<usize, String> {
    let answers = vote_answers();
    let opts = CompareOptions::default();
    let mut cases = 0;
    for k in 1..=4usize {
        let mut sets = Vec::new();
        multisets(k, 0, &mut Vec::new(), &mut sets);
        for labels in sets {
            for ranks in 0..4usize.pow(k as u32) {
                for spell in 0..(1usize << k) {
                    let votes: Vec<(usize, usize, u32)> = (0..k)
                        .map(|i| (labels[i], (spell >> i) & 1, (ranks / 4usize.pow(i as u32) % 4) as u32 + 1))
                        .collect();
                    let input: Vec<(TypedAnswer, u32)> =
                        votes.iter().map(|&(l, s, r)| (answers[l][s].clone(), r)).collect();
                    let got = majority_vote(&input, opts).ok_or("empty result for a non-empty vote")?;
                    let allowed = vote_oracle(&votes);
                    let ok = allowed.iter().any(|(l, spellings)| spellings.iter().any(|&s| answers[*l][s] == got));
                    if !ok {
                        return Err(format!("votes {votes:?}: got {got:?}, expected one of {allowed:?}"));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(cases)
}

/// A three-way tie between distinct answers goes to rank 1, whatever the
/// input order and whichever answer holds rank 1.
pub fn check_rank_one_tie_rule() -> Result<usize, String> {
    let answers = vote_answers();
    let opts = CompareOptions::default();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cases = 0;
    for ranks in perms {
        for order in perms {
            let input: Vec<(TypedAnswer, u32)> =
                order.iter().map(|&l| (answers[l][0].clone(), ranks[l] as u32 + 1)).collect();
            let winner = (0..3).find(|&l| ranks[l] == 0).unwrap();
            let got = majority_vote(&input, opts);
            if got.as_ref() != Some(&answers[winner][0]) {
                return Err(format!("ranks {ranks:?} order {order:?}: got {got:?}"));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------- answers

fn random_text(rng: &mut StdRng) -> String {
    const PIECES: [&str; 14] =
        ["Fire", "water", " ", "'", "\"", "`", "True", "no", "3", "2.50", ",", "x y", "[", "é"];
    (0..rng.random_range(0..5)).map(|_| PIECES[rng.random_range(0..PIECES.len())]).collect()
}

fn random_number(rng: &mut StdRng) -> Number {
    match rng.random_range(0..5) {
        0 => Number::Int(rng.random_range(-10_000..10_000)),
        1 => Number::Real(rng.random_range(-100..100) as f64),
        2 => Number::Real(rng.random_range(-1.0e6..1.0e6)),
        3 => Number::Real(rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-8..16))),
        _ => Number::Real(rng.random_range(-1000..1000) as f64 / 1000.0 + 0.005),
    }
}

fn random_value(rng: &mut StdRng, shape: AnswerType) -> AnswerValue {
    match shape {
        AnswerType::Boolean => AnswerValue::Bool(rng.random_bool(0.5)),
        AnswerType::Number => AnswerValue::Number(random_number(rng)),
        AnswerType::Category => AnswerValue::Text(random_text(rng)),
        AnswerType::ListNumber => AnswerValue::NumberList((0..rng.random_range(0..5)).map(|_| random_number(rng)).collect()),
        AnswerType::ListCategory => AnswerValue::TextList((0..rng.random_range(0..5)).map(|_| random_text(rng)).collect()),
    }
}

pub const ALL_TYPES: [AnswerType; 5] =
    [AnswerType::Boolean, AnswerType::Number, AnswerType::Category, AnswerType::ListNumber, AnswerType::ListCategory];

/// A random well-shaped answer of type `t`.
pub fn random_answer_of(rng: &mut StdRng, t: AnswerType) -> TypedAnswer {
    TypedAnswer { answer_type: t, value: random_value(rng, t), coerced: false }
}

/// A variant of `a` that comparisons may or may not accept: perturbed
/// numbers, other letter case, padded text, reversed lists.
pub fn near_answer(rng: &mut StdRng, a: &TypedAnswer) -> TypedAnswer {
    let nudge = |rng: &mut StdRng, n: &Number| match rng.random_range(0..3) {
        0 => Number::Real(n.as_f64()),
        1 => Number::Real(n.as_f64() * (1.0 + rng.random_range(-2e-6..2e-6))),
        _ => Number::Real(n.as_f64() + rng.random_range(-0.01..0.01)),
    };
    let recase = |rng: &mut StdRng, s: &str| match rng.random_range(0..3) {
        0 => s.to_uppercase(),
        1 => format!(" {s} "),
        _ => s.to_string(),
    };
    let value = match &a.value {
        AnswerValue::Bool(b) => AnswerValue::Bool(if rng.random_bool(0.8) { *b } else { !*b }),
        AnswerValue::Number(n) => AnswerValue::Number(nudge(rng, n)),
        AnswerValue::Text(s) => AnswerValue::Text(recase(rng, s)),
        AnswerValue::NumberList(v) => {
            let mut v: Vec<Number> = v.iter().map(|n| nudge(rng, n)).collect();
            if rng.random_bool(0.5) {
                v.reverse();
            }
            AnswerValue::NumberList(v)
        }
        AnswerValue::TextList(v) => {
            let mut v: Vec<String> = v.iter().map(|s| recase(rng, s)).collect();
            if rng.random_bool(0.5) {
                v.reverse();
            }
            AnswerValue::TextList(v)
        }
    };
    TypedAnswer { answer_type: a.answer_type, value, coerced: false }
}

/// A random answer. One in four has a payload whose shape differs from its
/// declared type, as interpreter output can before formatting.
pub fn random_answer(rng: &mut StdRng) -> TypedAnswer {
    let answer_type = ALL_TYPES[rng.random_range(0..5)];
    let shape = if rng.random_bool(0.25) { ALL_TYPES[rng.random_range(0..5)] } else { answer_type };
    TypedAnswer { answer_type, value: random_value(rng, shape), coerced: false }
}
