use super::*;
use crate::rational::{rat, ratio};
use crate::text::{abstract_problem, PipelineConfig, RawProblem};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn problem(id: &str, text: &str, equations: &str, answer: i64) -> AbstractedProblem {
    let raw = RawProblem {
        id: id.into(),
        text: text.into(),
        gold_equations: equations.into(),
        gold_answers: vec![rat(answer)],
    };
    abstract_problem(&raw, &PipelineConfig::default()).unwrap()
}

fn small_corpus() -> Corpus {
    Corpus::from_problems(&[
        problem("t0", "Tom had 3 apples and bought 4 more. How many apples now?", "3 + 4 = x", 7),
        problem("t1", "Sue ate 2 of her 9 cookies. How many cookies are left?", "9 - 2 = x", 7),
        problem("t2", "Each of 5 boxes holds 6 pens. How many pens in total?", "5 * 6 = x", 30),
    ])
}

#[test]
fn jaccard_matches_hand_counts() {
    assert_eq!(jaccard_similarity(&set(&["a", "b", "c"]), &set(&["a", "b", "c"])), rat(1));
    assert_eq!(jaccard_similarity(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), ratio(1, 2));
    assert_eq!(jaccard_similarity(&set(&["a"]), &set(&["b"])), rat(0));
}

#[test]
fn jaccard_empty_conventions() {
    assert_eq!(jaccard_similarity(&set(&[]), &set(&[])), rat(1));
    assert_eq!(jaccard_similarity(&set(&["a"]), &set(&[])), rat(0));
}

#[test]
fn jaccard_is_symmetric_and_one_iff_equal() {
    let pairs = [
        (set(&["a", "b"]), set(&["b", "c", "d"])),
        (set(&["x"]), set(&["x"])),
        (set(&["p", "q"]), set(&["r"])),
    ];
    for (s, t) in &pairs {
        assert_eq!(jaccard_similarity(s, t), jaccard_similarity(t, s));
        assert_eq!(jaccard_similarity(s, t) == rat(1), s == t);
    }
}

#[test]
fn slot_tokens_are_replaced_by_a_placeholder() {
    let p = problem("p", "Tom had 3 apples and bought 4 more. How many?", "3 + 4 = x", 7);
    let comparison = comparison_tokens(&p.tokens);
    assert!(comparison.contains(&NUMBER_PLACEHOLDER.to_string()));
    assert!(comparison.iter().all(|t| t != "A" && t != "B"));
}

#[test]
fn self_retrieval_is_correct() {
    let corpus = small_corpus();
    let test = problem("q", "Tom had 5 apples and bought 2 more. How many apples now?", "5 + 2 = x", 7);
    let outcome = retrieve_and_solve(&test, &corpus, &RetrievalMetric::Jaccard);
    assert_eq!(outcome.predicted_template.as_deref(), Some("A + B = x"));
    assert!(outcome.correct);
    assert_eq!(outcome.answers, Some(vec![7.0]));
}

#[test]
fn singleton_corpus_always_answers_with_its_template() {
    let corpus = Corpus::from_problems(&[problem(
        "only",
        "Each of 2 boxes holds 3 pens. How many pens in total?",
        "2 * 3 = x",
        6,
    )]);
    let test =
        problem("q", "Sue ate 4 of her 6 cookies. How many cookies are left?", "6 - 4 = x", 2);
    let outcome = retrieve_and_solve(&test, &corpus, &RetrievalMetric::Jaccard);
    assert_eq!(outcome.predicted_template.as_deref(), Some("A * B = x"));
    assert!(!outcome.correct);
}

#[test]
fn missing_slots_become_unknown_slot_failures() {
    let corpus = Corpus::from_problems(&[problem(
        "t",
        "Ben had 2 bags of 3 rocks plus 4 loose rocks. How many rocks?",
        "2 * 3 + 4 = x",
        10,
    )]);
    // Only one number available, template needs three.
    let test = problem("q", "Ben had 2 bags of rocks. How many rocks?", "x = 2", 2);
    let outcome = retrieve_and_solve(&test, &corpus, &RetrievalMetric::Jaccard);
    assert!(!outcome.correct);
    assert_eq!(outcome.failure, Some(crate::eval::FailureReason::UnknownSlot));
}

#[test]
fn ties_break_to_the_lowest_corpus_index() {
    // Two identical training texts with different templates.
    let a = problem("first", "Al saw 4 birds and 5 cats. Count them.", "4 + 5 = x", 9);
    let b = problem("second", "Al saw 4 birds and 5 cats. Count them.", "5 - 4 = x", 1);
    let test = problem("q", "Al saw 7 birds and 2 cats. Count them.", "7 + 2 = x", 9);

    let corpus = Corpus::from_problems(&[a.clone(), b.clone()]);
    let outcome = retrieve_and_solve(&test, &corpus, &RetrievalMetric::Jaccard);
    assert_eq!(outcome.predicted_template.as_deref(), Some("A + B = x"));

    // Swapping corpus order flips the winner: the tie-break is the index.
    let corpus = Corpus::from_problems(&[b, a]);
    let outcome = retrieve_and_solve(&test, &corpus, &RetrievalMetric::Jaccard);
    assert_eq!(outcome.predicted_template.as_deref(), Some("B - A = x"));
}

#[test]
fn argmax_is_permutation_invariant_without_ties() {
    let corpus_items = [
        problem("t0", "Tom had 3 apples and bought 4 more. How many apples now?", "3 + 4 = x", 7),
        problem("t1", "Sue ate 2 of her 9 cookies. How many cookies are left?", "9 - 2 = x", 7),
        problem("t2", "Each of 5 boxes holds 6 pens. How many pens in total?", "5 * 6 = x", 30),
    ];
    let test = problem("q", "Each of 7 boxes holds 2 pens. How many pens in total?", "7 * 2 = x", 14);
    let forward = Corpus::from_problems(&corpus_items);
    let reversed: Vec<_> = corpus_items.iter().rev().cloned().collect();
    let backward = Corpus::from_problems(&reversed);
    let a = retrieve_and_solve(&test, &forward, &RetrievalMetric::Jaccard);
    let b = retrieve_and_solve(&test, &backward, &RetrievalMetric::Jaccard);
    assert_eq!(a.predicted_template, b.predicted_template);
    assert!(a.correct && b.correct);
}

#[test]
fn cosine_retrieval_with_a_small_table() {
    let mut table = EmbeddingTable::new(3);
    // "apples" problems cluster away from "cookies" problems.
    table.insert("apples", vec![1.0, 0.0, 0.0]);
    table.insert("bought", vec![0.9, 0.1, 0.0]);
    table.insert("cookies", vec![0.0, 1.0, 0.0]);
    table.insert("ate", vec![0.1, 0.9, 0.0]);
    table.insert("left", vec![0.0, 0.8, 0.2]);

    let corpus = small_corpus();
    let test = problem("q", "Rita ate 3 of her 8 cookies. How many cookies are left?", "8 - 3 = x", 5);
    let outcome = retrieve_and_solve(&test, &corpus, &RetrievalMetric::Cosine(&table));
    // Mentions appear as [2, 9] / [3, 8] in text order, so the gold template
    // of the cookies problems is "B - A = x".
    assert_eq!(outcome.predicted_template.as_deref(), Some("B - A = x"));
    assert!(outcome.correct);
}
