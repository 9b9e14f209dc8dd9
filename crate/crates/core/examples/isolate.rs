use mwp_core::checkpoint::{SolverKind, TrainedSolver};
use mwp_core::classifier::*;
use mwp_core::eval::*;
use mwp_core::vocab::{TokenVocab, TemplateVocab};
use std::time::Instant;

fn main() {
    let content = std::fs::read_to_string("fixtures/paraphrase20.jsonl").unwrap();
    let problems = parse_records(&content).unwrap();
    let (accepted, _, _) = ingest(&problems, &Default::default());
    let splits = make_splits(accepted, SplitRatios::default(), 0).unwrap();

    for scale in [2.0, 4.0, 6.0] {
        for hidden in [32usize, 64] {
            let t = Instant::now();
            let config = ClassifierConfig {
                embedding_dim: 16, hidden_dim: hidden, epochs: 50, batch_size: 2,
                dropout: 0.0, unk_min_freq: 1, ..ClassifierConfig::new(ClassifierKind::BiLstm)
            };
            let token_vocab = TokenVocab::build(splits.train.problems.iter().map(|p| p.tokens.as_slice()), 1);
            let template_vocab = TemplateVocab::build(&splits.train.problems).unwrap();
            let mut model = ClassifierModel::init(config, token_vocab, template_vocab);
            model.params.rescale_values(scale);
            let log = model.fit(&splits.train.problems, &splits.validation.problems).unwrap();
            let train_acc = splits.train.problems.iter().filter(|p| model.predict_and_solve(p).correct).count();
            let test_acc = splits.test.problems.iter().filter(|p| model.predict_and_solve(p).correct).count();
            println!("scale {scale} h{hidden}: train {train_acc}/16 val best {:.2} test {test_acc}/2 [{:?}]",
                log.best_val_solution_accuracy, t.elapsed());
        }
    }
}
