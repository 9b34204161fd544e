use negkit::eval::{cross_matrix, DatasetSplit, MatrixConfig};
use negkit::synth::{generate, Grammar};
use negkit::Task;

fn split(name: &str, seed: u64) -> DatasetSplit {
    let grammar = Grammar::preset(name).unwrap();
    let mut corpus = generate(&grammar, 2000, seed).unwrap();
    let test = corpus.split_off(1600);
    DatasetSplit { name: name.to_string(), train: corpus, test }
}

fn registry() -> Vec<DatasetSplit> {
    vec![split("clinical", 11), split("review", 12)]
}

#[test]
fn disjoint_cue_vocabularies_show_a_transfer_gap() {
    let config = MatrixConfig { task: Task::Cue, epochs: 5, seeds: vec![1], lexicon: None, ignore_punct: false };
    let m = cross_matrix(&registry(), &config).unwrap();
    let agg = m.aggregate().unwrap();
    let same = agg.same_dataset_mean.unwrap();
    let cross = agg.cross_dataset_mean.unwrap();
    assert!(same >= 95.0, "same-dataset F1 {same}");
    assert!(same - cross >= 10.0, "same {same} cross {cross}");
    for name in ["clinical", "review"] {
        let other = if name == "clinical" { "review" } else { "clinical" };
        assert!(m.get(name, name).unwrap() >= m.get(other, name).unwrap());
    }
}

#[test]
fn scope_matrix_is_reproducible() {
    let config = MatrixConfig { task: Task::Scope, epochs: 2, seeds: vec![3, 4], lexicon: None, ignore_punct: true };
    let reg = registry();
    let a = cross_matrix(&reg, &config).unwrap();
    let b = cross_matrix(&reg, &config).unwrap();
    assert_eq!(a, b);
    assert!(a.get("clinical", "clinical").unwrap() > 90.0);
}

#[test]
fn single_dataset_gives_one_cell() {
    let config = MatrixConfig { task: Task::Cue, epochs: 1, seeds: vec![0], lexicon: None, ignore_punct: false };
    let m = cross_matrix(&[split("clinical", 5)], &config).unwrap();
    let agg = m.aggregate().unwrap();
    assert_eq!(agg.same_dataset_mean, m.get("clinical", "clinical"));
    assert_eq!(agg.cross_dataset_mean, None);
}
