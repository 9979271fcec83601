//! Needs the MNIST IDX files; see the README for where to put them.

use superconv::data::subset;
use superconv::harness::{default_mnist_dir, mnist};

#[test]
fn official_files_load_with_expected_counts() {
    let dir = default_mnist_dir().expect("MNIST files are required for this test");
    let (train, test) = mnist(&dir).unwrap();
    assert_eq!((train.len(), test.len()), (60_000, 10_000));
    assert_eq!((train.n_classes(), train.n_features()), (10, 784));
    assert!(train.inputs().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(train.class_counts().iter().all(|&c| c > 5000));

    let s = subset(&train, 1000, 3).unwrap();
    assert_eq!(s.len(), 10_000);
    assert_eq!(s.class_counts(), vec![1000; 10]);
    assert_eq!(s, subset(&train, 1000, 3).unwrap());
}
