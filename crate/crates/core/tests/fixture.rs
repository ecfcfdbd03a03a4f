mod common;

use ispca::io::{read_matrix_csv, CsvOptions};

#[test]
#[ignore = "rewrites tests/fixtures/three_blocks.csv"]
fn regenerate_fixture() {
    common::write_matrix(&common::fixture_path(), common::fixture_matrix().values());
}

#[test]
fn fixture_matches_recorded_seed() {
    let opts = CsvOptions {
        center: false,
        ..Default::default()
    };
    let file = read_matrix_csv(&common::fixture_path(), &opts).unwrap();
    assert_eq!(file.data.values(), common::fixture_matrix().values());
    assert_eq!(file.data.col_labels().unwrap()[14], "v14");
}
