//! Parse LibSVM text, subsample and split it across clients, then round-trip
//! the result through the binary dataset cache.
//!
//! cargo run --example libsvm_partition -- [path/to/file.libsvm]

use fednewton::data::{load_cache, parse_libsvm, partition, read_libsvm_file, save_cache};

const SAMPLE: &str = "\
+1 1:0.5 3:1
-1 2:1 4:0.25
-1
+1 1:1 2:1 3:1 4:1
-1 4:2   # trailing comment
+1 2:0.75
";

fn main() -> fednewton::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => read_libsvm_file(path.as_ref(), None)?,
        None => parse_libsvm(SAMPLE.as_bytes(), None)?,
    };
    let rows = data.labels.len();
    let positives = data.labels.iter().filter(|y| **y == 1.0).count();
    println!(
        "{rows} rows × {} columns, {} stored entries, {positives} positive",
        data.features.cols(),
        data.stored_entries
    );

    let clients = 3.min(rows);
    let fed = partition(&data, clients, 1.0, 42)?;
    for c in &fed.clients {
        println!("client {}: {} rows", c.client_id(), c.len());
    }

    let dir = tempfile_dir();
    let path = dir.join("partition.fedcache");
    save_cache(&fed, &path)?;
    let back = load_cache(&path)?;
    println!(
        "cache {} ({} bytes) round-trips: {}",
        path.display(),
        std::fs::metadata(&path)?.len(),
        back == fed
    );
    std::fs::remove_file(&path)?;
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fednewton-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
