//! Sample the four-group dataset, look at its group structure, and round-trip
//! it through both file formats.
//!
//! ```text
//! cargo run --example generate_data [seed]
//! ```

use grouprobe::synthgen::{group_id, make_balanced_test, noise_dataset, sample_group_dataset, GROUP_LABELS};
use grouprobe::{GroupDataSpec, LabeledDataset};

fn main() -> grouprobe::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = GroupDataSpec::table2();
    let train = sample_group_dataset(&spec, seed)?;
    let test = make_balanced_test(&spec, 250, seed + 1)?;

    println!("train: {} rows, d = {}", train.len(), train.dim());
    println!("{:>5} {:>4} {:>4} {:>6} {:>10} {:>10}", "group", "y", "s", "n", "mean core", "mean spur");
    for (g, &(y, s)) in GROUP_LABELS.iter().enumerate() {
        let rows: Vec<usize> = (0..train.len()).filter(|&i| group_id(train.labels[i], train.spurious_attrs[i]) == g).collect();
        let sub = train.select(&rows);
        let core = sub.features.column(0).mean().unwrap_or(f64::NAN);
        let spur = sub.features.column(spec.d_c).mean().unwrap_or(f64::NAN);
        println!("{g:>5} {y:>4} {s:>4} {:>6} {core:>10.3} {spur:>10.3}", sub.len());
    }
    println!("balanced test counts: {:?}", test.group_counts());

    let aux = noise_dataset(&train, spec.sigma2_noise, seed)?;
    let diff = &aux.noised - &aux.targets;
    let noise_var = diff.mapv(|v| v * v).mean().unwrap_or(f64::NAN);
    println!("noised copy: empirical noise variance {noise_var:.3} (target {})", spec.sigma2_noise);

    let dir = std::env::temp_dir().join(format!("grouprobe-gen-{seed}"));
    std::fs::create_dir_all(&dir)?;
    for name in ["train.csv", "train.bin"] {
        let path = dir.join(name);
        train.save(&path)?;
        let back = LabeledDataset::load(&path)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!("{name}: {bytes} bytes, round-trip exact = {}", back == train);
    }
    Ok(())
}
