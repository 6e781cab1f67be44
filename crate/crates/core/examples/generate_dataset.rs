//! Generate a labeled Poisson set and the out-of-distribution test set,
//! write both to disk and read them back.
//!
//! cargo run --release --example generate_dataset -- [out_dir]

use pift::experiments::{generate_ood_to_dir, generate_to_dir};
use pift::fields::load_sampleset;
use pift::{Grid, PdeTask};

fn main() -> pift::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-data".into());
    let out = std::path::Path::new(&out);
    let grid = Grid::new(33)?;
    let task = PdeTask::Poisson;

    let train = generate_to_dir(&task, grid, 16, 1, &out.join("train"))?;
    let ood = generate_ood_to_dir(&task, grid, 9, 2, &out.join("ood"))?;
    for (name, set) in [("train", &train), ("ood", &ood)] {
        let back = load_sampleset(out.join(name))?;
        assert_eq!(back.checksum(), set.checksum());
        let norms: Vec<String> = set
            .solutions()
            .unwrap()
            .iter()
            .take(4)
            .map(|u| format!("{:.2e}", u.max_abs()))
            .collect();
        println!("{name}: {} samples, checksum {}, max|u| {} ...", set.len(), &set.checksum()[..16], norms.join(" "));
    }
    println!("ood generator: {}", ood.manifest().generator);
    Ok(())
}
