//! Writes the ten-node two-pattern network, one hydraulic profile per
//! demand pattern and one scenario per profile into a directory, ready for
//! the command-line tool:
//!
//! ```text
//! cargo run -p aquobs --example two_patterns -- data/two_patterns
//! aquobs place --network data/two_patterns/network.json \
//!     --scenario data/two_patterns/east.json --scenario data/two_patterns/west.json \
//!     --sensors 3 --out out
//! ```

use std::path::PathBuf;

use aquobs::synthetic::two_pattern_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "two_patterns".into()));
    std::fs::create_dir_all(&dir)?;
    let (net, profiles, scenario) = two_pattern_network(40)?;
    std::fs::write(dir.join("network.json"), net.to_json())?;
    for (name, hyd) in ["east", "west"].iter().zip(&profiles) {
        let csv = format!("{name}.csv");
        std::fs::write(dir.join(&csv), hyd.to_csv(&net))?;
        let mut s = scenario.clone();
        s.id = (*name).into();
        s.hydraulics = Some(csv);
        std::fs::write(dir.join(format!("{name}.json")), s.to_json())?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
