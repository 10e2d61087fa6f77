//! Builds the tile for a small circuit, fuses it with the size-only rule and
//! prints the grid before and after.
//!
//! ```text
//! cargo run --example tile -- [k]
//! ```

use qfuse::fusion::fusible_size_only;
use qfuse::tile::build_tile;
use qfuse::Circuit;

fn main() -> qfuse::Result<()> {
    let k = std::env::args()
        .nth(1)
        .map(|a| a.parse::<usize>().expect("block size"))
        .unwrap_or(3);

    let mut c = Circuit::new(4)?;
    c.add("h", &[], &[0])?;
    c.add("cx", &[], &[0, 1])?;
    c.add("rz", &[0.3], &[1])?;
    c.add("h", &[], &[3])?;
    c.add("cx", &[], &[2, 3])?;
    c.add("cx", &[], &[1, 2])?;
    c.add("rx", &[1.1], &[0])?;
    c.add("cz", &[], &[2, 3])?;

    let mut tile = build_tile(&c);
    println!("initial tile:\n{tile}");

    let mut policy = |top: &_, bot: &_| fusible_size_only(top, bot, k);
    let mut passes = 0;
    while tile.traverse(&mut policy) {
        passes += 1;
    }
    println!("after {passes} fusing traversals (k = {k}):\n{tile}");

    let fused = tile.flatten()?;
    println!("{} gates -> {} blocks", c.len(), fused.len());
    Ok(())
}
