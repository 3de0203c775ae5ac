//! Geometric chunk sizes and the validation-set sizes they leave per step.
//!
//! cargo run --example geometric_split -- [n] [T...]

use rpb::recursion::geometric_split;

fn main() -> rpb::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(60_000);
    let steps = if args.len() > 1 { args[1..].to_vec() } else { vec![2, 4, 6, 8] };
    for t in steps {
        let s = geometric_split(n, t)?;
        let nval: Vec<usize> = (1..=t).map(|i| s.n_val(i)).collect();
        println!("T={t}: chunks {:?}", s.chunk_sizes);
        println!("     n_val  {nval:?}");
    }
    Ok(())
}
