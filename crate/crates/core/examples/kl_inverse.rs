//! Upper and lower inverses of the Bernoulli kl, next to the Pinsker
//! relaxation they improve on.
//!
//! cargo run --example kl_inverse -- [p_hat] [eps]

use rpb::concentration::{bern_kl, kl_inv_lower, kl_inv_upper};

fn main() -> rpb::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let pairs = if args.len() >= 2 {
        vec![(args[0], args[1])]
    } else {
        vec![(0.0, 0.01), (0.1, 0.05), (0.3, 0.01), (0.5, 0.1), (0.95, 0.2), (1.0, 0.5)]
    };
    println!("p_hat,eps,lower,upper,pinsker_upper,kl_at_upper");
    for (p, eps) in pairs {
        let up = kl_inv_upper(p, eps)?;
        let lo = kl_inv_lower(p, eps)?;
        let pinsker = (p + (eps / 2.0).sqrt()).min(1.0);
        println!("{p},{eps},{lo:.9},{up:.9},{pinsker:.9},{:.3e}", bern_kl(p, up));
    }
    Ok(())
}
