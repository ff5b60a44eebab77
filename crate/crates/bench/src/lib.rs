//! Deterministic model families for the benches.

use bisimdist::models::{LmcBuilder, MdpBuilder};
use bisimdist::numeric::rat;
use bisimdist::{Lmc, Mdp};

/// Ring of `n` states with two labels; state `i` moves to `i+1` and `i+2`
/// with weights depending on `i`, so few states are bisimilar.
pub fn ring_lmc(n: usize) -> Lmc {
    let mut b = LmcBuilder::new();
    for i in 0..n {
        b.add_state(&format!("r{i}"), if i % 3 == 0 { "a" } else { "b" });
    }
    for i in 0..n {
        let w = (i % 4) as i64 + 1;
        b.add_edge(&format!("r{i}"), &format!("r{}", (i + 1) % n), rat(w, w + 1));
        b.add_edge(&format!("r{i}"), &format!("r{}", (i + 2) % n), rat(1, w + 1));
    }
    b.build().expect("ring is well formed")
}

/// Ring MDP with two actions per state pulling in opposite directions.
pub fn ring_mdp(n: usize) -> Mdp {
    let mut b = MdpBuilder::new();
    for i in 0..n {
        b.add_state(&format!("r{i}"), if i % 3 == 0 { "a" } else { "b" });
    }
    for i in 0..n {
        let s = format!("r{i}");
        b.add_edge(&s, "fwd", &format!("r{}", (i + 1) % n), rat(2, 3));
        b.add_edge(&s, "fwd", &format!("r{}", (i + 2) % n), rat(1, 3));
        b.add_edge(&s, "back", &format!("r{}", (i + n - 1) % n), rat(1, 2));
        b.add_edge(&s, "back", &s, rat(1, 2));
    }
    b.build().expect("ring is well formed")
}
