//! Solves small and large linear assignment problems.

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rubi::assignment::{assignment_value, solve_assignment, Direction};

fn main() -> rubi::Result<()> {
    let cost = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
    for dir in [Direction::Minimize, Direction::Maximize] {
        let p = solve_assignment(cost.view(), dir)?;
        println!(
            "{dir:?}: {:?} value {}",
            p.mapping(),
            assignment_value(cost.view(), &p)?
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 500;
    let big = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
    let start = std::time::Instant::now();
    let p = solve_assignment(big.view(), Direction::Minimize)?;
    println!(
        "{n}x{n} random costs: value {:.4} in {:.1?}",
        assignment_value(big.view(), &p)?,
        start.elapsed()
    );
    Ok(())
}
