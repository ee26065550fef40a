//! Hubness under nearest-neighbour retrieval and what CSLS and the
//! inverted softmax do about it.

use rubi::alignment::AlignmentMap;
use rubi::retrieval::{generate_candidates, top1_in_degree, AlignedPair, Criterion, Scoring};
use rubi::synthetic::HubCloud;

fn main() -> rubi::Result<()> {
    let hub = HubCloud::generate(500, 20, 1.0, 1.5, 7);
    let map = AlignmentMap::identity(20, "s", "t");
    let pair = AlignedPair::new(&map, &hub.source, &hub.target)?;
    let rows: Vec<usize> = (0..hub.source.len()).collect();

    for criterion in [Criterion::Nn, Criterion::Csls, Criterion::Isf] {
        let scoring = Scoring::prepare(criterion, &pair, 10, 30.0)?;
        let lists = generate_candidates(&pair, &rows, 1, &scoring)?;
        let degree = top1_in_degree(&lists, hub.target.len());
        let correct = lists
            .iter()
            .filter(|l| l.candidates[0].target_row == l.source_row)
            .count();
        println!(
            "{:<4}  hub chosen {:>3} times  busiest target {:>3}  correct {:.3}",
            criterion.to_string(),
            degree[hub.hub_row],
            degree.iter().max().unwrap(),
            correct as f64 / rows.len() as f64
        );
    }
    Ok(())
}
