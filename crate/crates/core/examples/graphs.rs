//! Communication graphs, Metropolis–Hastings weights and the sparsity
//! patterns derived from them.

use pglqr::benchmarks::{lollipop_graph, metropolis_hastings, path_graph, Graph};
use pglqr::linalg::spectral_abscissa;
use pglqr::structured::pattern_from_graph;

fn main() -> pglqr::Result<()> {
    let g = lollipop_graph(4, 3);
    print!("graph file:\n{g}");
    let parsed: Graph = g.to_string().parse()?;
    assert_eq!(parsed, g);

    let m = metropolis_hastings(&g);
    println!("Metropolis–Hastings weights:{m:.3}");
    println!("pattern (diagonal ∪ edges):\n{}", pattern_from_graph(&g, 7, 7)?);

    for g in [path_graph(20), lollipop_graph(10, 10)] {
        let n = g.node_count();
        let a = metropolis_hastings(&g) - nalgebra::DMatrix::<f64>::identity(n, n) * 2.0;
        println!("n = {n}, {} edges, abscissa of MH − 2I = {:.6}", g.edge_count(), spectral_abscissa(&a)?);
    }
    Ok(())
}
