use novqe_cli::experiment::{load_fixture, SubspaceCheckpoint};
use novqe_core::protocol::matrix_elements_exact;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cp = SubspaceCheckpoint::load(std::path::Path::new(&args[1])).unwrap();
    let ctx = load_fixture(std::path::Path::new(&cp.fixture)).unwrap();
    let states = cp.states().unwrap();
    let (_h, s) = matrix_elements_exact(&states, &ctx.hamiltonian).unwrap();
    let m = states.len();
    println!("S matrix:");
    for i in 0..m {
        let row: Vec<String> = (0..m).map(|j| format!("{:+.4}", s[(i, j)].re)).collect();
        println!("  {}", row.join(" "));
    }
    let s_real = s.map(|z| z.re);
    let eig = nalgebra::SymmetricEigen::new(s_real);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("S eigenvalues: {:?}", vals.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>());
    println!("state energies: {:?}", cp.state_energies);
    println!("final: {} vs per-state", cp.final_energy);
}
