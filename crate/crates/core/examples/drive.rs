//! Scratch end-to-end drive: load an instance file, run every engine,
//! cross-check, and run one verification pass.

use qsde_core::linalg::c;
use qsde_core::{semigroup, series, toyfock, CVec, Instance};

fn main() {
    let path = std::env::args().nth(1).expect("usage: drive <instance.json>");
    let instance = match Instance::load(&path) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("config error: {e} (is_config = {})", e.is_config());
            std::process::exit(2);
        }
    };
    let pair = instance.pair("", "").unwrap();
    let t = 1.0;

    let exact = semigroup::matrix_element(&instance.phi, &instance.kappa, &pair, t).unwrap();
    let (summed, tail) =
        series::truncated_series(&instance.phi, &instance.kappa, &pair, t, instance.defaults.truncation)
            .unwrap();
    let grid = toyfock::ToyGrid::new(t, instance.defaults.slots).unwrap();
    let v = CVec::from_element(instance.kappa.target_cols(), c(1.0, 0.0));
    let discrete = toyfock::euler_solve(&instance.phi, &instance.kappa, &v, &pair.right, grid)
        .unwrap()
        .element_table(&pair.left)
        .unwrap();

    println!("semigroup : {:.12}", exact.entries[0][(0, 0)].re);
    println!("series    : {:.12} (tail {:.3e})", summed.entries[0][(0, 0)].re, tail);
    println!("toy Fock  : {:.12}", discrete.entries[0][(0, 0)].re);
    println!("oracle    : {:.12}", (-1.0f64).exp());

    let weak = semigroup::weak_residual(&instance.phi, &instance.kappa, &pair, t, 64).unwrap();
    println!("weak residual at 64 steps: {weak:.3e}");

    let series_defect = summed.diff_frobenius(&exact);
    assert!(series_defect <= tail + 1e-10, "series vs semigroup: {series_defect}");
    assert!(weak <= 1e-9, "weak residual too large");
    println!("drive: ok");
}
