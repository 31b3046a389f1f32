use arithdyn::family::unicritical_family;
use arithdyn::preper::{preper_poly, root_set};
use arithdyn::poly::BigRat;
use std::time::Instant;

fn main() {
    let fam = unicritical_family(2, &[BigRat::from_integer(0.into())]).unwrap();
    for n in [7u32, 9, 10] {
        let t0 = Instant::now();
        let pp = preper_poly(&fam, n, 0).unwrap();
        let build = t0.elapsed();
        let t1 = Instant::now();
        match root_set(&pp, 1e-9, 0) {
            Ok(rs) => {
                let maxmod = rs.points.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
                println!(
                    "n={n}: deg {} roots {} max|t| {:.6} build {:?} roots {:?}",
                    pp.degree(), rs.points.len(), maxmod, build, t1.elapsed()
                );
            }
            Err(e) => println!("n={n}: error {e}"),
        }
    }
}
