use std::time::Instant;
fn main() {
    let t = Instant::now();
    match cgib::gradcheck::full_suite(20260810, 100, 100) {
        Ok(rs) => {
            let mut all = true;
            for r in &rs { all &= r.passed(); }
            let worst = rs.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err)).unwrap();
            println!("all={} worst {} {:.3e} elapsed {:.1}s", all, worst.name, worst.max_rel_err, t.elapsed().as_secs_f64());
        }
        Err(e) => println!("ERROR: {e}"),
    }
}
