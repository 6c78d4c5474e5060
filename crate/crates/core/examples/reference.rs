use bulkq_core::model::Scenario;
use bulkq_core::solver::analyze_route;

fn main() {
    for sc in [Scenario::reference(), Scenario::reference_h4()] {
        let t = std::time::Instant::now();
        let rep = analyze_route(&sc).expect("analysis");
        println!("{} ({:?})", rep.label, t.elapsed());
        for m in &rep.per_station {
            println!(
                "{:>2} rho={:.4} C'={} EQ={:?} VQ={:?} EW={:?} VW={:?}",
                m.station, m.rho, m.effective_capacity, m.eq, m.varq, m.ew, m.varw
            );
        }
    }
}
