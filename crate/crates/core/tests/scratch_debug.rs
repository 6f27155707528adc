use rewind_core::jordan::*;
use rewind_core::protocol::*;
use rewind_core::qstate::*;
use rewind_core::rng::trial_rng;

#[test]
fn probe() {
    let mut rng = trial_rng(13, 0);
    let proto = commit_open_toy(16, true, &GammaSpec::Uniform(0.25), &mut rng).unwrap();
    let meas = make_measurements(&proto).unwrap();
    let eig = meas.mean_accept.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..32).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    println!("top eigenvalue {}", eig.eigenvalues[top]);
    let psi = CVec::from_column_slice(eig.eigenvectors.column(top).as_slice());
    let g = QOperator::projector(proto.h_space.clone(), &psi * psi.adjoint()).unwrap();
    let d = &meas.pi_vr[4];

    let jd = jordan_decompose_default(&g, d).unwrap();
    println!(
        "base jd: {} two-dim, s values {:?}",
        jd.two_dim.len(),
        jd.two_dim.iter().map(|t| t.s).collect::<Vec<_>>()
    );
    let comp = jd.clone().complemented();
    match comp {
        Ok(c) => println!("comp ok: {} two-dim", c.two_dim.len()),
        Err(e) => println!("comp err: {e}"),
    }

    let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        jordan_decompose_default(d, &g).map(|jd| {
            (
                jd.two_dim.iter().map(|t| (t.s, t.p)).collect::<Vec<_>>(),
                jd.one_dim.iter().map(|l| l.class).collect::<Vec<_>>(),
            )
        })
    }));
    println!("decompose dg: {:?}", r.map_err(|_| "panic"));
    let aba = d.mat() * g.mat() * d.mat();
    let e2 = aba.clone().symmetric_eigen();
    let mut mid: Vec<f64> = e2
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > 1e-10 && l < 1.0 - 1e-10)
        .collect();
    mid.sort_by(|a, b| b.total_cmp(a));
    println!("dgd mid eigenvalues: {mid:?}");
    let nan_count = e2.eigenvalues.iter().filter(|l| l.is_nan()).count();
    println!("dgd NaN eigenvalues: {nan_count} of {}", e2.eigenvalues.len());
    let nan_aba = aba.iter().any(|c| !c.re.is_finite() || !c.im.is_finite());
    println!("aba has NaN entries: {nan_aba}");
    for (k, &lam) in e2.eigenvalues.iter().enumerate() {
        if lam > 1e-10 && lam < 1.0 - 1e-10 {
            let va1 = CVec::from_column_slice(e2.eigenvectors.column(k).as_slice());
            let bvec = g.mat() * &va1;
            let s = bvec.norm();
            println!("  lam {lam}: s {s}, t^2 {}", 1.0 - s * s);
        }
    }

    let ca = g.complement().unwrap();
    let cb = d.complement().unwrap();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        jordan_decompose_default(&ca, &cb)
    }));
    match result {
        Ok(Ok(c)) => println!("direct comp decompose ok: {} two-dim", c.two_dim.len()),
        Ok(Err(e)) => println!("direct comp decompose err: {e}"),
        Err(_) => {
            println!("direct comp decompose panicked; scanning eigenvalues");
            let aba = ca.mat() * cb.mat() * ca.mat();
            let eig = aba.symmetric_eigen();
            let mut mid: Vec<f64> = eig
                .eigenvalues
                .iter()
                .copied()
                .filter(|&l| l > 1e-10 && l < 1.0 - 1e-10)
                .collect();
            mid.sort_by(|a, b| a.total_cmp(b));
            println!("mid eigenvalues of comp ABA: {mid:?}");
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam > 1e-10 && lam < 1.0 - 1e-10 {
                    let va1 = CVec::from_column_slice(eig.eigenvectors.column(k).as_slice());
                    let bvec = cb.mat() * &va1;
                    let s = bvec.norm();
                    if !(1.0 - s * s).sqrt().is_finite() {
                        println!("lam {lam} gives s {s} -> NaN t");
                    }
                }
            }
        }
    }
}
