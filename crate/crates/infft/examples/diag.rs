use infft::density::*;
use infft::domain::*;
use infft::grid::*;
use infft::optimize::*;
use infft::signal::*;
use infft::solver::CgConfig;
use infft::transform::*;
use infft::window::*;
use num_complex::Complex64;
use std::time::Instant;

fn main() {
    // --- criterion 7: phantom table ---
    for m_band in [8usize, 16, 32] {
        let t = Instant::now();
        let bx = FrequencyBox::new(2, m_band).unwrap();
        let r = 2 * m_band;
        let pts = generate_grid(&GridRequest::Linogram { radii: r, angles: 2 * r }).unwrap();
        let phantom = shepp_logan(m_band).unwrap();
        let coeffs = phantom.as_coefficients().unwrap();
        let f = ndft_forward(&coeffs, &pts).unwrap();
        let t_synth = t.elapsed();

        let t = Instant::now();
        let wts = exact_weights(&pts, bx, &CgConfig::default()).unwrap();
        let t_w = t.elapsed();
        let t = Instant::now();
        let plan = accurate_plan(&pts, bx).unwrap();
        let recon = infft_density(&plan, &wts, &f).unwrap();
        let e2_dc = relative_error(&recon, &coeffs, Norm::L2).unwrap();
        let t_rec = t.elapsed();

        let t = Instant::now();
        let ms = oversampled_size(1.0, m_band).unwrap();
        let m_trunc = 4usize.min((ms - 1) / 2);
        let wspec = WindowSpec::new(WindowKind::Dirichlet, m_trunc, 1.0, m_band).unwrap();
        let sp = optimize_spreader(&pts, &wspec, 0.0).unwrap();
        let t_opt = t.elapsed();
        let t = Instant::now();
        let recon6 = sp.infft_opt(&f).unwrap();
        let e2_opt = relative_error(&recon6, &coeffs, Norm::L2).unwrap();
        let t_rec6 = t.elapsed();
        println!(
            "crit7 M={m_band} N={}: alg4 e2={e2_dc:.3e} (eps={:.1e}, it={}, tw={t_w:.2?}, trec={t_rec:.2?}) alg6 e2={e2_opt:.3e} (topt={t_opt:.2?}, trec={t_rec6:.2?}, fb={}) synth={t_synth:.2?}",
            pts.len(),
            wts.report.epsilon,
            wts.report.cg_iterations,
            sp.fallback_columns
        );
    }

    // --- criterion 9: Frobenius ordering ---
    {
        let bx = FrequencyBox::new(2, 12).unwrap();
        for (name, req) in [
            ("mpolar", GridRequest::ModifiedPolar { radii: 32, angles: 64 }),
            ("polar", GridRequest::Polar { radii: 32, angles: 64 }),
        ] {
            let t = Instant::now();
            let pts = generate_grid(&req).unwrap();
            let wb = WindowSpec::new(WindowKind::BSpline, 4, 2.0, 12).unwrap();
            let plan = NfftPlan::build(&pts, bx, &wb).unwrap();
            let n_orig = frobenius_deviation(&pts, bx, &plan).unwrap();
            let sp_b = optimize_spreader(&pts, &wb, 0.0).unwrap();
            let n_opt_b = frobenius_deviation(&pts, bx, &sp_b).unwrap();
            let wd = WindowSpec::new(WindowKind::Dirichlet, 4, 2.0, 12).unwrap();
            let sp_d = optimize_spreader(&pts, &wd, 0.0).unwrap();
            let n_opt_d = frobenius_deviation(&pts, bx, &sp_d).unwrap();
            println!(
                "crit9 {name} N={}: n={n_orig:.4e} n_opt(B)={n_opt_b:.4e} n_opt(D)={n_opt_d:.4e} ratio={:.3} t={:.2?}",
                pts.len(),
                n_opt_b / n_orig,
                t.elapsed()
            );
        }
    }
}
