use ris_core::admm_sumrate::{power_split, run_alg2};
use ris_core::admm_wsinr::run_alg1;
use ris_core::baselines::{dft_phase_ris, fixed_ris_wsinr, zf_no_ris, Scheme};
use ris_core::channel::{make_channel_set, stream_rng, tags};
use ris_core::config::ScenarioConfig;
use ris_core::system_model::{evaluate, mrt_precoders};
use ris_core::User;

#[test]
fn alg1_at_lambda_zero_is_certified() {
    let cfg = ScenarioConfig::wsinr_small();
    for trial in 0..5 {
        let cs = make_channel_set(&cfg, trial).unwrap();
        let mut rng = stream_rng(cfg.seed, trial, tags::ADMM_INIT);
        let out = run_alg1(&cs, 0.0, &cfg.admm, &mut rng).unwrap();
        assert!(out.state.converged);
        assert!(out.x.is_feasible());
        assert!(out.kkt.stationarity <= 1e-4, "{:?}", out.kkt);
        assert!(out.kkt.constraint_residual <= 1e-6);
    }
}

#[test]
fn optimized_surface_beats_fixed_surfaces_on_weighted_sinr() {
    let cfg = ScenarioConfig::wsinr_small();
    let half = 0.5f64.sqrt();
    let cs = make_channel_set(&cfg, 3).unwrap();
    let mut rng = stream_rng(cfg.seed, 3, tags::ADMM_INIT);
    let out = run_alg1(&cs, 0.5, &cfg.admm, &mut rng).unwrap();
    let prec = mrt_precoders(&cs, &out.x, half, half, cfg.p_t).unwrap();
    let opt = evaluate(&cs, &prec, &out.x, cfg.sigma2, cfg.sigma2).unwrap().weighted_sinr(0.5);
    let dft = dft_phase_ris(cfg.n, cfg.m).unwrap();
    let fixed = fixed_ris_wsinr(&cs, &dft, 0.5, cfg.sigma2, cfg.sigma2, 1e-4, Scheme::RisDft).unwrap();
    let zf = zf_no_ris(&cs, cfg.p_t, cfg.sigma2, cfg.sigma2).unwrap();
    assert!(opt > fixed.qos.weighted_sinr(0.5));
    assert!(opt > zf.qos.weighted_sinr(0.5));
}

#[test]
fn alg2_reports_the_split_it_used() {
    let cfg = ScenarioConfig::sumrate_paper();
    for trial in 0..3 {
        let cs = make_channel_set(&cfg, trial).unwrap();
        let mut rng = stream_rng(cfg.seed, trial, tags::ADMM_INIT);
        let out = run_alg2(&cs, cfg.p_t, cfg.sigma2, cfg.sigma2, &cfg.admm_sumrate, &mut rng).unwrap();
        assert!(out.x.is_feasible());
        let split = power_split(&cs, &out.x, cfg.p_t, cfg.sigma2, cfg.sigma2).unwrap();
        assert_eq!(split, out.split);
        let total = out.precoders.total_power();
        assert!((total - cfg.p_t).abs() <= 1e-9 * cfg.p_t, "power {total}");
        let qos = evaluate(&cs, &out.precoders, &out.x, cfg.sigma2, cfg.sigma2).unwrap();
        assert_eq!(qos.sum_rate, out.qos.sum_rate);
        if out.single_user() == Some(User::One) {
            assert_eq!(qos.sinr2, 0.0);
        }
    }
}
