use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use edopt::ascent::{
    lambda0, penalty_value, round_start, steepest_ascent, Selection, StartKind, StartPoint,
};
use edopt::kinship::build_numerator;
use edopt::oracle::{branch_and_bound_ed, enumerate_ed};
use edopt::pedigree::{generate_pedigree, load_pedigree, Pedigree};
use edopt::problem::{
    check_assumption1, load_bounds, load_ebv, preprocess, EdInstance, PreprocessedInstance,
};
use edopt::relax::sdp::{solve_sdp, x_from_y, SdpSolution};
use edopt::relax::{build_socp, solve_lp_by_sorting, solve_socp, RelaxationResult};
use edopt::rounding::{estimate_expectation, repair_to_selection, round_once};
use edopt::Error;

use crate::config;
use crate::report::*;
use crate::{BoundsArgs, CliError, GenArgs, InstanceArgs, KinshipArgs, Method, OracleArgs, SolveArgs};

struct Loaded {
    ped: Pedigree,
    inst: Arc<EdInstance>,
}

fn load_instance(args: &InstanceArgs) -> Result<Loaded, CliError> {
    let cfg = match &args.config {
        Some(path) => config::load(path).map_err(|e| CliError::bad_input(format!("config: {e}")))?,
        None => config::FileConfig::default(),
    };
    let ped_path = args
        .pedigree
        .clone()
        .or(cfg.pedigree)
        .ok_or_else(|| CliError::bad_input("--pedigree is required (flag or config)"))?;
    let ebv_path = args
        .ebv
        .clone()
        .or(cfg.ebv)
        .ok_or_else(|| CliError::bad_input("--ebv is required (flag or config)"))?;
    let bounds_path = args.bounds.clone().or(cfg.bounds);
    let n = args
        .n
        .or(cfg.n)
        .ok_or_else(|| CliError::bad_input("--n is required (flag or config)"))?;
    let theta2 = args
        .theta2
        .or(cfg.theta2)
        .ok_or_else(|| CliError::bad_input("--theta2 is required (flag or config)"))?;

    let ped = load_pedigree(&ped_path)?;
    let g = load_ebv(&ebv_path, &ped)?;
    let (lower, upper) = match bounds_path {
        Some(p) => load_bounds(p, &ped)?,
        None => (vec![0.0; ped.len()], vec![1.0; ped.len()]),
    };
    let kin = Arc::new(build_numerator(&ped)?);
    let inst = Arc::new(EdInstance::with_bounds(kin, g, theta2, n, lower, upper)?);
    Ok(Loaded { ped, inst })
}

fn instance_summary(pp: &PreprocessedInstance, assumption1: Option<bool>) -> InstanceSummary {
    InstanceSummary {
        z: pp.z(),
        n: pp.inst.n_select,
        theta2: pp.inst.theta2,
        v_size: pp.n_free(),
        p: pp.p,
        assumption1,
    }
}

fn resolve_lambda(
    inst: &Arc<EdInstance>,
    explicit: Option<f64>,
    mult: f64,
) -> Result<f64, CliError> {
    if let Some(l) = explicit {
        if l < 0.0 {
            return Err(CliError::bad_input("--lambda must be nonnegative"));
        }
        return Ok(l);
    }
    match lambda0(inst) {
        Ok(l0) => Ok(mult * l0),
        Err(e) => Err(CliError::bad_input(format!(
            "{e}; pass an explicit --lambda"
        ))),
    }
}

fn relaxation_block(
    pp: &PreprocessedInstance,
    r: &RelaxationResult,
    lambda: f64,
    no_meta: bool,
) -> MethodBlock {
    let (gtx, xax) = pp.inst.objective_of(&r.x);
    let x0 = round_start(pp, &StartPoint::from_relaxation(r), lambda);
    MethodBlock {
        kind: format!("CR({})", r.kind),
        gtx,
        xax,
        iter: 0,
        f_lambda: penalty_value(&pp.inst, &r.x, lambda),
        f_lambda_x0: Some(x0.penalty_value),
        status: format!("{:?}", r.status),
        time_s: if no_meta { None } else { Some(r.wall_time) },
    }
}

fn sdp_block(
    pp: &PreprocessedInstance,
    sol: &SdpSolution,
    lambda: f64,
    no_meta: bool,
) -> MethodBlock {
    let x = x_from_y(pp, &sol.y_v);
    let (gtx, xax) = pp.inst.objective_of(&x);
    let x0 = round_start(pp, &StartPoint { kind: StartKind::Sdp, x: x.clone() }, lambda);
    MethodBlock {
        kind: "CR(SDP)".to_string(),
        gtx,
        xax,
        iter: 0,
        f_lambda: penalty_value(&pp.inst, &x, lambda),
        f_lambda_x0: Some(x0.penalty_value),
        status: format!("{:?}", sol.status),
        time_s: if no_meta { None } else { Some(sol.wall_time) },
    }
}

fn ascent_block(
    pp: &PreprocessedInstance,
    start: &StartPoint,
    lambda: f64,
    max_iter: Option<usize>,
    no_meta: bool,
) -> (MethodBlock, Selection) {
    let label = match start.kind {
        StartKind::Lp => "SA(LP)",
        StartKind::Socp => "SA(SOCP)",
        StartKind::Sdp => "SA(SDP)",
        StartKind::Rounded => "SA(ROUND)",
        StartKind::Custom => "SA(CUSTOM)",
    };
    let t0 = Instant::now();
    let (sel, trace) = steepest_ascent(pp, start, lambda, max_iter);
    let dt = t0.elapsed().as_secs_f64();
    let block = MethodBlock {
        kind: label.to_string(),
        gtx: sel.gx,
        xax: sel.xax,
        iter: trace.iterations as u64,
        f_lambda: sel.penalty_value,
        f_lambda_x0: None,
        status: if trace.capped {
            "IterationCap".to_string()
        } else {
            "Converged".to_string()
        },
        time_s: if no_meta { None } else { Some(dt) },
    };
    (block, sel)
}

fn print_solve_report(report: &RunReport) {
    let i = &report.instance;
    println!(
        "instance: Z={} N={} theta2={} |V|={} p={} assumption1={}",
        i.z,
        i.n,
        i.theta2,
        i.v_size,
        i.p,
        i.assumption1.map_or("unchecked".into(), |b| b.to_string()),
    );
    if let Some(l) = report.lambda {
        println!("lambda: {l:.6}");
    }
    if !report.methods.is_empty() {
        println!(
            "{:<10} {:>12} {:>10} {:>6} {:>14} {:>14} {:>12} {:>9}",
            "method", "gTx", "xAx", "iter", "f_lambda", "f_lambda_x0", "status", "time_s"
        );
        for m in &report.methods {
            println!(
                "{:<10} {:>12.6} {:>10.6} {:>6} {:>14.6} {:>14} {:>12} {:>9}",
                m.kind,
                m.gtx,
                m.xax,
                m.iter,
                m.f_lambda,
                m.f_lambda_x0
                    .map_or("-".to_string(), |v| format!("{v:.6}")),
                m.status,
                m.time_s.map_or("-".to_string(), |v| format!("{v:.3}")),
            );
        }
    }
    if let Some(b) = &report.bounds {
        println!(
            "bounds: lower={:.6} expected={:.6} upper={:.6} opt_sdp={:.6} alpha={:.5} samples={}",
            b.lower, b.expected, b.upper, b.opt_sdp, b.alpha, b.samples
        );
    }
    if let Some(s) = &report.selection {
        println!(
            "selection: ids={:?} gTx={:.6} xAx={:.6} f_lambda={:.6} feasible={}",
            s.chosen_ids, s.gtx, s.xax, s.f_lambda, s.feasible
        );
    }
}

/// The fully fixed case: preprocessing determined every contribution.
fn degenerate_report(
    loaded: &Loaded,
    x: Vec<f64>,
    lambda: Option<f64>,
    no_meta: bool,
) -> RunReport {
    let inst = &loaded.inst;
    let (gtx, xax) = inst.objective_of(&x);
    let lam = lambda.unwrap_or(0.0);
    let chosen_ids: Vec<u32> = x
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > 0.0)
        .map(|(i, _)| loaded.ped.ids()[i])
        .collect();
    RunReport {
        meta: if no_meta { None } else { Some(Meta::now()) },
        instance: InstanceSummary {
            z: inst.z(),
            n: inst.n_select,
            theta2: inst.theta2,
            v_size: 0,
            p: chosen_ids.len(),
            assumption1: None,
        },
        lambda,
        methods: Vec::new(),
        bounds: None,
        selection: Some(SelectionBlock {
            chosen_ids,
            gtx,
            xax,
            f_lambda: gtx - lam * (xax - inst.theta2).max(0.0),
            feasible: xax <= inst.theta2,
        }),
    }
}

pub fn run_solve(args: SolveArgs) -> Result<u8, CliError> {
    let loaded = load_instance(&args.instance)?;
    let pp = match preprocess(&loaded.inst) {
        Ok(pp) => pp,
        Err(Error::Degenerate { x }) => {
            let lambda = resolve_lambda(&loaded.inst, args.lambda, args.lambda_mult).ok();
            let report = degenerate_report(&loaded, x, lambda, args.no_meta);
            print_solve_report(&report);
            if let Some(path) = &args.json {
                write_json(&report, path).map_err(|e| CliError::bad_input(e.to_string()))?;
            }
            return Ok(0);
        }
        Err(e) => return Err(e.into()),
    };
    let a1 = check_assumption1(&pp).ok().map(|a| a.holds);
    let lambda = resolve_lambda(&loaded.inst, args.lambda, args.lambda_mult)?;

    let mut methods = Vec::new();
    let mut bounds = None;
    let mut selection: Option<Selection> = None;

    match args.method {
        Method::Lp | Method::LpSa => {
            let r = solve_lp_by_sorting(&pp);
            methods.push(relaxation_block(&pp, &r, lambda, args.no_meta));
            if args.method == Method::LpSa {
                let (block, sel) = ascent_block(
                    &pp,
                    &StartPoint::from_relaxation(&r),
                    lambda,
                    args.max_iter,
                    args.no_meta,
                );
                methods.push(block);
                selection = Some(sel);
            }
        }
        Method::Socp | Method::SocpSa => {
            let model = build_socp(&pp);
            let r = solve_socp(&pp, &model, args.tol)?;
            methods.push(relaxation_block(&pp, &r, lambda, args.no_meta));
            if args.method == Method::SocpSa {
                let (block, sel) = ascent_block(
                    &pp,
                    &StartPoint::from_relaxation(&r),
                    lambda,
                    args.max_iter,
                    args.no_meta,
                );
                methods.push(block);
                selection = Some(sel);
            }
        }
        Method::Sdp | Method::SdpSa | Method::RoundSa => {
            let sol = solve_sdp(&pp, args.tol)?;
            methods.push(sdp_block(&pp, &sol, lambda, args.no_meta));
            bounds = Some(estimate_expectation(&sol, &pp, args.samples, args.seed));
            let start = match args.method {
                Method::SdpSa => Some(StartPoint::from_sdp(&sol, &pp)),
                Method::RoundSa => {
                    let y = round_once(&sol, args.seed);
                    let seed_sel = repair_to_selection(&y, &pp, lambda);
                    Some(StartPoint::from_selection(&seed_sel))
                }
                _ => None,
            };
            if let Some(start) = start {
                let (block, sel) =
                    ascent_block(&pp, &start, lambda, args.max_iter, args.no_meta);
                methods.push(block);
                selection = Some(sel);
            }
        }
    }

    let report = RunReport {
        meta: if args.no_meta { None } else { Some(Meta::now()) },
        instance: instance_summary(&pp, a1),
        lambda: Some(lambda),
        methods,
        bounds,
        selection: selection
            .as_ref()
            .map(|s| SelectionBlock::from_selection(s, &loaded.ped)),
    };
    print_solve_report(&report);
    if let Some(path) = &args.json {
        write_json(&report, path).map_err(|e| CliError::bad_input(e.to_string()))?;
    }
    Ok(0)
}

pub fn run_oracle(args: OracleArgs) -> Result<u8, CliError> {
    let loaded = load_instance(&args.instance)?;
    let meta = if args.no_meta { None } else { Some(Meta::now()) };

    let (report, infeasible) = match preprocess(&loaded.inst) {
        Ok(pp) => {
            let a1 = check_assumption1(&pp).ok().map(|a| a.holds);
            if args.bnb {
                let out = branch_and_bound_ed(
                    &pp,
                    args.gap,
                    std::time::Duration::from_secs_f64(args.time_cap),
                )?;
                let r = &out.result;
                let infeasible = !r.opt.is_finite();
                (
                    OracleReport {
                        meta,
                        instance: instance_summary(&pp, a1),
                        method: "bnb".to_string(),
                        opt: r.opt.is_finite().then_some(r.opt),
                        argmax_ids: r.argmax.iter().map(|&i| loaded.ped.ids()[i]).collect(),
                        enumerated: r.enumerated,
                        feasible_count: r.feasible_count,
                        upper_bound: Some(out.upper_bound),
                        rel_gap: out.rel_gap.is_finite().then_some(out.rel_gap),
                        timed_out: Some(out.timed_out),
                    },
                    infeasible,
                )
            } else {
                let r = enumerate_ed(&pp)?;
                let infeasible = !r.opt.is_finite();
                (
                    OracleReport {
                        meta,
                        instance: instance_summary(&pp, a1),
                        method: "enumerate".to_string(),
                        opt: r.opt.is_finite().then_some(r.opt),
                        argmax_ids: r.argmax.iter().map(|&i| loaded.ped.ids()[i]).collect(),
                        enumerated: r.enumerated,
                        feasible_count: r.feasible_count,
                        upper_bound: None,
                        rel_gap: None,
                        timed_out: None,
                    },
                    infeasible,
                )
            }
        }
        Err(Error::Degenerate { x }) => {
            let inst = &loaded.inst;
            let (gx, xax) = inst.objective_of(&x);
            let feasible = xax <= inst.theta2;
            let ids: Vec<u32> = x
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v > 0.0)
                .map(|(i, _)| loaded.ped.ids()[i])
                .collect();
            (
                OracleReport {
                    meta,
                    instance: InstanceSummary {
                        z: inst.z(),
                        n: inst.n_select,
                        theta2: inst.theta2,
                        v_size: 0,
                        p: ids.len(),
                        assumption1: None,
                    },
                    method: "fixed".to_string(),
                    opt: feasible.then_some(gx),
                    argmax_ids: if feasible { ids } else { Vec::new() },
                    enumerated: 1,
                    feasible_count: feasible as u64,
                    upper_bound: None,
                    rel_gap: None,
                    timed_out: None,
                },
                !feasible,
            )
        }
        Err(e) => return Err(e.into()),
    };

    match &report.opt {
        Some(opt) => println!(
            "opt={:.9} argmax_ids={:?} enumerated={} feasible={}",
            opt, report.argmax_ids, report.enumerated, report.feasible_count
        ),
        None => println!(
            "infeasible: no selection satisfies the cap (enumerated {})",
            report.enumerated
        ),
    }
    if let (Some(ub), Some(gap)) = (report.upper_bound, report.rel_gap) {
        println!("upper_bound={ub:.9} rel_gap={gap:.3e}");
    }
    if let Some(path) = &args.json {
        write_json(&report, path).map_err(|e| CliError::bad_input(e.to_string()))?;
    }
    Ok(if infeasible { 2 } else { 0 })
}

pub fn run_bounds(args: BoundsArgs) -> Result<u8, CliError> {
    let loaded = load_instance(&args.instance)?;
    let pp = match preprocess(&loaded.inst) {
        Ok(pp) => pp,
        Err(Error::Degenerate { x }) => {
            let report = degenerate_report(&loaded, x, None, args.no_meta);
            print_solve_report(&report);
            if let Some(path) = &args.json {
                write_json(&report, path).map_err(|e| CliError::bad_input(e.to_string()))?;
            }
            return Ok(0);
        }
        Err(e) => return Err(e.into()),
    };
    let a1 = check_assumption1(&pp).ok().map(|a| a.holds);
    let sol = solve_sdp(&pp, args.tol)?;
    let bounds = estimate_expectation(&sol, &pp, args.samples, args.seed);

    let report = RunReport {
        meta: if args.no_meta { None } else { Some(Meta::now()) },
        instance: instance_summary(&pp, a1),
        lambda: None,
        methods: vec![sdp_block(&pp, &sol, 0.0, args.no_meta)],
        bounds: Some(bounds),
        selection: None,
    };
    print_solve_report(&report);
    if let Some(path) = &args.json {
        write_json(&report, path).map_err(|e| CliError::bad_input(e.to_string()))?;
    }
    Ok(0)
}

pub fn run_gen(args: GenArgs) -> Result<u8, CliError> {
    if args.founders < 2 {
        return Err(CliError::bad_input("--founders must be at least 2"));
    }
    if args.offspring < 1 {
        return Err(CliError::bad_input("--offspring must be at least 1"));
    }
    let ped = generate_pedigree(args.founders, args.generations, args.offspring, args.seed);
    std::fs::write(&args.out_pedigree, ped.to_csv())
        .map_err(|e| CliError::bad_input(format!("{}: {e}", args.out_pedigree.display())))?;

    // EBVs: standard normal, one stream per run seed
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x9e3779b97f4a7c15);
    let normal = StandardNormal;
    let mut ebv = String::from("id,ebv\n");
    for &id in ped.ids() {
        let v: f64 = normal.sample(&mut rng);
        ebv.push_str(&format!("{id},{v}\n"));
    }
    std::fs::write(&args.out_ebv, ebv)
        .map_err(|e| CliError::bad_input(format!("{}: {e}", args.out_ebv.display())))?;

    println!(
        "generated Z={} individuals ({} founders) -> {} / {}",
        ped.len(),
        ped.founder_count(),
        args.out_pedigree.display(),
        args.out_ebv.display()
    );
    Ok(0)
}

pub fn run_kinship(args: KinshipArgs) -> Result<u8, CliError> {
    let ped = load_pedigree(&args.pedigree)?;
    let kin = build_numerator(&ped)?;
    let z = kin.z();

    // residual check only at desk scale: it is O(Z^2 nnz)
    let btb_residual = (z <= 1500).then(|| {
        let mut worst = 0.0f64;
        let mut col = vec![0.0; z];
        let mut bx = vec![0.0; z];
        let mut btbx = vec![0.0; z];
        for j in 0..z {
            kin.a_column(j, &mut col);
            kin.b_factor().matvec(&col, &mut bx);
            kin.b_factor().matvec_transpose(&bx, &mut btbx);
            for (i, v) in btbx.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - want).abs());
            }
        }
        worst
    });

    let report = KinshipReport {
        meta: if args.no_meta { None } else { Some(Meta::now()) },
        z,
        founders: ped.founder_count(),
        ainv_nnz: kin.ainv().nnz(),
        b_nnz: kin.b_factor().nnz(),
        diag_max: kin.diag().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mendelian_min: kin
            .mendelian()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        btb_residual,
    };
    println!(
        "Z={} founders={} ainv_nnz={} b_nnz={} diag_max={:.6} mendelian_min={:.6} btb_residual={}",
        report.z,
        report.founders,
        report.ainv_nnz,
        report.b_nnz,
        report.diag_max,
        report.mendelian_min,
        report
            .btb_residual
            .map_or("skipped".to_string(), |v| format!("{v:.3e}")),
    );
    if let Some(path) = &args.json {
        write_json(&report, path).map_err(|e| CliError::bad_input(e.to_string()))?;
    }
    Ok(0)
}
