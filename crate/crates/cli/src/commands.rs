use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use amite::equivtest::{equivalence_test, EquivConfig};
use amite::expansion::{coefficients, error_report, io as expansion_io, ActivationKind, AmiteExpansion};
use amite::ffnn::{load_network, network_to_json, perturb_weights, save_network, Network};
use amite::intervals_tm::Interval;
use amite::rangebound::{bound_campaign, range_bound, write_csv, CampaignSpec, RangeOptions, RangeResult};
use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::args::{
    BoundingArgs, CampaignArgs, Cli, Command, EquivArgs, ErrorsArgs, ExpandArgs, ExpansionArgs, GenNetArgs,
    PerturbArgs, RangeArgs,
};
use crate::manifest::{default_path, Manifest};

/// Invalid combination of otherwise well-formed arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct RunContext {
    timing: bool,
}

/// Runs one subcommand and returns its exit status.
pub fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let ctx = RunContext { timing: !cli.no_timing };
    let start = Instant::now();
    let (mut manifest, out, code) = match &cli.command {
        Command::Expand(a) => expand(a)?,
        Command::Errors(a) => errors(a)?,
        Command::Equiv(a) => equiv(a, &ctx)?,
        Command::Rangebound(a) => rangebound(a, &ctx)?,
        Command::Campaign(a) => campaign(a, &ctx)?,
        Command::GenNet(a) => gen_net(a)?,
        Command::Perturb(a) => perturb(a)?,
    };
    manifest.config("no_timing", cli.no_timing);
    let path = default_path(cli.manifest.as_deref(), out.as_deref());
    let runtime = ctx.timing.then(|| start.elapsed().as_secs_f64());
    manifest.write(path.as_deref(), cli.threads, runtime)?;
    Ok(code)
}

type Outcome = (Manifest, Option<std::path::PathBuf>, u8);

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn build_expansion(a: &ExpansionArgs, m: &mut Manifest) -> Result<AmiteExpansion> {
    if !(a.vmax > 0.0 && a.vmax.is_finite()) {
        return Err(usage(format!("--vmax must be positive, got {}", a.vmax)));
    }
    if a.terms == 0 {
        return Err(usage("--terms must be at least 1"));
    }
    let kind = ActivationKind::from(a.kind);
    m.config("fn", kind.name())
        .config("terms", a.terms)
        .config("vmax", a.vmax)
        .config("digits", a.digits);
    coefficients(kind, a.terms, a.vmax, a.digits).context("computing expansion coefficients")
}

fn expand(a: &ExpandArgs) -> Result<Outcome> {
    let mut m = Manifest::new("expand");
    let e = build_expansion(&a.expansion, &mut m)?;
    let mut w = sink(a.out.as_deref())?;
    w.write_all(expansion_io::to_text(&e).as_bytes())?;
    w.flush()?;
    if let Some(p) = &a.out {
        m.output(p);
    }
    m.summary("coefficients", e.coefficients().len())
        .summary("degree", e.degree())
        .summary("kernel_bound", e.kernel_bound().to_decimal_string());
    Ok((m, a.out.clone(), 0))
}

/// `n` points over `[-half, half]`, mirrored exactly about zero.
fn symmetric_grid(half: f64, n: usize) -> Vec<f64> {
    let d = (n - 1) as f64;
    (0..n).map(|i| half * (2.0 * i as f64 - d) / d).collect()
}

fn errors(a: &ErrorsArgs) -> Result<Outcome> {
    if a.grid < 2 {
        return Err(usage("--grid needs at least 2 points"));
    }
    if !(a.span >= 0.0 && a.span.is_finite()) {
        return Err(usage(format!("--span must be non-negative, got {}", a.span)));
    }
    let mut m = Manifest::new("errors");
    let e = build_expansion(&a.expansion, &mut m)?;
    let eval_digits = a.eval_digits.unwrap_or(a.expansion.digits);
    m.config("grid", a.grid)
        .config("span", a.span)
        .config("eval_digits", eval_digits);
    let grid = symmetric_grid(e.vmax() + a.span, a.grid);
    let r = error_report(&e, &grid, eval_digits).context("evaluating error curves")?;

    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "v,phi,phi_a,E,H,I,|E-H|,|E-I|")?;
    let (mut worst_eh, mut worst_ei) = (0.0f64, 0.0f64);
    for i in 0..grid.len() {
        let (eh, ei) = (r.measured_minus_exact[i].abs(), r.measured_minus_approximate[i].abs());
        if grid[i].abs() <= e.vmax() {
            worst_eh = worst_eh.max(eh);
            worst_ei = worst_ei.max(ei);
        }
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            grid[i], r.phi[i], r.phi_approx[i], r.measured[i], r.exact[i], r.approximate[i], eh, ei
        )?;
    }
    w.flush()?;
    if let Some(p) = &a.out {
        m.output(p);
    }
    m.summary("rows", grid.len())
        .summary("max_abs_E_minus_H_in_domain", worst_eh)
        .summary("max_abs_E_minus_I_in_domain", worst_ei);
    Ok((m, a.out.clone(), 0))
}

fn load(path: &Path) -> Result<Network> {
    load_network(path).with_context(|| format!("loading network {}", path.display()))
}

fn domain_for(boxes: &[Interval], inputs: usize, default: Interval) -> Result<Vec<Interval>> {
    match boxes.len() {
        0 => Ok(vec![default; inputs]),
        n if n == inputs => Ok(boxes.to_vec()),
        n => Err(usage(format!(
            "network has {inputs} inputs but {n} --box intervals were given"
        ))),
    }
}

fn interval_json(i: &Interval) -> Value {
    json!([i.lo, i.hi])
}

fn equiv(a: &EquivArgs, ctx: &RunContext) -> Result<Outcome> {
    let original = load(&a.original)?;
    let under_test = load(&a.under_test)?;
    if under_test.num_inputs() != original.num_inputs() || under_test.num_outputs() != original.num_outputs() {
        return Err(usage("original and network under test differ in input or output count"));
    }
    let mut config = EquivConfig::new(original.num_inputs());
    config.domain = domain_for(&a.boxes, original.num_inputs(), Interval::new(-1.0, 1.0))?;
    config.snr_db = a.snr;
    config.seed = a.seed;
    config.samples = a.samples;
    config.terms = a.terms;
    config.vmax = a.vmax;
    config.digits = a.digits;
    config.threshold = a.threshold;

    let verdict =
        equivalence_test(&original, |x| under_test.forward(x), &config).context("running equivalence test")?;
    let replicated: Value = serde_json::from_str(&network_to_json(&verdict.replicated))?;
    let report = json!({
        "verdict": verdict.outcome.name(),
        "equivalent": verdict.equivalent,
        "eta": verdict.eta,
        "threshold": verdict.threshold,
        "eta_per_output": verdict.eta_per_output,
        "vmax": verdict.vmax,
        "snr_db": a.snr,
        "seed": a.seed,
        "fit_seed": a.seed.wrapping_add(2),
        "samples": a.samples,
        "fit_epochs": verdict.fit_loss_trace.len().saturating_sub(1),
        "fit_loss_trace": verdict.fit_loss_trace,
        "runtime_s": if ctx.timing { verdict.runtime_s } else { 0.0 },
        "replicated": replicated,
    });
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    w.flush()?;
    eprintln!(
        "{}: eta = {:.6e} (threshold {})",
        verdict.outcome.name(),
        verdict.eta,
        verdict.threshold
    );

    let mut m = Manifest::new("equiv");
    m.config("original", a.original.display().to_string())
        .config("under_test", a.under_test.display().to_string())
        .config("snr_db", a.snr)
        .config("seed", a.seed)
        .config("threshold", a.threshold)
        .config("terms", a.terms)
        .config("vmax", verdict.vmax)
        .config("digits", a.digits)
        .config("samples", a.samples)
        .config("eps_log", config.eps_log)
        .config("box", config.domain.iter().map(interval_json).collect::<Vec<_>>());
    if let Some(p) = &a.out {
        m.output(p);
    }
    m.summary("verdict", verdict.outcome.name()).summary("eta", verdict.eta);
    Ok((m, a.out.clone(), verdict.outcome.exit_code() as u8))
}

fn range_options(net: &Network, b: &BoundingArgs) -> Result<RangeOptions> {
    if !(b.safety > 1.0 && b.safety.is_finite()) {
        return Err(usage(format!("--safety must exceed 1, got {}", b.safety)));
    }
    let mut opts = RangeOptions::for_network(net);
    if let Some(t) = b.terms {
        opts.terms = t;
    }
    if let Some(d) = b.digits {
        opts.digits = d;
    }
    opts.s_init = b.safety;
    opts.order_cap = b.order_cap;
    opts.numeric_samples = b.samples;
    opts.seed = b.seed;
    Ok(opts)
}

fn row_summary(m: &mut Manifest, rows: &[RangeResult]) {
    m.summary("rows", rows.len())
        .summary("diverged", rows.iter().filter(|r| r.diverged).count())
        .summary("all_sound", rows.iter().all(RangeResult::is_sound));
}

fn rangebound(a: &RangeArgs, ctx: &RunContext) -> Result<Outcome> {
    let net = load(&a.network)?;
    let domain = match a.width {
        Some(w) if w > 0.0 && w.is_finite() => vec![Interval::symmetric(w / 2.0); net.num_inputs()],
        Some(w) => return Err(usage(format!("--width must be positive, got {w}"))),
        None => domain_for(&a.boxes, net.num_inputs(), Interval::ZERO)?,
    };
    let opts = range_options(&net, &a.bounding)?;
    let mut rows = Vec::new();
    for method in a.method.methods() {
        rows.extend(range_bound(&net, &domain, method, &opts, &a.id).with_context(|| format!("{method} bound"))?);
    }
    let mut w = sink(a.out.as_deref())?;
    write_csv(&rows, ctx.timing, &mut w)?;
    w.flush()?;

    let mut m = Manifest::new("rangebound");
    m.config("network", a.network.display().to_string())
        .config("box", domain.iter().map(interval_json).collect::<Vec<_>>())
        .config(
            "methods",
            a.method.methods().iter().map(|x| x.name()).collect::<Vec<_>>(),
        )
        .config("terms", opts.terms)
        .config("digits", opts.digits)
        .config("safety", opts.s_init)
        .config("order_cap", opts.order_cap)
        .config("samples", opts.numeric_samples)
        .config("seed", opts.seed);
    if let Some(p) = &a.out {
        m.output(p);
    }
    row_summary(&mut m, &rows);
    Ok((m, a.out.clone(), 0))
}

fn campaign(a: &CampaignArgs, ctx: &RunContext) -> Result<Outcome> {
    if a.widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(usage("--widths must all be positive"));
    }
    if a.inputs == 0 || a.nets == 0 || a.layers.contains(&0) || a.hidden.contains(&0) {
        return Err(usage("--inputs, --nets, --layers and --hidden must be positive"));
    }
    let spec = CampaignSpec {
        inputs: a.inputs,
        hidden_layers: a.layers.clone(),
        hidden: a.hidden.clone(),
        nets_per_architecture: a.nets,
        activation: a.activation.into(),
        widths: a.widths.clone(),
        methods: a.method.methods(),
        terms_digits: a.terms.zip(a.digits),
        seed: a.seed,
    };
    let rows = bound_campaign(&spec).context("running campaign")?;
    let mut w = sink(a.out.as_deref())?;
    write_csv(&rows, ctx.timing, &mut w)?;
    w.flush()?;

    let mut m = Manifest::new("campaign");
    m.config("inputs", a.inputs)
        .config("layers", a.layers.clone())
        .config("hidden", a.hidden.clone())
        .config("nets", a.nets)
        .config("activation", spec.activation.name())
        .config("widths", a.widths.clone())
        .config("methods", spec.methods.iter().map(|x| x.name()).collect::<Vec<_>>())
        .config("terms", a.terms)
        .config("digits", a.digits)
        .config("seed", a.seed);
    if let Some(p) = &a.out {
        m.output(p);
    }
    row_summary(&mut m, &rows);
    Ok((m, a.out.clone(), 0))
}

fn gen_net(a: &GenNetArgs) -> Result<Outcome> {
    if a.inputs == 0 || a.outputs == 0 || a.hidden.contains(&0) {
        return Err(usage("--inputs, --outputs and --hidden must be positive"));
    }
    let net = Network::random(a.inputs, &a.hidden, a.outputs, a.activation.into(), a.seed)?;
    save_network(&net, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = Manifest::new("gen-net");
    m.config("inputs", a.inputs)
        .config("hidden", a.hidden.clone())
        .config("outputs", a.outputs)
        .config("activation", ActivationKind::from(a.activation).name())
        .config("seed", a.seed)
        .output(&a.out);
    Ok((m, Some(a.out.clone()), 0))
}

fn perturb(a: &PerturbArgs) -> Result<Outcome> {
    if !(a.rel >= 0.0 && a.rel.is_finite()) {
        return Err(usage(format!("--rel must be non-negative, got {}", a.rel)));
    }
    let net = load(&a.network)?;
    let out = perturb_weights(&net, a.rel, a.seed)?;
    save_network(&out, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = Manifest::new("perturb");
    m.config("network", a.network.display().to_string())
        .config("rel", a.rel)
        .config("seed", a.seed)
        .output(&a.out);
    Ok((m, Some(a.out.clone()), 0))
}
